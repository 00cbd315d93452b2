import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import propagator as pr
from displab.exponents import ProblemParams
from displab.norms import NormSpec, mixed_spacetime_norm
from displab.quadrature import panels_for_phase, time_mesh
from displab.radial_transform import Domain, RadialProfile, hankel_inverse

P = ProblemParams(2, "3/2")


def smooth_bump(x, a, b):
    """C-infinity bump supported in (a, b)."""
    x = np.asarray(x, dtype=float)
    inside = (x > a) & (x < b)
    out = np.zeros_like(x)
    y = (x[inside] - a) / (b - a)
    out[inside] = np.exp(-1.0 / (y * (1 - y)) + 4.0)
    return out


@pytest.fixture(scope="module")
def f2():
    return Domain(2).profile(lambda r: np.exp(-r ** 2 / 2) * (1 + 0.3 * r ** 2))


class TestEvolveFree:
    def test_identity_at_zero(self, f2):
        assert np.allclose(pr.evolve_free(f2, 0.0, P).values, f2.values, atol=1e-12)

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_isometry(self, t):
        f = Domain(2).profile(lambda r: np.exp(-r ** 2 / 2))
        assert abs(pr.evolve_free(f, t, P).l2_norm() / f.l2_norm() - 1) <= 1e-5

    def test_group_law(self, f2):
        a = pr.evolve_free(pr.evolve_free(f2, 0.7, P), 1.3, P)
        b = pr.evolve_free(f2, 2.0, P)
        assert (a - b).l2_norm() / f2.l2_norm() <= 1e-5

    def test_stack_matches_single(self, f2):
        ts = np.array([0.0, 0.5, 2.0])
        st_ = pr.evolve_stack(f2, ts, P)
        for i, t in enumerate(ts):
            assert np.allclose(st_[i], pr.evolve_free(f2, t, P).values, atol=1e-12)

    def test_phase_undersampling(self, f2):
        with pytest.raises(pr.ResolutionError, match="grid"):
            pr.evolve_free(f2, 1e4, P)

    def test_schrodinger_gaussian(self):
        # alpha = 2: exp(i t Laplacian-symbol) on exp(-r^2/2) in closed form
        P2 = ProblemParams(2, 2)
        f = Domain(2).profile(lambda r: np.exp(-r ** 2 / 2))
        t = 0.8
        # symbol exp(i t rho^2): u = (1 - 2 i t)^(-1) exp(-r^2 / (2 (1 - 2 i t)))
        z = 1 - 2j * t
        exact = np.exp(-f.r ** 2 / (2 * z)) / z
        assert np.max(np.abs(pr.evolve_free(f, t, P2).values - exact)) < 1e-8

    def test_scaling_covariance(self, f2):
        eps, t = 1.3, 0.6
        lhs = pr.evolve_free(pr.scale_profile(f2, eps), t, P)
        rhs = pr.scale_profile(pr.evolve_free(f2, eps ** 1.5 * t, P), eps)
        assert np.max(np.abs(lhs.values - rhs.values)) < 1e-8


class TestCutoff:
    def test_partition_of_unity(self):
        rho = np.geomspace(2.0 ** -4, 2.0 ** 4, 4001)
        assert np.max(np.abs(pr.DEFAULT_CUTOFF.partition_sum(rho, 6) - 1)) <= 1e-12

    @given(st.floats(1e-3, 1e3))
    def test_phi_range_and_support(self, rho):
        v = float(pr.DEFAULT_CUTOFF.phi(rho))
        assert 0.0 <= v <= 1.0
        if rho <= 0.5 or rho >= 2.0:
            assert v == 0.0

    def test_bad_support(self):
        with pytest.raises(ValueError):
            pr.CutoffSpec(support=(0.25, 4.0))

    def test_kernel_weight(self):
        rho = np.linspace(0.6, 1.9, 7)
        c = pr.DEFAULT_CUTOFF
        assert np.allclose(c.kernel_weight(rho), rho * c.phi(rho))


class TestLittlewoodPaley:
    def test_reconstruction(self):
        # spectrum compactly supported in (2^-4, 2^4); pieces summed on the spectral side
        dom = Domain(2, 8.0, 128.0)
        g = dom.spectrum(lambda p: smooth_bump(np.log2(p), -4.0, 4.0))
        total = sum(pr.lp_project(g, k).values for k in range(-6, 7))
        assert np.max(np.abs(total - g.values)) <= 1e-10 * np.max(np.abs(g.values))

    def test_disjoint_support(self):
        dom = Domain(2, 64.0, 12.0)
        f = hankel_inverse(dom.spectrum(lambda p: smooth_bump(p, 4.0, 8.0)), dom.r_grid)
        assert pr.lp_project(f, 0).l2_norm() <= 1e-8 * f.l2_norm()

    def test_commutes_with_evolution(self):
        dom = Domain(2, 192.0, 8.0)
        f = hankel_inverse(dom.spectrum(lambda p: p ** 6 * np.exp(-p ** 2 / 2)), dom.r_grid)
        a = pr.lp_project(pr.evolve_free(f, 1.0, P), 0)
        b = pr.evolve_free(pr.lp_project(f, 0), 1.0, P)
        assert (a - b).l2_norm() / f.l2_norm() <= 1e-8

    def test_out_of_band(self, f2):
        with pytest.raises(ValueError, match="resolvable"):
            pr.lp_project(f2, 10)


class TestDuhamel:
    @pytest.fixture(scope="class")
    @classmethod
    def field(cls):
        g = Domain(2).profile(lambda r: np.exp(-r ** 2 / 2))
        mesh = time_mesh(0, 2, panels_for_phase(0, 2, 12 ** 1.5, 16), 16)
        return g, pr.free_field(P, g, mesh)

    def test_zero_forcing(self, dom2):
        F = lambda s: dom2.profile(lambda r: 0 * r)
        assert pr.duhamel_integral(F, 1.0, P).l2_norm() == 0

    def test_conjugated_forcing_callable(self, field):
        g, _ = field
        D = pr.duhamel_integral(lambda s: pr.evolve_free(g, s, P), 1.5, P)
        ex = pr.evolve_free(g, 1.5, P) * (-1.5j)
        assert (D - ex).l2_norm() / ex.l2_norm() <= 1e-4

    def test_conjugated_forcing_field(self, field):
        g, F = field
        ex = pr.evolve_free(g, 1.5, P) * (-1.5j)
        assert (pr.duhamel_integral(F, 1.5) - ex).l2_norm() / ex.l2_norm() <= 1e-4
        DF = pr.duhamel_field(F)
        i = 20
        ex2 = pr.evolve_free(g, F.times[i], P) * (-1j * F.times[i])
        assert (DF.frame(i) - ex2).l2_norm() / ex2.l2_norm() <= 1e-4

    def test_linear_small_time(self, field):
        g, F = field
        ts = np.array([1e-3, 2e-3, 4e-3])
        norms = [pr.duhamel_integral(F, t).l2_norm() for t in ts]
        slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
        assert abs(slope - 1) < 1e-3

    def test_outside_span(self, field):
        with pytest.raises(ValueError, match="outside"):
            pr.duhamel_integral(field[1], 3.0)

    def test_pde_residual(self, f2, dom2):
        mesh = time_mesh(0, 1.2, panels_for_phase(0, 1.2, 60, 16), 16)
        F = pr.SpaceTimeField.on_mesh(P, mesh, dom2.r_grid,
                                      lambda r, s: (1 + r ** 2) * np.exp(-r ** 2) * np.cos(3 * s))
        Fb = lambda s: RadialProfile(2, dom2.r_grid, F.at(s)[0])
        u = lambda t: pr.evolve_free(f2, t, P) + pr.duhamel_integral(F, t)
        assert pr.pde_residual(u, Fb, 0.8, 1.5) <= 1e-3

    def test_coarse_mesh_rejected(self, dom2):
        mesh = time_mesh(0, 2, 1, 8)
        F = pr.SpaceTimeField.on_mesh(P, mesh, dom2.r_grid, lambda r, s: np.exp(-r ** 2 / 2) + 0 * s)
        with pytest.raises(pr.ResolutionError, match="panels"):
            pr.duhamel_field(F)


class TestScaling:
    def test_identity(self, f2):
        mesh = time_mesh(0, 1, 2, 8)
        u = pr.free_field(P, f2, mesh)
        v = pr.scaling_transform(u, 1.0)
        assert np.array_equal(v.values, u.values) and np.allclose(v.times, u.times)

    @pytest.fixture(scope="class")
    @classmethod
    def potential(cls):
        mesh = time_mesh(0, 2, 8, 16)
        grid = Domain(2).r_grid
        return pr.SpaceTimeField.on_mesh(P, mesh, grid, lambda r, t: np.exp(-r ** 2 / 2) * np.sin(math.pi * t / 2) ** 2)

    def test_potential_norm_exponent(self, potential):
        r_, w_ = 3.0, 4.0
        spec = NormSpec(r_, w_)
        base = mixed_spacetime_norm(potential, spec)
        vals = [mixed_spacetime_norm(pr.scaling_transform(potential, e, potential=True), spec) for e in (0.7, 1.6)]
        fitted = math.log(vals[1] / vals[0]) / math.log(1.6 / 0.7)
        assert abs(fitted - (1.5 - 1.5 / r_ - 2 / w_)) <= 1e-3
        assert base > 0

    def test_critical_potential_invariant(self, potential):
        r_ = 2.0
        w_ = 2 / (1.5 - 1.5 / r_)  # alpha/r + n/w = alpha
        spec = NormSpec(r_, w_)
        a = mixed_spacetime_norm(potential, spec)
        b = mixed_spacetime_norm(pr.scaling_transform(potential, 2.0, potential=True), spec)
        assert abs(b / a - 1) < 1e-10

    def test_negative_eps(self, potential):
        with pytest.raises(ValueError):
            pr.scaling_transform(potential, -1.0)
