import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import norms as nm
from displab.exponents import ProblemParams
from displab.propagator import SpaceTimeField, free_field, scale_profile, scaling_transform
from displab.quadrature import time_mesh
from displab.radial_transform import Domain

P = ProblemParams(2, "3/2")


def field_on(mesh, grid, func):
    return SpaceTimeField.on_mesh(P, mesh, grid, func)


class TestMixedNorm:
    def test_zero(self, dom2):
        u = field_on(time_mesh(0, 1, 2, 8), dom2.r_grid, lambda r, t: 0 * r * t)
        assert nm.mixed_spacetime_norm(u, nm.NormSpec(3, 4)) == 0

    def test_unit_time_indicator(self, dom2, gauss2):
        u = field_on(time_mesh(0, 1, 2, 8), dom2.r_grid, lambda r, t: np.exp(-r ** 2 / 2) + 0 * t)
        for q, p in ((2, 2), (3, 4), (math.inf, 6)):
            assert abs(nm.mixed_spacetime_norm(u, nm.NormSpec(q, p)) - nm.lp_norm(gauss2, p)) < 1e-12

    @pytest.mark.parametrize("q,p", [(2, 2), (3, 4), (6, 8 / 3)])
    def test_separable_gaussian(self, dom2, q, p):
        u = field_on(time_mesh(-9, 9, 12, 16), dom2.r_grid, lambda r, t: np.exp(-r ** 2 / 2 - t ** 2 / 2))
        space = (2 * math.pi / p) ** (1 / p)
        time = math.sqrt(2 * math.pi / q) ** (1 / q)
        assert abs(nm.mixed_spacetime_norm(u, nm.NormSpec(q, p)) / (space * time) - 1) <= 1e-6

    def test_separable_gaussian_sup_in_time(self, dom2):
        # the ess-sup is the node maximum; t = 0 is not a node, hence the looser tolerance
        u = field_on(time_mesh(-9, 9, 12, 16), dom2.r_grid, lambda r, t: np.exp(-r ** 2 / 2 - t ** 2 / 2))
        val = nm.mixed_spacetime_norm(u, nm.NormSpec(math.inf, 3))
        assert abs(val / (2 * math.pi / 3) ** (1 / 3) - 1) <= 1e-3

    def test_exponent_range(self):
        with pytest.raises(ValueError):
            nm.NormSpec(0.5, 2)

    def test_tail_flag(self, dom2):
        u = field_on(time_mesh(0, 4, 4, 8), dom2.r_grid, lambda r, t: np.exp(-r ** 2 / 2) * (1 + t) ** 4)
        with pytest.raises(nm.DivergenceError):
            nm.mixed_spacetime_norm(u, nm.NormSpec(2, 2), tail_tol=0.2)

    @given(st.floats(0.2, 0.9), st.sampled_from([(2.0, 2.0), (3.0, 4.0), (4.0, 8.0 / 3.0)]))
    def test_truncation_monotone(self, cut, qp):
        dom = Domain(2)
        u = field_on(time_mesh(0, 2, 4, 8), dom.r_grid, lambda r, t: np.exp(-r ** 2 / 2) * np.cos(t))
        sub = u.restrict(0.0, 2 * cut)
        spec = nm.NormSpec(*qp)
        assert nm.mixed_spacetime_norm(sub, spec) <= nm.mixed_spacetime_norm(u, spec) * (1 + 1e-12)

    def test_holder(self, dom2):
        mesh = time_mesh(0, 1, 4, 12)
        V = field_on(mesh, dom2.r_grid, lambda r, t: np.exp(-r ** 2) * (1 + np.sin(3 * t)))
        u = free_field(P, dom2.profile(lambda r: np.exp(-r ** 2 / 2)), mesh)
        r_, w_, q, p = 2.0, 8 / 3, 3.0, 4.0
        qd = 1 / (1 / r_ + 1 / q)
        a = 1 / (1 / w_ + 1 / p)
        lhs = nm.mixed_spacetime_norm(V.with_values(V.values * u.values), nm.NormSpec(qd, a))
        rhs = nm.mixed_spacetime_norm(V, nm.NormSpec(r_, w_)) * nm.mixed_spacetime_norm(u, nm.NormSpec(q, p))
        assert lhs <= rhs * (1 + 1e-9)

    @pytest.mark.parametrize("q,p", [(3, 4), (2, 2), (5, 20 / 7)])
    def test_scaling_exponent(self, dom2, q, p):
        u = free_field(P, dom2.profile(lambda r: np.exp(-r ** 2 / 2)), time_mesh(0, 2, 4, 16))
        spec = nm.NormSpec(q, p)
        a, b = (nm.mixed_spacetime_norm(scaling_transform(u, e), spec) for e in (0.8, 1.5))
        fitted = math.log(b / a) / math.log(1.5 / 0.8)
        assert abs(fitted + (1.5 / q + 2 / p)) <= 1e-3

    def test_sup_refinement(self):
        # the node maximum is stable under grid refinement
        f = lambda r: np.exp(-(r - 1.3) ** 2) * r
        coarse, fine = Domain(2, 64.0, 12.0), Domain(2, 64.0, 24.0)
        a = nm.lp_norm(coarse.profile(f), math.inf)
        b = nm.lp_norm(fine.profile(f), math.inf)
        assert abs(a - b) < 1e-3 * b


class TestSobolev:
    def test_l2(self, gauss2):
        assert abs(nm.sobolev_norm(gauss2, 0) / gauss2.l2_norm() - 1) <= 1e-6

    def test_gradient(self, gauss2):
        assert abs(nm.sobolev_norm(gauss2, 1) - math.sqrt(math.pi)) <= 1e-8

    @pytest.mark.parametrize("gamma", [-0.5, -0.05, 0.7])
    def test_dilation(self, gauss2, gamma):
        a = nm.sobolev_norm(gauss2, gamma)
        b = nm.sobolev_norm(scale_profile(gauss2, 1.7), gamma)
        assert abs(math.log(b / a) / math.log(1.7) - (gamma - 1)) <= 1e-4

    def test_low_frequency_divergence(self, gauss2):
        with pytest.raises(nm.DivergenceError):
            nm.sobolev_norm(gauss2, -1.0)

    def test_frames_match_single(self, gauss2):
        u = free_field(P, gauss2, time_mesh(0, 1, 1, 4))
        vals = nm.sobolev_norms(u, -0.05)
        assert np.allclose(vals, nm.sobolev_norm(gauss2, -0.05), rtol=1e-6)


class TestEmbedding:
    def test_trivial(self, gauss2):
        assert abs(nm.sobolev_embedding_check(gauss2, 3, 3, 0) - 1) < 1e-14

    def test_scale_invariant(self, dom2):
        vals = [nm.sobolev_embedding_check(dom2.profile(lambda r: np.exp(-(s * r) ** 2 / 2)), 2, 4, "1/2")
                for s in (0.5, 1.0, 2.0)]
        assert (max(vals) - min(vals)) / min(vals) <= 1e-3

    def test_modulated_bounded(self, dom2, gauss2):
        base = nm.sobolev_embedding_check(gauss2, 2, 4, "1/2")
        for k in (1, 3, 5):
            h = dom2.profile(lambda r: np.exp(-r ** 2 / 2) * np.cos(k * r) ** 2)
            assert nm.sobolev_embedding_check(h, 2, 4, "1/2") <= 3 * base

    def test_relation_enforced(self, gauss2):
        with pytest.raises(ValueError):
            nm.sobolev_embedding_check(gauss2, 2, 4, "1/3")
