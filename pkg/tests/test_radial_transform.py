import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from displab import radial_transform as rt
from displab.quadrature import gauss_legendre, radial_grid


def smooth_family(dom, count=10, seed=1):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s, c, k = rng.uniform(0.6, 1.6), rng.uniform(-0.4, 0.4), rng.uniform(0, 2)
        out.append(dom.profile(lambda r: np.exp(-0.5 * (r / s) ** 2) * (1 + c * r ** 2) * np.cos(k * r)))
    return out


class TestForward:
    def test_gaussian_self_dual_n3(self):
        f = rt.Domain(3).profile(lambda r: np.exp(-r ** 2 / 2))
        g = rt.hankel_forward(f)
        assert np.max(np.abs(g.values - (2 * math.pi) ** 1.5 * np.exp(-g.rho ** 2 / 2))) < 1e-9

    def test_disc_indicator_n2(self):
        # the unit disc: closed form versus an independent 2-D polar quadrature
        grid = radial_grid(1.0, 12.0)
        rho = np.array([0.3, 1.0, 2.5, 7.0, 11.0])
        ours = rt.forward_values(2, grid, np.ones(len(grid)), rho)
        closed = 2 * math.pi * special.j1(rho) / rho
        assert np.max(np.abs(ours - closed)) < 1e-9
        r, wr = gauss_legendre(0, 1, 60)
        th = np.linspace(0, 2 * math.pi, 257)[:-1]
        direct = np.array([np.sum(wr * r * np.sum(np.exp(-1j * p * np.outer(r, np.cos(th))), axis=1))
                           * 2 * math.pi / th.size for p in rho])
        assert np.max(np.abs(direct - closed)) < 1e-9

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("s", [0.5, 3.0, 10.0, 25.0])
    def test_surface_identity(self, n, s):
        nu = (n - 2) / 2
        val = rt.surface_constant(n) * special.jv(nu, s) / s ** nu
        assert abs(rt.sphere_quadrature(n, s) - val) < 1e-8

    def test_n3_surface_closed_form(self):
        s = 2.7
        assert abs(rt.sphere_quadrature(3, s) - 4 * math.pi * math.sin(s) / s) < 1e-12

    def test_resolution_error(self):
        f = rt.Domain(2, 8.0, 12.0).profile(lambda r: np.exp(-r / 4))
        with pytest.raises(rt.ResolutionError, match="r="):
            rt.hankel_forward(f, check=True)

    def test_spectral_tail_error(self):
        g = rt.Domain(2).spectrum(lambda p: np.exp(-p / 8))
        with pytest.raises(rt.ResolutionError, match="rho="):
            rt.hankel_inverse(g, check=True)


class TestInverse:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_round_trip_and_plancherel(self, n):
        dom = rt.Domain(n)
        for f in smooth_family(dom):
            g = rt.hankel_forward(f)
            back = rt.hankel_inverse(g, f.grid)
            assert (back - f).l2_norm() / f.l2_norm() <= 1e-6
            assert abs(g.l2_norm() / f.l2_norm() - 1) <= 1e-6

    def test_zero(self, dom2):
        g = dom2.spectrum(lambda p: 0 * p)
        assert np.all(rt.hankel_inverse(g).values == 0)

    def test_evaluate_at_matches_grid(self, gauss2):
        g = rt.hankel_forward(gauss2)
        r = gauss2.r[::37]
        assert np.allclose(rt.evaluate_at(g, r), gauss2.values[::37], atol=1e-10)

    @given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
           st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
    def test_linearity(self, a, b):
        dom = rt.Domain(2)
        f1, f2 = smooth_family(dom, 2, seed=7)
        lhs = rt.hankel_forward(a * f1 + b * f2).values
        rhs = a * rt.hankel_forward(f1).values + b * rt.hankel_forward(f2).values
        scale = np.max(np.abs(rt.hankel_forward(f1).values)) * (abs(a) + abs(b) + 1)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale


class TestProfiles:
    def test_grid_mismatch(self):
        a = rt.Domain(2).profile(np.ones_like)
        b = rt.Domain(2, 32.0).profile(np.ones_like)
        with pytest.raises(ValueError):
            a - b

    def test_nonfinite(self, dom2):
        with pytest.raises(ValueError):
            dom2.profile(lambda r: r * np.nan)

    def test_l2_norm_gaussian(self, gauss2):
        # int exp(-r^2) dx over R^2 = pi
        assert abs(gauss2.l2_norm() ** 2 - math.pi) < 1e-12
