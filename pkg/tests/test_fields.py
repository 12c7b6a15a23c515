import math

import mpmath
import numpy as np
import pytest

from fracembed.fields import (
    DensitySpec,
    DomainError,
    Field,
    FieldGrid,
    felf_mask,
    felf_residual,
    mittag_leffler,
    mode_amplitude,
    solve_frac_diffusion,
    solve_frac_wave,
)
from fracembed.fracops import FracParams

from .oracles import HEAT_MODE_T01, ML_HALF_MINUS_ONE, ML_HALF_MINUS_THREE, ML_LAPLACE


def sine(x):
    return np.sin(np.pi * x)


def _diffusion_error(alpha, nt, nx=256, T=0.1):
    u = solve_frac_diffusion(alpha, 1.0, FieldGrid(T, 1.0, nt, nx), sine)
    ref = mittag_leffler(alpha, -np.pi**2 * T**alpha).real
    return abs(mode_amplitude(u)[-1].real - ref) / ref


class TestGrids:
    def test_field_grid_validation(self):
        with pytest.raises(ValueError):
            FieldGrid(1.0, 1.0, 1, 8)
        with pytest.raises(ValueError):
            FieldGrid(1.0, 1.0, 8, 2)
        with pytest.raises(ValueError):
            FieldGrid(-1.0, 1.0, 8, 8)

    def test_field_shape(self):
        fg = FieldGrid(1.0, 2.0, 4, 6)
        assert fg.shape == (5, 7) and fg.hx == pytest.approx(2 / 6)
        with pytest.raises(ValueError):
            Field(fg, np.zeros((7, 5)))

    def test_csv_long_format(self, tmp_path):
        fg = FieldGrid(1.0, 1.0, 2, 3)
        Field(fg, np.arange(12.0).reshape(3, 4)).to_csv(tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "t,x,re,im" and len(lines) == 13

    def test_density_slots(self):
        with pytest.raises(ValueError):
            DensitySpec.from_string("q*v")


class TestFelf:
    WAVE = DensitySpec.from_string("rho/2*v^2 - T/2*w^2", {"rho": 1.0, "T": 1.0})

    def _standing(self, nt, nx):
        fg = FieldGrid(1.0, 1.0, nt, nx)
        t, x = fg.time.nodes[:, None], fg.space.nodes[None, :]
        return fg, Field(fg, np.cos(np.pi * t) * np.sin(np.pi * x))

    def test_standing_wave_residual(self):
        sups = []
        for n in (64, 128, 256):
            fg, u = self._standing(n, n)
            r = felf_residual(self.WAVE, u, FracParams(1, 1, 0))
            sups.append(np.max(np.abs(r.values[felf_mask(fg, FracParams(1, 1, 0))])))
        assert sups[-1] <= 1e-8

    def test_standing_wave_converges_unequal_steps(self):
        sups = []
        for n in (64, 128, 256):
            fg, u = self._standing(2 * n, n)
            r = felf_residual(self.WAVE, u, FracParams(1, 1, 0))
            sups.append(np.max(np.abs(r.values[felf_mask(fg, FracParams(1, 1, 0))])))
        assert sups[0] > sups[1] > sups[2]
        assert 3.0 <= sups[1] / sups[2] <= 5.0

    def test_zero_field(self):
        fg = FieldGrid(1.0, 1.0, 16, 16)
        r = felf_residual(self.WAVE, Field(fg, np.zeros(fg.shape)), FracParams(0.6, 0.8, 0.3))
        assert np.all(r.values == 0)

    def test_diffusion_density_unfolds(self):
        dens = DensitySpec.from_string("0.5*v^2 - a2/2*w^2", {"a2": 2.0})
        fg = FieldGrid(1.0, 1.0, 64, 64)
        t, x = fg.time.nodes[:, None], fg.space.nodes[None, :]
        y = np.exp(-t) * x**2
        r = felf_residual(dens, Field(fg, y), FracParams(1, 1, 0)).values
        # -u_tt + a2 u_xx at order (1, 1)
        expect = -np.exp(-t) * x**2 + 2.0 * 2.0 * np.exp(-t) * np.ones_like(x)
        m = felf_mask(fg, FracParams(1, 1, 0))
        assert np.max(np.abs(r - expect)[m]) <= 1e-3


class TestDiffusion:
    def test_heat_mode(self):
        u = solve_frac_diffusion(1.0, 1.0, FieldGrid(0.1, 1.0, 256, 256), sine)
        assert abs(mode_amplitude(u)[-1].real - HEAT_MODE_T01) / HEAT_MODE_T01 <= 1e-2

    def test_mittag_leffler_mode(self):
        assert _diffusion_error(0.8, 256) <= 2e-2

    @pytest.mark.parametrize("alpha", [1.0, 0.8, 0.5])
    def test_refinement_ratio(self, alpha):
        e1, e2 = _diffusion_error(alpha, 128), _diffusion_error(alpha, 256)
        assert 1.6 <= e1 / e2 <= 2.4

    def test_zero_initial(self):
        u = solve_frac_diffusion(0.7, 1.0, FieldGrid(0.1, 1.0, 16, 16), None)
        assert np.all(u.values == 0)

    def test_backward_euler_bit_for_bit(self):
        fg = FieldGrid(0.1, 1.0, 40, 32)
        x = fg.space.nodes
        u0 = sine(x) + 0.3 * np.sin(3 * np.pi * x)
        got = solve_frac_diffusion(1.0, 0.7, fg, u0).values
        r = fg.ht * 0.7 / fg.hx**2
        m = fg.nx - 1
        A = np.diag(np.full(m, 1 + 2 * r)) + np.diag(np.full(m - 1, -r), 1) + np.diag(np.full(m - 1, -r), -1)
        u = u0.copy()
        for j in range(1, fg.nt + 1):
            nxt = np.zeros_like(u)
            nxt[1:-1] = np.linalg.solve(A, u[1:-1])
            u = nxt
            np.testing.assert_allclose(got[j], u, rtol=0, atol=1e-13)

    def test_rl_initialization_matches_shifted_at_one(self):
        fg = FieldGrid(0.1, 1.0, 32, 32)
        a = solve_frac_diffusion(1.0, 1.0, fg, sine).values
        b = solve_frac_diffusion(1.0, 1.0, fg, sine, initialization="rl").values
        np.testing.assert_allclose(a, b, atol=1e-14)
        with pytest.raises(ValueError):
            solve_frac_diffusion(1.0, 1.0, fg, sine, initialization="caputo")

    @pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0])
    def test_mass_non_increasing(self, alpha):
        fg = FieldGrid(0.2, 1.0, 64, 64)
        x = fg.space.nodes
        u = solve_frac_diffusion(alpha, 1.0, fg, x * (1 - x) * (1 + x))
        mass = u.values.sum(axis=1)
        assert np.all(np.diff(mass) <= 1e-14)

    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_mode_orthogonality(self, alpha):
        fg = FieldGrid(0.2, 1.0, 64, 48)
        u = solve_frac_diffusion(alpha, 1.0, fg, lambda x: np.sin(2 * np.pi * x))
        for k in (1, 3, 4, 5):
            assert np.max(np.abs(mode_amplitude(u, k))) <= 1e-10

    def test_invalid_arguments(self):
        fg = FieldGrid(0.1, 1.0, 8, 8)
        with pytest.raises(ValueError):
            solve_frac_diffusion(1.2, 1.0, fg, sine)
        with pytest.raises(ValueError):
            solve_frac_diffusion(0.5, 0.0, fg, sine)
        with pytest.raises(ValueError):
            solve_frac_diffusion(0.5, 1.0, fg, np.zeros(3))


class TestWave:
    def test_standing_wave(self):
        fg = FieldGrid(2.0, 1.0, 1024, 128)
        u = solve_frac_wave(1.0, 1.0, 1.0, fg, sine)
        t, x = fg.time.nodes[:, None], fg.space.nodes[None, :]
        exact = np.cos(np.pi * t) * np.sin(np.pi * x)
        assert np.max(np.abs(u.values - exact)) <= 1e-2

    def test_fractional_mode(self):
        alpha, T = 0.9, 1.0
        fg = FieldGrid(T, 1.0, 1024, 128)
        amp = mode_amplitude(solve_frac_wave(alpha, 1.0, 1.0, fg, sine)).real
        ref = np.array([mittag_leffler(2 * alpha, -np.pi**2 * t ** (2 * alpha)).real for t in fg.time.nodes[::64]])
        assert np.max(np.abs(amp[::64] - ref)) <= 3e-2

    def test_zero_data(self):
        u = solve_frac_wave(0.8, 1.0, 1.0, FieldGrid(1.0, 1.0, 16, 16), None, None)
        assert np.all(u.values == 0)

    def test_literal_sign_is_not_a_wave(self):
        fg = FieldGrid(0.5, 1.0, 256, 64)
        amp = mode_amplitude(solve_frac_wave(1.0, 1.0, 1.0, fg, sine, paper_literal_sign=True)).real
        assert amp[-1] > np.cosh(np.pi * 0.5) * 0.9

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            solve_frac_wave(0.5, 1.0, 1.0, FieldGrid(1.0, 1.0, 8, 8), sine)
        with pytest.raises(ValueError):
            solve_frac_wave(0.9, -1.0, 1.0, FieldGrid(1.0, 1.0, 8, 8), sine)


class TestMittagLeffler:
    def test_exponential(self):
        assert abs(mittag_leffler(1.0, -1.0) - math.exp(-1)) <= 1e-15
        for a in (0.3, 0.5, 1.7):
            assert mittag_leffler(a, 0) == 1

    def test_erfc_identity(self):
        assert abs(mittag_leffler(0.5, -1.0) - ML_HALF_MINUS_ONE) <= 1e-4
        assert abs(mittag_leffler(0.5, -1.0) - ML_HALF_MINUS_ONE) <= 1e-14
        assert abs(mittag_leffler(0.5, -3.0) - ML_HALF_MINUS_THREE) <= 1e-14

    def test_cosine_at_two(self):
        assert abs(mittag_leffler(2.0, -4.0) - math.cos(2.0)) <= 1e-14

    @pytest.mark.parametrize("key", sorted(ML_LAPLACE))
    def test_laplace_inversion_oracle(self, key):
        a, lam, t = key
        assert abs(mittag_leffler(a, -lam * t**a) - ML_LAPLACE[key]) <= 1e-12

    @pytest.mark.parametrize("alpha,x", [(0.5, 2.0), (0.8, 5.0), (0.6, 3.0)])
    def test_series_and_integral_routes_agree(self, alpha, x):
        s = mittag_leffler(alpha, -x, method="series")
        i = mittag_leffler(alpha, -x, method="integral")
        assert abs(s - i) <= 1e-13

    def test_complex_argument(self):
        z = 0.5 + 1.5j
        ref = complex(mpmath.nsum(lambda k: mpmath.mpc(z) ** k / mpmath.gamma(0.7 * k + 1), [0, mpmath.inf]))
        assert abs(mittag_leffler(0.7, z) - ref) <= 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            mittag_leffler(0.2, -1.0)
        with pytest.raises(DomainError):
            mittag_leffler(0.8, -51.0)
        with pytest.raises(DomainError):
            mittag_leffler(0.3, 40.0)
        with pytest.raises(DomainError):
            mittag_leffler(1.5, -2.0, method="integral")
        with pytest.raises(ValueError):
            mittag_leffler(0.5, -1.0, method="guess")
        assert issubclass(DomainError, ValueError)
