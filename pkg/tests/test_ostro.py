import numpy as np
import pytest

from fracembed.embedding import path_arguments
from fracembed.fracops import FracParams, Grid, GridFn, dab_mu_matrix, inner_product, interior_mask
from fracembed.lagrangian import LagrangianSpec
from fracembed.ostro import (
    HigherBVProblem,
    fd_derivative,
    fgel_residual,
    friction_lagrangian,
    friction_reduction_check,
    solve_fgel,
    whittaker_check,
)
from fracembed.variational import BVProblem, fel_residual, solve_fel

BEAM = LagrangianSpec.from_string("0.5*v2^2", velocities=[["v1"], ["v2"]])
OSC = LagrangianSpec.from_string("0.5*v^2 - 0.5*x^2 + 0.1*x^3")


def _cubic(t):
    return t**3 - 2 * t**2 + t + 0.5, 3 * t**2 - 4 * t + 1


def _sample(g):
    return g.nodes**3 * (1 - g.nodes) ** 3


class TestResidual:
    @pytest.mark.parametrize("p", [FracParams(1, 1, 0), FracParams(0.6, 0.3, 0.7), FracParams(0.5, 0.5, -1j)])
    def test_order_one_is_minus_fel(self, p):
        g = Grid(0, 1, 64)
        x = GridFn(g, np.sin(2 * g.nodes) + 0.2)
        np.testing.assert_array_equal(fgel_residual(OSC, x, p).values, -fel_residual(OSC, x, p).values)

    @pytest.mark.parametrize("p", [FracParams(0.6, 0.3, 0.7), FracParams(0.5, 0.8, -1j)])
    def test_variant_transposition(self, p):
        g = Grid(0, 1, 64)
        L = friction_lagrangian("x^2/2", 0.5, 1.0)
        x = GridFn(g, _sample(g))
        rev = p.transposed()
        direct = fgel_residual(L, x, p, "direct").values
        manual = fgel_residual(L, x, p, "variational").values
        # both variants share the jets at p; they differ only in the outer operator
        d, dt = dab_mu_matrix(g, p), dab_mu_matrix(g, rev)
        gap = direct - manual
        z = path_arguments(x, p, 2, g)
        t = g.nodes
        w1 = L.eval_on(L.dL_dv[0][0], t, z)
        w2 = L.eval_on(L.dL_dv[1][0], t, z)
        expect = -(d.apply(w1) - dt.apply(w1)) + (d.apply(d.apply(w2)) - dt.apply(dt.apply(w2)))
        np.testing.assert_allclose(gap, expect, atol=1e-9 * max(1.0, np.max(np.abs(direct))))

    def test_classical_friction_pattern(self):
        L = friction_lagrangian("x^2/2", 0.5, 1.0)
        for n in (256, 1024):
            g = Grid(0, 1, n)
            x = np.sin(3 * g.nodes)
            r = fgel_residual(L, GridFn(g, x), FracParams(1, 1, 0), "direct").values
            # dL/dx - D[dL/dv1] + D^2[dL/dv2] with L = -x^2/2 - g/2 v1^2 + m/2 v2^2
            classical = -x + 0.5 * fd_derivative(x, g.h, 2) + fd_derivative(x, g.h, 4)
            m = np.zeros(n + 1, bool)
            m[n // 8: -n // 8] = True
            # interior rows of the central operator are the same stencil as the oracle
            assert np.max(np.abs(r - classical)[m]) <= 1e-6 * np.max(np.abs(classical))

    def test_zero_path(self):
        g = Grid(0, 1, 32)
        L = friction_lagrangian("x^2/2", 0.3, 2.0)
        r = fgel_residual(L, GridFn(g, np.zeros(33)), FracParams(0.5, 0.5, -1j), "direct")
        assert np.all(r.values == 0)

    def test_unknown_variant(self):
        g = Grid(0, 1, 16)
        with pytest.raises(ValueError):
            fgel_residual(OSC, GridFn(g, g.nodes), FracParams(1, 1, 0), "sideways")

    @pytest.mark.parametrize("i", [1, 2, 3])
    def test_integration_by_parts_powers(self, i):
        g = Grid(0, 1, 128)
        p = FracParams(0.6, 0.4, 0.5 + 0.5j)
        f, h = GridFn(g, _sample(g)), GridFn(g, np.sin(np.pi * g.nodes) ** 3)
        d, dt = dab_mu_matrix(g, p), dab_mu_matrix(g, p.transposed())
        df, dth = f.values, h.values
        for _ in range(i):
            df, dth = d.apply(df), dt.apply(dth)
        lhs = inner_product(GridFn(g, df), h)
        rhs = (-1) ** i * inner_product(f, GridFn(g, dth))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


class TestSolve:
    def test_order_one_matches_solve_fel(self):
        g = Grid(0, 1, 96)
        p = FracParams(0.7, 0.8, 0.2)
        a = solve_fgel(HigherBVProblem(OSC, g, p, [[0.0]], [[1.0]]))
        b = solve_fel(BVProblem(OSC, g, p, 0.0, 1.0))
        assert a.converged and b.converged
        assert np.max(np.abs(a.x[0].values - b.x[0].values)) <= 1e-9

    def test_beam_causal_first_order(self):
        errs = []
        for n in (128, 256, 512):
            g = Grid(0, 1, n)
            x, dx = _cubic(g.nodes)
            sol = solve_fgel(HigherBVProblem(BEAM, g, FracParams(1, 1, -1j), [[x[0]], [dx[0]]], [[x[-1]], [dx[-1]]]))
            assert sol.converged and sol.iterations == 1
            errs.append(np.max(np.abs(sol.x[0].values - x)))
        assert errs[-1] <= 1e-3
        assert all(1.7 <= errs[k] / errs[k + 1] <= 2.3 for k in range(2))

    def test_beam_central_clamped(self):
        g = Grid(0, 1, 256)
        x = 3 * g.nodes**2 - 2 * g.nodes**3
        sol = solve_fgel(HigherBVProblem(BEAM, g, FracParams(1, 1, 0), [[0.0], [0.0]], [[1.0], [0.0]]))
        assert sol.converged and np.max(np.abs(sol.x[0].values - x)) <= 2e-2

    def test_frictionless_reduces_to_beam(self):
        g = Grid(0, 1, 96)
        bc = ([[0.0], [0.5]], [[1.0], [-0.2]])
        a = solve_fgel(HigherBVProblem(friction_lagrangian("0", 0.0, 1.0), g, FracParams(1, 1, -1j), *bc))
        b = solve_fgel(HigherBVProblem(BEAM, g, FracParams(1, 1, -1j), *bc))
        np.testing.assert_allclose(a.x[0].values, b.x[0].values, atol=1e-10)

    def test_fractional_friction_residual(self):
        g = Grid(0, 1, 128)
        L = friction_lagrangian("x^2/2 + x^4/4", 0.5, 1.0)
        sol = solve_fgel(HigherBVProblem(L, g, FracParams(0.5, 0.5, -1j), [[0.0], [0.0]], [[0.2], [0.0]]))
        assert sol.converged
        assert sol.residual <= 1e-10 * g.n**2

    def test_invalid_boundary_data(self):
        g = Grid(0, 1, 32)
        with pytest.raises(ValueError):
            HigherBVProblem(BEAM, g, FracParams(1, 1, 0), [[0.0]], [[1.0]])
        with pytest.raises(ValueError):
            HigherBVProblem(BEAM, g, FracParams(1, 1, 0), [[0.0], [np.inf]], [[1.0], [0.0]])
        with pytest.raises(ValueError):
            HigherBVProblem(BEAM, Grid(0, 1, 6), FracParams(1, 1, 0), [[0.0], [0.0]], [[1.0], [0.0]])


class TestReductions:
    def test_friction_gap_decreases(self):
        gaps = [friction_reduction_check(0.5, 1.0, "x^2/2", Grid(0, 1, n))["gap_sup"].value for n in (512, 1024)]
        assert gaps[1] < gaps[0] and gaps[1] <= 5e-2

    def test_friction_zero_path(self):
        g = Grid(0, 1, 64)
        rep = friction_reduction_check(0.5, 1.0, "x^2/2", g, x=np.zeros(65))
        assert rep["gap_sup"].value == 0

    def test_friction_requires_mass(self):
        with pytest.raises(ValueError):
            friction_reduction_check(0.5, 0.0, "x^2/2", Grid(0, 1, 16))

    def test_frictionless_gap_is_semigroup_error(self):
        g = Grid(0, 1, 512)
        rep = friction_reduction_check(0.0, 1.0, "x^2/2", g)
        d = dab_mu_matrix(g, FracParams(0.5, 0.5, -1j))
        x = _sample(g)
        d4 = d.apply(d.apply(d.apply(d.apply(x))))
        m = interior_mask(g, 2.0)
        assert abs(rep["gap_sup"].value - np.max(np.abs(d4 - fd_derivative(x, g.h, 2))[m])) <= 1e-12

    def test_whittaker_zero(self):
        g = Grid(0, 1, 64)
        rep = whittaker_check(g, x=np.zeros(65), y=np.zeros(65))
        assert all(c.value == 0 for c in rep.checks)

    def test_whittaker_termwise(self):
        rep = whittaker_check(Grid(0, 1, 1024))
        assert rep.passed
        pats = rep.data["reduced_patterns"]
        assert pats[0] == {"x^(0)": 2.0, "x^(2)": -2.0}
        assert rep.data["proportionality_to_whittaker"] == [-2.0, -2.0]
        assert rep["gel_convention_vs_literal_eq1"].value > 1e-3
