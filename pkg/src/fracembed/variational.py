r"""Fractional actions, Euler-Lagrange solvers, Noether and Hamiltonian tools.

The discrete action of a path ``x`` is

.. math::

    \mathcal{L}(x) = h \sum_{k=0}^{n} L(t_k, x_k, (\tilde D x)_k),

where :math:`\tilde D` is the boundary-lifted combined operator. Variations
vanish at both endpoints, on which :math:`\tilde D` and the plain matrix
:math:`D` agree; with :math:`D' = D^{\beta,\alpha}_{-\mu} = -D^T` the
directional derivative of the discrete action is exactly

.. math::

    \langle \partial_x L - D' [\partial_v L], h \rangle,

so the discrete least-action principle is the fractional Euler-Lagrange
equation :math:`D'[\partial_v L] - \partial_x L = 0` at interior nodes.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fracembed.embedding import (
    EquationSpec,
    _as_components,
    el_operator_form,
    embed_operator,
    evaluate_embedded,
    path_arguments,
)
from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    _fmt,
    anchored_matrix,
    dab_mu_matrix,
    inner_product,
    interior_mask,
)
from fracembed.lagrangian import LagrangianSpec
from fracembed.report import Report
from fracembed.symbolic import (
    Const,
    Expr,
    SymbolTable,
    Var,
    diff,
    evaluate,
    free_vars,
    parse,
    simplify,
    substitute,
)

__all__ = [
    "LagrangianSpec",
    "BVProblem",
    "Solution",
    "HamiltonianSpec",
    "HamiltonianSolution",
    "SolverError",
    "SingularSystemError",
    "LegendreError",
    "action",
    "differential",
    "fel_residual",
    "solve_fel",
    "coherence_report",
    "weak_variations",
    "noether_residual",
    "conservation_check",
    "invariance_check",
    "legendre_transform",
    "frac_hamiltonian_residual",
    "hamilton_action",
    "solve_frac_hamiltonian",
]


class SolverError(ArithmeticError):
    pass


class SingularSystemError(SolverError):
    pass


class LegendreError(ValueError):
    pass


VARIATION_CLASSES = ("full", "weak")


@dataclass(frozen=True, eq=False)
class BVProblem:
    """Fixed-endpoint problem ``x(a) = xa``, ``x(b) = xb``.

    ``variation='weak'`` selects the weak variation class, which requires
    ``alpha == beta`` and yields the directly embedded equation.
    """

    L: LagrangianSpec
    grid: Grid
    params: FracParams
    xa: tuple[float, ...]
    xb: tuple[float, ...]
    variation: str = "full"

    def __post_init__(self) -> None:
        object.__setattr__(self, "xa", tuple(np.atleast_1d(self.xa).tolist()))
        object.__setattr__(self, "xb", tuple(np.atleast_1d(self.xb).tolist()))
        if len(self.xa) != self.L.dim or len(self.xb) != self.L.dim:
            raise ValueError("boundary data must have one value per component")
        if not np.all(np.isfinite(np.array(self.xa + self.xb, dtype=complex))):
            raise ValueError("boundary data must be finite")
        if self.variation not in VARIATION_CLASSES:
            raise ValueError(f"variation must be one of {VARIATION_CLASSES}")
        if self.variation == "weak" and self.params.alpha != self.params.beta:
            raise ValueError("the weak variation class requires alpha == beta")
        if self.L.order != 1:
            raise ValueError("BVProblem needs a first-order Lagrangian")


@dataclass(eq=False)
class Solution:
    x: list[GridFn]
    residual: float
    iterations: int
    converged: bool
    residual_field: np.ndarray
    imag_norm: float = 0.0
    flags: list[str] = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return self.x[0].grid

    def residual_interior(self, order: float = 1.0) -> float:
        m = interior_mask(self.grid, order)
        return float(np.max(np.abs(self.residual_field[:, m]), initial=0.0))

    def to_csv(self, path, names: Sequence[str] | None = None) -> None:
        """Columns ``t, re(x), im(x), ..., residual`` (one pair per component)."""
        names = list(names or [f"x{c}" for c in range(len(self.x))])
        if len(self.x) == 1 and names == ["x0"]:
            names = ["x"]
        header = ["t"]
        for n in names:
            header += [f"re({n})", f"im({n})"]
        header.append("residual")
        res = np.max(np.abs(self.residual_field), axis=0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k, t in enumerate(self.grid.nodes):
                row = [_fmt(t)]
                for c in self.x:
                    row += [_fmt(c.values[k].real), _fmt(c.values[k].imag)]
                row.append(_fmt(res[k]))
                w.writerow(row)


# --------------------------------------------------------------------------
# helpers


def _wrap(single: bool, grid: Grid, rows: np.ndarray):
    fns = [GridFn(grid, r) for r in rows]
    return fns[0] if single else fns


def _eval(L: LagrangianSpec, e: Expr, t: np.ndarray, z: np.ndarray) -> np.ndarray:
    return L.eval_on(e, t, z)


def _slot_derivatives(L: LagrangianSpec, t, z) -> tuple[np.ndarray, np.ndarray]:
    lx = np.array([_eval(L, e, t, z) for e in L.dL_dx])
    lv = np.array([_eval(L, e, t, z) for e in L.dL_dv[0]])
    return lx, lv


def _outer_params(p: FracParams, variation: str) -> FracParams:
    return p.transposed() if variation == "full" else p


def _check_vanishing(h: np.ndarray, tol: float = 1e-12) -> None:
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.any(np.abs(h[:, 0]) > tol * scale) or np.any(np.abs(h[:, -1]) > tol * scale):
        raise ValueError("direction must vanish at both endpoints")


# --------------------------------------------------------------------------
# action and its differential


def action(L: LagrangianSpec, x, p: FracParams) -> complex:
    """Uniform-weight quadrature of ``L(t, x, D~x)``."""
    g, xs = _as_components(x)
    z = path_arguments(xs, p, 1, g)
    vals = _eval(L, L.expr, g.nodes, z)
    return inner_product(GridFn(g, vals), GridFn(g, np.ones(g.n + 1)))


def differential(L: LagrangianSpec, x, hdir, p: FracParams) -> complex:
    """``<dL/dx - D'[dL/dv], h>`` summed over components; exact for the discrete action."""
    g, xs = _as_components(x)
    _, hs = _as_components(hdir, g)
    if hs.shape != xs.shape:
        raise ValueError("direction must have the same components as x")
    _check_vanishing(hs)
    z = path_arguments(xs, p, 1, g)
    lx, lv = _slot_derivatives(L, g.nodes, z)
    dt = dab_mu_matrix(g, p.transposed())
    total = 0j
    for c in range(xs.shape[0]):
        grad = lx[c] - dt.apply(lv[c])
        total += inner_product(GridFn(g, grad), GridFn(g, hs[c]))
    return total


def _fel_rows(L, xs, g, p, variation):
    z = path_arguments(xs, p, 1, g)
    lx, lv = _slot_derivatives(L, g.nodes, z)
    outer = dab_mu_matrix(g, _outer_params(p, variation))
    ov = np.array([outer.apply(r) for r in lv])
    return ov - lx, ov, lx


def fel_residual(L: LagrangianSpec, x, p: FracParams, variation: str = "full"):
    """``D^{beta,alpha}_{-mu}[dL/dv] - dL/dx`` along ``(x, D~x)``.

    ``variation='weak'`` uses ``D^{alpha,alpha}_mu`` as the outer operator.
    A single :class:`GridFn` in gives a single one out.
    """
    if variation not in VARIATION_CLASSES:
        raise ValueError(f"variation must be one of {VARIATION_CLASSES}")
    if variation == "weak" and p.alpha != p.beta:
        raise ValueError("the weak variation class requires alpha == beta")
    g, xs = _as_components(x)
    r, _, _ = _fel_rows(L, xs, g, p, variation)
    return _wrap(isinstance(x, GridFn), g, r)


# --------------------------------------------------------------------------
# Newton solver


def _second_derivatives(L: LagrangianSpec):
    d = L.dim
    xs, vs = L.positions, L.velocities[0]
    lxx = [[diff(L.dL_dx[c], xs[e]) for e in range(d)] for c in range(d)]
    lxv = [[diff(L.dL_dx[c], vs[e]) for e in range(d)] for c in range(d)]
    lvx = [[diff(L.dL_dv[0][c], xs[e]) for e in range(d)] for c in range(d)]
    lvv = [[diff(L.dL_dv[0][c], vs[e]) for e in range(d)] for c in range(d)]
    return lxx, lxv, lvx, lvv


def _newton(residual, jacobian, x0: np.ndarray, scale_fn, tol: float, max_iter: int,
            max_halvings: int = 30):
    """Damped Newton on a flat unknown vector.

    Returns ``(x, r, iterations, converged, flags)``.
    """
    x = x0.copy()
    r = residual(x)
    nr = float(np.max(np.abs(r), initial=0.0))
    merit = float(np.linalg.norm(r))
    flags: list[str] = []
    it = 0
    while True:
        if nr <= tol * scale_fn(x):
            return x, r, it, True, flags
        if it >= max_iter:
            flags.append("max-iterations")
            return x, r, it, False, flags
        J = jacobian(x)
        rhs = -r
        if not np.iscomplexobj(x):
            # real unknowns: the problem data are real, so drop zero imaginary parts
            J, rhs = J.real, rhs.real
        try:
            dx = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular Jacobian: {exc}") from None
        if not np.all(np.isfinite(dx)):
            raise SingularSystemError("non-finite Newton step")
        it += 1
        lam = 1.0
        for _ in range(max_halvings + 1):
            xn = x + lam * dx
            rn = residual(xn)
            mn = float(np.linalg.norm(rn))
            if np.isfinite(mn) and mn < merit:
                break
            lam *= 0.5
        else:
            flags.append("line-search-failed")
            return x, r, it, False, flags
        x, r, merit = xn, rn, mn
        nr = float(np.max(np.abs(r), initial=0.0))


def solve_fel(prob: BVProblem, *, tol: float = 1e-10, max_iter: int = 50) -> Solution:
    """Solve the fractional Euler-Lagrange boundary-value problem.

    Unknowns are the interior nodes of every component; the residual is
    imposed at nodes ``1..n-1``. Newton starts from the straight line and
    halves its step (up to 30 times) whenever the residual grows. A
    quadratic Lagrangian converges after one step.
    """
    L, g, p = prob.L, prob.grid, prob.params
    d, n = L.dim, g.n
    t = g.nodes
    tau = (t - g.a) / (g.b - g.a)
    xa = np.array(prob.xa, dtype=complex)
    xb = np.array(prob.xb, dtype=complex)
    line = xa[:, None] * (1 - tau)[None, :] + xb[:, None] * tau[None, :]
    complex_mode = p.mu != 0 or np.any(xa.imag) or np.any(xb.imag)

    dt = anchored_matrix(g, p).entries
    outer = dab_mu_matrix(g, _outer_params(p, prob.variation)).entries
    inner = slice(1, n)
    second = _second_derivatives(L)

    def full(u: np.ndarray) -> np.ndarray:
        xs = line.copy()
        xs[:, inner] = u.reshape(d, n - 1)
        return xs

    def residual(u):
        r, _, _ = _fel_rows(L, full(u), g, p, prob.variation)
        return r[:, inner].reshape(-1)

    abs_outer = np.abs(outer[inner])

    def scale(u):
        # |outer| |dL/dv| tracks the roundoff of the outer operator at fine h
        z = path_arguments(full(u), p, 1, g)
        lx, lv = _slot_derivatives(L, t, z)
        return max(1.0, float(np.max(abs_outer @ np.abs(lv).T)),
                   float(np.max(np.abs(lx[:, inner]))))

    def jacobian(u):
        xs = full(u)
        z = path_arguments(xs, p, 1, g)
        lxx, lxv, lvx, lvv = second
        J = np.zeros((d * (n - 1), d * (n - 1)), dtype=np.complex128)
        dti = dt[:, inner]
        for c in range(d):
            for e in range(d):
                a_vv = _eval(L, lvv[c][e], t, z)
                a_vx = _eval(L, lvx[c][e], t, z)
                a_xv = _eval(L, lxv[c][e], t, z)
                a_xx = _eval(L, lxx[c][e], t, z)
                # d/dx_e of dL/dv_c along the path, all nodes x interior columns
                dlv = a_vv[:, None] * dti
                dlv[inner] += np.diag(a_vx[inner])
                dlx = a_xv[inner, None] * dti[inner]
                dlx += np.diag(a_xx[inner])
                blk = outer[inner] @ dlv - dlx
                J[c * (n - 1):(c + 1) * (n - 1), e * (n - 1):(e + 1) * (n - 1)] = blk
        return J

    u0 = line[:, inner].reshape(-1)
    u0 = u0 if complex_mode else u0.real.copy()
    u, _, its, ok, flags = _newton(residual, jacobian, u0, scale, tol, max_iter)
    xs = full(u)
    rfield, _, _ = _fel_rows(L, xs, g, p, prob.variation)
    rfield[:, 0] = 0
    rfield[:, -1] = 0
    imag = float(np.max(np.abs(xs.imag)))
    if imag > 1e-8:
        flags.append("complex-valued")
    return Solution(
        x=[GridFn(g, r) for r in xs],
        residual=float(np.max(np.abs(rfield))),
        iterations=its,
        converged=ok,
        residual_field=rfield,
        imag_norm=imag,
        flags=flags,
    )


# --------------------------------------------------------------------------
# coherence


def weak_variations(grid: Grid, alpha: float, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of ``{h : h(a)=h(b)=0, L_alpha h = R_alpha h}``."""
    from fracembed.fracops import rl_left_derivative_matrix, rl_right_derivative_matrix

    diffm = (rl_left_derivative_matrix(grid, alpha).entries
             - rl_right_derivative_matrix(grid, alpha).entries)[:, 1:-1]
    _, s, vh = np.linalg.svd(diffm)
    cut = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > cut))
    basis = vh[rank:]
    out = np.zeros((basis.shape[0], grid.n + 1))
    out[:, 1:-1] = basis
    return out


def coherence_report(L: LagrangianSpec, p: FracParams, grid: Grid, x=None) -> Report:
    """Compare the directly embedded EL equation with the variational one.

    The gap field is ``(D^{a,b}_mu - D^{b,a}_{-mu})[dL/dv]`` by construction;
    it vanishes identically when ``alpha == beta`` and ``mu == 0``.
    """
    if x is None:
        t = grid.nodes
        x = [GridFn(grid, np.sin(0.5 * np.pi * t + 0.3 * c) + 0.25 * t) for c in range(L.dim)]
    g, xs = _as_components(x, grid)
    mask = interior_mask(g, p.order)
    rep = Report(f"coherence alpha={p.alpha} beta={p.beta} mu={p.mu}")

    def gap_of(q: FracParams):
        eq = EquationSpec.of(embed_operator(el_operator_form(L), q))
        direct = np.array([r.values for r in evaluate_embedded(eq, list(GridFn(g, r) for r in xs))])
        var, ov, lx = _fel_rows(L, xs, g, q, "full")
        gap = direct - var
        scale = max(float(np.max(np.abs(ov[:, mask]), initial=0.0)),
                    float(np.max(np.abs(lx[:, mask]), initial=0.0)), 1e-300)
        return gap, scale

    gap, scale = gap_of(p)
    z = path_arguments(xs, p, 1, g)
    _, lv = _slot_derivatives(L, g.nodes, z)
    diffop = dab_mu_matrix(g, p).entries - dab_mu_matrix(g, p.transposed()).entries
    predicted = lv @ diffop.T
    rep.add("gap_matches_operator_difference",
            float(np.max(np.abs(gap - predicted))) / scale, 1e-12)
    rep.info("gap_interior_relative", float(np.max(np.abs(gap[:, mask]), initial=0.0)) / scale)
    rep.fields["gap"] = gap

    q0 = FracParams(p.alpha, p.alpha, 0.0)
    gap0, scale0 = gap_of(q0)
    rep.add("reversible_gap_relative", float(np.max(np.abs(gap0))) / scale0, 1e-12)

    if p.alpha == p.beta:
        basis = weak_variations(g, p.alpha)
        rep.info("weak_class_dimension", basis.shape[0])
        if basis.shape[0]:
            proj = max(abs(inner_product(GridFn(g, gap[c]), GridFn(g, h)))
                       for c in range(gap.shape[0]) for h in basis)
            rep.info("weak_class_projected_gap", proj / scale)
    return rep


# --------------------------------------------------------------------------
# Noether


def _generator(L: LagrangianSpec, xi) -> list[Expr]:
    if isinstance(xi, (str, Expr)):
        xi = [xi]
    table = SymbolTable.build(position=list(L.positions),
                              **({"time": [L.time]} if L.time else {}))
    out = [parse(e, table) if isinstance(e, str) else e for e in xi]
    if len(out) != L.dim:
        raise ValueError(f"generator needs {L.dim} components, got {len(out)}")
    allowed = set(L.positions) | ({L.time} if L.time else set())
    for e in out:
        if free_vars(e) - allowed:
            raise ValueError("generator may depend only on time and positions")
    return out


def _xi_values(L, xi_exprs, t, xs) -> np.ndarray:
    b = {L.time: t} if L.time else {}
    for c, name in enumerate(L.positions):
        b[name] = xs[c]
    return np.array([np.broadcast_to(np.asarray(evaluate(e, b), dtype=complex), t.shape)
                     for e in xi_exprs])


def noether_residual(L: LagrangianSpec, x, xi, p: FracParams, *, warn_tol: float = 1e-6) -> GridFn:
    """``sum_c D'[dL/dv_c] xi_c + dL/dv_c D~(xi_c o x)`` along ``x``.

    Vanishes at interior nodes along extremals of invariant Lagrangians.
    """
    g, xs = _as_components(x)
    xi_e = _generator(L, xi)
    z = path_arguments(xs, p, 1, g)
    lx, lv = _slot_derivatives(L, g.nodes, z)
    mask = interior_mask(g, p.order)
    dtm = dab_mu_matrix(g, p.transposed())
    fel = np.array([dtm.apply(r) for r in lv]) - lx
    sc = max(1.0, float(np.max(np.abs(lv))))
    if np.max(np.abs(fel[:, mask]), initial=0.0) > warn_tol * sc:
        warnings.warn("noether_residual evaluated along a path that is not an extremal",
                      stacklevel=2)
    xv = _xi_values(L, xi_e, g.nodes, xs)
    dtil = anchored_matrix(g, p)
    out = np.zeros(g.n + 1, dtype=np.complex128)
    for c in range(xs.shape[0]):
        out += dtm.apply(lv[c]) * xv[c] + lv[c] * dtil.apply(xv[c])
    return GridFn(g, out)


def conservation_check(L: LagrangianSpec, x, xi, p: FracParams | None = None) -> float:
    """Relative spread of ``C(t) = dL/dv . xi(x)`` over interior nodes."""
    p = p or FracParams(1.0, 1.0, 0.0)
    g, xs = _as_components(x)
    xi_e = _generator(L, xi)
    z = path_arguments(xs, p, 1, g)
    _, lv = _slot_derivatives(L, g.nodes, z)
    C = np.sum(lv * _xi_values(L, xi_e, g.nodes, xs), axis=0)
    C = C[interior_mask(g, p.order)]
    spread = float(np.ptp(C.real) + np.ptp(C.imag))
    mean = float(np.mean(np.abs(C)))
    return spread / max(mean, 1e-300)


def invariance_check(L: LagrangianSpec, xi, samples: int = 64, *, seed: int = 0,
                     tol: float = 1e-8) -> bool:
    """Check ``d/ds L(x + s xi(x), v + s Dxi(x) v)`` vanishes at random states."""
    xi_e = _generator(L, xi)
    vs = L.velocities[0]
    terms: list[Expr] = []
    for c in range(L.dim):
        terms.append(L.dL_dx[c] * xi_e[c])
        for k in range(L.dim):
            dxi = diff(xi_e[c], L.positions[k])
            terms.append(L.dL_dv[0][c] * dxi * Var(vs[k]))
    rng = np.random.default_rng(seed)
    b = {name: rng.uniform(-1.0, 1.0, samples) for name in L.positions + vs}
    if L.time:
        b[L.time] = rng.uniform(0.0, 1.0, samples)
    vals = [np.broadcast_to(np.asarray(evaluate(e, b)), (samples,)) for e in terms]
    total = np.abs(np.sum(vals, axis=0))
    scale = 1.0 + np.sum(np.abs(vals), axis=0)
    return bool(np.all(total <= tol * scale))


# --------------------------------------------------------------------------
# Legendre transform and Hamiltonian formulation


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """``H(t, x, p) = p f - L(t, x, f)`` for a one-component Lagrangian.

    ``f`` inverts ``p = dL/dv``; it is a closed form when ``L`` is quadratic
    in ``v`` and ``None`` when inversion is numeric.
    """

    L: LagrangianSpec
    momentum: str
    H: Expr | None
    f: Expr | None

    @property
    def numeric(self) -> bool:
        return self.f is None

    @property
    def position(self) -> str:
        return self.L.positions[0]

    def _bind(self, t, x, pm) -> dict:
        b = {self.position: x, self.momentum: pm}
        if self.L.time:
            b[self.L.time] = t
        return b

    def _shape(self, v, ref) -> np.ndarray:
        return np.broadcast_to(np.asarray(v, dtype=np.complex128), np.shape(ref)).copy()

    def velocity(self, t, x, pm, *, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
        """Solve ``dL/dv(t, x, v) = p`` for ``v``."""
        if self.f is not None:
            return self._shape(evaluate(self.f, self._bind(t, x, pm)), pm)
        L = self.L
        v = np.array(pm, dtype=np.complex128, copy=True)
        lv, lvv = L.dL_dv[0][0], diff(L.dL_dv[0][0], L.velocities[0][0])
        for _ in range(max_iter):
            z = np.array([[x], [v]])
            r = L.eval_on(lv, t, z) - pm
            if np.max(np.abs(r), initial=0.0) <= tol * max(1.0, float(np.max(np.abs(pm), initial=0.0))):
                return v
            jac = L.eval_on(lvv, t, z)
            if np.any(jac == 0):
                raise LegendreError("Legendre property fails: d2L/dv2 vanishes")
            v = v - r / jac
        raise LegendreError("numeric Legendre inversion did not converge")

    def value(self, t, x, pm) -> np.ndarray:
        if self.H is not None:
            return self._shape(evaluate(self.H, self._bind(t, x, pm)), pm)
        v = self.velocity(t, x, pm)
        return pm * v - self.L.eval_on(self.L.expr, t, np.array([[x], [v]]))

    def dH_dp(self, t, x, pm) -> np.ndarray:
        if self.H is not None:
            return self._shape(evaluate(diff(self.H, self.momentum), self._bind(t, x, pm)), pm)
        return self.velocity(t, x, pm)

    def dH_dx(self, t, x, pm) -> np.ndarray:
        if self.H is not None:
            return self._shape(evaluate(diff(self.H, self.position), self._bind(t, x, pm)), pm)
        v = self.velocity(t, x, pm)
        return -self.L.eval_on(self.L.dL_dx[0], t, np.array([[x], [v]]))

    def hessian(self, t, x, pm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(H_xx, H_xp, H_pp)`` by implicit differentiation of ``p = L_v``."""
        L = self.L
        xn, vn = L.positions[0], L.velocities[0][0]
        v = self.velocity(t, x, pm)
        z = np.array([[x], [v]])
        lxx = L.eval_on(diff(L.dL_dx[0], xn), t, z)
        lxv = L.eval_on(diff(L.dL_dx[0], vn), t, z)
        lvv = L.eval_on(diff(L.dL_dv[0][0], vn), t, z)
        return -lxx + lxv * lxv / lvv, -lxv / lvv, 1.0 / lvv


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def legendre_transform(L: LagrangianSpec, *, momentum: str = "p", probes: int = 16,
                       seed: int = 0) -> HamiltonianSpec:
    """Legendre transform of a one-component first-order Lagrangian."""
    if L.dim != 1 or L.order != 1:
        raise ValueError("legendre_transform supports one-component first-order Lagrangians")
    while momentum in L.slot_names:
        momentum += "_"
    vn = L.velocities[0][0]
    lv = L.dL_dv[0][0]
    lvv = diff(lv, vn)
    if _is_zero(lvv):
        raise LegendreError("Legendre property fails: d2L/dv2 is identically zero")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, probes)
    z = np.array([[rng.uniform(-1, 1, probes)], [rng.uniform(-1, 1, probes)]])
    if np.any(np.abs(L.eval_on(lvv, t, z)) < 1e-14):
        raise LegendreError("Legendre property fails at a probe point")
    P = Var(momentum)
    if _is_zero(diff(lvv, vn)):
        B = simplify(substitute(lv, {vn: 0.0}))
        f = simplify((P - B) / lvv)
        H = simplify(P * f - substitute(L.expr, {vn: f}))
        return HamiltonianSpec(L, momentum, H, f)
    return HamiltonianSpec(L, momentum, None, None)


def _ham_rows(H: HamiltonianSpec, xs: np.ndarray, pm: np.ndarray, g: Grid, p: FracParams):
    t = g.nodes
    r1 = anchored_matrix(g, p).apply(xs) - H.dH_dp(t, xs, pm)
    r2 = dab_mu_matrix(g, p.transposed()).apply(pm) + H.dH_dx(t, xs, pm)
    return r1, r2


def frac_hamiltonian_residual(H: HamiltonianSpec, x: GridFn, pfn: GridFn,
                              p: FracParams) -> tuple[GridFn, GridFn]:
    """``(D~x - dH/dp, D' p + dH/dx)`` with ``D' = D^{beta,alpha}_{-mu}``."""
    if x.grid != pfn.grid:
        raise ValueError("grid mismatch")
    r1, r2 = _ham_rows(H, x.values, pfn.values, x.grid, p)
    return GridFn(x.grid, r1), GridFn(x.grid, r2)


def hamilton_action(H: HamiltonianSpec, x: GridFn, pfn: GridFn, p: FracParams) -> complex:
    """Quadrature of ``p D~x - H(t, x, p)``."""
    if x.grid != pfn.grid:
        raise ValueError("grid mismatch")
    g = x.grid
    dx = anchored_matrix(g, p).apply(x)
    return inner_product(pfn, dx) - inner_product(
        GridFn(g, H.value(g.nodes, x.values, pfn.values)), GridFn(g, np.ones(g.n + 1)))


@dataclass(eq=False)
class HamiltonianSolution:
    x: GridFn
    pfn: GridFn
    residual: float
    iterations: int
    converged: bool
    flags: list[str] = field(default_factory=list)


def solve_frac_hamiltonian(H: HamiltonianSpec, grid: Grid, p: FracParams, xa: float, xb: float,
                           *, tol: float = 1e-10, max_iter: int = 50) -> HamiltonianSolution:
    """Solve the fractional Hamiltonian system with pinned endpoints.

    Unknowns are interior ``x`` and every node of ``p``; the first equation
    holds at all nodes, the second at interior nodes.
    """
    g, n, t = grid, grid.n, grid.nodes
    tau = (t - g.a) / (g.b - g.a)
    line = complex(xa) * (1 - tau) + complex(xb) * tau
    inner = slice(1, n)
    dt = anchored_matrix(g, p).entries
    mt = dab_mu_matrix(g, p.transposed()).entries
    cplx = p.mu != 0 or isinstance(xa, complex) or isinstance(xb, complex)

    def split(u):
        xs = line.copy().astype(np.complex128)
        xs[inner] = u[: n - 1]
        return xs, u[n - 1:].astype(np.complex128)

    def residual(u):
        xs, pm = split(u)
        r1, r2 = _ham_rows(H, xs, pm, g, p)
        return np.concatenate([r1, r2[inner]])

    def scale(u):
        xs, pm = split(u)
        return max(1.0, float(np.max(np.abs(dt @ xs))), float(np.max(np.abs(mt @ pm))))

    def jacobian(u):
        xs, pm = split(u)
        hxx, hxp, hpp = H.hessian(t, xs, pm)
        J = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        J[: n + 1, : n - 1] = dt[:, inner]
        J[np.arange(1, n), np.arange(n - 1)] -= hxp[inner]
        J[: n + 1, n - 1:] = -np.diag(hpp)
        J[n + 1:, : n - 1] = np.diag(hxx[inner])
        J[n + 1:, n - 1:] = mt[inner] + np.diag(hxp)[inner]
        return J

    z0 = np.array([[line], [dt @ line]])
    p0 = H.L.eval_on(H.L.dL_dv[0][0], t, z0)
    u0 = np.concatenate([line[inner], p0])
    u0 = u0 if cplx else u0.real.copy()
    u, r, its, ok, flags = _newton(residual, jacobian, u0, scale, tol, max_iter)
    xs, pm = split(u)
    return HamiltonianSolution(GridFn(g, xs), GridFn(g, pm), float(np.max(np.abs(r))), its, ok,
                               flags)
