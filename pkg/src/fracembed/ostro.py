"""Higher-order fractional Lagrangians and nonconservative reductions.

For a Lagrangian ``L(t, x, v_1, ..., v_n)`` the generalized residual is

    dL/dx + sum_i (-1)^i O^i [dL/dv_i (z_n)],   z_n = (x, D~x, D D~x, ...)

with ``O = D^{alpha,beta}_mu`` (direct embedding of the classical equation)
or ``O = D^{beta,alpha}_{-mu}`` (obtained from the discrete action).
At order 1 this is minus the first-order residual of :mod:`variational`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracembed.embedding import _as_components, path_arguments
from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    anchored_matrix,
    dab_mu_matrix,
    interior_mask,
)
from fracembed.lagrangian import HigherLagrangianSpec, LagrangianSpec
from fracembed.report import Report
from fracembed.symbolic import Expr, diff, parse, SymbolTable
from fracembed.variational import Solution, _newton

__all__ = [
    "HigherLagrangianSpec",
    "HigherBVProblem",
    "fgel_residual",
    "solve_fgel",
    "friction_lagrangian",
    "friction_reduction_check",
    "whittaker_lagrangian",
    "whittaker_check",
    "fd_derivative",
]

VARIANTS = ("direct", "variational")


@dataclass(frozen=True, eq=False)
class HigherBVProblem:
    """Boundary data ``ba[i][c]``, ``bb[i][c]`` for ``z_i`` of component ``c`` at ``a``, ``b``.

    Discretely, the mean of ``z_i`` over nodes ``i..2i`` is pinned to
    ``ba[i]`` and its mean over nodes ``n-2i..n-i`` to ``bb[i]``.
    """

    L: HigherLagrangianSpec
    grid: Grid
    params: FracParams
    ba: tuple[tuple[complex, ...], ...]
    bb: tuple[tuple[complex, ...], ...]

    def __post_init__(self) -> None:
        ba = np.atleast_2d(np.asarray(self.ba, dtype=complex))
        bb = np.atleast_2d(np.asarray(self.bb, dtype=complex))
        n, d = self.L.order, self.L.dim
        if d == 1 and ba.shape == (1, n):
            ba, bb = ba.T, bb.T
        if ba.shape != (n, d) or bb.shape != (n, d):
            raise ValueError(f"need {n} boundary rows of {d} values at each end")
        if not (np.all(np.isfinite(ba)) and np.all(np.isfinite(bb))):
            raise ValueError("boundary data must be finite")
        if self.grid.n + 1 <= 4 * n:
            raise ValueError("grid too coarse for the boundary stencil")
        object.__setattr__(self, "ba", tuple(map(tuple, ba)))
        object.__setattr__(self, "bb", tuple(map(tuple, bb)))


def _outer(p: FracParams, variant: str) -> FracParams:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    return p if variant == "direct" else p.transposed()


def _fgel_rows(L: LagrangianSpec, xs: np.ndarray, g: Grid, p: FracParams, variant: str):
    z = path_arguments(xs, p, L.order, g)
    t = g.nodes
    m = dab_mu_matrix(g, _outer(p, variant))
    out = np.array([L.eval_on(e, t, z) for e in L.dL_dx])
    for i in range(1, L.order + 1):
        for c in range(L.dim):
            w = L.eval_on(L.dL_dv[i - 1][c], t, z)
            for _ in range(i):
                w = m.apply(w)
            out[c] += (-1) ** i * w
    return out


def fgel_residual(L: LagrangianSpec, x, p: FracParams, variant: str = "variational"):
    """Generalized residual along ``x`` (see module docstring)."""
    g, xs = _as_components(x)
    r = _fgel_rows(L, xs, g, p, variant)
    fns = [GridFn(g, row) for row in r]
    return fns[0] if isinstance(x, GridFn) else fns


def _jet_matrices(g: Grid, p: FracParams, n: int) -> list[np.ndarray]:
    """Matrices ``Z_i`` with ``z_i = Z_i x``."""
    zs = [np.eye(g.n + 1)]
    if n >= 1:
        zs.append(np.asarray(anchored_matrix(g, p).entries))
    m = dab_mu_matrix(g, p).entries
    for _ in range(2, n + 1):
        zs.append(m @ zs[-1])
    return zs


def solve_fgel(prob: HigherBVProblem, *, tol: float = 1e-10, max_iter: int = 50) -> Solution:
    """Solve the variational generalized equation with pinned jets.

    Unknowns are all nodes of every component. For each ``i < order`` the
    mean of ``z_i`` over nodes ``i..2i`` (mirrored at ``b``) is pinned; the
    residual is imposed on nodes ``order .. n - order``. Nodes below ``i``
    are skipped because the anchored stencil there is not consistent with
    the derivative, and a single-node pin leaves the odd sublattice free at
    ``mu = 0``.
    """
    L, g, p = prob.L, prob.grid, prob.params
    order, d, N = L.order, L.dim, g.n
    t = g.nodes
    zs = _jet_matrices(g, p, order)
    mo = dab_mu_matrix(g, p.transposed()).entries
    mpows = [np.eye(N + 1)]
    for _ in range(order):
        mpows.append(mo @ mpows[-1])
    rows = np.arange(order, N - order + 1)
    ba = np.array(prob.ba)
    bb = np.array(prob.bb)

    pin_rows = []
    pin_vals = []
    for c in range(d):
        for i in range(order):
            for nodes, val in ((slice(i, 2 * i + 1), ba[i, c]), (slice(N - 2 * i, N - i + 1), bb[i, c])):
                r = np.zeros(d * (N + 1), dtype=np.complex128)
                r[c * (N + 1):(c + 1) * (N + 1)] = zs[i][nodes].mean(axis=0)
                pin_rows.append(r)
                pin_vals.append(val)
    P = np.array(pin_rows)
    pv = np.array(pin_vals)

    slot_names = [name for row in L.slots for name in row]
    lx_d = [[diff(L.dL_dx[c], s) for s in slot_names] for c in range(d)]
    lv_d = [[[diff(L.dL_dv[i][c], s) for s in slot_names] for c in range(d)] for i in range(order)]
    cplx = p.mu != 0 or np.any(ba.imag) or np.any(bb.imag)

    def shape(u):
        return u.reshape(d, N + 1).astype(np.complex128)

    def residual(u):
        xs = shape(u)
        r = _fgel_rows(L, xs, g, p, "variational")
        return np.concatenate([P @ u - pv, r[:, rows].reshape(-1)])

    abs_pows = [np.abs(m) for m in mpows]

    def scale(u):
        # magnitude of the summed terms before cancellation, so that the
        # tolerance tracks roundoff in the h^(-order) scaled operators
        xs = shape(u)
        z = path_arguments(xs, p, order, g)
        s = 1.0
        for c in range(d):
            s = max(s, float(np.max(np.abs(L.eval_on(L.dL_dx[c], t, z)[rows]))))
            for i in range(order):
                w = np.abs(L.eval_on(L.dL_dv[i][c], t, z))
                s = max(s, float(np.max((abs_pows[i + 1] @ w)[rows])))
        return s

    def jacobian(u):
        xs = shape(u)
        z = path_arguments(xs, p, order, g)

        def dslots(exprs, e):
            # derivative of a pointwise expression w.r.t. component e of x
            acc = np.zeros((N + 1, N + 1), dtype=np.complex128)
            for level in range(order + 1):
                a = L.eval_on(exprs[level * d + e], t, z)
                if np.any(a):
                    acc += a[:, None] * zs[level]
            return acc

        J = np.zeros((len(rows) * d, d * (N + 1)), dtype=np.complex128)
        for c in range(d):
            for e in range(d):
                blk = dslots(lx_d[c], e)
                for i in range(order):
                    blk = blk + (-1) ** (i + 1) * (mpows[i + 1] @ dslots(lv_d[i][c], e))
                J[c * len(rows):(c + 1) * len(rows), e * (N + 1):(e + 1) * (N + 1)] = blk[rows]
        return np.vstack([P, J])

    tau = (t - g.a) / (g.b - g.a)
    x0 = ba[0][:, None] * (1 - tau)[None, :] + bb[0][:, None] * tau[None, :]
    u0 = x0.reshape(-1)
    u0 = u0 if cplx else u0.real.copy()
    u, _, its, ok, flags = _newton(residual, jacobian, u0, scale, tol, max_iter)
    xs = shape(u)
    rfield = _fgel_rows(L, xs, g, p, "variational")
    keep = np.zeros(N + 1, dtype=bool)
    keep[rows] = True
    rfield[:, ~keep] = 0
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
# reductions


def fd_derivative(values: np.ndarray, h: float, k: int = 1) -> np.ndarray:
    """``k``-th derivative by repeated second-order central differences."""
    out = np.asarray(values, dtype=np.complex128)
    for _ in range(k):
        out = np.gradient(out, h, edge_order=2)
    return out


def friction_lagrangian(U: Expr | str, gamma: float, m: float) -> LagrangianSpec:
    """``-U(x) - gamma/2 v1^2 + m/2 v2^2``."""
    if isinstance(U, str):
        U = parse(U, SymbolTable.build(position=["x"], time="t"))
    L = -U - 0.5 * gamma * parse("v1^2") + 0.5 * m * parse("v2^2")
    return LagrangianSpec(L, ("x",), (("v1",), ("v2",)), "t")


def _default_sample(g: Grid) -> np.ndarray:
    tau = (g.nodes - g.a) / (g.b - g.a)
    return tau**3 * (1 - tau) ** 3


def friction_reduction_check(gamma: float, m: float, U: Expr | str, grid: Grid, x=None,
                             *, tol: float = 5e-2) -> Report:
    """Compare the embedded generalized equation at ``(1/2, 1/2, -i)`` with
    ``-U'(x) + gamma x' + m x''`` (finite differences) on a sample vanishing to
    third order at ``a``."""
    if not m > 0:
        raise ValueError("m must be positive")
    L = friction_lagrangian(U, gamma, m)
    p = FracParams(0.5, 0.5, -1j)
    xs = _default_sample(grid) if x is None else (x.values if isinstance(x, GridFn) else np.asarray(x))
    xf = GridFn(grid, xs)
    emb = fgel_residual(L, xf, p, "direct").values
    dU = L.eval_on(diff(L.expr, "x"), grid.nodes, np.array([[xs], [xs], [xs]]))
    classical = dU + gamma * fd_derivative(xs, grid.h, 1) + m * fd_derivative(xs, grid.h, 2)
    mask = interior_mask(grid, 2.0)
    gap = emb - classical
    rep = Report(f"friction reduction gamma={gamma} m={m} n={grid.n}")
    rep.add("gap_sup", float(np.max(np.abs(gap[mask]), initial=0.0)), tol)
    rep.info("classical_sup", float(np.max(np.abs(classical[mask]), initial=0.0)))
    rep.fields["embedded"] = emb
    rep.fields["classical"] = classical
    rep.fields["gap"] = gap
    return rep


def whittaker_lagrangian() -> LagrangianSpec:
    """``v2^2 + u2^2 - u1 v1 + x^2 + v2 y``; ``v_i`` drive ``x``, ``u_i`` drive ``y``."""
    return LagrangianSpec.from_string(
        "v2^2 + u2^2 - u1*v1 + x^2 + v2*y",
        positions=("x", "y"),
        velocities=(("v1", "u1"), ("v2", "u2")),
    )


# Literal embedded system. Each term is (coefficient, component, D-power, d/dt order).
# In the second equation a classical first derivative of x appears next to the
# fractional ones; it is kept as written.
WHITTAKER_LITERAL = (
    ((2.0, "x", 0, 0), (1.0, "y", 2, 0), (-2.0, "x", 4, 0), (-1.0, "y", 2, 0)),
    ((1.0, "x", 0, 1), (1.0, "x", 2, 0), (-2.0, "y", 4, 0)),
)
WHITTAKER_TARGET = (
    {("x", 2): 1.0, ("x", 0): -1.0},
    {("y", 2): 1.0, ("x", 1): -1.0},
)


def _reduced_pattern(eq) -> dict:
    # D^{2k} at order 1/2 acts as (d/dt)^k on admissible samples
    pat: dict = {}
    for coef, comp, dpow, classical in eq:
        key = (comp, dpow // 2 + classical)
        pat[key] = pat.get(key, 0.0) + coef
    return {k: v for k, v in pat.items() if v != 0}


def _proportionality(pat: dict, target: dict) -> float | None:
    if set(pat) != set(target):
        return None
    ratios = {pat[k] / target[k] for k in target}
    return ratios.pop() if len(ratios) == 1 else None


def whittaker_check(grid: Grid, p: FracParams | None = None, x=None, y=None,
                    *, tol: float = 2e-2) -> Report:
    """Evaluate the literal embedded Whittaker system and its reductions."""
    p = p or FracParams(0.5, 0.5, -1j)
    xs = _default_sample(grid) if x is None else np.asarray(getattr(x, "values", x))
    if y is None:
        tau = (grid.nodes - grid.a) / (grid.b - grid.a)
        ys = tau**3 * (1 - tau) ** 4
    else:
        ys = np.asarray(getattr(y, "values", y))
    h = grid.h
    D = dab_mu_matrix(grid, p)

    def dpow(v, k):
        for _ in range(k):
            v = D.apply(v)
        return v

    samples = {"x": np.asarray(xs, dtype=complex), "y": np.asarray(ys, dtype=complex)}
    mask = interior_mask(grid, 2.0)
    rep = Report(f"whittaker n={grid.n}")

    for name, v in samples.items():
        for k in (1, 2):
            err = dpow(v, 2 * k) - fd_derivative(v, h, k)
            rep.add(f"D{2 * k}_{name}_vs_d{k}", float(np.max(np.abs(err[mask]))), tol)

    literal = []
    for eq in WHITTAKER_LITERAL:
        acc = np.zeros(grid.n + 1, dtype=complex)
        for coef, comp, dp, cl in eq:
            acc += coef * fd_derivative(dpow(samples[comp], dp), h, cl)
        literal.append(acc)
    literal = np.array(literal)
    whit = np.array([
        fd_derivative(samples["x"], h, 2) - samples["x"],
        fd_derivative(samples["y"], h, 2) - fd_derivative(samples["x"], h, 1),
    ])
    patterns = [_reduced_pattern(eq) for eq in WHITTAKER_LITERAL]
    factors = [_proportionality(pt, tg) for pt, tg in zip(patterns, WHITTAKER_TARGET)]
    rep.data["reduced_patterns"] = [
        {f"{c}^({k})": v for (c, k), v in sorted(pt.items())} for pt in patterns
    ]
    rep.data["proportionality_to_whittaker"] = factors
    for i in range(2):
        rep.info(f"literal_eq{i + 1}_sup", float(np.max(np.abs(literal[i][mask]))))
        rep.info(f"whittaker_eq{i + 1}_sup", float(np.max(np.abs(whit[i][mask]))))
        if factors[i] is not None:
            gap = literal[i] - factors[i] * whit[i]
            rep.info(f"literal_vs_scaled_whittaker_eq{i + 1}",
                     float(np.max(np.abs(gap[mask]))))

    # the same Lagrangian through the generalized-EL convention of this package
    gel = fgel_residual(whittaker_lagrangian(), [GridFn(grid, xs), GridFn(grid, ys)], p, "direct")
    for i in range(2):
        d = gel[i].values - literal[i]
        rep.info(f"gel_convention_vs_literal_eq{i + 1}", float(np.max(np.abs(d[mask]))))
    rep.fields["literal"] = literal
    rep.fields["whittaker"] = whit
    return rep
