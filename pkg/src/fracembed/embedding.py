r"""Operator forms and their fractional embedding.

An operator form is a list of rows (one per equation), each row a sum of
terms ``F_i . (d/dt)^{k_i} o G_i`` with ``F_i, G_i`` expressions in the time
slot and the jet slots ``x, v_1, ..., v_k``. Embedding with parameters
``p`` replaces every ``d/dt`` by the combined operator; the jet slots are
filled with ``x, Dx, ..., D^k x``.

Path arguments are built as ``z_0 = x``, ``z_1 = D~ x`` (the boundary-lifted
operator, see :func:`fracembed.fracops.anchored_matrix`) and
``z_i = D z_{i-1}`` for ``i >= 2``. Outer operator powers always use the
plain matrix ``D``. On grid functions vanishing at both endpoints both
choices coincide.

Sign convention for Euler-Lagrange residuals: ``D[dL/dv] - dL/dx``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    anchored_matrix,
    dab_mu_matrix,
    interior_mask,
)
from fracembed.lagrangian import LagrangianSpec
from fracembed.symbolic import (
    ONE,
    ZERO,
    Expr,
    Neg,
    Var,
    SymbolTable,
    diff,
    evaluate,
    free_vars,
    parse,
    simplify,
    to_string,
)

__all__ = [
    "Term",
    "OperatorForm",
    "EmbeddedOperator",
    "EquationSpec",
    "embed_operator",
    "el_operator_form",
    "gel_operator_form",
    "path_arguments",
    "apply_embedded",
    "evaluate_embedded",
    "evaluate_classical",
    "rev_params",
    "is_reversibility_preserving",
]


@dataclass(frozen=True)
class Term:
    F: Expr
    order: int
    G: Expr

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 0:
            raise ValueError("term order must be a non-negative integer")


@dataclass(frozen=True)
class OperatorForm:
    """Rows of terms over jet slots.

    ``slots[i]`` names the ``d`` components fed with the ``i``-th derivative
    (``slots[0]`` are the positions).
    """

    rows: tuple[tuple[Term, ...], ...]
    slots: tuple[tuple[str, ...], ...]
    time: str | None = "t"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        object.__setattr__(self, "slots", tuple(tuple(s) for s in self.slots))
        d = len(self.slots[0])
        if any(len(s) != d for s in self.slots):
            raise ValueError("every slot row needs one name per component")
        known = {n for s in self.slots for n in s} | ({self.time} if self.time else set())
        for row in self.rows:
            for term in row:
                extra = (free_vars(term.F) | free_vars(term.G)) - known
                if extra:
                    raise ValueError(f"term refers to undeclared slots {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.slots[0])

    @property
    def arity(self) -> int:
        return len(self.slots) - 1

    @property
    def max_order(self) -> int:
        return max((t.order for row in self.rows for t in row), default=0)


@dataclass(frozen=True)
class EmbeddedOperator:
    form: OperatorForm
    params: FracParams


@dataclass(frozen=True)
class EquationSpec:
    """An embedded operator together with the number ``k`` of operator powers
    fed into it as arguments."""

    op: EmbeddedOperator
    arity: int

    def __post_init__(self) -> None:
        if self.arity < 0:
            raise ValueError("arity must be non-negative")
        if self.arity > self.op.form.arity:
            raise ValueError("arity exceeds the number of slot rows")

    @classmethod
    def of(cls, op: EmbeddedOperator) -> EquationSpec:
        return cls(op, op.form.arity)

    def to_json(self) -> str:
        p = self.op.params
        form = self.op.form
        doc = {
            "params": {"alpha": p.alpha, "beta": p.beta, "mu": [p.mu.real, p.mu.imag]},
            "arity": self.arity,
            "time": form.time,
            "slots": [list(s) for s in form.slots],
            "rows": [
                [{"F": to_string(t.F), "order": t.order, "G": to_string(t.G)} for t in row]
                for row in form.rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> EquationSpec:
        doc = json.loads(text)
        slots = [tuple(s) for s in doc["slots"]]
        roles: dict = {"position": list(slots[0])}
        if doc.get("time"):
            roles["time"] = [doc["time"]]
        table = SymbolTable.build(velocity=[n for s in slots[1:] for n in s], **roles)
        rows = tuple(
            tuple(Term(parse(t["F"], table), int(t["order"]), parse(t["G"], table)) for t in row)
            for row in doc["rows"]
        )
        mu = doc["params"]["mu"]
        p = FracParams(doc["params"]["alpha"], doc["params"]["beta"], complex(mu[0], mu[1]))
        form = OperatorForm(rows, tuple(slots), doc.get("time"))
        return cls(EmbeddedOperator(form, p), int(doc["arity"]))


def embed_operator(form: OperatorForm, p: FracParams) -> EmbeddedOperator:
    """Replace each ``(d/dt)^i`` by the ``i``-th power of the combined operator."""
    return EmbeddedOperator(form, p)


def el_operator_form(L: LagrangianSpec) -> OperatorForm:
    """``d/dt o dL/dv - dL/dx`` per component, as two terms each.

    The terms are ``(F=1, order 1, G=dL/dv)`` and ``(F=-dL/dx, order 0, G=1)``.
    """
    if L.order != 1:
        raise ValueError("el_operator_form needs a first-order Lagrangian")
    rows = []
    for c in range(L.dim):
        rows.append(
            (
                Term(ONE, 1, L.dL_dv[0][c]),
                Term(simplify(Neg(L.dL_dx[c])), 0, ONE),
            )
        )
    return OperatorForm(tuple(rows), L.slots, L.time)


def gel_operator_form(L: LagrangianSpec, order: int | None = None) -> OperatorForm:
    """``dL/dx + sum_i (-1)^i (d/dt)^i o dL/dv_i`` per component."""
    if order is not None and order != L.order:
        raise ValueError(f"order mismatch: Lagrangian has order {L.order}, asked {order}")
    rows = []
    for c in range(L.dim):
        terms = [Term(L.dL_dx[c], 0, ONE)]
        for i in range(1, L.order + 1):
            sign = ONE if i % 2 == 0 else Neg(ONE)
            terms.append(Term(simplify(sign), i, L.dL_dv[i - 1][c]))
        rows.append(tuple(terms))
    return OperatorForm(tuple(rows), L.slots, L.time)


def _as_components(x, grid: Grid | None = None) -> tuple[Grid, np.ndarray]:
    if isinstance(x, GridFn):
        x = [x]
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], GridFn):
        g = x[0].grid
        if any(c.grid != g for c in x):
            raise ValueError("grid mismatch between components")
        if grid is not None and grid != g:
            raise ValueError("grid mismatch")
        return g, np.array([c.values for c in x])
    if grid is None:
        raise ValueError("a grid is required for raw sample arrays")
    arr = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    if arr.shape[1] != grid.n + 1:
        raise ValueError("grid mismatch")
    return grid, arr


def path_arguments(x, p: FracParams, k: int, grid: Grid | None = None) -> np.ndarray:
    """Jet ``(x, D~x, D D~x, ...)`` up to power ``k``; shape ``(k+1, d, n+1)``."""
    g, xs = _as_components(x, grid)
    out = np.empty((k + 1,) + xs.shape, dtype=np.complex128)
    out[0] = xs
    if k >= 1:
        out[1] = xs @ anchored_matrix(g, p).entries.T
    if k >= 2:
        m = dab_mu_matrix(g, p)
        for i in range(2, k + 1):
            out[i] = np.array([m.apply(r) for r in out[i - 1]])
    return out


def _eval_on(e: Expr, form: OperatorForm, t: np.ndarray, z: np.ndarray) -> np.ndarray:
    b = {}
    if form.time:
        b[form.time] = t
    for i, row in enumerate(form.slots[: z.shape[0]]):
        for c, name in enumerate(row):
            b[name] = z[i, c]
    v = evaluate(e, b)
    return np.broadcast_to(np.asarray(v, dtype=np.complex128), t.shape).copy()


def apply_embedded(op: EmbeddedOperator, args: np.ndarray, grid: Grid) -> np.ndarray:
    """Evaluate the embedded operator on explicit jet samples ``args``.

    Returns one residual row per equation, shape ``(rows, n+1)``.
    """
    form = op.form
    args = np.asarray(args, dtype=np.complex128)
    t = grid.nodes
    m = dab_mu_matrix(grid, op.params)
    out = np.zeros((len(form.rows), grid.n + 1), dtype=np.complex128)
    for r, row in enumerate(form.rows):
        for term in row:
            g = _eval_on(term.G, form, t, args)
            for _ in range(term.order):
                g = m.apply(g)
            out[r] += _eval_on(term.F, form, t, args) * g
    return out


def evaluate_embedded(eq: EquationSpec, x, grid: Grid | None = None) -> list[GridFn]:
    """Residual grid functions of the embedded equation at ``x``.

    The jet slots are filled with ``x, Dx, ..., D^k x`` using the equation's
    own parameters. Only nodes in :func:`interior_mask` are meaningful.
    """
    g, xs = _as_components(x, grid)
    if xs.shape[0] != eq.op.form.dim:
        raise ValueError(f"expected {eq.op.form.dim} components, got {xs.shape[0]}")
    z = path_arguments(xs, eq.op.params, eq.arity, g)
    res = apply_embedded(eq.op, z, g)
    return [GridFn(g, r) for r in res]


def boundary_mask(grid: Grid, p: FracParams, order: int = 1) -> np.ndarray:
    """Nodes excluded from residual norms (complement of the interior mask)."""
    return ~interior_mask(grid, p.order * max(order, 1))


def _jet_name(level: int, c: int) -> str:
    return f"_jet{level}_{c}"


def _total_derivative(e: Expr, form: OperatorForm, names: list[list[str]], time: str) -> Expr:
    out: Expr = diff(e, time) if form.time else ZERO
    for level in range(len(names) - 1):
        for c, name in enumerate(names[level]):
            out = out + diff(e, name) * Var(names[level + 1][c])
    return simplify(out)


def evaluate_classical(form: OperatorForm, t: np.ndarray, jets: Sequence) -> np.ndarray:
    """Evaluate the form with ``d/dt`` as an exact total derivative.

    ``jets[l]`` holds samples (shape ``(d, m)``) of the ``l``-th derivative
    of the path. Enough levels must be given for the highest term order.
    """
    jets = np.asarray(jets, dtype=np.complex128)
    need = form.arity + form.max_order + 1
    if jets.shape[0] < need:
        raise ValueError(f"need {need} jet levels, got {jets.shape[0]}")
    names = [list(form.slots[l]) if l < len(form.slots) else
             [_jet_name(l, c) for c in range(form.dim)] for l in range(jets.shape[0])]
    time = form.time or "_t"
    t = np.asarray(t, dtype=float)
    b = {time: t}
    for l, row in enumerate(names):
        for c, name in enumerate(row):
            b[name] = jets[l, c]
    out = np.zeros((len(form.rows), t.shape[0]), dtype=np.complex128)
    for r, row in enumerate(form.rows):
        for term in row:
            g = term.G
            for _ in range(term.order):
                g = _total_derivative(g, form, names, time)
            fv = np.broadcast_to(np.asarray(evaluate(term.F, b)), t.shape)
            gv = np.broadcast_to(np.asarray(evaluate(g, b)), t.shape)
            out[r] += fv * gv
    return out


def rev_params(p: FracParams, sign: int = 1) -> tuple[FracParams, int]:
    """Time reversal acts as ``Rev(D^{a,b}_mu) = -D^{b,a}_{-mu}``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return p.transposed(), -sign


def is_reversibility_preserving(p: FracParams, tol: float = 0.0) -> bool:
    """True iff ``alpha == beta`` and ``mu == 0`` (within ``tol``, default exact)."""
    return abs(p.alpha - p.beta) <= tol and abs(p.mu) <= tol
