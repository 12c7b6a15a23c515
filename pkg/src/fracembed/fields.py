r"""Time-fractional field equations on ``[0, T] x [0, X]``.

Fractional derivatives act in time only; space derivatives are classical
(centered differences). Initial data enter through the shifted form
:math:`\mathbb{D}^\alpha (u - u_0)`, which turns sine modes into
Mittag-Leffler decays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import mpmath
import numpy as np

from fracembed import _core
from fracembed.fracops import FracParams, Grid, _fmt, anchored_matrix, dab_mu_matrix, interior_mask
from fracembed.symbolic import Expr, SymbolTable, diff, evaluate, free_vars, parse, substitute

__all__ = [
    "FieldGrid",
    "Field",
    "DensitySpec",
    "DomainError",
    "felf_residual",
    "felf_mask",
    "solve_frac_diffusion",
    "solve_frac_wave",
    "mittag_leffler",
    "mode_amplitude",
]


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class FieldGrid:
    T: float
    X: float
    nt: int
    nx: int

    def __post_init__(self) -> None:
        if self.nt < 2 or self.nx < 3:
            raise ValueError("need nt >= 2 and nx >= 3")
        if not (self.T > 0 and self.X > 0):
            raise ValueError("T and X must be positive")

    @property
    def time(self) -> Grid:
        return Grid(0.0, self.T, self.nt)

    @property
    def space(self) -> Grid:
        return Grid(0.0, self.X, self.nx)

    @property
    def ht(self) -> float:
        return self.T / self.nt

    @property
    def hx(self) -> float:
        return self.X / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt + 1, self.nx + 1)


class Field:
    """Samples ``u[j, k]`` at ``(t_j, x_k)``."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: FieldGrid, values) -> None:
        v = np.array(values, dtype=np.complex128)
        if v.shape != grid.shape:
            raise ValueError(f"expected shape {grid.shape}, got {v.shape}")
        v.setflags(write=False)
        self.grid = grid
        self.values = v

    def to_csv(self, path) -> None:
        t, x = self.grid.time.nodes, self.grid.space.nodes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "re", "im"])
            for j, tj in enumerate(t):
                for k, xk in enumerate(x):
                    z = self.values[j, k]
                    w.writerow([_fmt(tj), _fmt(xk), _fmt(z.real), _fmt(z.imag)])


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """Density ``L(t, x, y, v, w)``: ``y`` the field, ``v`` its time slot, ``w`` its space slot."""

    expr: Expr

    SLOTS = ("t", "x", "y", "v", "w")

    def __post_init__(self) -> None:
        extra = free_vars(self.expr) - set(self.SLOTS)
        if extra:
            raise ValueError(f"density refers to undeclared slots {sorted(extra)}")

    @classmethod
    def from_string(cls, text: str, parameters: Mapping[str, float] | None = None) -> DensitySpec:
        params = dict(parameters or {})
        table = SymbolTable.build(parameters=params, time="t", position=["x"],
                                  field=["y"], velocity=["v", "w"])
        e = parse(text, table)
        return cls(substitute(e, params) if params else e)

    def _eval(self, e: Expr, b: dict, shape) -> np.ndarray:
        return np.broadcast_to(np.asarray(evaluate(e, b), dtype=np.complex128), shape).copy()


def felf_mask(fg: FieldGrid, p: FracParams) -> np.ndarray:
    mt = interior_mask(fg.time, p.order)
    mx = np.zeros(fg.nx + 1, dtype=bool)
    mx[2:-2] = True
    return mt[:, None] & mx[None, :]


def felf_residual(density: DensitySpec, u: Field, p: FracParams) -> Field:
    """``dL/dy - D'[dL/dv] - d/dx[dL/dw]`` with ``D' = D^{beta,alpha}_{-mu}`` in time.

    The time slot is filled column by column with the boundary-lifted
    operator; the space slot and the outer space derivative are centered
    differences. Use :func:`felf_mask` for norms.
    """
    fg = u.grid
    t = fg.time.nodes[:, None]
    x = fg.space.nodes[None, :]
    y = u.values
    v = anchored_matrix(fg.time, p).entries @ y
    w = np.gradient(y, fg.hx, axis=1, edge_order=2)
    b = {"t": t, "x": x, "y": y, "v": v, "w": w}
    sh = fg.shape
    ly = density._eval(diff(density.expr, "y"), b, sh)
    lv = density._eval(diff(density.expr, "v"), b, sh)
    lw = density._eval(diff(density.expr, "w"), b, sh)
    dt = dab_mu_matrix(fg.time, p.transposed()).entries
    res = ly - dt @ lv - np.gradient(lw, fg.hx, axis=1, edge_order=2)
    return Field(fg, res)


def _profile(fg: FieldGrid, f) -> np.ndarray:
    x = fg.space.nodes
    if f is None:
        return np.zeros_like(x)
    if callable(f):
        return np.asarray(f(x), dtype=float) * np.ones_like(x)
    arr = np.asarray(f, dtype=float)
    if arr.shape != x.shape:
        raise ValueError("initial profile has the wrong length")
    return arr


def _laplacian_rhs(u: np.ndarray, hx: float) -> np.ndarray:
    """``delta^2 u`` at interior nodes (boundary values included)."""
    return (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (hx * hx)


def solve_frac_diffusion(alpha: float, a2: float, fg: FieldGrid,
                         u0: Callable | np.ndarray | None, bc: tuple[float, float] = (0.0, 0.0),
                         *, initialization: str = "shifted") -> Field:
    """Implicit GL scheme for ``D^alpha (u - u0) = a2 u_xx`` with Dirichlet data.

    Each step solves ``(I - ht^alpha a2 delta^2) u_j = u0 - sum_{k>=1} w_k (u_{j-k} - u0)``
    with a tridiagonal solve. ``alpha = 1`` is backward Euler.

    ``initialization="rl"`` drops the shift and applies the operator to ``u``
    itself, so ``u0`` only enters through the history term. It has no
    Mittag-Leffler oracle and carries the ``t^(-alpha)`` start-up layer.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if initialization not in ("shifted", "rl"):
        raise ValueError("initialization must be 'shifted' or 'rl'")
    if not a2 > 0:
        raise ValueError("a2 must be positive")
    nt, nx, hx = fg.nt, fg.nx, fg.hx
    init = _profile(fg, u0)
    w = _core.gl_weights(float(alpha), nt)
    r = fg.ht**alpha * a2 / (hx * hx)
    m = nx - 1
    sub = np.full(m, -r)
    sup = np.full(m, -r)
    dia = np.full(m, 1.0 + 2.0 * r)
    u = np.zeros((nt + 1, nx + 1))
    u[0] = init
    u[1:, 0], u[1:, -1] = bc
    shifted = np.zeros((nt + 1, m))
    base = init[1:-1] if initialization == "shifted" else np.zeros(m)
    shifted[0] = init[1:-1] - base
    for j in range(1, nt + 1):
        rhs = base - _core.history_sum(w, shifted, j)
        rhs[0] += r * u[j, 0]
        rhs[-1] += r * u[j, -1]
        u[j, 1:-1] = _core.thomas(sub, dia, sup, rhs)
        shifted[j] = u[j, 1:-1] - base
    return Field(fg, u)


def solve_frac_wave(alpha: float, rho: float, T0: float, fg: FieldGrid,
                    u0: Callable | np.ndarray | None, v0: Callable | np.ndarray | None = None,
                    bc: tuple[float, float] = (0.0, 0.0), *, paper_literal_sign: bool = False) -> Field:
    r"""Implicit GL scheme of order ``gamma = 2 alpha`` for the shifted wave equation.

    Solves :math:`\rho\, \mathbb{D}^{\gamma}(u - u_0 - t v_0) = s\, T_0\, u_{xx}` with
    ``s = +1`` (classical sign) or ``s = -1`` (``paper_literal_sign``). The
    space operator is averaged over three levels with weights
    ``(1 - 3 gamma/8, gamma/4, gamma/8)``; at ``gamma = 2`` this is the
    (1/4, 1/2, 1/4) average of the classical implicit scheme, and for
    ``gamma < 2`` it damps stiff modes. The level ``j = -1`` is taken as
    ``u0 - ht v0``.
    """
    if not 0.5 < alpha <= 1:
        raise ValueError("alpha must lie in (1/2, 1]")
    if not (rho > 0 and T0 > 0):
        raise ValueError("rho and T0 must be positive")
    gamma = 2.0 * alpha
    s = -1.0 if paper_literal_sign else 1.0
    nt, nx, hx, ht = fg.nt, fg.nx, fg.hx, fg.ht
    init = _profile(fg, u0)
    vel = _profile(fg, v0)
    w = _core.gl_weights(gamma, nt)
    th0, th1, th2 = 1.0 - 3.0 * gamma / 8.0, gamma / 4.0, gamma / 8.0
    c = s * ht**gamma * T0 / rho
    r = c * th0 / (hx * hx)
    m = nx - 1
    sub = np.full(m, -r)
    sup = np.full(m, -r)
    dia = np.full(m, 1.0 + 2.0 * r)
    u = np.zeros((nt + 1, nx + 1))
    u[0] = init
    u[1:, 0], u[1:, -1] = bc
    t = fg.time.nodes
    phi = init[None, :] + t[:, None] * vel[None, :]
    shifted = np.zeros((nt + 1, m))
    prev2 = init - ht * vel
    for j in range(1, nt + 1):
        um1 = u[j - 1]
        um2 = u[j - 2] if j >= 2 else prev2
        rhs = phi[j, 1:-1] - _core.history_sum(w, shifted, j)
        rhs += c * (th1 * _laplacian_rhs(um1, hx) + th2 * _laplacian_rhs(um2, hx))
        rhs[0] += r * u[j, 0]
        rhs[-1] += r * u[j, -1]
        try:
            u[j, 1:-1] = _core.thomas(sub, dia, sup, rhs)
        except ZeroDivisionError:
            raise ArithmeticError(f"tridiagonal solve failed at step {j}") from None
        shifted[j] = u[j, 1:-1] - phi[j, 1:-1]
    return Field(fg, u)


def mode_amplitude(u: Field, m: int = 1) -> np.ndarray:
    """Discrete sine coefficient of ``sin(m pi x / X)`` at every time level."""
    nx = u.grid.nx
    k = np.arange(nx + 1)
    s = np.sin(m * np.pi * k / nx)
    return (2.0 / nx) * (u.values @ s)


_ML_MAX_DIGITS = 2000


def _ml_series(alpha: float, z: complex, extra_digits: int) -> complex:
    with mpmath.workdps(30 + extra_digits):
        zz = mpmath.mpc(z)
        a = mpmath.mpf(alpha)
        total = mpmath.mpc(0)
        k = 0
        while True:
            term = zz**k / mpmath.gamma(a * k + 1)
            total += term
            if k > 5 and abs(term) < mpmath.mpf(10) ** (-30) * max(abs(total), mpmath.mpf(10) ** -300):
                # beyond the peak of |term| the tail decays geometrically
                if abs(zz) ** (1 / a) < k:
                    break
            k += 1
        return complex(total)


def _ml_negative_real(alpha: float, x: float) -> complex:
    # complete monotonicity: E_a(-t^a) = int_0^inf exp(-r t) K_a(r) dr for 0 < a < 1
    with mpmath.workdps(30):
        a = mpmath.mpf(alpha)
        t = mpmath.mpf(x) ** (1 / a)
        s, c = mpmath.sin(a * mpmath.pi), mpmath.cos(a * mpmath.pi)

        def k(r):
            return mpmath.exp(-r * t) * r ** (a - 1) * s / (mpmath.pi * (r ** (2 * a) + 2 * r**a * c + 1))

        return complex(mpmath.quad(k, [0, 1, mpmath.inf]))


def mittag_leffler(alpha: float, z: complex, *, method: str = "auto") -> complex:
    """``E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`` for ``|z| <= 50``, ``alpha >= 0.3``.

    The series is summed in extended precision sized to the cancellation
    (peak term about ``exp(|z|^(1/alpha))``). On the negative real axis with
    ``alpha < 1`` the Laplace-integral representation is used when the
    series would need more than a few thousand digits; ``method`` can force
    ``"series"`` or ``"integral"``.
    """
    z = complex(z)
    if alpha < 0.3 or abs(z) > 50:
        raise DomainError("mittag_leffler needs alpha >= 0.3 and |z| <= 50")
    if method not in ("auto", "series", "integral"):
        raise ValueError("method must be auto, series or integral")
    negative_real = z.imag == 0 and z.real < 0 and alpha < 1
    if method == "integral":
        if not negative_real:
            raise DomainError("the integral route covers negative real z with alpha < 1")
        return _ml_negative_real(alpha, -z.real)
    digits = int(math.ceil(abs(z) ** (1.0 / alpha) / math.log(10))) + 5
    if digits > _ML_MAX_DIGITS or (method == "auto" and negative_real and digits > 60):
        if method == "series" or not negative_real:
            raise DomainError("series evaluation exceeds the precision budget")
        return _ml_negative_real(alpha, -z.real)
    return _ml_series(alpha, z, digits)
