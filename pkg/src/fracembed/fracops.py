r"""Discrete Riemann-Liouville operators on a uniform grid.

Left and right derivatives use Grünwald-Letnikov (GL) weights

.. math::

    w_0 = 1, \qquad w_k = w_{k-1} \left(1 - \frac{\alpha + 1}{k}\right),

so that the left matrix is lower triangular Toeplitz, the right matrix is its
transpose, and the uniform-weight inner product makes them exact adjoints.
The combined operator is

.. math::

    \mathcal{D}^{\alpha,\beta}_\mu = \tfrac12 (L_\alpha - R_\beta)
        + \tfrac{i\mu}{2} (L_\alpha + R_\beta).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fracembed import _core

__all__ = [
    "Grid",
    "GridFn",
    "FracParams",
    "OperatorMatrix",
    "gl_coefficients",
    "rl_left_derivative_matrix",
    "rl_right_derivative_matrix",
    "rl_left_integral",
    "dab_mu_matrix",
    "anchored_matrix",
    "d_alpha_reversible_matrix",
    "operator_power",
    "inner_product",
    "product_rule_defect",
    "interior_mask",
    "mirror",
    "read_gridfn_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_k = a + k h`` on ``[a, b]`` with ``n`` subintervals."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer n >= 2, got n={self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        t = self.a + self.h * np.arange(self.n + 1)
        t[-1] = self.b
        return t

    def sample(self, f: Callable[[np.ndarray], np.ndarray], *, real: bool = False) -> GridFn:
        return GridFn(self, f(self.nodes), real=real)

    def zeros(self) -> GridFn:
        return GridFn(self, np.zeros(self.n + 1))

    def interior_mask(self, order: float) -> np.ndarray:
        return interior_mask(self, order)


class GridFn:
    """Complex samples of a function on a :class:`Grid`.

    Values are stored read-only. ``real=True`` asserts that the imaginary
    parts vanish up to roundoff.
    """

    __slots__ = ("grid", "values", "real")

    def __init__(self, grid: Grid, values, *, real: bool = False) -> None:
        v = np.array(values, dtype=np.complex128).reshape(-1)
        if v.shape[0] != grid.n + 1:
            raise ValueError(f"expected {grid.n + 1} values, got {v.shape[0]}")
        if real:
            scale = max(1.0, float(np.max(np.abs(v.real), initial=0.0)))
            if np.max(np.abs(v.imag), initial=0.0) > 1e-12 * scale:
                raise ValueError("GridFn tagged real has nonzero imaginary part")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.real = real

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"GridFn(n={self.grid.n}, real={self.real})"

    def _coerce(self, other):
        if isinstance(other, GridFn):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.values
        return other

    def __add__(self, other) -> GridFn:
        return GridFn(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> GridFn:
        return GridFn(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other) -> GridFn:
        return GridFn(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other) -> GridFn:
        return GridFn(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> GridFn:
        return GridFn(self.grid, -self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re", "im"])
            for t, v in zip(self.grid.nodes, self.values):
                w.writerow([_fmt(t), _fmt(v.real), _fmt(v.imag)])


def read_gridfn_csv(path, grid: Grid | None = None) -> GridFn:
    """Read a ``t,re,im`` CSV written by :meth:`GridFn.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "re", "im"]:
        raise ValueError("expected header t,re,im")
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    if grid is None:
        grid = Grid(data[0, 0], data[-1, 0], data.shape[0] - 1)
    return GridFn(grid, data[:, 1] + 1j * data[:, 2])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FracParams:
    """Orders ``alpha``, ``beta`` > 0 and the complex mixing parameter ``mu``."""

    alpha: float
    beta: float
    mu: complex = 0.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"orders must be positive, got ({self.alpha}, {self.beta})")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "mu", complex(self.mu))

    @property
    def order(self) -> float:
        return max(self.alpha, self.beta)

    def transposed(self) -> FracParams:
        """Parameters ``(beta, alpha, -mu)`` of the adjoint-side operator."""
        return FracParams(self.beta, self.alpha, -self.mu)

    def coefficients(self) -> tuple[complex, complex]:
        """Weights of ``L_alpha`` and ``R_beta`` in the combined operator."""
        return 0.5 + 0.5j * self.mu, -0.5 + 0.5j * self.mu


class OperatorMatrix:
    """Dense ``(n+1) x (n+1)`` matrix of a linear operator on grid functions.

    ``kind`` is one of ``left-RL``, ``right-RL``, ``combined``, ``anchored``,
    ``power`` or ``custom``. Matrices assembled from GL stencils remember the
    stencil so that :meth:`apply` can use the fixed-order Toeplitz kernels.
    """

    __slots__ = ("grid", "entries", "kind", "_stencil")

    def __init__(self, grid: Grid, entries, kind: str = "custom", *, _stencil=None) -> None:
        e = np.asarray(entries)
        if e.shape != (grid.n + 1, grid.n + 1):
            raise ValueError(f"expected shape {(grid.n + 1,) * 2}, got {e.shape}")
        e.setflags(write=False)
        self.grid = grid
        self.entries = e
        self.kind = kind
        self._stencil = _stencil

    def __repr__(self) -> str:
        return f"OperatorMatrix(kind={self.kind!r}, n={self.grid.n})"

    @property
    def T(self) -> OperatorMatrix:
        return OperatorMatrix(self.grid, self.entries.T, "custom")

    def apply(self, x):
        """Apply to a :class:`GridFn` (returns one) or to a sample array."""
        if isinstance(x, GridFn):
            if x.grid != self.grid:
                raise ValueError("grid mismatch")
            return GridFn(self.grid, self._apply_array(x.values))
        return self._apply_array(np.asarray(x))

    def _apply_array(self, v: np.ndarray) -> np.ndarray:
        if v.ndim == 1 and self._stencil is not None:
            cl, wl, cr, wr = self._stencil
            v = v.astype(np.complex128)
            out = np.zeros(v.shape[0], dtype=np.complex128)
            if cl != 0:
                out += cl * _core.lower_toeplitz_apply(wl, v)
            if cr != 0:
                out += cr * _core.upper_toeplitz_apply(wr, v)
            return out
        return self.entries @ v

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return OperatorMatrix(self.grid, self.entries @ other.entries, "custom")
        return self.apply(other)

    def __add__(self, other: OperatorMatrix) -> OperatorMatrix:
        return OperatorMatrix(self.grid, self.entries + other.entries, "custom")

    def __sub__(self, other: OperatorMatrix) -> OperatorMatrix:
        return OperatorMatrix(self.grid, self.entries - other.entries, "custom")

    def __mul__(self, c) -> OperatorMatrix:
        return OperatorMatrix(self.grid, c * self.entries, "custom")

    __rmul__ = __mul__

    def __neg__(self) -> OperatorMatrix:
        return OperatorMatrix(self.grid, -self.entries, "custom")

    def to_csv(self, path) -> None:
        """Write nonzero entries in long format ``i,j,re,im``."""
        rows, cols = np.nonzero(self.entries)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "re", "im"])
            for i, j in zip(rows, cols):
                v = complex(self.entries[i, j])
                w.writerow([int(i), int(j), _fmt(v.real), _fmt(v.imag)])


def gl_coefficients(alpha: float, m: int) -> np.ndarray:
    """GL weights ``w_0..w_m`` (``(-1)^k`` times binomial ``(alpha, k)``)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if m < 0:
        raise ValueError("m must be non-negative")
    return _core.gl_weights(float(alpha), int(m))


def _toeplitz_lower(w: np.ndarray) -> np.ndarray:
    n = w.shape[0]
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    out = np.where(diff >= 0, w[np.clip(diff, 0, n - 1)], 0.0)
    return out


def rl_left_derivative_matrix(grid: Grid, alpha: float) -> OperatorMatrix:
    """GL discretization of the left RL derivative ``{}_aD_t^alpha``."""
    w = gl_coefficients(alpha, grid.n)
    scale = grid.h ** (-alpha)
    return OperatorMatrix(
        grid, scale * _toeplitz_lower(w), "left-RL", _stencil=(scale, w, 0.0, w)
    )


def rl_right_derivative_matrix(grid: Grid, alpha: float) -> OperatorMatrix:
    """GL discretization of the right RL derivative ``{}_tD_b^alpha``.

    At integer order ``m`` this realizes ``(-1)^m d^m/dt^m``.
    """
    w = gl_coefficients(alpha, grid.n)
    scale = grid.h ** (-alpha)
    return OperatorMatrix(
        grid, scale * _toeplitz_lower(w).T, "right-RL", _stencil=(0.0, w, scale, w)
    )


def rl_left_integral(grid: Grid, alpha: float, x: GridFn) -> GridFn:
    """Left RL integral of order ``alpha`` (GL weights of order ``-alpha``)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if x.grid != grid:
        raise ValueError("grid mismatch")
    w = _core.gl_weights(-float(alpha), grid.n)
    return GridFn(grid, grid.h**alpha * _core.lower_toeplitz_apply(w, x.values))


def _maybe_real(c: complex) -> complex | float:
    return c.real if c.imag == 0 else c


# Assembled matrices are read-only, so repeated requests (Newton loops) can
# share them. Large grids bypass the cache to bound memory.
_CACHE_MAX_N = 2048


def _cached(builder):
    memo = functools.lru_cache(maxsize=8)(builder)

    @functools.wraps(builder)
    def wrapper(grid: Grid, p: FracParams) -> OperatorMatrix:
        if grid.n > _CACHE_MAX_N:
            return builder(grid, p)
        return memo(grid, p)

    wrapper.cache_clear = memo.cache_clear
    return wrapper


@_cached
def dab_mu_matrix(grid: Grid, p: FracParams) -> OperatorMatrix:
    """Matrix of the combined operator ``D^{alpha,beta}_mu``.

    ``mu = -i`` gives the left matrix and ``mu = +i`` minus the right one,
    both exactly.
    """
    cl, cr = p.coefficients()
    wl = gl_coefficients(p.alpha, grid.n)
    wr = gl_coefficients(p.beta, grid.n)
    sl = _maybe_real(cl) * grid.h ** (-p.alpha)
    sr = _maybe_real(cr) * grid.h ** (-p.beta)
    entries = np.zeros((grid.n + 1, grid.n + 1), dtype=np.result_type(sl, sr))
    if sl != 0:
        entries += sl * _toeplitz_lower(wl)
    if sr != 0:
        entries += sr * _toeplitz_lower(wr).T
    return OperatorMatrix(grid, entries, "combined", _stencil=(sl, wl, sr, wr))


def _caputo_ramp_left(grid: Grid, alpha: float) -> np.ndarray:
    # left Caputo derivative of (t - a)/(b - a); linear functions are killed above order 1
    t = grid.nodes - grid.a
    if alpha < 1:
        return t ** (1.0 - alpha) / (math.gamma(2.0 - alpha) * (grid.b - grid.a))
    if alpha == 1:
        return np.full_like(t, 1.0 / (grid.b - grid.a))
    return np.zeros_like(t)


def _caputo_ramp_right(grid: Grid, beta: float) -> np.ndarray:
    # right Caputo derivative of (b - t)/(b - a)
    s = grid.b - grid.nodes
    if beta < 1:
        return s ** (1.0 - beta) / (math.gamma(2.0 - beta) * (grid.b - grid.a))
    if beta == 1:
        return np.full_like(s, 1.0 / (grid.b - grid.a))
    return np.zeros_like(s)


@_cached
def anchored_matrix(grid: Grid, p: FracParams) -> OperatorMatrix:
    r"""Combined operator acting on paths with nonzero endpoint values.

    A path is split as ``x = ell + y`` with ``ell`` the linear interpolant of
    ``x(a), x(b)`` and ``y`` vanishing at both ends. ``y`` goes through the GL
    matrix; ``ell`` is differentiated in closed form (Caputo sense), which
    keeps the result bounded at the endpoints. Only columns ``0`` and ``n``
    differ from :func:`dab_mu_matrix`, so the two agree on every grid
    function that vanishes at ``a`` and ``b``.
    """
    m = dab_mu_matrix(grid, p)
    cl, cr = p.coefficients()
    t = grid.nodes
    phi_b = (t - grid.a) / (grid.b - grid.a)
    phi_a = 1.0 - phi_b
    left_b = _caputo_ramp_left(grid, p.alpha)
    right_a = _caputo_ramp_right(grid, p.beta)
    # phi_a = 1 - phi_b and Caputo derivatives ignore constants
    exact_a = cl * (-left_b) + cr * right_a
    exact_b = cl * left_b + cr * (-right_a)
    e = m.entries.astype(np.result_type(m.entries, cl, cr), copy=True)
    e[:, 0] += _maybe_real_array(exact_a) - e @ phi_a
    e[:, -1] += _maybe_real_array(exact_b) - m.entries @ phi_b
    if not np.iscomplexobj(m.entries):
        e = e.real if np.all(e.imag == 0) else e
    return OperatorMatrix(grid, e, "anchored")


def _maybe_real_array(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.all(v.imag == 0):
        return v.real
    return v


def d_alpha_reversible_matrix(grid: Grid, alpha: float, *, literal: bool = True) -> OperatorMatrix:
    """Reversible operator of order ``alpha``.

    ``literal=True`` gives ``(L_alpha + R_alpha) / 2``, which commutes with
    :func:`mirror`. ``literal=False`` gives ``D^{alpha,alpha}_0 =
    (L_alpha - R_alpha) / 2``, which anticommutes with it.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not literal:
        return dab_mu_matrix(grid, FracParams(alpha, alpha, 0.0))
    w = gl_coefficients(alpha, grid.n)
    s = 0.5 * grid.h ** (-alpha)
    lo = _toeplitz_lower(w)
    return OperatorMatrix(grid, s * (lo + lo.T), "custom", _stencil=(s, w, s, w))


def operator_power(m: OperatorMatrix, i: int) -> OperatorMatrix:
    if i < 0:
        raise ValueError("power must be non-negative")
    if i == 1:
        return m
    return OperatorMatrix(m.grid, np.linalg.matrix_power(m.entries, i), "power")


def inner_product(f: GridFn, g: GridFn) -> complex:
    """Uniform-weight rule ``h * sum_k f(t_k) g(t_k)`` (no conjugation).

    Both endpoints carry full weight, which is what makes the transpose of a
    matrix its exact discrete adjoint.
    """
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    return complex(f.grid.h * np.sum(f.values * g.values))


def product_rule_defect(f: GridFn, g: GridFn, p: FracParams, *, tol: float = 1e-12) -> float:
    """``|<D f, g> + <f, D' g>|`` with ``D' = D^{beta,alpha}_{-mu}``.

    Requires ``f`` or ``g`` to vanish at both endpoints.
    """
    if f.grid != g.grid:
        raise ValueError("grid mismatch")

    def vanishes(u: GridFn) -> bool:
        scale = max(1.0, float(np.max(np.abs(u.values))))
        return abs(u.values[0]) <= tol * scale and abs(u.values[-1]) <= tol * scale

    if not (vanishes(f) or vanishes(g)):
        raise ValueError("f or g must vanish at both endpoints")
    d = dab_mu_matrix(f.grid, p)
    dt = dab_mu_matrix(f.grid, p.transposed())
    return abs(inner_product(d.apply(f), g) + inner_product(f, dt.apply(g)))


def interior_mask(grid: Grid, order: float) -> np.ndarray:
    """True on nodes used for residual norms; ``ceil(order)+1`` dropped per end."""
    k = int(math.ceil(order - 1e-12)) + 1
    mask = np.zeros(grid.n + 1, dtype=bool)
    if 2 * k < grid.n + 1:
        mask[k : grid.n + 1 - k] = True
    return mask


def mirror(x):
    """Reverse node order (time reversal about the grid midpoint)."""
    if isinstance(x, GridFn):
        return GridFn(x.grid, x.values[::-1])
    if isinstance(x, OperatorMatrix):
        return OperatorMatrix(x.grid, x.entries[::-1, ::-1], "custom")
    return np.asarray(x)[..., ::-1]
