"""Pure numpy versions of the compiled kernels (same signatures)."""

import numpy as np
from scipy.linalg import solve_banded


def gl_weights(alpha: float, m: int) -> np.ndarray:
    k = np.arange(1, m + 1, dtype=np.float64)
    return np.concatenate(([1.0], np.cumprod(1.0 - (alpha + 1.0) / k)))


def lower_toeplitz_apply(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    return np.convolve(w[:n], x)[:n].astype(np.complex128)


def upper_toeplitz_apply(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return lower_toeplitz_apply(w, x[::-1])[::-1].copy()


def history_sum(w: np.ndarray, v: np.ndarray, j: int) -> np.ndarray:
    if j == 0:
        return np.zeros(v.shape[1])
    return w[1 : j + 1] @ v[j - 1 :: -1]


def thomas(sub, diag, sup, rhs) -> np.ndarray:
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = diag
    ab[2, :-1] = sub[1:]
    try:
        return solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise ZeroDivisionError("singular tridiagonal system") from exc
