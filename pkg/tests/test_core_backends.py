"""Compiled kernels against the numpy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracembed import _core
from fracembed._core import python_backend as py

cy = _core.compiled_backend
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled extension not built")

orders = st.floats(min_value=-0.95, max_value=2.0, allow_nan=False).filter(lambda a: abs(a) > 1e-3)


def _rand_complex(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(alpha=orders, m=st.integers(min_value=0, max_value=300))
def test_gl_weights_parity(alpha, m):
    np.testing.assert_allclose(cy.gl_weights(alpha, m), py.gl_weights(alpha, m), rtol=1e-13, atol=1e-300)


@needs_compiled
@settings(max_examples=30, deadline=None)
@given(alpha=orders, n=st.integers(min_value=1, max_value=200), seed=st.integers(0, 2**16))
def test_toeplitz_parity(alpha, n, seed):
    rng = np.random.default_rng(seed)
    w = py.gl_weights(alpha, n)
    x = _rand_complex(rng, n)
    np.testing.assert_allclose(cy.lower_toeplitz_apply(w, x), py.lower_toeplitz_apply(w, x),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(cy.upper_toeplitz_apply(w, x), py.upper_toeplitz_apply(w, x),
                               rtol=1e-12, atol=1e-12)


@needs_compiled
def test_history_sum_parity():
    rng = np.random.default_rng(3)
    w = py.gl_weights(0.6, 40)
    v = rng.normal(size=(41, 7))
    for j in (0, 1, 5, 40):
        np.testing.assert_allclose(cy.history_sum(w, v, j), py.history_sum(w, v, j), atol=1e-13)


@needs_compiled
def test_thomas_parity():
    rng = np.random.default_rng(4)
    n = 50
    sub, sup = rng.normal(size=n), rng.normal(size=n)
    diag = 4.0 + np.abs(rng.normal(size=n))
    rhs = rng.normal(size=n)
    np.testing.assert_allclose(cy.thomas(sub, diag, sup, rhs), py.thomas(sub, diag, sup, rhs), rtol=1e-12)


def test_thomas_matches_dense_solve():
    rng = np.random.default_rng(5)
    n = 30
    sub, sup = rng.normal(size=n), rng.normal(size=n)
    diag = 4.0 + np.abs(rng.normal(size=n))
    A = np.diag(diag) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    rhs = rng.normal(size=n)
    np.testing.assert_allclose(_core.thomas(sub, diag, sup, rhs), np.linalg.solve(A, rhs), rtol=1e-12)


def test_lower_toeplitz_matches_dense():
    rng = np.random.default_rng(6)
    w = py.gl_weights(0.4, 20)
    x = _rand_complex(rng, 21)
    T = np.array([[w[i - j] if i >= j else 0.0 for j in range(21)] for i in range(21)])
    np.testing.assert_allclose(_core.lower_toeplitz_apply(w, x), T @ x, atol=1e-13)
    np.testing.assert_allclose(_core.upper_toeplitz_apply(w, x), T.T @ x, atol=1e-13)


def test_gl_weights_integer_order_is_finite_difference():
    np.testing.assert_array_equal(py.gl_weights(1.0, 4), [1.0, -1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(py.gl_weights(2.0, 3), [1.0, -2.0, 1.0, 0.0])


def test_backend_name():
    assert _core.BACKEND in ("compiled", "python")


def test_pure_python_switch_gives_same_diffusion(tmp_path):
    import subprocess
    import sys

    code = (
        "import numpy as np, fracembed\n"
        "from fracembed.fields import FieldGrid, solve_frac_diffusion\n"
        "u = solve_frac_diffusion(0.7, 1.0, FieldGrid(0.1, 1.0, 32, 16), lambda x: np.sin(np.pi*x))\n"
        "print(fracembed.BACKEND)\n"
        "np.save(r'%s', u.values)\n"
    )
    outs = {}
    for flag in ("", "1"):
        target = tmp_path / f"u{flag or 'c'}.npy"
        env = {"FRACEMBED_PURE_PYTHON": flag} if flag else {}
        import os

        full_env = {k: v for k, v in os.environ.items() if k != "FRACEMBED_PURE_PYTHON"}
        full_env.update(env)
        res = subprocess.run([sys.executable, "-c", code % target], env=full_env,
                             capture_output=True, text=True, check=True)
        outs[flag] = (res.stdout.strip(), np.load(target))
    assert outs["1"][0] == "python"
    np.testing.assert_allclose(outs[""][1], outs["1"][1], rtol=1e-12, atol=1e-14)
