"""Kernel backend selection.

The compiled extension is used when it imports; set ``FRACEMBED_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("FRACEMBED_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

gl_weights = _active.gl_weights
lower_toeplitz_apply = _active.lower_toeplitz_apply
upper_toeplitz_apply = _active.upper_toeplitz_apply
history_sum = _active.history_sum
thomas = _active.thomas

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "gl_weights",
    "lower_toeplitz_apply",
    "upper_toeplitz_apply",
    "history_sum",
    "thomas",
]
