"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each row
reports the best-of-N wall time per call for both backends and checks
that they agree before timing.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fracembed import _core
from fracembed.fields import FieldGrid


def _cases(rng):
    for n in (1024, 4096):
        w = _core.python_backend.gl_weights(0.6, n)
        x = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        yield f"gl_weights n={n}", "gl_weights", (0.6, n)
        yield f"lower_toeplitz_apply n={n}", "lower_toeplitz_apply", (w, x)
        yield f"upper_toeplitz_apply n={n}", "upper_toeplitz_apply", (w, x)
    for nt, m in ((512, 255), (2048, 127)):
        w = _core.python_backend.gl_weights(0.8, nt)
        v = np.ascontiguousarray(rng.normal(size=(nt + 1, m)))
        yield f"history_sum nt={nt} m={m} j={nt}", "history_sum", (w, v, nt)
    for m in (255, 4095):
        sub = np.full(m, -1.0)
        dia = np.full(m, 4.0)
        yield f"thomas m={m}", "thomas", (sub, dia, sub.copy(), rng.normal(size=m))


def _time(fn, args, repeat):
    number = max(1, int(0.05 / max(min(timeit.repeat(lambda: fn(*args), number=1, repeat=3)), 1e-7)))
    best = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat))
    return best / number


def _diffusion_wall(pure: bool) -> float:
    env = dict(os.environ)
    env.pop("FRACEMBED_PURE_PYTHON", None)
    if pure:
        env["FRACEMBED_PURE_PYTHON"] = "1"
    code = (
        "import time, numpy as np\n"
        "from fracembed.fields import FieldGrid, solve_frac_diffusion\n"
        "fg = FieldGrid(0.1, 1.0, 2048, 128)\n"
        "t0 = time.perf_counter()\n"
        "solve_frac_diffusion(0.8, 1.0, fg, lambda x: np.sin(np.pi * x))\n"
        "print(time.perf_counter() - t0)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core.compiled_backend is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'compiled':>12s} {'python':>12s} {'speedup':>8s}")
    for label, name, call in _cases(rng):
        fc = getattr(_core.compiled_backend, name)
        fp = getattr(_core.python_backend, name)
        np.testing.assert_allclose(fc(*call), fp(*call), rtol=1e-10, atol=1e-12)
        tc, tp = _time(fc, call, args.repeat), _time(fp, call, args.repeat)
        print(f"{label:42s} {tc * 1e6:10.1f}us {tp * 1e6:10.1f}us {tp / tc:7.2f}x")
    tc, tp = _diffusion_wall(False), _diffusion_wall(True)
    label = f"solve_frac_diffusion nt=2048 nx={FieldGrid(0.1, 1.0, 2048, 128).nx}"
    print(f"{label:42s} {tc * 1e3:10.1f}ms {tp * 1e3:10.1f}ms {tp / tc:7.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
