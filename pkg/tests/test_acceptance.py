"""One test per acceptance criterion; each prints a PASS/FAIL line with its tolerance."""

import math
from pathlib import Path

import mpmath
import numpy as np

from fracembed.cli import EXIT_OK, main
from fracembed.embedding import is_reversibility_preserving
from fracembed.fields import FieldGrid, mittag_leffler, mode_amplitude, solve_frac_diffusion, solve_frac_wave
from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    dab_mu_matrix,
    inner_product,
    interior_mask,
    rl_left_derivative_matrix,
)
from fracembed.lagrangian import LagrangianSpec
from fracembed.ostro import friction_reduction_check, whittaker_check
from fracembed.variational import (
    BVProblem,
    action,
    coherence_report,
    conservation_check,
    differential,
    hamilton_action,
    legendre_transform,
    noether_residual,
    solve_fel,
    solve_frac_hamiltonian,
)

from .oracles import GAMMA_RATIO_T2_HALF, HEAT_MODE_T01

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
OSC = LagrangianSpec.from_string("0.5*v^2 - 0.5*om^2*x^2", parameters={"om": math.pi / 2})
FREE2 = LagrangianSpec.from_string("(v1^2 + v2^2)/2", positions=("x1", "x2"), velocities=("v1", "v2"))


def verdict(number: int, ok: bool, detail: str) -> None:
    print(f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _sup(v, mask):
    return float(np.max(np.abs(np.asarray(v)[mask])))


def test_01_gluing_reduction():
    tol, lo, hi, floor = 5e-3, 1.7, 2.3, 1e-10
    lines, ok = [], True
    for mu in (0, 1, 1j, -1j):
        errs = []
        for n in (1024, 2048):
            g = Grid(0, 1, n)
            d = dab_mu_matrix(g, FracParams(1, 1, mu)).apply(g.nodes**2)
            errs.append(_sup(d - 2 * g.nodes, interior_mask(g, 1.0)))
        if errs[0] <= floor:
            # the central stencil is exact on quadratics; no rate to measure
            good = errs[1] <= floor
            lines.append(f"mu={mu}: err={errs[0]:.2e} (exact to roundoff)")
        else:
            ratio = errs[0] / errs[1]
            good = errs[0] <= tol and lo <= ratio <= hi
            lines.append(f"mu={mu}: err={errs[0]:.2e} ratio={ratio:.3f}")
        ok &= good
    verdict(1, ok, f"sup err <= {tol}, ratio in [{lo}, {hi}]; " + "; ".join(lines))


def test_02_power_function_oracle():
    tol = 1e-2
    closed = math.gamma(3) / math.gamma(2.5)
    with mpmath.workdps(30):
        def rl_integral(t):
            return mpmath.quad(lambda s: (t - s) ** (-0.5) * s**2, [0, t]) / mpmath.gamma(0.5)
        quad_route = float(mpmath.diff(rl_integral, 1))
    routes_agree = abs(closed - GAMMA_RATIO_T2_HALF) <= 1e-14 and abs(quad_route - closed) <= 1e-8
    g = Grid(0, 1, 4096)
    val = rl_left_derivative_matrix(g, 0.5).apply(g.nodes**2)[-1].real
    rel = abs(val - closed) / closed
    verdict(2, routes_agree and rel <= tol,
            f"GL value {val:.6f} vs {closed:.6f} (quadrature route {quad_route:.9f}), rel {rel:.2e} <= {tol}")


def test_03_exact_product_rule():
    tol = 1e-10
    g = Grid(0, 1, 512)
    p = FracParams(0.6, 0.3, 0.7)
    f = GridFn(g, g.nodes**2 * (1 - g.nodes) ** 2)
    d, dt = dab_mu_matrix(g, p), dab_mu_matrix(g, p.transposed())
    defect = abs(inner_product(d.apply(f), f) + inner_product(f, dt.apply(f)))
    norm = abs(inner_product(f, f))
    verdict(3, defect <= tol * norm, f"defect {defect:.2e} <= {tol} * |f||g| = {tol * norm:.2e}")


def test_04_semigroup_reduction():
    tol = 2e-2
    errs = []
    for n in (1024, 2048, 4096):
        g = Grid(0, 1, n)
        t = g.nodes
        x = t**3 * (1 - t) ** 3
        xd = 3 * t**2 * (1 - t) ** 3 - 3 * t**3 * (1 - t) ** 2
        m = rl_left_derivative_matrix(g, 0.5)
        errs.append(_sup(m.apply(m.apply(x)) - xd, interior_mask(g, 1.0)))
    ok = errs[-1] <= tol and errs[0] > errs[1] > errs[2]
    verdict(4, ok, "sup err n=1024,2048,4096: " + ", ".join(f"{e:.2e}" for e in errs) + f" (<= {tol}, decreasing)")


def test_05_coherence():
    tol = 1e-12
    vals = {}
    for p in (FracParams(0.6, 0.6, 0), FracParams(0.35, 0.35, 0), FracParams(1, 1, 0)):
        rep = coherence_report(OSC, p, Grid(0, 1, 256))
        vals[(p.alpha, p.beta)] = rep["reversible_gap_relative"].value
    ok = all(v <= tol for v in vals.values())
    verdict(5, ok, f"relative gaps {vals} <= {tol}")


def test_06_gradient_check():
    tol, eps = 1e-6, 1e-5
    lags = [OSC, LagrangianSpec.from_string("0.5*v^2 + 0.25*v^4 - cos(x)"),
            LagrangianSpec.from_string("0.5*v^2 + t*x*v + x^3/3")]
    p = FracParams(0.6, 0.8, 0.4)
    g = Grid(0, 1, 64)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for L in lags:
        for _ in range(20):
            x = GridFn(g, 0.5 * rng.normal(size=g.n + 1))
            h = rng.normal(size=g.n + 1)
            h[0] = h[-1] = 0
            an = differential(L, x, GridFn(g, h), p)
            fd = (action(L, GridFn(g, x.values + eps * h), p) - action(L, GridFn(g, x.values - eps * h), p)) / (2 * eps)
            worst = max(worst, abs(an - fd) / max(abs(an), 1.0))
    verdict(6, worst <= tol, f"max relative mismatch over 60 pairs {worst:.2e} <= {tol}")


def test_07_fel_solve_oscillator():
    tol = 1e-3
    g = Grid(0, 1, 1024)
    sol = solve_fel(BVProblem(OSC, g, FracParams(1, 1, 0), 0.0, 1.0))
    err = float(np.max(np.abs(sol.x[0].values - np.sin(math.pi * g.nodes / 2))))
    verdict(7, sol.converged and err <= tol, f"sup error {err:.3e} <= {tol} (converged={sol.converged})")


def test_08_noether():
    g = Grid(0, 1, 256)
    rot = ["-x2", "x1"]
    out = {}
    p1 = FracParams(1, 1, 0)
    s1 = solve_fel(BVProblem(FREE2, g, p1, (1.0, 0.0), (0.0, 1.0)))
    scale1 = max(1.0, max(float(np.max(np.abs(c.values))) for c in s1.x))
    out["classical"] = _sup(noether_residual(FREE2, s1.x, rot, p1).values, interior_mask(g, 1.0))
    ok = out["classical"] <= 1e-6 * scale1
    p2 = FracParams(0.7, 0.7, 0)
    s2 = solve_fel(BVProblem(FREE2, g, p2, (1.0, 0.0), (0.0, 1.0)))
    opnorm = float(np.linalg.norm(dab_mu_matrix(g, p2).entries, np.inf))
    out["fractional"] = _sup(noether_residual(FREE2, s2.x, rot, p2).values, interior_mask(g, 0.7))
    ok &= out["fractional"] <= 1e-10 * opnorm
    out["drift"] = conservation_check(FREE2, s1.x, rot)
    ok &= out["drift"] <= 1e-6
    sc = solve_fel(BVProblem(OSC, g, p1, 0.0, 1.0))
    out["control_drift"] = conservation_check(OSC, sc.x[0], "1")
    ok &= out["control_drift"] >= 1e-2
    verdict(8, ok, ", ".join(f"{k}={v:.2e}" for k, v in out.items())
            + f" (<= 1e-6*scale, <= 1e-10*{opnorm:.0f}, <= 1e-6, >= 1e-2)")


def test_09_hamiltonian_equivalence():
    g = Grid(0, 1, 256)
    p = FracParams(0.7, 0.9, 0)
    H = legendre_transform(OSC)
    sol = solve_fel(BVProblem(OSC, g, p, 0.0, 1.0))
    hs = solve_frac_hamiltonian(H, g, p, 0.0, 1.0)
    agree = float(np.max(np.abs(hs.x.values - sol.x[0].values)))
    rng = np.random.default_rng(5)
    eps, grad = 1e-5, 0.0
    for _ in range(10):
        hx = rng.normal(size=g.n + 1)
        hx[0] = hx[-1] = 0
        hp = rng.normal(size=g.n + 1)
        plus = hamilton_action(H, GridFn(g, hs.x.values + eps * hx), GridFn(g, hs.pfn.values + eps * hp), p)
        minus = hamilton_action(H, GridFn(g, hs.x.values - eps * hx), GridFn(g, hs.pfn.values - eps * hp), p)
        grad = max(grad, abs(plus - minus) / (2 * eps))
    verdict(9, hs.converged and agree <= 1e-8 and grad <= 1e-6,
            f"x agreement {agree:.2e} <= 1e-8, action gradient {grad:.2e} <= 1e-6")


def test_10_friction_reduction():
    tol = 5e-2
    gaps = [friction_reduction_check(0.5, 1.0, "x^2/2", Grid(0, 1, n))["gap_sup"].value for n in (1024, 2048, 4096)]
    ok = gaps[-1] <= tol and gaps[0] > gaps[1] > gaps[2]
    verdict(10, ok, "gap n=1024,2048,4096: " + ", ".join(f"{v:.2e}" for v in gaps) + f" (<= {tol}, decreasing)")


def test_11_whittaker_diagnostic():
    tol = 2e-2
    rep = whittaker_check(Grid(0, 1, 2048))
    terms = {c.name: c.value for c in rep.checks if c.op != "info"}
    gaps = {k: rep[k].value for k in ("literal_vs_scaled_whittaker_eq1", "literal_vs_scaled_whittaker_eq2")}
    ok = all(v <= tol for v in terms.values())
    verdict(11, ok, "term-wise " + ", ".join(f"{k}={v:.2e}" for k, v in terms.items())
            + f" (<= {tol}); reported gaps " + ", ".join(f"{k}={v:.2e}" for k, v in gaps.items()))


def test_12_fractional_diffusion():
    T = 0.1

    def sine_amp(alpha, nt):
        fg = FieldGrid(T, 1.0, nt, 256)
        return mode_amplitude(solve_frac_diffusion(alpha, 1.0, fg, lambda x: np.sin(np.pi * x)))[-1].real

    e1 = abs(sine_amp(1.0, 256) - HEAT_MODE_T01) / HEAT_MODE_T01
    ref = mittag_leffler(0.8, -math.pi**2 * T**0.8).real
    e08 = abs(sine_amp(0.8, 256) - ref) / ref
    e08c = abs(sine_amp(0.8, 128) - ref) / ref
    ratio = e08c / e08
    ok = e1 <= 1e-2 and e08 <= 2e-2 and 1.6 <= ratio <= 2.4
    verdict(12, ok, f"alpha=1 rel {e1:.2e} <= 1e-2; alpha=0.8 rel {e08:.2e} <= 2e-2; ratio {ratio:.3f} in [1.6, 2.4]")


def test_13_fractional_wave():
    tol = 1e-2
    fg = FieldGrid(2.0, 1.0, 1024, 128)
    u = solve_frac_wave(1.0, 1.0, 1.0, fg, lambda x: np.sin(np.pi * x))
    t, x = fg.time.nodes[:, None], fg.space.nodes[None, :]
    err = float(np.max(np.abs(u.values - np.cos(np.pi * t) * np.sin(np.pi * x))))
    verdict(13, err <= tol, f"max error over one period {err:.2e} <= {tol}")


def test_14_reversibility_predicate():
    table = {
        (0.5, 0.5, 0.0): True, (0.8, 0.8, 0.0): True, (1.0, 1.0, 0.0): True,
        (0.5, 0.7, 0.0): False, (1.0, 0.6, 0.0): False,
        (0.5, 0.5, 1.0): False, (0.5, 0.5, 1j): False, (0.5, 0.5, 1e-9): False,
    }
    got = {k: is_reversibility_preserving(FracParams(*k)) for k in table}
    bad = [k for k in table if got[k] is not table[k]]
    verdict(14, not bad, f"{len(table)} cases, mismatches {bad}")


def test_15_cli_end_to_end(tmp_path):
    runs = []
    codes = {}
    for k in range(2):
        root = tmp_path / f"run{k}"
        for cfg in sorted(CONFIGS.glob("*.json")):
            codes[(k, cfg.stem)] = main(["run", str(cfg), "--out", str(root / cfg.stem)])
        runs.append({str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    failed = sorted({name for (k, name), c in codes.items() if c != EXIT_OK})
    csvs = [n for n in runs[0] if n.endswith(".csv")]
    same = runs[0] == runs[1]
    ok = not failed and same and len(csvs) >= 11 and len(codes) == 22
    verdict(15, ok, f"{len(codes) // 2} experiments x2, non-zero exits {failed}, {len(csvs)} CSV files, "
            f"byte-identical={same}")
