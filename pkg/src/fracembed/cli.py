"""``frac-embed``: run registered experiments from JSON configs.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 numerical failure (a diagnostic report is still written).
"""

from __future__ import annotations

import argparse
import csv
from importlib import metadata
import json
import math
import platform
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import jsonschema
import mpmath
import numpy as np

from fracembed import __version__
from fracembed import _core
from fracembed.fields import (
    FieldGrid,
    mittag_leffler,
    mode_amplitude,
    solve_frac_diffusion,
    solve_frac_wave,
)
from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    _fmt,
    anchored_matrix,
    dab_mu_matrix,
    gl_coefficients,
    interior_mask,
    product_rule_defect,
)
from fracembed.lagrangian import LagrangianSpec
from fracembed.ostro import friction_reduction_check, whittaker_check
from fracembed.report import Report
from fracembed.symbolic import ParseError, SymbolTable, diff, evaluate, parse
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

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# schema fragments

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_N = {"type": "integer", "minimum": 4}
_EXPR = {"type": "string", "minLength": 1}
_NAMES = {"type": "array", "items": {"type": "string"}, "minItems": 1}
_COMPLEX = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_PARAMS = {
    "type": "object",
    "properties": {"alpha": _POS, "beta": _POS, "mu": _COMPLEX},
    "required": ["alpha", "beta"],
    "additionalProperties": False,
}
_PARAM_LIST = {"type": "array", "items": _PARAMS, "minItems": 1}
_NS = {"type": "array", "items": _N, "minItems": 1}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC = {"type": "array", "items": _COMPLEX, "minItems": 1}
_CONSTS = {"type": "object", "additionalProperties": _NUM}
_LAGRANGIAN = {
    "type": "object",
    "properties": {
        "expr": _EXPR,
        "positions": _NAMES,
        "velocities": _NAMES,
        "parameters": _CONSTS,
    },
    "required": ["expr"],
    "additionalProperties": False,
}
_GRID = {
    "type": "object",
    "properties": {"a": _NUM, "b": _NUM, "n": _N},
    "required": ["n"],
    "additionalProperties": False,
}


def _obj(props: dict, required: Sequence[str] = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


# --------------------------------------------------------------------------
# run context


class RunContext:
    def __init__(self, out: Path, tolerances: dict, literal_sign: bool, write_fields: bool) -> None:
        self.out = out
        self.tolerances = tolerances
        self.literal_sign = literal_sign
        self.write_fields = write_fields
        self.artifacts: list[str] = []

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(header))
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.artifacts.append(name)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return _fmt(float(v))


# --------------------------------------------------------------------------
# config helpers


def _complex(v) -> complex:
    if isinstance(v, list):
        return complex(v[0], v[1])
    return complex(v)


def _params(d: dict) -> FracParams:
    return FracParams(d["alpha"], d["beta"], _complex(d.get("mu", 0.0)))


def _tag(p: FracParams) -> str:
    mu = p.mu
    m = _g(mu.real) if mu.imag == 0 else f"{_g(mu.real)}{'+' if mu.imag >= 0 else '-'}{_g(abs(mu.imag))}i"
    return f"({_g(p.alpha)},{_g(p.beta)},{m})"


def _g(x: float) -> str:
    return f"{x:.12g}"


def _grid(d: dict) -> Grid:
    return Grid(d.get("a", 0.0), d.get("b", 1.0), d["n"])


def _sample(text: str, var: str, parameters: dict | None = None) -> Callable[[np.ndarray], np.ndarray]:
    params = dict(parameters or {})
    e = parse(text, SymbolTable.build(parameters=params, time=[var]))

    def f(s: np.ndarray) -> np.ndarray:
        b = dict(params)
        b[var] = s
        return np.broadcast_to(np.asarray(evaluate(e, b), dtype=np.complex128), s.shape).copy()

    f.expr = e
    return f


def _derivative(f, var: str, parameters: dict | None = None):
    de = diff(f.expr, var)
    params = dict(parameters or {})

    def g(s: np.ndarray) -> np.ndarray:
        b = dict(params)
        b[var] = s
        return np.broadcast_to(np.asarray(evaluate(de, b), dtype=np.complex128), s.shape).copy()

    return g


def _lagrangian(d: dict) -> LagrangianSpec:
    return LagrangianSpec.from_string(
        d["expr"],
        positions=tuple(d.get("positions", ["x"])),
        velocities=tuple(d.get("velocities", ["v"])),
        parameters=d.get("parameters"),
    )


def _real_or_complex(vals: Sequence) -> list:
    out = [_complex(v) for v in vals]
    return [z.real if z.imag == 0 else z for z in out]


def _finite(name: str, arr) -> None:
    if not np.all(np.isfinite(np.asarray(arr))):
        raise NumericalFailure(f"non-finite values in {name}")


def _sup(v: np.ndarray, mask: np.ndarray | None = None) -> float:
    v = np.abs(np.asarray(v))
    if mask is not None:
        v = v[..., mask]
    return float(np.max(v, initial=0.0))


def _refinement(rep: Report, errs: dict, label: str) -> None:
    ns = sorted(errs)
    for n in ns:
        rep.info(f"{label}[n={n}]", errs[n])
    if len(ns) > 1:
        ratios = [errs[b] / errs[a] for a, b in zip(ns, ns[1:]) if errs[a] > 0]
        rep.add(f"{label}_max_successive_ratio", max(ratios) if ratios else 0.0, 1.0)


# --------------------------------------------------------------------------
# experiments


def _run_ops_gluing(cfg: dict, ctx: RunContext) -> Report:
    a, b = cfg["interval"]
    f = _sample(cfg["x"], "t")
    df = _derivative(f, "t")
    nc = cfg["n_check"]
    ns = sorted(set(cfg["ns"]) | {nc, 2 * nc})
    rep = Report("ops-gluing: D^{1,1}_mu versus d/dt")
    rows = []
    for mu in cfg["mus"]:
        p = FracParams(1.0, 1.0, _complex(mu))
        errs = {}
        for n in ns:
            g = Grid(a, b, n)
            y = dab_mu_matrix(g, p).apply(f(g.nodes))
            errs[n] = _sup(y - df(g.nodes), interior_mask(g, 1.0))
            rows.append([p.mu.real, p.mu.imag, n, g.h, errs[n]])
        tag = _tag(p)
        rep.add(f"sup_error{tag}", errs[nc], ctx.tol("sup_error"))
        # an exact stencil leaves nothing to refine
        if errs[nc] > ctx.tol("roundoff_floor"):
            r = errs[nc] / errs[2 * nc]
            rep.add(f"refinement_ratio_low{tag}", r, ctx.tol("ratio_min"), ">=")
            rep.add(f"refinement_ratio_high{tag}", r, ctx.tol("ratio_max"))
    ctx.csv("gluing.csv", ["mu_re", "mu_im", "n", "h", "sup_error"], rows)

    po = cfg["power_oracle"]
    alpha, k, n = po["alpha"], po["power"], po["n"]
    g = Grid(0.0, 1.0, n)
    w = gl_coefficients(alpha, n)
    gl = g.h ** (-alpha) * _core.lower_toeplitz_apply(w, (g.nodes**k).astype(np.complex128))
    closed = math.gamma(k + 1) / math.gamma(k + 1 - alpha)
    with mpmath.workdps(30):
        def integral(t):
            return mpmath.quad(lambda s: (t - s) ** (-alpha) * s**k, [0, t]) / mpmath.gamma(1 - alpha)
        quad = float(mpmath.diff(integral, 1))
    rep.add("power_oracle_rel_error", abs(gl[-1].real - closed) / closed, ctx.tol("power_rel"))
    rep.add("power_oracle_routes_agree", abs(quad - closed) / closed, ctx.tol("routes_agree"))
    rep.data["power_oracle"] = {"gl": gl[-1].real, "gamma_ratio": closed, "quadrature": quad}
    return rep


def _run_product_rule(cfg: dict, ctx: RunContext) -> Report:
    g = _grid(cfg["grid"])
    p = _params(cfg["params"])
    f = GridFn(g, _sample(cfg["f"], "t")(g.nodes))
    h = GridFn(g, _sample(cfg["g"], "t")(g.nodes))
    defect = product_rule_defect(f, h, p)
    nf = math.sqrt(g.h * float(np.sum(np.abs(f.values) ** 2)))
    nh = math.sqrt(g.h * float(np.sum(np.abs(h.values) ** 2)))
    rep = Report(f"product-rule {_tag(p)} n={g.n}")
    rep.add("relative_defect", defect / max(nf * nh, 1e-300), ctx.tol("relative_defect"))
    rep.info("defect", defect)
    df = dab_mu_matrix(g, p).apply(f).values
    dg = dab_mu_matrix(g, p.transposed()).apply(h).values
    ctx.csv("product-rule.csv", ["t", "re(Df)", "im(Df)", "re(D'g)", "im(D'g)"],
            ([t, a.real, a.imag, c.real, c.imag] for t, a, c in zip(g.nodes, df, dg)))
    return rep


def _run_semigroup(cfg: dict, ctx: RunContext) -> Report:
    alpha = cfg["alpha"]
    k = round(1.0 / alpha)
    if abs(k * alpha - 1.0) > 1e-12:
        raise ConfigError("semigroup needs 1/alpha to be an integer")
    a, b = cfg["interval"]
    f = _sample(cfg["x"], "t")
    df = _derivative(f, "t")
    rep = Report(f"semigroup: (L_{alpha})^{k} versus d/dt")
    errs, gaps, rows = {}, {}, []
    for n in sorted(cfg["ns"]):
        g = Grid(a, b, n)
        w, w1 = gl_coefficients(alpha, n), gl_coefficients(1.0, n)
        y = f(g.nodes)
        for _ in range(k):
            y = g.h ** (-alpha) * _core.lower_toeplitz_apply(w, y)
        l1 = _core.lower_toeplitz_apply(w1, f(g.nodes)) / g.h
        mask = interior_mask(g, 1.0)
        errs[n] = _sup(y - df(g.nodes), mask)
        gaps[n] = _sup(y - l1, mask) / max(_sup(l1, mask), 1e-300)
        rows.append([n, g.h, errs[n], gaps[n]])
    nmax = max(errs)
    rep.add(f"sup_error[n={nmax}]", errs[nmax], ctx.tol("sup_error"))
    _refinement(rep, errs, "error")
    rep.info("power_vs_first_order_matrix_relative", max(gaps.values()))
    ctx.csv("semigroup.csv", ["n", "h", "sup_error", "identity_gap"], rows)
    return rep


def _solve(prob: BVProblem):
    sol = solve_fel(prob)
    if not sol.converged:
        raise NumericalFailure(f"solve_fel did not converge ({', '.join(sol.flags)})")
    return sol


def _run_solve_fel(cfg: dict, ctx: RunContext) -> Report:
    L = _lagrangian(cfg["lagrangian"])
    g = _grid(cfg["grid"])
    p = _params(cfg["params"])
    prob = BVProblem(L, g, p, _real_or_complex(cfg["xa"]), _real_or_complex(cfg["xb"]),
                     cfg["variation"])
    sol = _solve(prob)
    rep = Report(f"solve-fel {_tag(p)} n={g.n}")
    rep.info("residual_interior", sol.residual_interior(p.order))
    rep.info("iterations", sol.iterations)
    rep.info("imag_norm", sol.imag_norm)
    if cfg.get("exact"):
        if len(cfg["exact"]) != L.dim:
            raise ConfigError("exact needs one expression per component")
        err = max(_sup(x.values - _sample(e, "t")(g.nodes))
                  for x, e in zip(sol.x, cfg["exact"]))
        rep.add("sup_error", err, ctx.tol("sup_error"))
    sol.to_csv(ctx.out / "solution.csv", names=list(L.positions))
    ctx.artifacts.append("solution.csv")
    return rep


def _random_path(rng, t: np.ndarray, d: int, vanish: bool) -> np.ndarray:
    tau = (t - t[0]) / (t[-1] - t[0])
    out = np.zeros((d, t.size))
    for c in range(d):
        if not vanish:
            out[c] = rng.normal() * (1 - tau) + rng.normal() * tau
        for k in range(1, 5):
            out[c] += 0.3 * rng.normal() * np.sin(k * np.pi * tau)
    return out


def _run_coherence(cfg: dict, ctx: RunContext) -> Report:
    L = _lagrangian(cfg["lagrangian"])
    g = _grid(cfg["grid"])
    rep = Report("coherence: embedded versus variational Euler-Lagrange")
    rows = []
    for pd in cfg["params"]:
        p = _params(pd)
        sub = coherence_report(L, p, g)
        rep.merge(sub, prefix=f"{_tag(p)} ")
        gap = sub.fields["gap"]
        for c in range(gap.shape[0]):
            rows += [[p.alpha, p.beta, p.mu.real, p.mu.imag, c, t, abs(v)]
                     for t, v in zip(g.nodes, gap[c])]
    ctx.csv("coherence-gap.csv", ["alpha", "beta", "mu_re", "mu_im", "component", "t", "gap_abs"], rows)

    gc = cfg["gradient"]
    gg = Grid(0.0, 1.0, gc["n"])
    p = _params(gc["params"])
    rng = np.random.default_rng(gc["seed"])
    eps = gc["eps"]
    worst, grows = 0.0, []
    for li, text in enumerate(gc["lagrangians"]):
        Lg = _lagrangian({"expr": text})
        for j in range(gc["pairs"]):
            xr = _random_path(rng, gg.nodes, Lg.dim, vanish=False)
            hr = _random_path(rng, gg.nodes, Lg.dim, vanish=True)
            hr[:, 0] = hr[:, -1] = 0.0
            x = [GridFn(gg, r) for r in xr]
            hd = [GridFn(gg, r) for r in hr]
            an = differential(Lg, x, hd, p)
            fd = (action(Lg, [GridFn(gg, r) for r in xr + eps * hr], p)
                  - action(Lg, [GridFn(gg, r) for r in xr - eps * hr], p)) / (2 * eps)
            rel = abs(an - fd) / max(abs(an), 1e-300)
            worst = max(worst, rel)
            grows.append([li, j, an.real, an.imag, fd.real, fd.imag, rel])
    rep.add("gradient_rel_error", worst, ctx.tol("gradient_rel"))
    ctx.csv("gradient.csv", ["lagrangian", "pair", "analytic_re", "analytic_im", "fd_re", "fd_im",
                             "rel_error"], grows)
    return rep


def _op_norm(m: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(m), axis=1)))


def _run_noether(cfg: dict, ctx: RunContext) -> Report:
    L = _lagrangian(cfg["lagrangian"])
    g = _grid(cfg["grid"])
    xa, xb = _real_or_complex(cfg["xa"]), _real_or_complex(cfg["xb"])
    xi = cfg["generator"]
    rep = Report("noether: fractional conservation along extremals")
    rows = []
    for pd in cfg["params"]:
        p = _params(pd)
        sol = _solve(BVProblem(L, g, p, xa, xb))
        res = noether_residual(L, sol.x, xi, p).values
        z = anchored_matrix(g, p).entries
        lv_scale = max(1.0, _sup(np.array([v.values for v in sol.x])))
        scale = lv_scale * (_op_norm(dab_mu_matrix(g, p.transposed()).entries) + _op_norm(z))
        mask = interior_mask(g, p.order)
        rep.add(f"noether_residual{_tag(p)}", _sup(res, mask) / scale, ctx.tol("noether"))
        rows += [[p.alpha, p.beta, p.mu.real, p.mu.imag, t, v.real, v.imag]
                 for t, v in zip(g.nodes, res)]
    classical = FracParams(1.0, 1.0, 0.0)
    sol = _solve(BVProblem(L, g, classical, xa, xb))
    rep.add("classical_drift", conservation_check(L, sol.x, xi, classical), ctx.tol("drift"))
    nc = cfg["negative_control"]
    Lc = _lagrangian(nc["lagrangian"])
    solc = _solve(BVProblem(Lc, g, classical, _real_or_complex(nc["xa"]), _real_or_complex(nc["xb"])))
    rep.add("negative_control_drift", conservation_check(Lc, solc.x, nc["generator"], classical),
            ctx.tol("control_drift_min"), ">=")
    ctx.csv("noether.csv", ["alpha", "beta", "mu_re", "mu_im", "t", "re", "im"], rows)
    return rep


def _run_hamiltonian(cfg: dict, ctx: RunContext) -> Report:
    L = _lagrangian(cfg["lagrangian"])
    g = _grid(cfg["grid"])
    xa, xb = _complex(cfg["xa"]), _complex(cfg["xb"])
    xa, xb = (xa.real if xa.imag == 0 else xa), (xb.real if xb.imag == 0 else xb)
    H = legendre_transform(L)
    rng = np.random.default_rng(cfg["seed"])
    eps = cfg["eps"]
    rep = Report("hamiltonian: Lagrangian versus Hamiltonian extremals")
    rows = []
    for pd in cfg["params"]:
        p = _params(pd)
        sol = _solve(BVProblem(L, g, p, xa, xb))
        hs = solve_frac_hamiltonian(H, g, p, xa, xb)
        if not hs.converged:
            raise NumericalFailure(f"solve_frac_hamiltonian did not converge ({', '.join(hs.flags)})")
        xl, xh = sol.x[0].values, hs.x.values
        rep.add(f"agreement{_tag(p)}", _sup(xl - xh) / max(1.0, _sup(xl)), ctx.tol("agreement"))
        dt = anchored_matrix(g, p)
        worst = 0.0
        for _ in range(cfg["directions"]):
            dx = np.zeros(g.n + 1)
            dx[1:-1] = rng.normal(size=g.n - 1)
            dp = rng.normal(size=g.n + 1)
            plus = hamilton_action(H, GridFn(g, xh + eps * dx), GridFn(g, hs.pfn.values + eps * dp), p)
            minus = hamilton_action(H, GridFn(g, xh - eps * dx), GridFn(g, hs.pfn.values - eps * dp), p)
            fd = (plus - minus) / (2 * eps)
            terms = (np.abs(hs.pfn.values * dt.apply(dx)) + np.abs(dp * dt.apply(xh))
                     + np.abs(H.dH_dp(g.nodes, xh, hs.pfn.values) * dp)
                     + np.abs(H.dH_dx(g.nodes, xh, hs.pfn.values) * dx))
            worst = max(worst, abs(fd) / max(g.h * float(np.sum(terms)), 1e-300))
        rep.add(f"action_gradient{_tag(p)}", worst, ctx.tol("gradient"))
        rows += [[p.alpha, p.beta, p.mu.real, p.mu.imag, t, a.real, a.imag, c.real, c.imag, q.real, q.imag]
                 for t, a, c, q in zip(g.nodes, xl, xh, hs.pfn.values)]
    ctx.csv("hamiltonian.csv", ["alpha", "beta", "mu_re", "mu_im", "t", "re(x_fel)", "im(x_fel)",
                                "re(x_ham)", "im(x_ham)", "re(p)", "im(p)"], rows)
    return rep


def _run_friction(cfg: dict, ctx: RunContext) -> Report:
    rep = Report(f"friction reduction gamma={cfg['gamma']} m={cfg['m']}")
    errs, last = {}, None
    for n in sorted(cfg["ns"]):
        g = Grid(0.0, 1.0, n)
        sub = friction_reduction_check(cfg["gamma"], cfg["m"], cfg["U"], g, tol=ctx.tol("gap_sup"))
        errs[n] = sub["gap_sup"].value
        last = (g, sub)
    nmax = max(errs)
    rep.add(f"gap_sup[n={nmax}]", errs[nmax], ctx.tol("gap_sup"))
    _refinement(rep, errs, "gap")
    g, sub = last
    emb, cl, gap = sub.fields["embedded"], sub.fields["classical"], sub.fields["gap"]
    ctx.csv("friction.csv", ["t", "re(embedded)", "im(embedded)", "classical", "gap_abs"],
            ([t, e.real, e.imag, c.real, abs(d)] for t, e, c, d in zip(g.nodes, emb, cl, gap)))
    ctx.csv("friction-refinement.csv", ["n", "gap_sup"], sorted(errs.items()))
    return rep


def _run_whittaker(cfg: dict, ctx: RunContext) -> Report:
    p = _params(cfg["params"])
    rep = Report(f"whittaker {_tag(p)}")
    rows = []
    for n in sorted(cfg["ns"]):
        sub = whittaker_check(Grid(0.0, 1.0, n), p, tol=ctx.tol("reduction"))
        rep.merge(sub, prefix=f"[n={n}] ")
        rows += [[n, c.name, c.value] for c in sub.checks]
    ctx.csv("whittaker.csv", ["n", "quantity", "value"], rows)
    return rep


def _ml_oracle(alpha: float, rate: float, t: np.ndarray) -> np.ndarray:
    if alpha == 1.0:
        return np.exp(-rate * t)
    return np.array([mittag_leffler(alpha, -rate * tt**alpha).real for tt in t])


def _run_diffusion(cfg: dict, ctx: RunContext) -> Report:
    T, X, a2, m = cfg["T"], cfg["X"], cfg["a2"], cfg["mode"]
    u0 = _sample(cfg["u0"], "x")
    rate = a2 * (m * math.pi / X) ** 2
    rep = Report("diffusion: sine-mode decay versus Mittag-Leffler")

    def run(alpha, nt, nx):
        fg = FieldGrid(T, X, nt, nx)
        u = solve_frac_diffusion(alpha, a2, fg, lambda x: u0(x).real)
        _finite("diffusion field", u.values)
        return fg, u

    rows = []
    for alpha in cfg["alphas"]:
        fg, u = run(alpha, cfg["nt"], cfg["nx"])
        amp = mode_amplitude(u, m).real
        stride = max(1, fg.nt // 64)
        t = fg.time.nodes
        idx = np.unique(np.r_[np.arange(0, fg.nt + 1, stride), fg.nt])
        oracle = amp[0] * _ml_oracle(alpha, rate, t[idx])
        rel = np.abs(amp[idx] - oracle) / np.abs(oracle)
        key = "rel_error_classical" if alpha == 1.0 else "rel_error"
        rep.add(f"final_rel_error[alpha={_g(alpha)}]", rel[-1], ctx.tol(key))
        s = u.values.real.sum(axis=1)
        rep.add(f"mass_increase[alpha={_g(alpha)}]", max(0.0, float(np.max(np.diff(s)))) / max(abs(s[0]), 1e-300),
                ctx.tol("mass_increase"))
        leak = max(_sup(mode_amplitude(u, k)) for k in range(1, 9) if k != m)
        rep.add(f"mode_leakage[alpha={_g(alpha)}]", leak / max(abs(amp[0]), 1e-300), ctx.tol("orthogonality"))
        rows += [[alpha, t[i], amp[i], o, r] for i, o, r in zip(idx, oracle, rel)]
        if ctx.write_fields:
            name = f"diffusion-field-alpha{_g(alpha)}.csv"
            u.to_csv(ctx.out / name)
            ctx.artifacts.append(name)
    ctx.csv("diffusion-modes.csv", ["alpha", "t", "amplitude", "oracle", "rel_error"], rows)

    ref = cfg["refinement"]
    alpha = ref["alpha"]
    errs = {}
    for nt in sorted(ref["nts"]):
        fg, u = run(alpha, nt, cfg["nx"])
        amp = mode_amplitude(u, m).real
        oracle = amp[0] * _ml_oracle(alpha, rate, np.array([T]))[0]
        errs[nt] = abs(amp[-1] - oracle) / abs(oracle)
    nts = sorted(errs)
    ratios = [errs[a] / errs[b] for a, b in zip(nts, nts[1:])]
    for nt in nts:
        rep.info(f"refinement_error[alpha={_g(alpha)},nt={nt}]", errs[nt])
    rep.add("refinement_ratio_low", min(ratios), ctx.tol("ratio_min"), ">=")
    rep.add("refinement_ratio_high", max(ratios), ctx.tol("ratio_max"))
    ctx.csv("diffusion-refinement.csv", ["alpha", "nt", "final_rel_error"],
            ([alpha, nt, errs[nt]] for nt in nts))
    return rep


def _run_wave(cfg: dict, ctx: RunContext) -> Report:
    T, X, rho, T0, m = cfg["T"], cfg["X"], cfg["rho"], cfg["T0"], cfg["mode"]
    u0 = _sample(cfg["u0"], "x")
    v0 = _sample(cfg["v0"], "x")
    literal = ctx.literal_sign or cfg["paper_literal_sign"]
    omega2 = (T0 / rho) * (m * math.pi / X) ** 2
    rep = Report("wave: standing-mode amplitude" + (" (literal sign)" if literal else ""))
    rep.data["sign"] = "literal" if literal else "classical"
    rows = []
    for alpha in cfg["alphas"]:
        fg = FieldGrid(T, X, cfg["nt"], cfg["nx"])
        u = solve_frac_wave(alpha, rho, T0, fg, lambda x: u0(x).real, lambda x: v0(x).real,
                            paper_literal_sign=literal)
        _finite("wave field", u.values)
        amp = mode_amplitude(u, m).real
        t = fg.time.nodes
        stride = max(1, fg.nt // 128)
        idx = np.unique(np.r_[np.arange(0, fg.nt + 1, stride), fg.nt])
        if alpha == 1.0:
            oracle = amp[0] * np.cos(math.sqrt(omega2) * t[idx])
        else:
            oracle = amp[0] * _ml_oracle(2 * alpha, omega2, t[idx])
        err = _sup(amp[idx] - oracle) / max(_sup(oracle), 1e-300)
        name = f"sup_rel_error[alpha={_g(alpha)}]"
        if literal:
            rep.info(name, err)
        else:
            rep.add(name, err, ctx.tol("rel_error_classical" if alpha == 1.0 else "rel_error"))
        rows += [[alpha, t[i], amp[i], o] for i, o in zip(idx, oracle)]
        if ctx.write_fields:
            fname = f"wave-field-alpha{_g(alpha)}.csv"
            u.to_csv(ctx.out / fname)
            ctx.artifacts.append(fname)
    ctx.csv("wave-modes.csv", ["alpha", "t", "amplitude", "oracle"], rows)
    return rep


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Experiment:
    name: str
    summary: str
    properties: dict
    defaults: dict
    tolerances: dict
    runner: Callable[[dict, RunContext], Report]


_OSC = {"expr": "0.5*v^2 - 0.5*x^2"}

EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in [
    Experiment(
        "ops-gluing", "D^{1,1}_mu reduces to d/dt; GL power-function oracle",
        {"x": _EXPR, "interval": _INTERVAL, "ns": _NS, "n_check": _N,
         "mus": {"type": "array", "items": _COMPLEX, "minItems": 1},
         "power_oracle": _obj({"alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                               "power": {"type": "integer", "minimum": 0}, "n": _N})},
        {"x": "t^2", "interval": [0.0, 1.0], "ns": [512, 1024, 2048], "n_check": 1024,
         "mus": [0, 1, [0, 1], [0, -1]], "power_oracle": {"alpha": 0.5, "power": 2, "n": 4096}},
        {"sup_error": 5e-3, "ratio_min": 1.7, "ratio_max": 2.3, "roundoff_floor": 1e-10,
         "power_rel": 1e-2, "routes_agree": 1e-8},
        _run_ops_gluing),
    Experiment(
        "product-rule", "exact discrete integration by parts",
        {"f": _EXPR, "g": _EXPR, "params": _PARAMS, "grid": _GRID},
        {"f": "t^2*(1-t)^2", "g": "t^2*(1-t)^2", "params": {"alpha": 0.6, "beta": 0.3, "mu": 0.7},
         "grid": {"a": 0.0, "b": 1.0, "n": 512}},
        {"relative_defect": 1e-10},
        _run_product_rule),
    Experiment(
        "semigroup", "(L_alpha)^k approximates d/dt on vanishing samples",
        {"x": _EXPR, "alpha": _POS, "interval": _INTERVAL, "ns": _NS},
        {"x": "t^3*(1-t)^3", "alpha": 0.5, "interval": [0.0, 1.0], "ns": [1024, 2048, 4096]},
        {"sup_error": 2e-2},
        _run_semigroup),
    Experiment(
        "solve-fel", "fractional Euler-Lagrange boundary-value solve",
        {"lagrangian": _LAGRANGIAN, "params": _PARAMS, "grid": _GRID, "xa": _VEC, "xb": _VEC,
         "exact": {"type": "array", "items": _EXPR}, "variation": {"enum": ["full", "weak"]}},
        {"lagrangian": {"expr": "0.5*v^2 + x"}, "params": {"alpha": 1.0, "beta": 1.0},
         "grid": {"a": 0.0, "b": 1.0, "n": 1024}, "xa": [0.0], "xb": [1.0],
         "exact": ["t^2/2 + t/2"], "variation": "full"},
        {"sup_error": 1e-3},
        _run_solve_fel),
    Experiment(
        "coherence", "embedded versus variational Euler-Lagrange gap; gradient check",
        {"lagrangian": _LAGRANGIAN, "params": _PARAM_LIST, "grid": _GRID,
         "gradient": _obj({"lagrangians": {"type": "array", "items": _EXPR, "minItems": 1},
                           "params": _PARAMS, "n": _N, "pairs": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer"}, "eps": _POS})},
        {"lagrangian": _OSC,
         "params": [{"alpha": 0.7, "beta": 0.7}, {"alpha": 1.0, "beta": 1.0},
                    {"alpha": 0.6, "beta": 0.4, "mu": 0.3}],
         "grid": {"a": 0.0, "b": 1.0, "n": 256},
         "gradient": {"lagrangians": ["0.5*v^2 - 0.5*x^2", "0.5*v^2 + 0.1*v^4 - x^2",
                                      "0.5*cos(x)*v^2 + t*x*v"],
                      "params": {"alpha": 0.7, "beta": 0.5, "mu": 0.3}, "n": 64, "pairs": 20,
                      "seed": 0, "eps": 1e-5}},
        {"gradient_rel": 1e-6},
        _run_coherence),
    Experiment(
        "noether", "fractional Noether residual and conservation drift",
        {"lagrangian": _LAGRANGIAN, "generator": {"type": "array", "items": _EXPR, "minItems": 1},
         "params": _PARAM_LIST, "grid": _GRID, "xa": _VEC, "xb": _VEC,
         "negative_control": _obj({"lagrangian": _LAGRANGIAN,
                                   "generator": {"type": "array", "items": _EXPR, "minItems": 1},
                                   "xa": _VEC, "xb": _VEC})},
        {"lagrangian": {"expr": "0.5*(v1^2 + v2^2)", "positions": ["x1", "x2"],
                        "velocities": ["v1", "v2"]},
         "generator": ["-x2", "x1"],
         "params": [{"alpha": 1.0, "beta": 1.0}, {"alpha": 0.7, "beta": 0.7}],
         "grid": {"a": 0.0, "b": 1.0, "n": 256}, "xa": [1.0, 0.0], "xb": [0.0, 1.0],
         "negative_control": {"lagrangian": _OSC, "generator": ["1"], "xa": [0.0], "xb": [1.0]}},
        {"noether": 1e-6, "drift": 1e-6, "control_drift_min": 1e-2},
        _run_noether),
    Experiment(
        "hamiltonian", "Lagrangian and Hamiltonian fractional extremals agree",
        {"lagrangian": _LAGRANGIAN, "params": _PARAM_LIST, "grid": _GRID, "xa": _COMPLEX,
         "xb": _COMPLEX, "directions": {"type": "integer", "minimum": 1},
         "seed": {"type": "integer"}, "eps": _POS},
        {"lagrangian": _OSC, "params": [{"alpha": 1.0, "beta": 1.0}, {"alpha": 0.7, "beta": 0.7}],
         "grid": {"a": 0.0, "b": 1.0, "n": 256}, "xa": 0.0, "xb": 1.0, "directions": 8,
         "seed": 0, "eps": 1e-6},
        {"agreement": 1e-8, "gradient": 1e-6},
        _run_hamiltonian),
    Experiment(
        "friction", "embedded friction Lagrangian reduces to the damped equation",
        {"gamma": _NUM, "m": _POS, "U": _EXPR, "ns": _NS},
        {"gamma": 0.5, "m": 1.0, "U": "x^2/2", "ns": [1024, 2048, 4096]},
        {"gap_sup": 5e-2},
        _run_friction),
    Experiment(
        "whittaker", "term-wise reductions of the embedded Whittaker system",
        {"params": _PARAMS, "ns": _NS},
        {"params": {"alpha": 0.5, "beta": 0.5, "mu": [0, -1]}, "ns": [2048, 4096]},
        {"reduction": 2e-2},
        _run_whittaker),
    Experiment(
        "diffusion", "time-fractional diffusion against Mittag-Leffler decay",
        {"alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "minItems": 1},
         "a2": _POS, "T": _POS, "X": _POS, "nt": _N, "nx": _N, "u0": _EXPR,
         "mode": {"type": "integer", "minimum": 1},
         "refinement": _obj({"alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                             "nts": {"type": "array", "items": _N, "minItems": 2}})},
        {"alphas": [1.0, 0.8], "a2": 1.0, "T": 0.1, "X": 1.0, "nt": 256, "nx": 256,
         "u0": "sin(pi*x)", "mode": 1, "refinement": {"alpha": 0.8, "nts": [128, 256, 512]}},
        {"rel_error_classical": 1e-2, "rel_error": 2e-2, "ratio_min": 1.6, "ratio_max": 2.4,
         "mass_increase": 1e-12, "orthogonality": 1e-10},
        _run_diffusion),
    Experiment(
        "wave", "time-fractional wave equation standing mode",
        {"alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 1},
                    "minItems": 1},
         "rho": _POS, "T0": _POS, "T": _POS, "X": _POS, "nt": _N, "nx": _N, "u0": _EXPR, "v0": _EXPR,
         "mode": {"type": "integer", "minimum": 1}, "paper_literal_sign": {"type": "boolean"}},
        {"alphas": [1.0, 0.9], "rho": 1.0, "T0": 1.0, "T": 2.0, "X": 1.0, "nt": 1024, "nx": 128,
         "u0": "sin(pi*x)", "v0": "0", "mode": 1, "paper_literal_sign": False},
        {"rel_error_classical": 1e-2, "rel_error": 3e-2},
        _run_wave),
]}


def config_schema(name: str) -> dict:
    exp = EXPERIMENTS[name]
    props = {
        "experiment": {"const": name},
        "description": {"type": "string"},
        "tolerances": {"type": "object", "propertyNames": {"enum": sorted(exp.tolerances)},
                       "additionalProperties": _POS},
        "output": _obj({"write_fields": {"type": "boolean"}}),
    }
    props.update(exp.properties)
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "type": "object",
            "properties": props, "required": ["experiment"], "additionalProperties": False}


def load_config(path: Path) -> tuple[Experiment, dict]:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or raw.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"'experiment' must be one of {sorted(EXPERIMENTS)}")
    exp = EXPERIMENTS[raw["experiment"]]
    try:
        jsonschema.Draft202012Validator(config_schema(exp.name)).validate(raw)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from None
    cfg = json.loads(json.dumps(exp.defaults))
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    cfg["tolerances"] = {**exp.tolerances, **raw.get("tolerances", {})}
    cfg.setdefault("output", {})
    return exp, cfg


def _dist_version(name: str) -> str:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return "unknown"


def environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "mpmath": mpmath.__version__,
        "jsonschema": _dist_version("jsonschema"),
        "fracembed": __version__,
        "backend": _core.BACKEND,
    }


def run(config: Path, out: Path | None = None, *, paper_literal_sign: bool = False) -> tuple[int, dict]:
    """Run one experiment; returns ``(exit_code, report_document)``."""
    exp, cfg = load_config(config)
    out = Path(out) if out is not None else Path("frac-embed-out") / Path(config).stem
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(out, cfg["tolerances"], paper_literal_sign,
                     bool(cfg["output"].get("write_fields", False)))
    doc = {"experiment": exp.name, "config": cfg, "environment": environment()}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            with np.errstate(all="ignore"):
                rep = exp.runner(cfg, ctx)
    except np.linalg.LinAlgError as exc:
        failure = exc
    except (ParseError, ConfigError, ValueError, KeyError) as exc:
        # invalid values that pass the schema (e.g. a > b, bad slot names)
        raise ConfigError(f"{type(exc).__name__}: {exc}") from None
    except Exception as exc:  # numerical breakdown; never escape as a traceback
        failure = exc
    else:
        failure = None
    if failure is not None:
        exc = failure
        doc.update(status="numerical-failure", error=f"{type(exc).__name__}: {exc}",
                   artifacts=ctx.artifacts)
        _write_report(out, doc)
        return EXIT_NUMERICAL, doc
    bad = [c.name for c in rep.checks if not math.isfinite(c.value) and c.op != "info"]
    doc.update(status="pass" if rep.passed else "fail", report=rep.to_dict(),
               artifacts=sorted(ctx.artifacts))
    _write_report(out, doc)
    if bad:
        doc["error"] = f"non-finite check values: {bad}"
        return EXIT_NUMERICAL, doc
    return (EXIT_OK if rep.passed else EXIT_CHECK_FAILED), doc


def _write_report(out: Path, doc: dict) -> None:
    from fracembed.report import _plain

    (out / "report.json").write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")


def _summary_lines(doc: dict) -> list[str]:
    lines = [f"{doc['experiment']}: {doc.get('status', '?').upper()}"]
    for c in doc.get("report", {}).get("checks", []):
        mark = "INFO" if c["op"] == "info" else ("PASS" if c["passed"] else "FAIL")
        thr = "" if c["op"] == "info" else f" ({c['op']} {c['threshold']})"
        lines.append(f"  [{mark}] {c['name']} = {c['value']}{thr}")
    if "error" in doc:
        lines.append(f"  error: {doc['error']}")
    return lines


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frac-embed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None, help="output directory")
    r.add_argument("--paper-literal-sign", action="store_true",
                   help="wave experiment: use the sign as printed (no acceptance target)")
    ls = sub.add_parser("list-experiments", help="print the experiment registry")
    ls.add_argument("--json", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "list-experiments":
        if args.json:
            reg = [{"name": e.name, "summary": e.summary, "defaults": e.defaults,
                    "tolerances": e.tolerances} for e in EXPERIMENTS.values()]
            print(json.dumps(reg, indent=2))
        else:
            for e in EXPERIMENTS.values():
                print(f"{e.name:14s} {e.summary}")
        return EXIT_OK
    try:
        code, doc = run(args.config, args.out, paper_literal_sign=args.paper_literal_sign)
    except ConfigError as exc:
        print(f"frac-embed: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print("\n".join(_summary_lines(doc)))
    return code


if __name__ == "__main__":
    sys.exit(main())
