"""Command-line front end.

Configuration is a flat ``section.key = value`` text format; bundled
presets reproduce the paper-style experiments. Exit codes: 0 success,
1 solver failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import svgplot, verification
from .evolve import (NumericsError, StabilityError, ThetaSchemeConfig,
                     max_stable_tau, run_evolution, run_regularized)
from .grid import GridError, build_grid, discrete_l2_norm
from .mollifier import (DeltaTooLargeError, mollified_gradient, mollify_array,
                        standard_mollifier)
from .potential import (BracketError, ModelParams, ParameterError,
                        PolynomialReaction, bistability_interval, f1_table,
                        f2_table, find_coexistence_pressure, find_equilibria,
                        psi_total, two_minima)
from .steady import (NewtonConfig, NoConvergenceError, SingularJacobianError,
                     StationaryProblem, continuation_in_k2, interface_crossings,
                     make_initial_guess, newton_solve, solution_to_csv)


class ConfigError(ValueError):
    pass


PRESETS = {
    "fig1": {
        "model.a": 0.5, "model.b": 1.0, "model.p": 0.24, "model.alpha": 100.0,
        "model.k1": 1e-3, "model.k2": 1e-3, "model.k3": 1e-3,
        "grid.l1": 0.0, "grid.l2": 1.0, "grid.N": 1000,
        "boundary.eps_D": "-0.141", "boundary.m_D": "-0.13",
        "steady.tol": 1e-10, "steady.max_iters": 200, "steady.guess": "all",
        "steady.k2_list": "1e-3,0.8e-3,0.2e-3",
        "scheme.theta": 1.0, "scheme.T": 50.0, "scheme.steady_tol": 1e-8,
        "scheme.cross_stencil": "paper",
        "initial.eps0": "-0.141", "initial.m0": "-0.13",
    },
    "fig2": {
        "model.a": 0.5, "model.b": 1.0, "model.p": 0.24, "model.alpha": 100.0,
        "model.k1": 1e-3, "model.k2": 1e-3, "model.k3": 1e-3,
        "grid.l1": 0.0, "grid.l2": 1.0, "grid.N": 1000,
        "boundary.eps_D": "-0.1454", "boundary.m_D": "-0.0897",
        "steady.tol": 1e-10, "steady.max_iters": 200, "steady.guess": "all",
        "steady.k2_list": "1e-3,0.8e-3,0.2e-3",
        "scheme.theta": 1.0, "scheme.T": 50.0, "scheme.steady_tol": 1e-8,
        "scheme.cross_stencil": "paper",
        "initial.eps0": "-0.1454", "initial.m0": "-0.0897",
    },
    "negativity": {
        "model.a": 0.5, "model.b": 1.0, "model.p": 0.24, "model.alpha": 100.0,
        "model.k1": 1e-3, "model.k2": 2e-4, "model.k3": 1e-3,
        "model.M_eps": 1.0, "model.M_m": 1.0,
        "grid.l1": 0.0, "grid.l2": 1.0, "grid.N": 100,
        "boundary.eps_D": "-0.05", "boundary.m_D": "-0.05",
        "initial.eps0": "-0.05 - 0.3*x**2", "initial.m0": "-0.05 - 0.3*x**2",
        "reactions.f1": "0,0:-0.05", "reactions.f2": "0,0:-0.05",
        "scheme.theta": 0.5, "scheme.steps": 2000, "scheme.safety": 0.9,
        "scheme.steady_tol": 0.0,
    },
    "coexistence": {
        "model.a": 0.5, "model.b": 1.0, "model.p": 0.24, "model.alpha": 100.0,
        "model.k1": 1e-3, "model.k2": 1e-3, "model.k3": 1e-3,
        "coexistence.bracket_lo": 0.20, "coexistence.bracket_hi": 0.30,
    },
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} is missing its section")
        out[key] = val
    return out


def load_config(args) -> dict:
    cfg = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; "
                              f"available: {', '.join(sorted(PRESETS))}")
        cfg.update(PRESETS[args.preset])
    if args.config:
        with open(args.config) as fh:
            cfg.update(parse_config_text(fh.read()))
    return cfg


def _get(cfg, key, cast, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        v = cfg[key]
        if cast is bool and isinstance(v, str):
            if v.lower() in ("true", "1", "yes"):
                return True
            if v.lower() in ("false", "0", "no"):
                return False
            raise ValueError(v)
        return cast(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: cannot parse {cfg[key]!r} as {cast.__name__}") from exc


_EXPR_NAMES = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
               "sqrt": math.sqrt, "pi": math.pi, "abs": abs}


def make_expr(text, var: str):
    """Compile a small arithmetic expression of one variable (x or t)."""
    code = str(text).strip()
    try:
        compiled = compile(code, f"<{var}-expression>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}") from exc
    for name in compiled.co_names:
        if name not in _EXPR_NAMES and name != var:
            raise ConfigError(f"expression {text!r} uses unknown name {name!r}")

    def f(v):
        return float(eval(compiled, {"__builtins__": {}}, {**_EXPR_NAMES, var: v}))

    f.expression = code
    return f


def parse_reaction(text: str) -> PolynomialReaction:
    """'i,j:c;i,j:c' coefficient list."""
    coeffs = {}
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            left, c = part.split(":")
            i, j = (int(s) for s in left.split(","))
            coeffs[(i, j)] = float(c)
        except ValueError as exc:
            raise ConfigError(f"cannot parse reaction term {part!r} "
                              "(expected 'i,j:coeff')") from exc
    return PolynomialReaction(coeffs)


def model_from_config(cfg) -> ModelParams:
    return ModelParams(
        a=_get(cfg, "model.a", float, required=True),
        b=_get(cfg, "model.b", float, required=True),
        p=_get(cfg, "model.p", float, 0.0),
        alpha=_get(cfg, "model.alpha", float, 0.0),
        k1=_get(cfg, "model.k1", float, 1e-3),
        k2=_get(cfg, "model.k2", float, 1e-3),
        k3=_get(cfg, "model.k3", float, 1e-3),
        M_eps=_get(cfg, "model.M_eps", float, 1.0),
        M_m=_get(cfg, "model.M_m", float, 1.0),
    )


def grid_from_config(cfg):
    return build_grid(_get(cfg, "grid.l1", float, 0.0),
                      _get(cfg, "grid.l2", float, 1.0),
                      _get(cfg, "grid.N", int, required=True))


def reactions_from_config(cfg, params):
    f1_spec = cfg.get("reactions.f1", "model")
    f2_spec = cfg.get("reactions.f2", "model")
    f1 = f1_table(params) if f1_spec == "model" else parse_reaction(f1_spec)
    f2 = f2_table(params) if f2_spec == "model" else parse_reaction(f2_spec)
    return f1, f2


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_rows(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


# ---------------------------------------------------------------- commands

def cmd_equilibria(cfg, args) -> int:
    params = model_from_config(cfg)
    box_lo = _get(cfg, "equilibria.box_lo", float, -0.3)
    box_hi = _get(cfg, "equilibria.box_hi", float, 0.1)
    seeds = _get(cfg, "equilibria.seeds", int, 16)
    points = find_equilibria(params, ((box_lo, box_hi), (box_lo, box_hi)), seeds)
    out = _outdir(args)
    _write_rows(os.path.join(out, "equilibria.csv"),
                ["eps", "m", "psi", "kind"],
                [(q.eps, q.m, q.psi, q.kind) for q in points])
    print(f"critical points of the energy landscape (p={params.p}):")
    for q in points:
        print(f"  {q.kind:10s} eps={q.eps:+.6f}  m={q.m:+.6f}  psi={q.psi:+.10f}")
    if not points:
        print("  none found in the search box")
    return 0


def cmd_coexistence(cfg, args) -> int:
    params = model_from_config(cfg)
    lo = _get(cfg, "coexistence.bracket_lo", float, required=True)
    hi = _get(cfg, "coexistence.bracket_hi", float, required=True)
    p_star = find_coexistence_pressure(params, (lo, hi))
    pair = two_minima(params.replace(p=p_star))
    poor, rich = pair
    dpsi = poor.psi - rich.psi
    interval = bistability_interval(params, (lo, hi))
    out = _outdir(args)
    _write_rows(os.path.join(out, "coexistence.csv"),
                ["p_star", "dpsi", "bistable_lo", "bistable_hi",
                 "eps_poor", "m_poor", "eps_rich", "m_rich"],
                [(p_star, dpsi, interval[0], interval[1],
                  poor.eps, poor.m, rich.eps, rich.m)])
    print(f"equal-depth pressure p* = {p_star:.6f}")
    print(f"  energy gap at p*: {dpsi:.3e}")
    print(f"  fluid-poor phase ({poor.eps:+.6f}, {poor.m:+.6f})")
    print(f"  fluid-rich phase ({rich.eps:+.6f}, {rich.m:+.6f})")
    print(f"  bistability interval within bracket: [{interval[0]:.6f}, {interval[1]:.6f}]")
    return 0


def _scheme_from_config(cfg, grid, params):
    theta = _get(cfg, "scheme.theta", float, 1.0)
    safety = _get(cfg, "scheme.safety", float, 0.9)
    rep = max_stable_tau(theta, grid.h, params.k2)
    tau = _get(cfg, "scheme.tau", float, 0.0)
    if tau == 0.0:
        if not math.isfinite(rep.tau_max):
            raise ConfigError("scheme.tau is required when the stability cap "
                              "is unbounded (theta=0 branch inactive and k2=0)")
        tau = safety * rep.tau_max
    steps = _get(cfg, "scheme.steps", int, 0)
    T = _get(cfg, "scheme.T", float, 0.0)
    if steps > 0:
        T = steps * tau
    if T <= 0:
        raise ConfigError("either scheme.T or scheme.steps must be positive")
    return ThetaSchemeConfig(
        theta=theta, tau=tau, T=T,
        cross_stencil=_get(cfg, "scheme.cross_stencil", str, "paper"),
        enforce_stability=_get(cfg, "scheme.enforce_stability", bool, True),
        negativity_monitor=_get(cfg, "scheme.negativity_monitor", bool, True),
        m_left_bc=_get(cfg, "scheme.m_left_bc", str, "dirichlet"),
        steady_tol=_get(cfg, "scheme.steady_tol", float, 1e-8),
        monitor_stride=_get(cfg, "scheme.monitor_stride", int, 0),
        snapshot_stride=_get(cfg, "scheme.snapshot_stride", int, 0),
    )


def cmd_evolve(cfg, args) -> int:
    params = model_from_config(cfg)
    grid = grid_from_config(cfg)
    scheme = _scheme_from_config(cfg, grid, params)
    reactions = reactions_from_config(cfg, params)
    eps0 = make_expr(_get(cfg, "initial.eps0", str, required=True), "x")
    m0 = make_expr(_get(cfg, "initial.m0", str, required=True), "x")
    eps_D = make_expr(_get(cfg, "boundary.eps_D", str, required=True), "t")
    m_D = make_expr(_get(cfg, "boundary.m_D", str, required=True), "t")
    delta = _get(cfg, "scheme.delta", float, 0.0)

    if delta > 0.0:
        res = run_regularized(grid, scheme, params, reactions, (eps0, m0),
                              (eps_D, m_D), delta)
    else:
        res = run_evolution(grid, scheme, params, reactions, (eps0, m0),
                            (eps_D, m_D))
    out = _outdir(args)
    res.monitor_csv(os.path.join(out, "monitor.csv"))
    res.trajectory_csv(os.path.join(out, "trajectory.csv"))
    svgplot.two_panel_svg(
        [(grid.nodes(), res.state.eps.values, "solid")],
        [(grid.cell_centers(), res.state.m.values, "solid")],
        os.path.join(out, "final_profiles.svg"))
    viol = res.pos_violations[0] + res.pos_violations[1]
    print(f"evolution finished: {res.n_steps} steps, t = {res.state.t:.6g}, "
          f"stopped at {'steady state' if res.stopped == 'steady' else 'final time'}")
    print(f"  backend: {res.backend}; tau = {scheme.tau:.6g}; theta = {scheme.theta}")
    print(f"  positive entries over the run: eps {res.pos_violations[0]}, "
          f"m {res.pos_violations[1]} (total {viol})")
    print(f"  zero entries over the run: eps {res.zero_entries[0]}, m {res.zero_entries[1]}")
    print(f"  A1-A3: A1={'ok' if 2*scheme.tau*scheme.theta <= grid.h else 'violated'}, "
          f"A2={'ok' if 2*scheme.tau*(1-scheme.theta) <= grid.h**2 else 'violated'}, "
          f"A3={'ok' if res.a3_ok else 'violated' if res.a3_ok is not None else 'n/a'}")
    if res.stopped == "steady":
        print(f"  steady flag: increment residual below {scheme.steady_tol:g}")
    return 0


_GUESS_KINDS = ("fluid_poor_const", "fluid_rich_const", "two_phase")


def cmd_steady(cfg, args) -> int:
    params = model_from_config(cfg)
    grid = grid_from_config(cfg)
    eps_D = make_expr(_get(cfg, "boundary.eps_D", str, required=True), "t")(0.0)
    m_D = make_expr(_get(cfg, "boundary.m_D", str, required=True), "t")(0.0)
    prob = StationaryProblem(grid, params, eps_D=eps_D, m_D=m_D)
    ncfg = NewtonConfig(tol=_get(cfg, "steady.tol", float, 1e-10),
                        max_iters=_get(cfg, "steady.max_iters", int, 200),
                        damping=_get(cfg, "steady.damping", str, "backtracking"))
    guess_kind = _get(cfg, "steady.guess", str, "all")
    kinds = _GUESS_KINDS if guess_kind == "all" else (guess_kind,)
    k2_list = [float(s) for s in
               str(_get(cfg, "steady.k2_list", str, str(params.k2))).split(",")]

    out = _outdir(args)
    series_eps, series_m = [], []
    failures = []
    pair = two_minima(params)
    for kind in kinds:
        try:
            guess = make_initial_guess(prob, kind, ncfg)
            solved = continuation_in_k2(prob, k2_list, guess, ncfg)
        except (NoConvergenceError, SingularJacobianError) as exc:
            failures.append((kind, exc))
            print(f"  {kind}: FAILED ({exc})")
            continue
        for idx, (k2, sol, rep) in enumerate(solved):
            tag = f"{kind}_k2_{k2:g}"
            solution_to_csv(sol, grid, os.path.join(out, f"steady_{tag}.csv"))
            rep.to_csv(os.path.join(out, f"iters_{tag}.csv"))
            style = "solid" if idx == 0 else "dotted"
            series_eps.append((grid.nodes(), sol[0::2], style))
            series_m.append((grid.nodes(), sol[1::2], style))
        sol = solved[0][1]
        line = (f"  {kind}: converged ({solved[0][2].strategy}, "
                f"{solved[0][2].iterations} iters), "
                f"eps(l2)={sol[-2]:+.6f}, m(l2)={sol[-1]:+.6f}")
        if pair is not None:
            mid = 0.5 * (pair[0].m + pair[1].m)
            line += f", midpoint crossings={interface_crossings(sol[1::2], mid)}"
        print(line)
    if series_eps:
        svgplot.two_panel_svg(series_eps, series_m, os.path.join(out, "steady.svg"))
    if failures:
        exc = NoConvergenceError(0, float("nan"))
        exc.args = ("guesses failed: " + ", ".join(kind for kind, _ in failures),)
        raise exc
    return 0


def cmd_mms(cfg, args) -> int:
    rows = []
    scans = [
        verification.temporal_order_decoupled(theta=1.0),
        verification.temporal_order_decoupled(theta=0.5),
        verification.spatial_order_stationary(),
        verification.temporal_order_coupled(theta=1.0),
        verification.temporal_order_coupled(theta=0.5),
    ]
    print(f"{'scan':28s} {'errors':40s} observed order")
    for s in scans:
        errs = " ".join(f"{e:.3e}" for e in s.errors)
        print(f"{s.label:28s} {errs:40s} {s.observed_order:.3f}")
        rows.append((s.label, s.observed_order))
    out = _outdir(args)
    with open(os.path.join(out, "mms.csv"), "w") as fh:
        fh.write("scan,observed_order\n")
        for label, order in rows:
            fh.write(f"{label},{order:.17g}\n")
    return 0


def cmd_mollifier_check(cfg, args) -> int:
    grid = build_grid(0.0, 1.0, _get(cfg, "grid.N", int, 256))
    rng = np.random.default_rng(_get(cfg, "mollifier.seed", int, 0))
    deltas = [float(s) for s in
              str(_get(cfg, "mollifier.deltas", str, "0.1,0.05,0.025")).split(",")]
    results = []

    kern = standard_mollifier(deltas[0], grid.h)
    contraction_ok = True
    worst = 0.0
    for _ in range(100):
        u = rng.standard_normal(grid.N)
        ratio = (np.linalg.norm(mollify_array(u, kern))
                 / max(np.linalg.norm(u), 1e-300))
        worst = max(worst, ratio)
        if ratio > 1.0 + 1e-12:
            contraction_ok = False
    results.append(("norm contraction |J*u| <= |u|", contraction_ok,
                    f"max ratio {worst:.12f}"))

    x = grid.cell_centers()
    u = np.sin(np.pi * x)
    errs = []
    for d in deltas:
        k = standard_mollifier(d, grid.h)
        errs.append(discrete_l2_norm(mollify_array(u, k) - u, grid))
    conv_ok = all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
    results.append(("smoothing error decreases as delta -> 0", conv_ok,
                    " ".join(f"{e:.3e}" for e in errs)))

    cds = []
    for d in deltas:
        k = standard_mollifier(d, grid.h)
        c = 0.0
        for _ in range(50):
            v = rng.standard_normal(grid.N)
            c = max(c, np.linalg.norm(mollified_gradient(v, grid, k))
                    / max(np.linalg.norm(v), 1e-300))
        cds.append(c)
    grow_ok = all(cds[i] < cds[i + 1] for i in range(len(cds) - 1))
    results.append(("gradient bound constant grows as delta -> 0", grow_ok,
                    " ".join(f"{c:.3f}" for c in cds)))

    out = _outdir(args)
    with open(os.path.join(out, "mollifier.csv"), "w") as fh:
        fh.write("check,passed,detail\n")
        for name, ok, detail in results:
            fh.write(f"{name},{int(ok)},{detail}\n")
    all_ok = True
    for name, ok, detail in results:
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}  ({detail})")
        all_ok = all_ok and ok
    return 0 if all_ok else 1


COMMANDS = {
    "equilibria": cmd_equilibria,
    "coexistence": cmd_coexistence,
    "evolve": cmd_evolve,
    "steady": cmd_steady,
    "mms": cmd_mms,
    "mollifier-check": cmd_mollifier_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porophase",
        description="Phase-field consolidation toolkit: energy landscape, "
                    "theta-scheme evolution, stationary profiles.")
    parser.add_argument("command", nargs="?", choices=sorted(COMMANDS),
                        help="what to run")
    parser.add_argument("--config", help="flat section.key = value file")
    parser.add_argument("--preset", help=f"bundled preset: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--out", help="output directory (default: current)")
    parser.add_argument("--show-preset", metavar="NAME",
                        help="print a preset in config format and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.show_preset:
        if args.show_preset not in PRESETS:
            print(f"unknown preset {args.show_preset!r}", file=sys.stderr)
            return 2
        for key, val in PRESETS[args.show_preset].items():
            print(f"{key} = {val}")
        return 0
    if not args.command:
        build_parser().print_help()
        return 2
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ParameterError, GridError, StabilityError,
            DeltaTooLargeError, BracketError, FileNotFoundError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        if isinstance(exc, StabilityError):
            print(f"  admissible tau_max = {exc.tau_max:.6g}", file=sys.stderr)
        return 2
    except (NoConvergenceError, SingularJacobianError, NumericsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
