"""Command-line front end: ``exitflow <subcommand> ...``.

Artifacts go to ``--out-dir``, defaulting to ``$EXITFLOW_OUT`` or the
current directory.  Every artifact is deterministic for a fixed
configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import flows
from .config import ConfigError, load_config, parse_floats
from .critpoint import hessian_at_max, iterate_naive, iterate_stabilized
from .elliptic import SolveOptions, lp_norm, solve_exit_time, solve_poisson
from .freidlin import convergence_study, freidlin_limit
from .grid import DomainError, build_domain, perp_gradient, read_field_csv, write_field_csv
from .montecarlo import McConfig, sample_exit_time
from .plotting import Panel, plot_contours, render_svg
from .rearrange import apriori_checks, pointwise_bound_check, symmetric_rearrangement, verify_theorem_12
from .report import VerificationReport

log = logging.getLogger("exitflow")

OUT_ENV = "EXITFLOW_OUT"
BUNDLED_PLANS = ("reproduce-figure1", "theorem12-matrix")


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args):
    root = Path(args.out_dir or os.environ.get(OUT_ENV) or ".")
    root.mkdir(parents=True, exist_ok=True)
    return root


def _float(sec, key, default):
    return sec.getfloat(key, default) if sec is not None else default


def _stream(grid, args, sec, tau0=None):
    """Stream function from --stream, or the named flow in the config."""
    if getattr(args, "stream", None):
        return read_field_csv(args.stream, grid)
    kind = (getattr(args, "flow", None) or (sec.get("flow", "zero") if sec is not None else "zero")).strip()
    cells = int(_float(sec, "cells", 2))
    scale = _float(sec, "scale", 0.1)
    return flows.stream_function(grid, kind, cells=cells, scale=scale, tau0=tau0)


# subcommands ---------------------------------------------------------------


def cmd_solve(args):
    cfg = load_config(args.config)
    sec = cfg.section("solve")
    grid = build_domain(cfg.domain)
    A = args.amplitude if args.amplitude is not None else _float(sec, "amplitude", 0.0)
    psi = _stream(grid, args, sec)
    u = perp_gradient(psi)
    opts = SolveOptions(amplitude=A, scheme=args.scheme or sec.get("scheme", "auto"), tol=_float(sec, "tol", 1e-10))
    sol = solve_exit_time(grid, u, opts)
    out = _out_dir(args)
    field_path = out / (args.out or "tau.csv")
    write_field_csv(sol.tau, field_path)
    record = {
        "amplitude": A,
        "scheme": sol.scheme,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "peclet": sol.peclet,
        "max": sol.tau.max(),
        "norms": {"L1": lp_norm(sol.tau, 1), "L2": lp_norm(sol.tau, 2), "Linf": lp_norm(sol.tau, np.inf)},
        "unknowns": grid.n_unknowns,
        "area": grid.area,
    }
    _write_json(out / (Path(field_path.name).stem + ".json"), record)
    print(f"max tau = {sol.tau.max():.8g}  residual = {sol.residual:.2e}  scheme = {sol.scheme}")
    return 0


def cmd_freidlin(args):
    cfg = load_config(args.config)
    sec = cfg.section("freidlin")
    grid = build_domain(cfg.domain)
    tau0 = solve_poisson(grid)
    psi = read_field_csv(args.stream, grid) if args.stream else tau0
    fr = freidlin_limit(psi, K=int(_float(sec, "levels", 200)))
    out = _out_dir(args)
    _write_profile(out / "profile.csv", fr)
    write_field_csv(fr.tau_bar, out / "tau_bar.csv")
    amps = parse_floats(args.amplitudes) if args.amplitudes else []
    if amps:
        study = convergence_study(psi, amps)
        with open(out / "convergence.csv", "w") as fh:
            fh.write("amplitude,deviation,scheme,peclet\n")
            for r in study.rows:
                fh.write(f"{r.amplitude:.10g},{r.deviation:.10g},{r.scheme},{r.peclet:.10g}\n")
        print(f"deviations: {', '.join(f'{d:.3e}' for d in study.deviations())}  monotone = {study.monotone}")
    print(f"max tau_bar = {fr.profile.maximum:.8g}")
    return 0


def _write_profile(path, fr):
    ap = fr.areas
    with open(path, "w") as fh:
        fh.write("h,a,T,p,tau_bar\n")
        for h, a, T, p, tb in zip(ap.levels, ap.areas_mono, ap.T, ap.p, fr.profile.values):
            fh.write(f"{h:.10g},{a:.10g},{T:.10g},{p:.10g},{tb:.10g}\n")


def _iterate(grid, scheme, amplitude, max_steps):
    if scheme == "naive":
        return iterate_naive(grid, max_steps)
    return iterate_stabilized(grid, max_steps, scheme, amplitude)


def _figure_row(name, trace):
    try:
        ratio_phi = f"Hessian axis ratio {hessian_at_max(trace.field).ratio:.3f}"
        ratio_tau = f"Hessian axis ratio {hessian_at_max(trace.tau0).ratio:.3f}"
    except ValueError:
        ratio_phi = ratio_tau = ""
    return [
        Panel(f"Maximiser ({name})", trace.field, 10, ratio_phi),
        Panel(f"Expected exit time tau0 ({name})", trace.tau0, 10, ratio_tau),
    ]


def cmd_iterate(args):
    cfg = load_config(args.config)
    sec = cfg.section("iterate")
    grid = build_domain(cfg.domain)
    scheme = args.scheme or sec.get("scheme", "freidlin")
    amp = args.amplitude if args.amplitude is not None else (sec.getfloat("amplitude") if "amplitude" in sec else None)
    steps = args.max_steps if args.max_steps is not None else sec.getint("max_steps", 200)
    trace = _iterate(grid, scheme, amp, steps)
    out = _out_dir(args)
    _write_iteration(out, "", trace)
    render_svg([_figure_row(cfg.domain.kind, trace)], out / "contours.svg")
    print(f"{scheme}: {trace.verdict} after {trace.steps} steps, sup = {trace.field.max():.8g}")
    return 0


def _write_iteration(out, prefix, trace):
    trace.write_csv(out / f"{prefix}trace.csv")
    write_field_csv(trace.field, out / f"{prefix}phi.csv")
    write_field_csv(trace.tau0, out / f"{prefix}tau0.csv")
    try:
        h = hessian_at_max(trace.field)
        ratio = h.ratio
    except ValueError:
        ratio = float("nan")
    _write_json(
        out / f"{prefix}iterate.json",
        {"scheme": trace.scheme, "verdict": trace.verdict, "steps": trace.steps, "sup": trace.field.max(),
         "hessian_ratio": ratio if np.isfinite(ratio) else None},
    )


def cmd_verify(args):
    cfg = load_config(args.config)
    grid = build_domain(cfg.domain)
    tau = read_field_csv(args.field, grid)
    p_list = parse_floats(args.p) if args.p else [1.0, 2.0, np.inf]
    rep = VerificationReport("verify")
    rep.extend(verify_theorem_12(tau, p_list))
    rep.extend(pointwise_bound_check(tau))
    if args.apriori:
        rep.extend(apriori_checks(tau, solve_poisson(grid)))
    out = _out_dir(args)
    rep.write(out / "report.json")
    symmetric_rearrangement(tau).write_csv(out / "rearrangement.csv")
    print(rep.summary())
    return 0 if rep.passed else 1


def cmd_montecarlo(args):
    cfg = load_config(args.config)
    sec = cfg.section("montecarlo")
    grid = build_domain(cfg.domain)
    start = tuple(parse_floats(args.start or sec.get("start", "0,0"), allow_inf=False))
    A = args.amplitude if args.amplitude is not None else _float(sec, "amplitude", 0.0)
    mc = McConfig(
        start,
        dt=args.dt if args.dt is not None else _float(sec, "dt", 1e-4),
        n_paths=args.paths if args.paths is not None else sec.getint("paths", 100_000),
        seed=args.seed if args.seed is not None else sec.getint("seed", 0),
        amplitude=A,
    )
    u = perp_gradient(_stream(grid, args, sec)) if A > 0 else None
    est = sample_exit_time(grid, u, mc)
    out = _out_dir(args)
    with open(out / "montecarlo.csv", "w") as fh:
        fh.write("x,y,mean,stderr,paths,truncated,dt\n")
        fh.write(f"{start[0]:.10g},{start[1]:.10g},{est.csv_row()}\n")
    _write_json(out / "montecarlo.json", {"start": list(start), "mean": est.mean, "stderr": est.stderr,
                                          "paths": est.n_paths, "truncated": est.truncated, "dt": est.dt,
                                          "seed": mc.seed, "flagged": est.flagged})
    print(f"mean exit time {est.mean:.6g} +- {est.stderr:.2g} ({est.n_paths} paths)")
    return 0


def cmd_plot(args):
    cfg = load_config(args.config)
    grid = build_domain(cfg.domain)
    f = read_field_csv(args.field, grid)
    note = ""
    if args.annotate:
        note = f"Hessian axis ratio {hessian_at_max(f).ratio:.3f}"
    out = _out_dir(args)
    plot_contours(f, out / (args.out or "contours.svg"), args.levels, Path(args.field).stem, note)
    return 0


# plans ---------------------------------------------------------------------


def resolve_plan(name_or_path):
    if name_or_path in BUNDLED_PLANS:
        return resources.files("exitflow.plans").joinpath(f"{name_or_path}.ini").read_text()
    p = Path(name_or_path)
    if not p.exists():
        raise ConfigError(f"plan {name_or_path!r} is neither a bundled plan nor a file")
    return p.read_text()


def run_plan(text, out: Path, seed=None) -> int:
    """Run the stages of a plan for every domain section.  Returns the exit status."""
    cfg = load_config(text)
    stages = cfg.stages()
    if not stages:
        log.info("empty plan: nothing to do")
        return 0
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    figure_rows = []
    summary = {}
    for dname, spec in cfg.domains.items():
        tag = dname.split(":", 1)[1] if ":" in dname else spec.kind
        ddir = out / tag
        ddir.mkdir(parents=True, exist_ok=True)
        grid = build_domain(spec)
        tau0 = solve_poisson(grid)
        state = {"tau": tau0}
        dsum = {}
        for stage in stages:
            try:
                dsum[stage] = _run_stage(stage, cfg, grid, tau0, state, ddir, seed)
            except (ValueError, RuntimeError) as exc:  # recorded, dependent stages skipped
                log.error("stage %s failed on %s: %s", stage, tag, exc)
                dsum[stage] = {"error": str(exc)}
                status = 1
                break
            if dsum[stage].get("passed") is False:
                status = 1
        if "trace" in state:
            figure_rows.append(_figure_row(tag, state["trace"]))
        summary[tag] = dsum
    if "plot" in stages and figure_rows:
        title = cfg.section("plot").get("title", "Optimal stirring and unstirred exit time")
        render_svg(figure_rows, out / "figure.svg", title)
    _write_json(out / "summary.json", summary)
    return status


def _run_stage(stage, cfg, grid, tau0, state, ddir, seed):
    sec = cfg.section(stage)
    if stage == "solve":
        A = _float(sec, "amplitude", 0.0)
        psi = _stream(grid, argparse.Namespace(), sec, tau0)
        sol = solve_exit_time(grid, perp_gradient(psi), SolveOptions(amplitude=A))
        state["tau"] = sol.tau
        write_field_csv(sol.tau, ddir / "tau.csv")
        return {"max": sol.tau.max(), "scheme": sol.scheme}
    if stage == "freidlin":
        fr = freidlin_limit(state.get("psi", tau0))
        _write_profile(ddir / "profile.csv", fr)
        write_field_csv(fr.tau_bar, ddir / "tau_bar.csv")
        return {"max": fr.profile.maximum}
    if stage == "iterate":
        scheme = sec.get("scheme", "freidlin")
        amp = sec.getfloat("amplitude") if "amplitude" in sec else None
        trace = _iterate(grid, scheme, amp, sec.getint("max_steps", 200))
        state["trace"] = trace
        _write_iteration(ddir, "", trace)
        return {"verdict": trace.verdict, "steps": trace.steps, "sup": trace.field.max()}
    if stage == "verify":
        rep = VerificationReport(f"verify {grid.spec.kind}")
        target = state["trace"].field if "trace" in state else state["tau"]
        rep.extend(verify_theorem_12(state["tau"]))
        if "trace" in state:
            rep.extend(apriori_checks(target, tau0))
        rep.write(ddir / "report.json")
        return {"passed": rep.passed}
    if stage == "montecarlo":
        start = tuple(parse_floats(sec.get("start", "0,0"), allow_inf=False))
        s = seed if seed is not None else sec.getint("seed", 0)
        est = sample_exit_time(grid, None, McConfig(start, sec.getfloat("dt", 1e-4), sec.getint("paths", 10_000), seed=s))
        with open(ddir / "montecarlo.csv", "w") as fh:
            fh.write("x,y,mean,stderr,paths,truncated,dt\n")
            fh.write(f"{start[0]:.10g},{start[1]:.10g},{est.csv_row()}\n")
        return {"mean": est.mean, "stderr": est.stderr}
    if stage == "plot":
        return {}
    if stage == "matrix":
        rep = lp_matrix(grid, tau0, parse_floats(sec.get("amplitudes", "0,1,10,100")),
                               [s.strip() for s in sec.get("flows", ",".join(flows.FLOWS)).split(",")],
                               parse_floats(sec.get("p", "1,2,inf")))
        rep.write(ddir / "lp_matrix.json")
        return {"passed": rep.passed, "checks": len(rep.checks)}
    raise ConfigError(f"unknown stage {stage!r}")


def lp_matrix(grid, tau0, amplitudes, flow_names, p_list):
    """L^p comparison for every flow and amplitude on one domain."""
    rep = VerificationReport(f"Lp comparison matrix ({grid.spec.kind})")
    for name in flow_names:
        u = flows.flow(grid, name, tau0=tau0)
        for A in amplitudes:
            tau = tau0 if (A == 0 or name == "zero") else solve_exit_time(grid, u, SolveOptions(amplitude=A)).tau
            rep.extend(verify_theorem_12(tau, p_list, label=f"{name} A={A:g}"))
    return rep


def cmd_run_plan(args):
    text = resolve_plan(args.plan)
    return run_plan(text, _out_dir(args), args.seed)


# parser --------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="exitflow", description="Mean exit times of planar diffusions stirred by divergence-free flows.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("solve", help="solve the exit-time problem")
    common(p)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--flow", choices=flows.FLOWS)
    p.add_argument("--stream", help="stream function field CSV")
    p.add_argument("--scheme", choices=("auto", "centered", "upwind"))
    p.add_argument("--out", help="output field CSV name")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("freidlin", help="large-amplitude limit from level-set geometry")
    common(p)
    p.add_argument("--stream", help="stream function field CSV (default: torsion function)")
    p.add_argument("--amplitudes", help="comma-separated amplitudes for a convergence study")
    p.set_defaults(func=cmd_freidlin)

    p = sub.add_parser("iterate", help="fixed-point iteration for the maximising flow")
    common(p)
    p.add_argument("--scheme", choices=("naive", "freidlin", "advective"))
    p.add_argument("--amplitude", type=float)
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("verify", help="L^p comparison and a priori checks for a field")
    common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--p", help="comma-separated exponents, e.g. 1,2,inf")
    p.add_argument("--apriori", action="store_true", help="also check the critical-point estimates")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("montecarlo", help="Monte Carlo exit time at one point")
    common(p)
    p.add_argument("--start", help="x,y")
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--flow", choices=flows.FLOWS)
    p.add_argument("--stream")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("plot", help="SVG contour plot of a field")
    common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--annotate", action="store_true", help="add the Hessian axis ratio at the maximum")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("run-plan", help="run a bundled or user plan")
    p.add_argument("plan", help=f"plan file or one of: {', '.join(BUNDLED_PLANS)}")
    common(p, config=False)
    p.set_defaults(func=cmd_run_plan)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
