"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 IO error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version as _dist_version
from pathlib import Path

import numpy as np

from .errors import CsckError, NotKahler, ParseError, SolverError, StepFailed, Unstable, ValidationError
from .flow import FlowConfig, compare_rothe, integrate
from .functionals import TwistForm, functional_report
from .iteration import IterationConfig, run, verify_monotonicity
from .persistence import (
    RunManifest,
    build_config,
    checkpoint_name,
    emit_flow_trace,
    emit_trace,
    load_field,
    read_config,
    save_field,
)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("cscktorus")


def _version() -> str:
    try:
        return _dist_version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError("taus", f"expected comma-separated numbers, got {text!r}") from exc


def _manifest(command, echo, seed):
    echo = dict(echo)
    if seed is not None:
        echo["seed"] = seed
    return RunManifest(command=command, config=echo, version=_version(),
                       grid={"n": echo["n"], "N": echo["N"]})


def _write_checkpoints(records, directory: Path, key="step"):
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for step, u in records:
        paths.append(str(save_field(np.asarray(u, dtype=np.float64), directory / checkpoint_name(step))))
    return paths


def _run_iterate(echo, out: Path, ckpt: Path | None, seed, command="iterate") -> RunManifest:
    cfg = build_config(echo, seed)
    if not isinstance(cfg, IterationConfig):
        raise ValidationError("kind", f"{command} needs kind = \"iterate\"")
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(command, echo, seed)
    trace_path = out / "trace.csv"
    t0 = time.perf_counter()
    try:
        trace = run(cfg)
    except StepFailed as exc:
        emit_trace(exc.trace, trace_path)
        manifest.outcome = f"failed at step {exc.index}: {exc.cause}"
        manifest.timings["solve_s"] = time.perf_counter() - t0
        manifest.paths["trace"] = str(trace_path)
        manifest.write(out / "manifest.json")
        raise
    manifest.timings["solve_s"] = time.perf_counter() - t0
    emit_trace(trace, trace_path)
    manifest.paths["trace"] = str(trace_path)
    if ckpt is not None:
        manifest.paths["checkpoints"] = _write_checkpoints(((r.step, r.u) for r in trace.records), ckpt)
    final_path = out / "final.json"
    save_field(np.asarray(trace.final, dtype=np.float64), final_path)
    manifest.paths["final"] = str(final_path)
    report = verify_monotonicity(trace)
    manifest.outcome = "converged" if trace.converged else "max_steps"
    manifest.details = {
        "steps": trace.records[-1].step,
        "final_supR": trace.records[-1].supR,
        "worst_energy_slack": report.worst_energy_slack,
        "worst_gap_slack": report.worst_gap_slack,
    }
    manifest.write(out / "manifest.json")
    return manifest


def cmd_iterate(args) -> int:
    echo = read_config(args.config)
    m = _run_iterate(echo, Path(args.out), _ckpt(args), args.seed)
    log.info("%s after %d steps (sup|R| = %.3e)", m.outcome, m.details["steps"], m.details["final_supR"])
    return EXIT_OK


def _ckpt(args):
    return None if args.checkpoint_dir is None else Path(args.checkpoint_dir)


def cmd_flow(args) -> int:
    echo = read_config(args.config)
    cfg = build_config(echo, args.seed)
    if not isinstance(cfg, FlowConfig):
        raise ValidationError("kind", "flow needs kind = \"flow\"")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("flow", echo, args.seed)
    t0 = time.perf_counter()
    try:
        trace = integrate(cfg)
    except (Unstable, NotKahler) as exc:
        manifest.outcome = f"failed: {exc}"
        manifest.timings["solve_s"] = time.perf_counter() - t0
        manifest.write(out / "manifest.json")
        raise
    manifest.timings["solve_s"] = time.perf_counter() - t0
    trace_path = emit_flow_trace(trace, out / "flow_trace.csv")
    manifest.paths["trace"] = str(trace_path)
    ckpt = _ckpt(args)
    if ckpt is not None:
        manifest.paths["checkpoints"] = _write_checkpoints(zip(trace.steps, trace.states), ckpt)
    manifest.outcome = "completed"
    manifest.details = {"t_end": trace.times[-1], "retries": trace.retries,
                        "max_K_increase": trace.max_K_increase}
    manifest.write(out / "manifest.json")
    log.info("flow reached t=%.4g", trace.times[-1])
    return EXIT_OK


def cmd_functionals(args) -> int:
    u = load_field(args.u)
    v = load_field(args.v, u.grid)
    chi = None
    if args.twist_a is not None:
        psi = None if args.twist_psi is None else load_field(args.twist_psi, u.grid).values
        chi = TwistForm(args.twist_a, psi)
    elif args.twist_psi is not None:
        raise ValidationError("twist-a", "required when --twist-psi is given")
    report = functional_report(u.values, v.values, chi)
    text = json.dumps(report.as_dict())
    if args.out:
        Path(args.out).write_text(text + "\n")
    sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_sweep_tau(args) -> int:
    echo = read_config(args.config)
    taus = _parse_floats(args.taus)
    out = Path(args.out)
    jobs = []
    for tau in taus:
        member = copy.deepcopy(echo)
        member["tau"] = tau
        sub = out / f"tau_{tau:g}"
        ck = None if args.checkpoint_dir is None else Path(args.checkpoint_dir) / f"tau_{tau:g}"
        jobs.append((member, sub, ck))
    # runs are independent and write to their own directories
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(_run_iterate, m, s, c, args.seed, "sweep-tau") for m, s, c in jobs]
        manifests = [f.result() for f in futures]
    summary = [{"tau": tau, "outcome": m.outcome, **m.details} for tau, m in zip(taus, manifests)]
    (out / "sweep.json").write_text(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_compare_rothe(args) -> int:
    echo = read_config(args.config)
    cfg = build_config(echo, args.seed)
    taus = _parse_floats(args.taus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("compare-rothe", echo, args.seed)
    t0 = time.perf_counter()
    solver = cfg.solver if isinstance(cfg, IterationConfig) else None
    try:
        report = compare_rothe(cfg.initial, taus, args.t_end, dt=args.dt, solver=solver)
    except ValueError as exc:
        raise ValidationError("taus", str(exc)) from exc
    manifest.timings["solve_s"] = time.perf_counter() - t0
    rows = [{"tau": t, "err": e, "order": o} for t, e, o in zip(report.tau, report.err, report.order)]
    path = out / "rothe.json"
    path.write_text(json.dumps(rows, indent=2))
    manifest.paths["report"] = str(path)
    manifest.outcome = "completed"
    manifest.details = {"t_end": args.t_end, "dt": args.dt}
    manifest.write(out / "manifest.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cscktorus", description="Ricci iteration on the discretised flat torus")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", required=config, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for random initial potentials")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("iterate", help="run the Ricci iteration")
    common(p)
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("flow", help="integrate the pseudo-Calabi flow")
    common(p)
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("functionals", help="evaluate energy functionals of a pair of potentials")
    p.add_argument("u")
    p.add_argument("v")
    p.add_argument("--twist-a", type=float, default=None)
    p.add_argument("--twist-psi", default=None)
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("sweep-tau", help="repeat an iteration for several step sizes")
    common(p)
    p.add_argument("--taus", required=True, help="comma-separated step sizes")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(func=cmd_sweep_tau)

    p = sub.add_parser("compare-rothe", help="compare iterates with the flow at matching times")
    common(p)
    p.add_argument("--taus", default="0.1,0.05,0.025")
    p.add_argument("--t-end", type=float, default=0.2)
    p.add_argument("--dt", type=float, default=1e-4)
    p.set_defaults(func=cmd_compare_rothe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    logging.getLogger("cscktorus.iteration").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except (StepFailed, SolverError, NotKahler, Unstable) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("IO error: %s", exc)
        return EXIT_IO
    except CsckError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
