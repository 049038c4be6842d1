"""Command line entry point: ``cosserat simulate | verify | sweep``."""

from __future__ import annotations

import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import certificates, plot, scenario, sim
from .errors import CosseratError, NonFinite, ScenarioError, SingularMass, StepUnderflow

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
_NUMERIC = (NonFinite, StepUnderflow, SingularMass, ArithmeticError)


def csv_header(n_sections: int) -> str:
    cols = ["t", "step_accepted", "step_rejected"]
    for prefix in ("q", "qd", "u"):
        cols += [f"{prefix}_{i}_{k}" for i in range(1, n_sections + 1) for k in range(1, 7)]
    return ",".join(cols + ["V", "Vdot"])


def write_csv(path, traj: sim.Trajectory):
    """One row per sample; qd columns hold the generalized velocity."""
    n = traj.dof // 6
    with open(path, "w") as fh:
        fh.write(csv_header(n) + "\n")
        for row, acc, rej in zip(traj.rows(), traj.accepted, traj.rejected):
            vals = [f"{row[0]:.17g}", str(int(acc)), str(int(rej))]
            vals += [f"{v:.17g}" for v in row[3:]]
            fh.write(",".join(vals) + "\n")


def read_csv(path):
    """(header, data) of a trajectory CSV."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def gravity_loaded(rod) -> np.ndarray:
    """Coordinates on which gravity acts at the undeformed configuration."""
    from .dynamics import gravity_buoyancy
    from .rod import XI0

    g = gravity_buoyancy(rod, np.tile(XI0, rod.n_sections))
    return np.abs(g) > 1e-6 * np.max(np.abs(g))


def summarize(ex: scenario.Experiment, traj: sim.Trajectory) -> dict:
    """Settling and steady-state statistics of one run."""
    window = ex.doc["output"]["window"]
    ss = sim.steady_state_metrics(traj, ex.loop.setpoint, window)
    e = sim.tracking_error(traj, ex.mode)
    out = {
        "mode": ex.mode,
        "settled": ss.settled,
        "settle_time": ss.settle_time,
        "ss_error_inf": float(np.max(np.abs(ss.ss_error))),
        "final_error_inf": float(np.max(np.abs(e[-1]))),
        "overshoot": sim.overshoot(traj, ex.mode),
        "zero_crossings": sim.zero_crossings(e),
        "accepted": traj.total_accepted,
        "rejected": traj.total_rejected,
        "V_increase_max": float(np.max(np.diff(traj.V))) if len(traj) > 1 else 0.0,
    }
    if ex.mode == "position":
        G = gravity_loaded(ex.rod)
        e0 = (traj.q[0] - traj.q_ref[0])[G]
        out["relative_offset"] = float(np.linalg.norm(ss.ss_error[G]) / np.linalg.norm(e0)) if np.any(e0) else 0.0
    return out


def run_experiment(doc, out_dir: Path, plot_enabled=True):
    ex = scenario.build(doc)
    traj = sim.simulate(ex.loop, ex.initial, ex.t_end, ex.cadence, ex.settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    o = doc["output"]
    csv_path = out_dir / o["csv_path"]
    write_csv(csv_path, traj)
    svg_path = None
    if plot_enabled:
        svg_path = out_dir / o["plot_path"]
        svg_path.write_text(plot.trajectory_svg(traj, ex.mode, o["plot_coordinate"]))
    return ex, traj, csv_path, svg_path


def _plot_enabled():
    return os.environ.get("COSSERAT_NO_PLOT", "") not in ("1", "true", "yes")


def cmd_simulate(args) -> int:
    try:
        doc = scenario.load(args.file)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.dry_run:
        sys.stdout.write(scenario.dump(doc))
        return EXIT_OK
    try:
        ex, traj, csv_path, svg_path = run_experiment(doc, Path(args.out), _plot_enabled())
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    s = summarize(ex, traj)
    print(
        f"ok csv={csv_path} svg={svg_path or '-'} samples={len(traj)} accepted={s['accepted']} "
        f"rejected={s['rejected']} final_error_inf={s['final_error_inf']:.3e} settled={s['settled']}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite != "all" and args.suite not in certificates.SUITES:
        print(f"error: unknown suite {args.suite!r}", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    for res in certificates.run(args.suite, args.seed, args.samples):
        print(res.line())
        if not res.passed:
            ok = False
            print(f"  offending sample: {res.offending}")
    return EXIT_OK if ok else EXIT_FAIL


def load_sweep(path) -> list[tuple[str, dict]]:
    """Variants of a sweep file, each as (name, resolved scenario)."""
    from .scenario import tomllib

    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    for key in doc:
        if key not in ("sweep", "variant"):
            raise ScenarioError(f"{key}: unknown sweep key")
    variants = doc.get("variant", [])
    if not isinstance(variants, list) or not variants:
        raise ScenarioError(f"{path}: sweep lists no variants")
    out = []
    for i, v in enumerate(variants):
        for key in v:
            if key not in ("name", "scenario", "override"):
                raise ScenarioError(f"variant[{i}].{key}: unknown key")
        if "scenario" not in v:
            raise ScenarioError(f"variant[{i}].scenario: required")
        base = path.parent / v["scenario"]
        name = v.get("name", Path(v["scenario"]).stem)
        try:
            raw = scenario.tomllib.loads(base.read_text())
        except (OSError, scenario.tomllib.TOMLDecodeError) as exc:
            raise ScenarioError(f"variant[{i}].scenario: {exc}") from exc
        for section, table in v.get("override", {}).items():
            raw.setdefault(section, {}).update(copy.deepcopy(table))
        raw.setdefault("output", {})
        raw["output"].setdefault("csv_path", f"{name}.csv")
        raw["output"].setdefault("plot_path", f"{name}.svg")
        try:
            resolved = scenario.resolve(raw)
        except ScenarioError as exc:
            raise ScenarioError(f"variant {name}: {exc}") from exc
        out.append((name, resolved))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ScenarioError("variant names must be unique")
    return out


def _run_variant(job):
    name, doc, out_dir, plot_enabled = job
    try:
        ex, traj, csv_path, _ = run_experiment(doc, Path(out_dir), plot_enabled)
        return name, "ok", summarize(ex, traj), None
    except ScenarioError as exc:
        return name, "invalid", None, str(exc)
    except _NUMERIC as exc:
        return name, "numerical_abort", None, f"{type(exc).__name__}: {exc}"
    except CosseratError as exc:
        return name, "error", None, f"{type(exc).__name__}: {exc}"


SUMMARY_COLUMNS = (
    "name", "status", "mode", "settled", "settle_time", "ss_error_inf", "relative_offset",
    "final_error_inf", "overshoot", "zero_crossings", "accepted", "rejected", "message",
)


def run_sweep(path, out_dir, jobs=1, plot_enabled=True):
    variants = load_sweep(path)
    out_dir = Path(out_dir)
    jobs_list = [(name, doc, str(out_dir), plot_enabled) for name, doc in variants]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_variant, jobs_list))
    else:
        results = [_run_variant(j) for j in jobs_list]
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.csv", "w") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for name, status, stats, msg in results:
            stats = stats or {}
            row = {"name": name, "status": status, "message": (msg or "").replace(",", ";")}
            row.update(stats)
            cells = []
            for c in SUMMARY_COLUMNS:
                v = row.get(c, "")
                cells.append(f"{v:.17g}" if isinstance(v, float) else ("" if v is None else str(v)))
            fh.write(",".join(cells) + "\n")
    return results


def cmd_sweep(args) -> int:
    try:
        results = run_sweep(args.file, args.out, args.jobs, _plot_enabled())
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = EXIT_OK
    for name, status, stats, msg in results:
        if status == "ok":
            extra = f" relative_offset={stats['relative_offset']:.4f}" if "relative_offset" in stats else ""
            print(f"ok {name}: final_error_inf={stats['final_error_inf']:.3e} settle_time={stats['settle_time']}{extra}")
        else:
            print(f"{status} {name}: {msg}")
            code = max(code, EXIT_USAGE if status == "invalid" else EXIT_NUMERIC if status == "numerical_abort" else EXIT_FAIL)
    print(f"summary: {Path(args.out) / 'summary.csv'}")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cosserat", description="PCS Cosserat soft-arm simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario file")
    s.add_argument("file")
    s.add_argument("--dry-run", action="store_true", help="print the resolved scenario and exit")
    s.add_argument("--out", default=".", help="output directory (default: current)")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run property certificates")
    v.add_argument("suite", help="spd | bound | skew | linparam | energy | passivity | all")
    v.add_argument("--seed", type=int, default=certificates.DEFAULT_SEED)
    v.add_argument("--samples", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="run every variant of a sweep file")
    w.add_argument("file")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", default=".", help="output directory (default: current)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "samples", None) is not None and args.samples < 1:
        print("error: --samples must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
