"""Command-line entry point: ``owfcontract {simulate,sweep,optimize,report,rerun}``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .availability import write_availability_csv
from .economics import LEDGER_FIELDS
from .model import Bundle, ConfigError, config_hash, load_config, to_document, validate_config
from .optimizer import CONTRACT_BOUNDS, GAParams, optimize_contract
from .scheduler import write_drv_csv
from .simulator import AXIS_FIELDS, RealizationBank, parse_axis_values, run_sample, run_scenario, sweep
from .stochastic import write_environment_csv, write_failures_csv

MONEY_FIELDS = set(LEDGER_FIELDS) | {
    "owner_mean", "owner_ci95", "contractor_mean", "contractor_ci95", "total_mean", "total_ci95",
    "max_contractor", "max_owner", "max_total",
    "final_owner_mean", "final_contractor_mean", "final_total_mean", "final_total_ci95",
}


# Objective values keep full precision so the front can be re-checked from the file.
EXACT_FIELDS = {"obj1", "obj2", "final_obj1"}


class UsageError(Exception):
    pass


def _fmt(name: str, value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value) or name in EXACT_FIELDS:
            return repr(float(value))
        return f"{value:.2f}" if name in MONEY_FIELDS or name.endswith("_eur") else f"{value:.6f}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(h, row.get(h)) for h in header])


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _atomic_json(path: Path, obj: Any) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-")
    with os.fdopen(fd, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _bundle_for(args) -> Bundle:
    if args.config_document is not None:
        bundle = validate_config(args.config_document)
    else:
        if not Path(args.config).is_file():
            raise ConfigError(str(args.config), "config file not found")
        bundle = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "samples", None) is not None and args.command != "optimize":
        changes["samples"] = args.samples
    return bundle.with_sim(**changes) if changes else bundle


def _manifest(args, bundle: Bundle, outputs: list[str], replay: dict) -> dict:
    return {
        "command": args.command,
        "config_path": None if args.config is None else str(args.config),
        "config_hash": config_hash(bundle),
        "config": to_document(bundle),
        "master_seed": bundle.sim.master_seed,
        "samples": replay.get("samples", bundle.sim.samples),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "tool_version": __version__,
        "outputs": sorted(outputs),
        "args": replay,
    }


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> list[str]:
    bundle = _bundle_for(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = bundle.sim.samples
    if samples < 2:
        raise UsageError("simulate needs --samples >= 2")
    bank = RealizationBank(bundle, range(samples), threads=args.threads)
    stats = run_scenario(bundle, bank=bank)
    arrays = bank.get(bundle.contract.technicians)
    ledger = arrays.settle(bundle.contract, bundle.sim.horizon_days)

    _write_json(out / "stats.json", stats.to_dict())
    header = ["sample", *LEDGER_FIELDS, "farm_availability", "energy_availability", "generation_mwh",
              "failures", "scheduled"]
    rows = []
    for k, idx in enumerate(arrays.sample_indices):
        row = {"sample": int(idx)}
        row.update({f: ledger[f][k] for f in LEDGER_FIELDS})
        row.update(
            farm_availability=arrays.a_wf[k], energy_availability=arrays.a_g[k],
            generation_mwh=arrays.generation_mwh[k], failures=int(arrays.n_failures[k]),
            scheduled=int(arrays.n_scheduled[k]),
        )
        rows.append(row)
    _write_csv(out / "ledgers.csv", header, rows)

    s0 = run_sample(bundle, sample_index=0)
    write_environment_csv(s0.environment, out / "sample0_environment.csv")
    write_failures_csv(s0.failures, out / "sample0_failures.csv")
    write_drv_csv(s0.tasks, out / "sample0_drv.csv")
    write_availability_csv(s0.availability, out / "sample0_availability.csv")
    _write_json(out / "sample0_ledger.json", s0.ledger.to_dict())
    return ["stats.json", "ledgers.csv", "sample0_environment.csv", "sample0_failures.csv",
            "sample0_drv.csv", "sample0_availability.csv", "sample0_ledger.json"]


# -- sweep --------------------------------------------------------------------

def parse_axis(spec: str) -> tuple[str, list[float]]:
    """``name=start:stop:step`` or ``name=v1,v2,...``."""
    try:
        name, rng = spec.split("=", 1)
        name = name.strip()
        if name not in AXIS_FIELDS:
            raise ValueError(f"unknown axis {name!r}")
        if ":" in rng:
            start, stop, step = (float(p) for p in rng.split(":"))
            values = parse_axis_values(start, stop, step)
        else:
            values = [float(p) for p in rng.split(",")]
        if not values:
            raise ValueError("empty axis")
    except ValueError as exc:
        raise UsageError(f"malformed axis spec {spec!r}: {exc}") from exc
    if name == "q":
        if any(v != int(v) or v < 1 for v in values):
            raise UsageError(f"axis q needs positive integer values, got {spec!r}")
        values = [int(v) for v in values]
    return name, values


SWEEP_HEADER = [
    "q", "r_us", "r_ld", "lambda",
    "owner_mean", "owner_ci95", "contractor_mean", "contractor_ci95", "total_mean", "total_ci95",
    "farm_availability_mean", "energy_availability_mean", "generation_mwh_mean", "generation_mwh_ci95",
    "contractor_margin", "generation_margin", "owner_scaled", "contractor_scaled", "conflict",
]


def _sweep_row(stats) -> dict:
    c = stats.contract
    return {
        "q": c.technicians, "r_us": c.threshold_us, "r_ld": c.threshold_ld, "lambda": c.cap_fraction,
        "owner_mean": stats.owner_profit.mean, "owner_ci95": stats.owner_profit.ci95,
        "contractor_mean": stats.contractor_profit.mean, "contractor_ci95": stats.contractor_profit.ci95,
        "total_mean": stats.total_profit.mean, "total_ci95": stats.total_profit.ci95,
        "farm_availability_mean": stats.farm_availability.mean,
        "energy_availability_mean": stats.energy_availability.mean,
        "generation_mwh_mean": stats.generation_mwh.mean, "generation_mwh_ci95": stats.generation_mwh.ci95,
        "contractor_margin": stats.contractor_profit.margin, "generation_margin": stats.generation_mwh.margin,
        "owner_scaled": stats.owner_scaled, "contractor_scaled": stats.contractor_scaled,
        "conflict": stats.conflict,
    }


PLOT_METRICS = {
    "owner_profit": "owner_mean",
    "contractor_profit": "contractor_mean",
    "total_profit": "total_mean",
    "owner_scaled": "owner_scaled",
    "contractor_scaled": "contractor_scaled",
    "conflict": "conflict",
}


def cmd_sweep(args) -> list[str]:
    if not args.axis:
        raise UsageError("sweep needs at least one --axis")
    axes: dict[str, list[float]] = {}
    for spec in args.axis:
        name, values = parse_axis(spec)
        if name in axes:
            raise UsageError(f"axis {name!r} given twice")
        axes[name] = values
    bundle = _bundle_for(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if bundle.sim.samples < 2:
        raise UsageError("sweep needs --samples >= 2")
    result = sweep(bundle, axes, threads=args.threads)

    rows = [_sweep_row(cell.stats) for cell in result.cells]
    _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    names = list(axes)
    extra, xy = names[:-2], names[-2:]
    x_name = xy[0]
    y_name = xy[1] if len(xy) > 1 else None
    outputs = ["sweep.csv", "argmax.csv", "scaling.json"]
    for metric, col in PLOT_METRICS.items():
        plot_rows = []
        for cell, row in zip(result.cells, rows):
            pr = {a: cell.params[a] for a in extra}
            pr.update(x=cell.params[x_name], y=None if y_name is None else cell.params[y_name], z=row[col])
            plot_rows.append(pr)
        money = {"z"} if col.endswith("_mean") else set()
        fname = f"plot_{metric}.csv"
        with open(out / fname, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*extra, "x", "y", "z"])
            for pr in plot_rows:
                w.writerow(
                    [_fmt(a, pr[a]) for a in extra]
                    + [_fmt(x_name, pr["x"]), _fmt(y_name or "", pr["y"]),
                       _fmt("owner_mean" if money else "z", pr["z"])]
                )
        outputs.append(fname)
    (out / "plot_axes.json").write_text(json.dumps({"x": x_name, "y": y_name, "extra": extra}) + "\n")
    outputs.append("plot_axes.json")

    traces = result.argmax_traces()
    others = [a for a in names if a != "q"]
    header = [*others, "q_max_contractor", "max_contractor", "q_max_owner", "max_owner", "q_max_total", "max_total"]
    _write_csv(out / "argmax.csv", header, traces)
    _write_json(out / "scaling.json", result.context.to_dict())
    return outputs


# -- optimize -----------------------------------------------------------------

def _ga_params(args) -> GAParams:
    base = GAParams()
    kw = {
        "population": args.ga_population, "max_generations": args.ga_generations,
        "stall_generations": args.ga_stall, "tolerance": args.ga_tolerance,
        "crossover_fraction": args.ga_crossover, "elite_fraction": args.ga_elite,
        "mutation": args.ga_mutation,
    }
    kw = {k: v for k, v in kw.items() if v is not None}
    try:
        return GAParams(**{**base.__dict__, **kw})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


PARETO_HEADER = ["r_us", "r_ld", "lambda", "tech", "obj1", "obj2", "tech_rounded", "compromise",
                 "final_owner_mean", "final_contractor_mean", "final_total_mean", "final_total_ci95", "final_obj1"]


def cmd_optimize(args) -> list[str]:
    bundle = _bundle_for(args)
    params = _ga_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = 200 if args.samples is None else args.samples
    if samples < 2:
        raise UsageError("optimize needs --samples >= 2")
    history: list[tuple[int, int]] = []

    def track(gen, X, F):
        history.append((gen, len(X)))

    res = optimize_contract(
        bundle, params, CONTRACT_BOUNDS, bundle.sim.master_seed,
        samples=samples, final_samples=args.final_samples, threads=args.threads, callback=track,
    )
    rows = []
    for k, sol in enumerate(res.solutions):
        row = sol.row()
        row["compromise"] = int(k == res.compromise_index)
        rows.append(row)
    _write_csv(out / "pareto.csv", PARETO_HEADER, rows)
    comp = res.compromise
    _write_json(out / "compromise.json", {
        "index": res.compromise_index,
        "r_us": comp.vector[0], "r_ld": comp.vector[1], "lambda": comp.vector[2],
        "tech": comp.vector[3], "tech_rounded": comp.technicians,
        "obj1": comp.obj1, "obj2": comp.obj2, "total_profit": -comp.obj2,
        "final": None if comp.final is None else comp.final.to_dict(),
        "scaling_context": res.context.to_dict(),
        "generations": res.moga.generations, "stop_reason": res.moga.stop_reason,
        "bounds": {"lower": list(CONTRACT_BOUNDS.lower), "upper": list(CONTRACT_BOUNDS.upper)},
    })
    _write_csv(
        out / "convergence.csv", ["generation", "hypervolume"],
        [{"generation": g, "hypervolume": hv} for g, hv in enumerate(res.moga.history, start=1)],
    )
    return ["pareto.csv", "compromise.json", "convergence.csv"]


# -- report -------------------------------------------------------------------

def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    try:
        manifest = json.loads((run / "manifest.json").read_text())
        command = manifest["command"]
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {run} is not a completed run directory ({exc})", file=sys.stderr)
        return 1
    p = print
    p(f"run: {run}  command: {command}  seed: {manifest.get('master_seed')}  samples: {manifest.get('samples')}")
    try:
        if command == "simulate":
            st = json.loads((run / "stats.json").read_text())
            for key, label in (("owner_profit", "owner profit"), ("contractor_profit", "contractor profit"),
                               ("total_profit", "total profit")):
                s = st[key]
                margin = s["ci95"] / abs(s["mean"]) if s["mean"] else math.inf
                p(f"{label:>18}: {s['mean']:.2f} EUR +/- {s['ci95']:.2f} (margin of error {_pct(margin)})")
            for key, label in (("farm_availability", "farm availability"),
                               ("energy_availability", "energy availability")):
                p(f"{label:>18}: {st[key]['mean']:.6f} +/- {st[key]['ci95']:.6f}")
            g = st["generation_mwh"]
            p(f"{'generation':>18}: {g['mean']:.2f} MWh (margin of error {_pct(g['ci95'] / abs(g['mean']))})")
            p(f"{'conflict':>18}: n/a (needs a sweep for the scaling range)")
        elif command == "sweep":
            rows = _read_csv(run / "sweep.csv")
            p(f"{len(rows)} cells")
            p(f"{'q':>4} {'r_us':>8} {'r_ld':>8} {'lambda':>8} {'owner':>16} {'contractor':>16} "
              f"{'moe con':>8} {'moe gen':>8} {'conflict':>9}")
            for r in rows:
                p(f"{r['q']:>4} {float(r['r_us']):8.6f} {float(r['r_ld']):8.6f} {float(r['lambda']):8.6f} "
                  f"{float(r['owner_mean']):16.2f} {float(r['contractor_mean']):16.2f} "
                  f"{_pct(float(r['contractor_margin'])):>8} {_pct(float(r['generation_margin'])):>8} "
                  f"{float(r['conflict']):9.6f}")
            worst_con = max(float(r["contractor_margin"]) for r in rows)
            worst_gen = max(float(r["generation_margin"]) for r in rows)
            p(f"max margin of error (95%): contractor profit {_pct(worst_con)}, generation {_pct(worst_gen)}")
        elif command == "optimize":
            rows = _read_csv(run / "pareto.csv")
            comp = json.loads((run / "compromise.json").read_text())
            p(f"{len(rows)} efficient solutions ({comp['generations']} generations, stop: {comp['stop_reason']})")
            p(f"{'r_us':>9} {'r_ld':>9} {'lambda':>9} {'tech':>10} {'obj1':>10} {'total profit':>16}")
            for r in rows:
                mark = " *" if r["compromise"] == "1" else ""
                p(f"{float(r['r_us']):9.6f} {float(r['r_ld']):9.6f} {float(r['lambda']):9.6f} "
                  f"{float(r['tech']):10.6f} {float(r['obj1']):10.6f} {-float(r['obj2']):16.2f}{mark}")
            p(f"compromise: r_us={comp['r_us']:.6f} r_ld={comp['r_ld']:.6f} lambda={comp['lambda']:.6f} "
              f"technicians={comp['tech_rounded']} conflict={comp['obj1']:.6f} total={comp['total_profit']:.2f} EUR")
        else:
            print(f"error: unknown command {command!r} in manifest", file=sys.stderr)
            return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: incomplete run directory {run}: {exc}", file=sys.stderr)
        return 1
    return 0


# -- wiring -------------------------------------------------------------------

def _replay_args(args) -> dict:
    keys = ["seed", "samples", "axis", "final_samples", "ga_population", "ga_generations", "ga_stall",
            "ga_tolerance", "ga_crossover", "ga_elite", "ga_mutation"]
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "optimize": cmd_optimize}


def _run(args) -> int:
    try:
        bundle = _bundle_for(args)
        outputs = COMMANDS[args.command](args)
        replay = _replay_args(args)
        if args.command == "optimize":
            replay.setdefault("samples", 200)
        _atomic_json(Path(args.out) / "manifest.json", _manifest(args, bundle, outputs, replay))
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - exit code contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def _add_common(p: argparse.ArgumentParser, samples_help: str) -> None:
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides sim.master_seed)")
    p.add_argument("--samples", type=int, help=samples_help)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="owfcontract", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo run of the configured contract")
    _add_common(p, "Monte Carlo samples (overrides sim.samples)")

    p = sub.add_parser("sweep", help="grid sweep over contract terms")
    _add_common(p, "Monte Carlo samples per cell (overrides sim.samples)")
    p.add_argument("--axis", action="append", default=[],
                   help="name=start:stop:step or name=v1,v2; names: " + ", ".join(AXIS_FIELDS))

    p = sub.add_parser("optimize", help="multi-objective GA over contract terms")
    _add_common(p, "samples per GA evaluation (default 200)")
    p.add_argument("--final-samples", type=int, default=2000, help="samples for re-evaluating the front")
    p.add_argument("--ga-population", type=int)
    p.add_argument("--ga-generations", type=int)
    p.add_argument("--ga-stall", type=int)
    p.add_argument("--ga-tolerance", type=float)
    p.add_argument("--ga-crossover", type=float)
    p.add_argument("--ga-elite", type=float)
    p.add_argument("--ga-mutation", choices=("adaptive", "off"))

    p = sub.add_parser("report", help="summarize a finished run directory")
    p.add_argument("run_dir")

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    return ap


def _rerun(ns) -> int:
    try:
        manifest = json.loads(Path(ns.manifest).read_text())
        command = manifest["command"]
        doc = manifest["config"]
        replay = dict(manifest.get("args", {}))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: unreadable manifest {ns.manifest}: {exc}", file=sys.stderr)
        return 1
    if command not in COMMANDS:
        print(f"error: cannot replay command {command!r}", file=sys.stderr)
        return 1
    try:
        bundle = validate_config(doc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if config_hash(bundle) != manifest.get("config_hash"):
        print("error: embedded config does not match its hash", file=sys.stderr)
        return 1
    parser = build_parser()
    argv = [command, "--config", "-", "--out", ns.out, "--threads", str(ns.threads)]
    args = parser.parse_args(argv)
    for k, v in replay.items():
        setattr(args, k, v)
    args.config = manifest.get("config_path")
    args.config_document = doc
    return _run(args)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "report":
        return cmd_report(ns)
    if ns.command == "rerun":
        return _rerun(ns)
    ns.config_document = None
    return _run(ns)


if __name__ == "__main__":
    sys.exit(main())
