"""Command-line front end.

Exit codes: 0 ok, 2 infeasible, 3 validation flag raised, 4 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoders import assemble
from .milp import Status, export_lp_text
from .planner import PlanResult, diagnose_infeasible, plan, prepare, receding_horizon
from .scenario import Mode, ScenarioError, ScenarioParseError, load_scenario, random_scenario
from .validate import McReport, audit_complexity, mc_collision_prob, suboptimality

EXIT_OK, EXIT_INFEASIBLE, EXIT_FLAG, EXIT_INPUT = 0, 2, 3, 4
TIMING_FIELDS = ("build_time", "solve_time")


class InputError(Exception):
    pass


@dataclass
class RunRecord:
    """Everything needed to reproduce and re-validate a planning run."""

    scenario_digest: str
    mode: str
    seed: int
    status: str
    objective: float | None
    objective_offset: float
    solver: dict
    binaries: dict
    big_m: float
    controls: list | None
    mean_paths: list | None
    sample_paths: list | None = None
    validation: dict | None = None
    receding: dict | None = None
    overrides: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunRecord:
        return cls(**json.loads(text))

    def without_timing(self) -> dict:
        d = asdict(self)
        d["solver"] = {k: v for k, v in d["solver"].items() if k not in TIMING_FIELDS}
        return d


def _finite(x):
    return float(x) if x is not None and math.isfinite(x) else None


def make_record(cfg, res: PlanResult, keep_samples: bool = False, overrides: dict | None = None) -> RunRecord:
    meta = {k: v for k, v in res.meta.items() if k in ("ripp_alpha", "robust_alpha", "ripp_halving", "big_m_required", "n_vars", "n_constraints")}
    return RunRecord(
        scenario_digest=cfg.digest(),
        mode=res.mode.value,
        seed=cfg.seed,
        status=res.status.value,
        objective=_finite(res.objective),
        objective_offset=res.objective_offset,
        solver={"build_time": res.build_time, "solve_time": res.solve_time, "nodes": res.nodes, "backend": cfg.backend},
        binaries=res.meta["binaries"],
        big_m=res.meta["big_m"],
        controls=None if res.controls is None else res.controls.tolist(),
        mean_paths=None if res.mean_paths is None else res.mean_paths.tolist(),
        sample_paths=[s.tolist() for s in res.sample_paths] if keep_samples and res.sample_paths else None,
        overrides=dict(overrides or {}),
        meta=meta,
    )


def write_trajectories(path: Path, mean_paths, sample_paths=None) -> None:
    """CSV with columns agent, t, kind, x, y, vx, vy; kind is ``mean`` or ``sample{j}``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["agent", "t", "kind", "x", "y", "vx", "vy"])
        for i, traj in enumerate(mean_paths):
            for t, s in enumerate(traj):
                w.writerow([i, t, "mean", *(repr(float(v)) for v in s)])
        for i, samples in enumerate(sample_paths or []):
            for j, traj in enumerate(samples):
                for t, s in enumerate(traj):
                    w.writerow([i, t, f"sample{j}", *(repr(float(v)) for v in s)])


# -- scenario loading ---------------------------------------------------------------


def cli_overrides(args) -> dict:
    """Scenario fields replaced by command-line flags."""
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        changes["sample_count"] = args.samples
    if getattr(args, "ripp_halving", False):
        changes["ripp_halving"] = True
    if getattr(args, "time_limit", None) is not None:
        changes["time_limit"] = args.time_limit
    return changes


def load_config(args, changes: dict | None = None):
    if not args.scenario:
        raise InputError("--scenario is required")
    try:
        cfg = load_scenario(args.scenario)
    except FileNotFoundError:
        raise InputError(f"scenario file not found: {args.scenario}") from None
    except (ScenarioError, ScenarioParseError) as exc:
        raise InputError(str(exc)) from None
    changes = cli_overrides(args) if changes is None else changes
    try:
        return cfg.with_(**changes) if changes else cfg
    except ScenarioError as exc:
        raise InputError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- verbs ---------------------------------------------------------------------------


def cmd_plan(args) -> int:
    cfg = load_config(args)
    mode = Mode(args.mode or cfg.mode)
    out = _out_dir(args)
    ens = prepare(cfg)
    res = plan(cfg, mode, ens)
    rec = make_record(cfg, res, args.keep_samples, cli_overrides(args))
    code = EXIT_OK
    if res.status is Status.INFEASIBLE:
        reason = diagnose_infeasible(cfg, mode, ens)
        rec.meta["infeasible"] = reason
        print(f"infeasible: {reason}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    elif res.controls is None:
        print(f"no plan: solver status {res.status.value}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    else:
        write_trajectories(out / "trajectories.csv", res.mean_paths, res.sample_paths if args.keep_samples else None)
        if args.mc:
            report = mc_collision_prob(cfg, res.controls, args.mc, seed=cfg.seed + 1)
            rec.validation = _summary(report)
            (out / "mc_report.json").write_text(report.to_json())
            if not report.passed:
                code = EXIT_FLAG
        if args.receding:
            rh = receding_horizon(cfg, args.receding, mode, seed=cfg.seed + 1)
            rec.receding = {"steps": int(rh.applied.shape[1]), "states": rh.states.tolist(), "applied": rh.applied.tolist()}
    (out / "record.json").write_text(rec.to_json())
    print(f"{mode.value}: {res.status.value} objective={rec.objective} build={res.build_time:.3f}s solve={res.solve_time:.3f}s")
    return code


def _summary(report: McReport) -> dict:
    worst = max(report.pairs, key=lambda e: e.p - e.delta, default=None)
    return {
        "samples": report.samples,
        "seed": report.seed,
        "passed": report.passed,
        "n_flags": len(report.flags),
        "worst": None if worst is None else asdict(worst),
        "obstacle": report.obstacle,
    }


def cmd_validate(args) -> int:
    """Re-check a stored plan; ``--seed`` here seeds the Monte-Carlo draws."""
    if not args.record:
        raise InputError("--record is required")
    try:
        rec = RunRecord.from_json(Path(args.record).read_text())
    except FileNotFoundError:
        raise InputError(f"record not found: {args.record}") from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise InputError(f"malformed record: {exc}") from None
    cfg = load_config(args, rec.overrides)
    if rec.scenario_digest != cfg.digest():
        raise InputError("record was produced for a different scenario (digest mismatch)")
    if rec.controls is None:
        raise InputError("record holds no plan to validate")
    S = args.mc or 100_000
    report = mc_collision_prob(cfg, np.array(rec.controls), S, seed=args.seed if args.seed is not None else cfg.seed + 1)
    out = Path(args.out) if args.out else Path(args.record).with_name("mc_report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    for e in report.pairs:
        mark = "FLAG" if e.flagged else "ok"
        print(f"pair ({e.i},{e.k}) t={e.t}: p={e.p:.5f} se={e.se:.5f} delta={e.delta:g} {mark}")
    return EXIT_OK if report.passed else EXIT_FLAG


def cmd_export_lp(args) -> int:
    cfg = load_config(args)
    mode = Mode(args.mode or cfg.mode)
    ens = prepare(cfg)
    enc = assemble(cfg, ens.coeffs, ens.moments, mode)
    text = export_lp_text(enc.model)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    audit = audit_complexity(enc, cfg)
    print(f"{mode.value}: {enc.model.n_vars} variables, {enc.model.n_constraints} rows, binaries {audit.actual}", file=sys.stderr)
    return EXIT_OK


COMPARE_COLUMNS = ["scenario", "seed", "M", "mode", "status", "objective", "suboptimality_pct", "build_time", "solve_time", "nodes", "binaries"]


def compare_rows(cfg, modes, label: str = "") -> list[dict]:
    """Run each mode on identical planning draws; suboptimality is relative to SA when present."""
    ens = prepare(cfg)
    results = {m: plan(cfg, m, ens) for m in modes}
    ref = results.get(Mode.SA)
    rows = []
    for m in sorted(results, key=lambda m: m.value):
        r = results[m]
        sub = None
        if ref is not None and m is not Mode.SA and r.ok and ref.ok:
            sub = suboptimality(r, ref)
        rows.append(
            {
                "scenario": label,
                "seed": cfg.seed,
                "M": cfg.n_agents,
                "mode": m.value,
                "status": r.status.value,
                "objective": _finite(r.objective),
                "suboptimality_pct": sub,
                "build_time": r.build_time,
                "solve_time": r.solve_time,
                "nodes": r.nodes,
                "binaries": sum(r.meta["binaries"].values()),
            }
        )
    return rows


def _write_rows(path: Path, rows, columns) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in columns})


def _print_table(rows) -> None:
    print(f"{'mode':<8}{'M':>3}{'seed':>6}{'status':>16}{'objective':>14}{'subopt %':>10}{'solve s':>10}{'binaries':>10}")
    for r in rows:
        obj = "-" if r["objective"] is None else f"{r['objective']:.4f}"
        sub = "-" if r["suboptimality_pct"] is None else f"{r['suboptimality_pct']:.2f}"
        print(f"{r['mode']:<8}{r['M']:>3}{r['seed']:>6}{r['status']:>16}{obj:>14}{sub:>10}{r['solve_time']:>10.3f}{r['binaries']:>10}")


def _modes(args, default):
    try:
        return [Mode(m) for m in (args.mode or default)]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_compare(args) -> int:
    cfg = load_config(args)
    modes = _modes(args, ["sa", "ripp"])
    rows = compare_rows(cfg, modes, Path(args.scenario).name)
    out = _out_dir(args)
    _write_rows(out / "compare.csv", rows, COMPARE_COLUMNS)
    _print_table(rows)
    return EXIT_OK if all(r["objective"] is not None for r in rows) else EXIT_INFEASIBLE


def summarize_bench(rows) -> tuple[list[dict], list[dict]]:
    """Plot data: mean solve time per (M, mode) and mean suboptimality per M."""
    runtime, subopt = [], []
    for M in sorted({r["M"] for r in rows}):
        for mode in sorted({r["mode"] for r in rows}):
            times = [r["solve_time"] + r["build_time"] for r in rows if r["M"] == M and r["mode"] == mode]
            if times:
                runtime.append({"M": M, "mode": mode, "mean_wall_time": statistics.fmean(times), "median_wall_time": statistics.median(times), "runs": len(times)})
        subs = [r["suboptimality_pct"] for r in rows if r["M"] == M and r["suboptimality_pct"] is not None]
        if subs:
            subopt.append({"M": M, "mean_suboptimality_pct": statistics.fmean(subs), "runs": len(subs)})
    return runtime, subopt


def cmd_bench(args) -> int:
    modes = _modes(args, ["ripp"])
    rows = []
    base_seed = args.seed or 0
    for M in args.agents:
        for s in range(args.seeds):
            overrides = {"sample_count": args.samples or 30}
            if args.time_limit is not None:
                overrides["time_limit"] = args.time_limit
            cfg = random_scenario(base_seed + s, M, **overrides)
            rows.extend(compare_rows(cfg, modes, f"random-{M}-{base_seed + s}"))
    rows.sort(key=lambda r: (r["mode"], r["M"], r["seed"]))
    out = _out_dir(args)
    _write_rows(out / "bench.csv", rows, COMPARE_COLUMNS)
    runtime, subopt = summarize_bench(rows)
    _write_rows(out / "runtime_vs_M.csv", runtime, ["M", "mode", "mean_wall_time", "median_wall_time", "runs"])
    if subopt:
        _write_rows(out / "suboptimality_vs_M.csv", subopt, ["M", "mean_suboptimality_pct", "runs"])
    for r in runtime:
        print(f"M={r['M']} {r['mode']}: mean {r['mean_wall_time']:.3f}s median {r['median_wall_time']:.3f}s over {r['runs']}")
    for r in subopt:
        print(f"M={r['M']}: mean suboptimality {r['mean_suboptimality_pct']:.2f}% over {r['runs']}")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccmpc", description="Chance-constrained multi-agent planning with sample and RIPP encodings.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, mode_many=False, scenario=True):
        if scenario:
            sp.add_argument("--scenario", help="scenario TOML file")
        if mode_many:
            sp.add_argument("--mode", action="append", choices=[m.value for m in Mode], help="repeat for several modes")
        else:
            sp.add_argument("--mode", choices=[m.value for m in Mode])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--samples", type=int, metavar="N", help="samples per agent")
        sp.add_argument("--out")
        sp.add_argument("--ripp-halving", action="store_true")
        sp.add_argument("--time-limit", type=float, metavar="SEC")

    sp = sub.add_parser("plan", help="solve one scenario and write trajectories and a run record")
    common(sp)
    sp.add_argument("--mc", type=int, metavar="S", help="also validate with S fresh Monte-Carlo draws")
    sp.add_argument("--receding", type=int, metavar="STEPS", help="also run a receding-horizon loop")
    sp.add_argument("--keep-samples", action="store_true", help="include sample trajectories in the outputs")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("compare", help="run several modes on identical draws")
    common(sp, mode_many=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("validate", help="Monte-Carlo check of a stored plan")
    common(sp)
    sp.add_argument("--record", help="record.json written by plan")
    sp.add_argument("--mc", type=int, metavar="S")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("export-lp", help="write the planning MILP in LP format")
    common(sp)
    sp.set_defaults(func=cmd_export_lp)

    sp = sub.add_parser("bench", help="sweep random scenarios over agent counts")
    common(sp, mode_many=True, scenario=False)
    sp.add_argument("--agents", type=int, nargs="+", default=[2, 3, 4, 5])
    sp.add_argument("--seeds", type=int, default=10)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
