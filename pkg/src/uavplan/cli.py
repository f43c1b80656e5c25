"""Command-line entry point.

Every subcommand prints a human-readable summary to stdout and, with
``--out``, writes a JSON run report whose ``outputs`` section uses the same
data model as the input files. Exit status: 0 success, 1 infeasible
decision, 2 invalid input or usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import calibration, decision, energy, metrics, report, sampling, simulator
from .errors import InfeasibleError, PlanningError, PlanningWarning
from .profiles import (
    FlightParams,
    MissionProfiles,
    TaskSpec,
    load_profiles,
    load_tables,
    profiles_from_dict,
    profiles_to_dict,
    save_profiles,
    save_table,
)

PROFILES_DIR_ENV = "UAVPLAN_PROFILES_DIR"
DEFAULT_PROFILES_NAME = "profiles.json"


@dataclass
class RunReport:
    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, Any] = field(default_factory=dict)
    warnings: list[dict[str, str]] = field(default_factory=list)
    duration_s: float | None = None
    status: int = 0

    def to_dict(self, deterministic: bool = False) -> dict:
        out = {
            "command": self.command,
            "status": self.status,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": self.outputs,
            "warnings": self.warnings,
        }
        if not deterministic:
            out["duration_s"] = self.duration_s
        return out

    def track(self, path: str | os.PathLike) -> None:
        path = Path(path)
        files = sorted(path.rglob("*")) if path.is_dir() else [path]
        for file in files:
            if file.is_file():
                self.inputs[str(file)] = hashlib.sha256(file.read_bytes()).hexdigest()


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _resolve_profiles(path: str | None) -> Path:
    base = os.environ.get(PROFILES_DIR_ENV)
    if path is None:
        if not base:
            raise PlanningError(f"--profiles is required (or set {PROFILES_DIR_ENV})", module="cli")
        return Path(base) / DEFAULT_PROFILES_NAME
    candidate = Path(path)
    if not candidate.exists() and base and not candidate.is_absolute():
        alt = Path(base) / candidate
        if alt.exists():
            return alt
    return candidate


def _load(args, rr: RunReport) -> MissionProfiles:
    path = _resolve_profiles(getattr(args, "profiles", None))
    rr.track(path)
    return load_profiles(path)


def _table(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    cells = [[str(h) for h in header]] + [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# -- subcommands ---------------------------------------------------------------------

def cmd_energy(args, rr: RunReport) -> int:
    profiles = _load(args, rr)
    params = FlightParams(args.model, args.alt, args.speed, args.rate)
    breakdown = energy.system_energy(profiles, params)
    print(_table(
        [["p_uav", breakdown.p_uav], ["p_edge_run", breakdown.p_edge_run],
         ["p_edge_standby", breakdown.p_edge_standby], ["p_system", breakdown.p_system]],
        ["component", "Wh/km2"],
    ))
    analysis = {
        "threshold_model": energy.highest_power_model(profiles),
        "threshold_p_target": energy.full_rate_coefficient(profiles, energy.highest_power_model(profiles))
        / (args.alt * args.speed),
    }
    analysis["threshold_altitude"] = energy.equal_energy_altitude(profiles, analysis["threshold_p_target"], args.speed)
    print(f"\nfull-standby altitude matching full-rate {analysis['threshold_model']} at "
          f"{args.alt:g} m: {analysis['threshold_altitude']:.2f} m "
          f"(target {analysis['threshold_p_target']:.4f} Wh/km2)")
    if args.p_target is not None:
        analysis["user_p_target"] = args.p_target
        analysis["user_altitude"] = energy.equal_energy_altitude(profiles, args.p_target, args.speed)
        print(f"full-standby altitude for user target {args.p_target:g} Wh/km2: {analysis['user_altitude']:.2f} m")
    rr.outputs = {"params": {"model_id": params.model_id, "h": params.h, "v": params.v, "r": params.r},
                  "energy": breakdown.to_dict(), "altitude_analysis": analysis}
    return 0


def cmd_calibrate(args, rr: RunReport) -> int:
    rr.track(args.log)
    path = _resolve_profiles(args.profiles)
    rr.track(path)
    profiles = load_profiles(path)
    data = profiles_to_dict(profiles)
    if args.target == "camera":
        fit = calibration.fit_theta(calibration.read_footprint_log(args.log))
        data["camera"]["theta"] = fit.value
        label = "theta"
    else:
        samples = calibration.read_endurance_log(args.log)
        fit = calibration.fit_alpha(samples, profiles.camera)
        data["uav"]["alpha"] = fit.value
        data["uav"]["benchmark_energy"] = samples[0].E
        label = "alpha"
        if fit.cv > calibration.CV_WARNING_THRESHOLD:
            warnings.warn(PlanningWarning(
                "calibration", f"flight-time CV {fit.cv:.2%} exceeds {calibration.CV_WARNING_THRESHOLD:.0%}; "
                "the constant-endurance assumption is doubtful"))
    rows = [[label, fit.value], ["residual_rms", fit.residual_rms], ["samples", fit.sample_count]]
    if fit.cv is not None:
        rows += [["1/alpha", 1 / fit.value], ["cv", fit.cv]]
    print(_table(rows, ["quantity", "value"]))
    rr.outputs = {"target": args.target, "fit": fit.to_dict()}
    if not args.dry_run:
        save_profiles(profiles_from_dict(data), path)
        rr.outputs["written"] = str(path)
        print(f"\nwrote {label} to {path}")
    return 0


def cmd_metrics(args, rr: RunReport) -> int:
    rr.track(args.trace)
    rr.track(args.truth)
    result = metrics.evaluate(metrics.load_trace(args.trace), metrics.load_truth(args.truth), args.iou)
    rows = [[k, v] for k, v in result.to_dict().items()]
    print(_table(rows, ["metric", "value"]))
    if not result.precision_defined:
        print("\nprecision undefined (no detections); reported as 1.0")
    rr.outputs = {"metrics": result.to_dict()}
    return 0


def _simulated_oracle(args, rr: RunReport):
    profiles = _load(args, rr)
    for p in (args.scene, args.detectability):
        rr.track(p)
    spec = simulator.load_scene_spec(args.scene)
    det = simulator.load_detectability(args.detectability)
    scenes = [simulator.generate_scene(spec.with_seed(spec.seed + i)) for i in range(args.seeds)]
    r_cap = profiles.edge.model(args.model).r_max

    def oracle(rate: float) -> float:
        return simulator.mean_recall(scenes, profiles.camera, det, FlightParams(args.model, args.alt, args.speed, rate))

    return oracle, r_cap


def cmd_search_rate(args, rr: RunReport) -> int:
    if args.trace:
        if not args.truth:
            raise PlanningError("--trace needs --truth", module="cli")
        rr.track(args.trace)
        rr.track(args.truth)
        oracle = sampling.trace_recall_oracle(metrics.load_trace(args.trace), metrics.load_truth(args.truth))
        r_cap = args.r_cap
    else:
        missing = [f for f in ("scene", "detectability", "model", "alt", "speed") if getattr(args, f) is None]
        if missing:
            raise PlanningError("simulator oracle needs --" + ", --".join(missing), module="cli")
        oracle, r_cap = _simulated_oracle(args, rr)
        if args.r_cap is not None:
            r_cap = min(r_cap, args.r_cap)
    if args.r1 is not None:
        r1 = args.r1
    elif args.d_far is not None and args.speed is not None:
        r1 = sampling.initial_rate(args.d_far, args.speed)
    else:
        raise PlanningError("give --r1, or --d-far with --speed", module="cli")
    if r_cap is not None:
        r1 = min(r1, r_cap)
    result = sampling.search(sampling.RateSearchConfig(r1, args.epsilon, oracle, r_cap=r_cap))
    print(_table([[r, p] for r, p in result.evaluations], ["rate_hz", "recall"]))
    print(f"\nselected rate {result.rate:.6g} Hz, recall {result.recall:.4f}, {result.oracle_calls} oracle calls")
    rr.outputs = {"search": result.to_dict(), "r1": r1}
    return 0


def cmd_decide(args, rr: RunReport) -> int:
    profiles = _load(args, rr)
    tables = profiles.tables
    if args.tables:
        rr.track(args.tables)
        tables = load_tables(args.tables)
    task = profiles.task
    perf_min = args.perf_min if args.perf_min is not None else (task.perf_min if task else None)
    if perf_min is None:
        raise PlanningError("--perf-min is required when the profiles carry no task", module="cli")
    beta = args.beta if args.beta is not None else (task.beta if task else 1.0)
    n = args.n if args.n is not None else (task.n if task else None)
    task = TaskSpec(perf_min, beta, n)
    try:
        rec = decision.decide(tables, profiles, task)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}")
        rr.outputs = {"infeasible": {"perf_min": exc.perf_min, "best_perf_max": exc.best_perf_max}}
        return 1
    c = rec.chosen
    print("recommended flight parameters")
    print(_table([[c.params.model_id, c.params.h, c.params.v, c.params.r, c.perf, c.energy]],
                 ["model", "h_m", "v_mps", "r_hz", "perf", "Wh/km2"]))
    print(f"\n{rec.candidates_considered} candidates, energy_min {rec.energy_min:.6g} Wh/km2, "
          f"{rec.filtered_by_beta} dropped by beta={task.beta:g}\n")
    print(_table([[x.params.model_id, x.params.h, x.params.v, x.params.r, x.perf, x.energy]
                  for x in rec.candidates], ["model", "h_m", "v_mps", "r_hz", "perf", "Wh/km2"]))
    rr.outputs = {"task": {"perf_min": task.perf_min, "beta": task.beta, "n": task.n},
                  "recommendation": rec.to_dict()}
    if args.audit:
        result = decision.audit(tables, profiles, task)
        print(f"\naudit: pruned oracle {'agrees' if result.oracle_agrees else 'DISAGREES'}; "
              f"pruning regret {result.energy_regret:+.6g} Wh/km2, {result.perf_regret:+.4f} perf")
        rr.outputs["audit"] = result.to_dict()
        if not result.oracle_agrees:
            warnings.warn(PlanningWarning("decision", "decision differs from the pruned brute-force oracle"))
    return 0


def cmd_simulate(args, rr: RunReport) -> int:
    profiles = _load(args, rr)
    for p in (args.scene, args.detectability):
        rr.track(p)
    spec = simulator.load_scene_spec(args.scene)
    det = simulator.load_detectability(args.detectability)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Any] = {}
    scene = simulator.generate_scene(spec)
    print(f"scene: {len(scene)} objects, digest {scene.digest()[:16]}")

    if args.model and args.alt and args.speed and args.rate:
        flight = simulator.simulate_flight(scene, profiles, det, FlightParams(args.model, args.alt, args.speed,
                                                                              args.rate), args.noise)
        metrics.save_trace(flight.trace, out / "trace.json")
        metrics.save_truth(flight.truth, out / "truth.json")
        scores = metrics.evaluate(flight.trace, flight.truth)
        written["flight"] = {"trace": str(out / "trace.json"), "truth": str(out / "truth.json"),
                             "metrics": scores.to_dict()}
        print(f"flight: {len(flight.trace.frames)} frames, recall {scores.recall:.4f}")

    altitudes = _floats(args.altitudes)
    foot = simulator.footprint_log(profiles.camera, altitudes, args.noise, spec.seed, repeats=args.repeats)
    calibration.write_footprint_log(foot, out / "footprint.csv")
    endure = simulator.endurance_log(profiles, altitudes, _floats(args.speeds), args.noise, spec.seed)
    calibration.write_endurance_log(endure, out / "endurance.csv")
    written["footprint_log"] = str(out / "footprint.csv")
    written["endurance_log"] = str(out / "endurance.csv")

    if args.tables:
        scenes = [simulator.generate_scene(spec.with_seed(spec.seed + i)) for i in range(args.seeds)]
        rates = _floats(args.rates) if args.rates else None
        models = [m for m in det.model_ids if m in profiles.edge.model_ids]
        tables_dir = out / "tables"
        written["tables"] = []
        for model_id in models:
            table = simulator.build_perf_table(
                scenes, profiles, det, model_id, altitudes, rates, args.benchmark_speed,
                r1=args.r1, epsilon=args.epsilon,
            )
            path = tables_dir / f"{model_id}.json"
            save_table(table, path)
            written["tables"].append(str(path))
            print(f"table {model_id}: perf_max " + ", ".join(f"{p:.3f}" for p in table.perf_max))
    for key, value in written.items():
        if key != "tables" and isinstance(value, str):
            print(f"wrote {value}")
    rr.outputs = written
    return 0


def cmd_compare(args, rr: RunReport) -> int:
    rr.track(args.measured)
    groups = report.load_and_compare(args.measured, args.beta)
    for g in groups:
        print(f"{g.name}: recommended {g.recommended.energy:g} Wh")
        print(_table([[r.label, r.model or "", r.altitude or "", r.speed or "", r.rate or "", r.recall, r.energy,
                       f"{s:.2%}"] for r, s in g.savings],
                     ["row", "model", "h_m", "v_mps", "r_hz", "recall", "energy_Wh", "saving"]))
        print(f"max saving: {g.max_saving:.2%}")
        for r in g.tolerance_conflicts:
            print(f"note: {r.label} row (energy {r.energy:g}) has higher recall within the energy tolerance")
        print()
    rr.outputs = {"groups": [g.to_dict() for g in groups]}
    return 0


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON run report here")
    common.add_argument("--deterministic", action="store_true", help="omit wall-clock fields from the report")

    parser = argparse.ArgumentParser(prog="uavplan", description="Energy-aware flight planning for UAV detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="fit camera theta or UAV alpha from flight logs")
    cal_sub = cal.add_subparsers(dest="target", required=True)
    for target, log_help in (("camera", "footprint CSV (h_m,l_m)"), ("uav", "endurance CSV (h_m,v_mps,t_s,E_wh)")):
        p = cal_sub.add_parser(target, parents=[common])
        p.add_argument("--log", required=True, help=log_help)
        p.add_argument("--profiles", help="profiles file updated in place")
        p.add_argument("--dry-run", action="store_true", help="fit only, do not write the profiles file")
        p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("energy", parents=[common], help="energy breakdown of one flight")
    p.add_argument("--profiles")
    p.add_argument("--alt", type=float, required=True)
    p.add_argument("--speed", type=float, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--p-target", type=float, help="also report the full-standby altitude for this Wh/km2")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("metrics", parents=[common], help="precision/recall of a detection trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--iou", type=float, default=metrics.DEFAULT_IOU_THRESHOLD)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("search-rate", parents=[common], help="lowest sampling rate with the best recall")
    p.add_argument("--trace")
    p.add_argument("--truth")
    p.add_argument("--scene")
    p.add_argument("--profiles")
    p.add_argument("--detectability")
    p.add_argument("--model")
    p.add_argument("--alt", type=float)
    p.add_argument("--speed", type=float)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--r1", type=float)
    p.add_argument("--d-far", type=float, help="farthest detected object distance (m) for the initial rate")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--r-cap", type=float)
    p.set_defaults(func=cmd_search_rate)

    p = sub.add_parser("decide", parents=[common], help="recommend flight parameters")
    p.add_argument("--profiles")
    p.add_argument("--tables", help="table file or directory of table files")
    p.add_argument("--perf-min", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--audit", action="store_true", help="also run both brute-force oracles")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("simulate", parents=[common], help="synthetic traces, logs and tables")
    p.add_argument("--scene", required=True)
    p.add_argument("--profiles")
    p.add_argument("--detectability", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model")
    p.add_argument("--alt", type=float)
    p.add_argument("--speed", type=float)
    p.add_argument("--rate", type=float)
    p.add_argument("--noise", type=float, default=0.0, help="relative noise on logs and endurance")
    p.add_argument("--altitudes", default="20,30,40,50,60,70,80,90,100")
    p.add_argument("--speeds", default="1,3,5,7,9")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--tables", action="store_true", help="also build one performance table per model")
    p.add_argument("--rates", help="comma-separated rate grid for tables")
    p.add_argument("--r1", type=float, help="initial rate when tables use the rate search")
    p.add_argument("--epsilon", type=float, help="rate tolerance when tables use the rate search")
    p.add_argument("--benchmark-speed", type=float, default=5.0)
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="savings against measured alternative flights")
    p.add_argument("--measured", required=True)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_compare)
    return parser


def run(argv: Sequence[str] | None = None) -> tuple[int, RunReport]:
    argv = list(sys.argv[1:] if argv is None else argv)
    rr = RunReport(command=argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        rr.status = int(exc.code or 0)
        return rr.status, rr
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            status = args.func(args, rr)
        except InfeasibleError as exc:
            print(f"error [{exc.module}]: {exc}", file=sys.stderr)
            status = 1
        except PlanningError as exc:
            print(f"error [{exc.module}]: {exc}", file=sys.stderr)
            rr.outputs = {"error": {"module": exc.module, "message": str(exc),
                                    "field": getattr(exc, "field", None)}}
            status = 2
    for w in caught:
        module = getattr(w.message, "module", None) or Path(w.filename).stem
        text = getattr(w.message, "text", str(w.message))
        rr.warnings.append({"module": module, "message": text})
        print(f"warning [{module}]: {text}", file=sys.stderr)
    rr.duration_s = time.perf_counter() - start
    rr.status = status
    if args.out:
        payload = rr.to_dict(deterministic=args.deterministic)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return status, rr


def main(argv: Sequence[str] | None = None) -> None:
    status, _ = run(argv)
    sys.exit(status)


if __name__ == "__main__":
    main()
