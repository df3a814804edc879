"""Command line entry point: plan, simulate, compare, sweep, oracle-check."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import baselines
from .io import config_json, fraction_json, load_trace, load_video, loop_video, plan_json
from .metrics import build_report
from .model import BandwidthTrace, Mode, ModelError, make_config, objective_value
from .noskip import plan_offline_noskip
from .online import OnlineConfig, run_online
from .oracle import OracleLimitError, enumerate_optimal_noskip, enumerate_optimal_skip
from .playback import execute_plan
from .prediction import PredictionConfig, PredictorKind, make_predictor
from .scans import plan_offline_skip

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_MISMATCH = 0, 1, 2, 3
POLICY_NAMES = ["lbp-offline", "lbp-online", *baselines.POLICIES]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--video", required=True, help="video description JSON")
    p.add_argument("--startup", type=int, default=5, help="startup delay in slots")
    p.add_argument("--buffer", type=int, default=10, help="buffer capacity in slots")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SKIP.value)
    p.add_argument("--gamma", type=Fraction, default=None, help="layer weight (default: derived)")
    p.add_argument("--beta", type=Fraction, default=Fraction(1001, 1000))
    p.add_argument("--lam", type=Fraction, default=None, help="stall penalty (no-skip)")
    p.add_argument("--slot-duration", type=Fraction, default=Fraction(1), help="seconds per slot")
    p.add_argument("--loop-video", action="store_true", help="repeat the video to cover long traces")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="write the main result here instead of stdout")


def _add_online(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=None, help="prediction window W (default: whole video)")
    p.add_argument("--period", type=int, default=1, help="replanning period in slots")
    p.add_argument("--buffer-low", type=int, default=None, help="low-buffer threshold (default: buffer/2)")
    p.add_argument("--miss-threshold", type=int, default=1, help="deadline-miss threshold in slots")
    p.add_argument("--predictor", choices=[k.value for k in PredictorKind], default="oracle")
    p.add_argument("--history", type=int, default=5, help="harmonic-mean history in slots")
    p.add_argument("--pe", type=float, default=0.0, help="synthetic prediction error")
    p.add_argument("--bba-lower", type=int, default=baselines.BBA_LOWER)
    p.add_argument("--bba-upper", type=int, default=baselines.BBA_UPPER)
    p.add_argument("--nms-lower", type=int, default=None, help="NMS low-buffer threshold (default: buffer/4)")
    p.add_argument("--sb1-slope", type=Fraction, default=baselines.SLOPE_SB1)
    p.add_argument("--sb2-slope", type=Fraction, default=baselines.SLOPE_SB2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svclbp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="offline plan for a known trace")
    _add_common(p)
    p.add_argument("--trace", required=True)

    p = sub.add_parser("simulate", help="run one policy or a saved plan against a trace")
    _add_common(p)
    _add_online(p)
    p.add_argument("--truth", required=True, help="trace the session really sees")
    p.add_argument("--policy", choices=POLICY_NAMES, default="lbp-online")
    p.add_argument("--plan", help="plan JSON to execute instead of a policy")
    p.add_argument("--plan-trace", help="trace the offline plan is computed on (default: truth)")
    p.add_argument("--series", help="write per-chunk playback series CSV here")

    p = sub.add_parser("compare", help="several policies over a set of traces")
    _add_common(p)
    _add_online(p)
    p.add_argument("--policies", nargs="+", choices=POLICY_NAMES, default=POLICY_NAMES)
    p.add_argument("--traces", nargs="*", default=[])
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="online planner over a parameter grid")
    _add_common(p)
    _add_online(p)
    p.add_argument("--traces", nargs="*", default=[])
    p.add_argument("--windows", type=int, nargs="+", default=[10])
    p.add_argument("--pes", type=float, nargs="+", default=[0.0])
    p.add_argument("--periods", type=int, nargs="+", default=[1])
    p.add_argument("--buffers", type=int, nargs="+", default=None)
    p.add_argument("--buffer-lows", type=int, nargs="+", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("oracle-check", help="compare the planner with exhaustive search")
    _add_common(p)
    p.add_argument("--trace", required=True)
    return parser


def _seed(args) -> int:
    env = os.environ.get("SVC_LBP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SVC_LBP_SEED={env!r} is not an integer") from None
    return args.seed


def _setup(args, trace: BandwidthTrace, buffer: int | None = None):
    spec = load_video(args.video)
    if args.loop_video:
        spec = loop_video(spec, len(trace), args.startup)
    config = make_config(spec, args.startup, args.buffer if buffer is None else buffer,
                         mode=Mode(args.mode), gamma=args.gamma, beta=args.beta, lam=args.lam)
    return spec, config


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _plan(spec, config, trace):
    planner = plan_offline_noskip if config.mode == Mode.NOSKIP else plan_offline_skip
    return planner(spec, config, trace)


def _online_config(args, spec, config, buffer_low=None, window=None, period=None) -> OnlineConfig:
    last_deadline = (spec.num_chunks - 1) * spec.chunk_duration + config.startup_delay
    window = window or args.window or max(1, last_deadline)
    if buffer_low is None:
        buffer_low = args.buffer_low if args.buffer_low is not None else config.buffer_capacity // 2
    return OnlineConfig(window=window, period=period or args.period, buffer_low=buffer_low,
                        deadline_miss_threshold=args.miss_threshold)


def _predictor(args, online: OnlineConfig, truth, seed: int, pe: float | None = None):
    pe = args.pe if pe is None else pe
    kind = PredictorKind(args.predictor)
    if kind == PredictorKind.ORACLE and pe > 0:
        kind = PredictorKind.CROWD  # a noisy oracle is the synthetic crowd forecast
    cfg = PredictionConfig(kind, args.history, online.window, pe, seed)
    return make_predictor(cfg, truth)


def _run_policy(name, args, spec, config, truth, seed, plan_trace=None):
    if name == "lbp-offline":
        plan = _plan(spec, config, plan_trace or truth)
        return execute_plan(plan, spec, config, truth)
    if name == "lbp-online":
        online = _online_config(args, spec, config)
        return run_online(spec, config, online, _predictor(args, online, truth, seed), truth)
    if name == "bba":
        return baselines.run_bba(spec, config, truth, args.bba_lower, args.bba_upper)
    if name == "nms":
        return baselines.run_nms(spec, config, truth, args.nms_lower)
    if name in ("sb1", "sb2"):
        return baselines.run_slope(spec, config, truth, getattr(args, f"{name}_slope"))
    return baselines.POLICIES[name](spec, config, truth)


def _series_csv(log, spec, slot_duration) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["chunk", "play_slot", "playback_time_s", "level", "delivered_kb", "rate_kbps"])
    L = spec.chunk_duration
    for i, (lv, kb) in enumerate(zip(log.levels, log.delivered_kb)):
        rate = Fraction(kb) / (L * slot_duration)
        w.writerow([i + 1, log.play_slot[i], float(log.play_slot[i] * slot_duration), lv, kb, float(rate)])
    return out.getvalue()


def cmd_plan(args) -> int:
    trace = load_trace(args.trace, args.slot_duration)
    spec, config = _setup(args, trace)
    plan = _plan(spec, config, trace)
    result = {
        "config": config_json(spec, config, args.slot_duration),
        "plan": plan_json(plan),
        "objective": fraction_json(objective_value(plan, spec, config)),
    }
    _emit(args, _dump(result))
    return EXIT_OK


def _load_plan(path, spec):
    from .model import LayerPlan
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    body = data.get("plan", data)
    if len(body.get("levels", ())) != spec.num_chunks or len(body.get("sizes_kb", ())) != spec.num_chunks:
        raise ModelError(f"plan file does not cover the {spec.num_chunks} chunks of the video")
    try:
        return LayerPlan(
            levels=tuple(body["levels"]),
            sizes=tuple(body["sizes_kb"]),
            deadlines=tuple(body["deadlines"]),
            stalls=tuple(body.get("stalls", ())),
            mode=Mode(body.get("mode", "skip")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed plan file: {exc}") from None


def cmd_simulate(args) -> int:
    truth = load_trace(args.truth, args.slot_duration)
    spec, config = _setup(args, truth)
    seed = _seed(args)
    if args.plan:
        plan = _load_plan(args.plan, spec)
        log, policy = execute_plan(plan, spec, config, truth), "plan:" + os.path.basename(args.plan)
    else:
        plan_trace = load_trace(args.plan_trace, args.slot_duration) if args.plan_trace else None
        log, policy = _run_policy(args.policy, args, spec, config, truth, seed, plan_trace), args.policy
    report = build_report(log, spec, config, args.slot_duration)
    result = {
        "config": config_json(spec, config, args.slot_duration),
        "policy": policy,
        "seed": seed,
        "report": report.to_json(),
        "levels": list(log.levels),
        "truncated": log.truncated,
    }
    if args.policy == "lbp-online" and not args.plan:
        result["online"] = vars(_online_config(args, spec, config))
        result["replans"] = len(log.replans)
    _emit(args, _dump(result))
    if args.series:
        with open(args.series, "w", encoding="utf-8", newline="") as fh:
            fh.write(_series_csv(log, spec, args.slot_duration))
    return EXIT_OK


def _table(rows: list[list], header: list[str]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def _fmt(x: Fraction) -> str:
    return f"{float(x):.6f}"


def cmd_compare(args) -> int:
    if not args.traces:
        raise UsageError("compare needs at least one trace")
    seed = _seed(args)
    traces = [(path, load_trace(path, args.slot_duration)) for path in args.traces]
    tasks = [(path, trace, name) for path, trace in traces for name in args.policies]

    def run(task):
        path, trace, name = task
        spec, config = _setup(args, trace)
        log = _run_policy(name, args, spec, config, trace, seed)
        return path, name, build_report(log, spec, config, args.slot_duration)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, tasks))  # keeps input order
    keys = list(results[0][2].breakdown)
    rows = [[path, name, r.skips, r.total_stall, _fmt(r.avg_rate_kbps), _fmt(r.lsr),
             *(r.breakdown.get(k, 0) for k in keys)] for path, name, r in results]
    _emit(args, _table(rows, ["trace", "policy", "skips", "stall", "avg_rate_kbps", "lsr", *keys]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.traces:
        raise UsageError("sweep needs at least one trace")
    env_seed = os.environ.get("SVC_LBP_SEED")
    seeds = [_seed(args)] if env_seed is not None or args.seeds is None else args.seeds
    buffers = args.buffers or [args.buffer]
    lows = args.buffer_lows or [None]
    traces = [(path, load_trace(path, args.slot_duration)) for path in args.traces]
    grid = list(itertools.product(traces, args.windows, args.pes, args.periods, buffers, lows, seeds))

    def run(point):
        (path, trace), W, pe, alpha, B, low, seed = point
        spec, config = _setup(args, trace, buffer=B)
        online = _online_config(args, spec, config, buffer_low=low, window=W, period=alpha)
        online.validate(config)
        log = run_online(spec, config, online, _predictor(args, online, trace, seed, pe), trace)
        r = build_report(log, spec, config, args.slot_duration)
        return [path, W, pe, alpha, B, online.buffer_low, seed, r.skips, r.total_stall,
                _fmt(r.avg_rate_kbps), _fmt(r.lsr)]

    for point in grid:  # reject a bad grid before running anything
        (_, trace), W, pe, alpha, B, low, _ = point
        if W < 1 or pe < 0 or B < 1:
            raise ModelError(f"invalid grid point W={W} pe={pe} buffer={B}")
        spec, config = _setup(args, trace, buffer=B)
        _online_config(args, spec, config, buffer_low=low, window=W, period=alpha).validate(config)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(run, grid))
    header = ["trace", "window", "pe", "period", "buffer", "buffer_low", "seed",
              "skips", "stall", "avg_rate_kbps", "lsr"]
    _emit(args, _table(rows, header))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    trace = load_trace(args.trace, args.slot_duration)
    spec, config = _setup(args, trace)
    plan = _plan(spec, config, trace)
    got = objective_value(plan, spec, config)
    if config.mode == Mode.NOSKIP:
        opt = enumerate_optimal_noskip(spec, config, trace)
        extra = {"min_stall": opt.min_stall, "planner_stall": plan.total_stall}
    else:
        opt = enumerate_optimal_skip(spec, config, trace)
        extra = {"min_skips": opt.min_skips, "planner_skips": len(plan.skipped)}
    match = got == opt.objective
    verdict = {
        "mode": config.mode.value,
        "match": match,
        "planner": {"levels": list(plan.levels), "objective": fraction_json(got)},
        "oracle": {"objective": fraction_json(opt.objective), "solutions": [list(s) for s in opt.solutions]},
        **extra,
        "config": config_json(spec, config, args.slot_duration),
    }
    _emit(args, _dump(verdict))
    return EXIT_OK if match else EXIT_MISMATCH


COMMANDS = {
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"svclbp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"svclbp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OracleLimitError) as exc:
        print(f"svclbp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
