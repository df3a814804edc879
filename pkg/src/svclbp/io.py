"""Reading traces and video descriptions, and serialising results."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import BandwidthTrace, LayerPlan, ModelError, StreamConfig, VideoSpec, resolve_lambda


def parse_trace(text: str, slot_duration: Fraction = Fraction(1)) -> BandwidthTrace:
    """One slot per line: ``INT`` kilobits, or ``INDEX,INT`` kbps (header ``slot,kbps`` allowed)."""
    values = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if "," in line:
            fields = [f.strip() for f in line.split(",")]
            if lineno == 1 and fields == ["slot", "kbps"]:
                continue
            if len(fields) != 2:
                raise ModelError(f"trace line {lineno}: expected INDEX,INT")
            kb = _int(fields[1], lineno) * Fraction(slot_duration)
            if kb.denominator != 1:
                raise ModelError(f"trace line {lineno}: {fields[1]} kbps is not a whole number of kb per slot")
            values.append(int(kb))
        else:
            values.append(_int(line, lineno))
    if not values:
        raise ModelError("trace is empty")
    return BandwidthTrace(tuple(values), Fraction(slot_duration))


def _int(field: str, lineno: int) -> int:
    try:
        value = int(field)
    except ValueError:
        raise ModelError(f"trace line {lineno}: {field!r} is not an integer") from None
    if value < 0:
        raise ModelError(f"trace line {lineno}: negative bandwidth")
    return value


def load_trace(path, slot_duration: Fraction = Fraction(1)) -> BandwidthTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"), slot_duration)


def video_from_json(data: dict) -> VideoSpec:
    try:
        C = data["num_chunks"]
        L = data["chunk_duration_slots"]
        layers = []
        for entry in data["layers"]:
            if "nominal_kb" in entry:
                layers.append(int(entry["nominal_kb"]))
            else:
                layers.append([int(y) for y in entry["per_chunk_kb"]])
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed video description: {exc}") from None
    if not isinstance(C, int) or not isinstance(L, int):
        raise ModelError("num_chunks and chunk_duration_slots must be integers")
    return VideoSpec.from_layers(C, L, layers)


def video_to_json(spec: VideoSpec) -> dict:
    layers = [
        {"nominal_kb": sizes[0]} if nominal else {"per_chunk_kb": list(sizes)}
        for sizes, nominal in zip(spec.layer_sizes, spec.nominal)
    ]
    return {"chunk_duration_slots": spec.chunk_duration, "num_chunks": spec.num_chunks, "layers": layers}


def load_video(path) -> VideoSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"video description is not JSON: {exc}") from None
    return video_from_json(data)


def loop_video(spec: VideoSpec, trace_slots: int, startup_delay: int) -> VideoSpec:
    """Repeat the video until it covers the trace, cutting it where the trace ends."""
    L = spec.chunk_duration
    needed = max(spec.num_chunks, (trace_slots - startup_delay) // L + 1)
    if needed == spec.num_chunks:
        return spec
    layers = [[sizes[i % spec.num_chunks] for i in range(needed)] for sizes in spec.layer_sizes]
    return VideoSpec(needed, L, tuple(tuple(x) for x in layers), spec.nominal)


def fraction_json(value: Fraction) -> dict:
    return {"exact": str(value), "value": float(value)}


def config_json(spec: VideoSpec, config: StreamConfig, slot_duration: Fraction) -> dict:
    return {
        "startup_delay": config.startup_delay,
        "buffer_capacity": config.buffer_capacity,
        "mode": config.mode.value,
        "gamma": fraction_json(config.gamma),
        "beta": fraction_json(config.beta),
        "lambda": fraction_json(resolve_lambda(spec, config)),
        "slot_duration": str(slot_duration),
        "video": video_to_json(spec),
    }


def plan_json(plan: LayerPlan) -> dict:
    return {
        "mode": plan.mode.value,
        "levels": list(plan.levels),
        "sizes_kb": list(plan.sizes),
        "skipped": plan.skipped,
        "layer_sets": plan.layer_sets(),
        "deadlines": list(plan.deadlines),
        "lower_deadlines": list(plan.lower),
        "stalls": list(plan.stalls),
        "total_stall": plan.total_stall,
        "scan_iterations": list(plan.scan_iterations),
    }
