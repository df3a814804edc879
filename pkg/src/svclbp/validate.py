"""Independent checks that a session obeyed every streaming constraint."""

from __future__ import annotations

from collections import defaultdict

from .model import SKIP, BandwidthTrace, LayerPlan, Mode, StreamConfig, VideoSpec, deadline_of
from .playback import SessionLog, execute_plan


class ConstraintViolation(AssertionError):
    pass


def session_violations(log: SessionLog, spec: VideoSpec, config: StreamConfig,
                       truth: BandwidthTrace) -> list[str]:
    """Every broken constraint in ``log``, as readable messages (empty when clean)."""
    problems = []
    C, L = spec.num_chunks, spec.chunk_duration
    caps = truth.capacities
    table = spec.cumulative_table()

    per_slot: dict[int, int] = defaultdict(int)
    per_chunk: dict[int, int] = defaultdict(int)
    for slot, chunk, kb in log.allocations:
        per_slot[slot] += kb
        per_chunk[chunk - 1] += kb
        if config.mode == Mode.SKIP and slot > deadline_of(chunk, L, config.startup_delay):
            problems.append(f"chunk {chunk} received bytes in slot {slot}, after its deadline")
        if log.play_slot[chunk - 1] and slot > log.play_slot[chunk - 1]:
            problems.append(f"chunk {chunk} received bytes after it was played")
    for slot, used in per_slot.items():
        available = caps[slot - 1] if slot <= len(caps) else 0
        if used > available:
            problems.append(f"slot {slot} used {used} kb of {available}")

    for i in range(C):
        lv = log.levels[i]
        if lv != SKIP and not 0 <= lv < spec.num_levels:
            problems.append(f"chunk {i + 1} played unknown level {lv}")
            continue
        if per_chunk[i] != log.received_kb[i]:
            problems.append(f"chunk {i + 1} byte count disagrees with its allocations")
        size = 0 if lv == SKIP else table[i][lv]
        if size != log.delivered_kb[i] or size > per_chunk[i]:
            problems.append(f"chunk {i + 1} plays {size} kb without having them")
        if config.mode == Mode.NOSKIP and lv == SKIP:
            problems.append(f"chunk {i + 1} skipped in no-skip mode")

    cap = config.buffer_capacity
    last = max([*log.play_slot, *log.first_touch, 0])
    events = [0] * (last + 2)
    for i in range(C):
        if log.first_touch[i]:
            events[log.first_touch[i]] += 1
            events[(log.play_slot[i] or last) + 1] -= 1  # unplayed chunks stay to the end
    held = 0
    for slot in range(1, last + 1):
        held += events[slot]
        if held * L > cap:
            problems.append(f"slot {slot} buffers {held * L} slots of video, capacity {cap}")

    if sum(log.received_kb) > sum(caps):
        problems.append("more bytes received than the trace carried")
    return problems


def check_session(log: SessionLog, spec: VideoSpec, config: StreamConfig, truth: BandwidthTrace) -> None:
    problems = session_violations(log, spec, config, truth)
    if problems:
        raise ConstraintViolation("; ".join(problems[:5]))


def check_plan(plan: LayerPlan, spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace) -> SessionLog:
    """Execute ``plan`` on its own trace; it must run clean and deliver what it promised."""
    log = execute_plan(plan, spec, config, trace)
    check_session(log, spec, config, trace)
    if tuple(log.levels) != tuple(plan.levels):
        raise ConstraintViolation(f"plan {plan.levels} delivered as {tuple(log.levels)}")
    if config.mode == Mode.NOSKIP and log.total_stall != plan.total_stall:
        raise ConstraintViolation(f"plan stalls {plan.total_stall} slots, session {log.total_stall}")
    return log
