"""Offline planner for no-skip streaming (stalls instead of skips).

Base layers are mandatory.  A forward pass finds the least total stall by
fetching base layers in order and pushing back the deadline of any chunk
that completes late.  A backward pass then moves stalls as early as the
buffer allows, and enhancement layers are decided with the skip-mode scans
against the shifted deadlines.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .model import (
    BandwidthTrace,
    LayerPlan,
    Mode,
    ModelError,
    StreamConfig,
    VideoSpec,
    base_deadlines,
    validate_weights,
)
from .scans import InfeasiblePlan, Window, _alap_start, _as_plan, forward_scan, plan_window


@dataclass(frozen=True)
class StallSchedule:
    forward: tuple[int, ...]  # cumulative stall before each chunk, stalls as late as needed
    repositioned: tuple[int, ...]  # same total, stalls moved as early as the buffer allows
    iterations: tuple[int, int]

    @property
    def total(self) -> int:
        return self.forward[-1] if self.forward else 0

    @property
    def effective_startup_extra(self) -> int:
        return self.repositioned[0] if self.repositioned else 0


def base_forward_stalls(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace):
    """Cumulative stalls d(i) from fetching base layers in order, as early as possible.

    Returns ``(stalls, iterations)``.  The whole trace is usable; a trace that
    ends before every base layer arrives is a validation error.
    """
    cap = config.buffer_capacity // spec.chunk_duration
    base = base_deadlines(spec, config.startup_delay)
    bw = list(trace.capacities)
    T = len(bw)
    stalls = [0] * spec.num_chunks
    kept: list[int] = []  # deadlines of fetched chunks, non-decreasing
    i, j, stall = 0, 1, 0
    remaining, started = None, False
    left = bw[0] if T else 0
    iterations = 0
    while i < spec.num_chunks:
        iterations += 1
        if remaining is None:
            remaining, started = spec.layer_sizes[0][i], False
        if j > T:
            raise ModelError(f"trace ends before the base layer of chunk {i + 1} arrives")
        if not started:
            in_buffer = sum(1 for d in kept[-cap:] if d >= j)
            if left == 0 or in_buffer + 1 > cap:
                j += 1
                left = bw[j - 1] if j <= T else 0
                continue
            started = True
        take = min(left, remaining)
        left -= take
        remaining -= take
        if remaining == 0:
            stall = max(stall, j - base[i])
            stalls[i] = stall
            kept.append(base[i] + stall)
            remaining = None
            i += 1
        if left == 0:
            j += 1
            left = bw[j - 1] if j <= T else 0
    return stalls, iterations


def base_backward_reposition(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace,
                             stalls: list[int]):
    """Move stalls as early as possible while keeping the total fixed.

    Walks chunks from last to first, placing each base layer as late as
    possible.  A chunk's deadline starts one chunk duration before the next
    chunk's, and is pulled earlier while the buffer would overflow.  Returns
    ``(repositioned_stalls, iterations)``.
    """
    C, L = spec.num_chunks, spec.chunk_duration
    cap = config.buffer_capacity // L
    base = base_deadlines(spec, config.startup_delay)
    last = base[-1] + stalls[-1]
    win = Window(sizes=[], deadlines=[], bandwidth=trace.fit(last), unit=L,
                 capacity=config.buffer_capacity)
    work = list(win.bandwidth)
    starts: list[int] = []  # later chunks, non-increasing
    shifted = [0] * C
    deadline = last + L
    j = last
    iterations = 0
    for i in range(C - 1, -1, -1):
        deadline -= L
        size = spec.layer_sizes[0][i]
        while True:
            iterations += 1
            # the chunk holds buffer up to its deadline, where every placed
            # later chunk that has started is also held
            if sum(1 for s in starts[-cap:] if s <= deadline) + 1 <= cap:
                hi = min(deadline, j)
                sigma = _alap_start(win, size, 1, hi, work, work[0])
                if sigma:
                    break
            deadline -= 1
            if deadline < base[i]:
                raise InfeasiblePlan(f"chunk {i + 1} cannot be repositioned")
        shifted[i] = deadline - base[i]
        # consume bandwidth from hi down to sigma
        remaining, x = size, hi
        while remaining:
            iterations += 1
            take = min(work[x - 1], remaining)
            work[x - 1] -= take
            remaining -= take
            if remaining:
                x -= 1
        j = x
        starts.append(sigma)
    return shifted, iterations


def stall_schedule(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace) -> StallSchedule:
    forward, it_f = base_forward_stalls(spec, config, trace)
    repositioned, it_b = base_backward_reposition(spec, config, trace, forward)
    return StallSchedule(tuple(forward), tuple(repositioned), (it_f, it_b))


def plan_offline_noskip(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace,
                        check_weights: bool = True) -> LayerPlan:
    """No-skip plan: least total stall, stalls as early as possible, then quality."""
    if check_weights and not validate_weights(spec, config).valid:
        raise ModelError("weights violate the layer-priority or stall-penalty condition")
    schedule = stall_schedule(spec, config, trace)
    deadlines = base_deadlines(spec, config.startup_delay, schedule.repositioned)
    win = Window(
        sizes=spec.cumulative_table(),
        deadlines=deadlines,
        bandwidth=trace.fit(deadlines[-1]),
        unit=spec.chunk_duration,
        capacity=config.buffer_capacity,
    )
    levels = [0] * spec.num_chunks
    fwd = forward_scan(win, levels)
    base_iterations = [*schedule.iterations, fwd.iterations]
    levels, fwd, iterations = plan_window(win, spec.num_levels, levels, fwd, first_layer=1)
    iterations = base_iterations + iterations
    return _as_plan(spec, win, levels, fwd, iterations, schedule.repositioned, Mode.NOSKIP)


def window_forward_stalls(win: Window) -> list[int]:
    """Cumulative stall per window chunk when base layers are fetched in order.

    Same rule as :func:`base_forward_stalls`, applied to a planning window
    (pinned chunks, an already started first chunk, remaining sizes).
    Raises :class:`ModelError` when the window's bandwidth runs out.
    """
    n = win.num_chunks
    stalls = [0] * n
    kept = list(win.pinned)
    work = list(win.bandwidth)
    j, stall = win.first_slot, 0
    for k in range(n):
        remaining = win.sizes[k][0]
        started = win.prestarted and k == 0
        finish = win.first_slot
        while remaining > 0:
            if j > win.last_slot:
                raise ModelError("window bandwidth runs out before the base layers arrive")
            x = j - win.first_slot
            if not started:
                in_buffer = len(kept) - bisect_left(kept, j)
                if work[x] == 0 or in_buffer + 1 > win.max_chunks:
                    j += 1
                    continue
                started = True
            take = min(work[x], remaining)
            work[x] -= take
            remaining -= take
            finish = j
            if work[x] == 0 and remaining > 0:
                j += 1
        stall = max(stall, finish - win.deadlines[k])
        stalls[k] = stall
        kept.append(win.deadlines[k] + stall)
    return stalls
