"""Offline layered bin-packing planner (skip mode).

The planner works layer by layer.  For each layer a backward scan walks the
chunks from last to first, placing every chunk as late as possible and
upgrading it to the current layer when the upgrade still fits between its
lower deadline and its playback deadline without overflowing the buffer.  A
forward scan then replays the decided sizes in order, as early as possible,
which yields the lower deadlines used by the next layer.

Buffer model: a chunk occupies ``L`` slots of buffer from the slot it is
first touched up to and including its deadline slot.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Sequence

from .model import (
    SKIP,
    BandwidthTrace,
    LayerPlan,
    Mode,
    ModelError,
    StreamConfig,
    VideoSpec,
    base_deadlines,
    validate_weights,
)


class InfeasiblePlan(RuntimeError):
    """A size vector cannot be fetched in order before its deadlines."""


@dataclass
class Window:
    """One planning problem: consecutive chunks over a span of slots.

    ``sizes[k][level]`` is the size still to fetch for the k-th chunk of the
    window (credit already subtracted).  ``bandwidth[x]`` is the capacity of
    slot ``first_slot + x``.  ``pinned`` holds the (sorted) deadlines of
    earlier chunks that already sit in the buffer.  ``prestarted`` marks the
    first chunk as already touched, so it holds buffer from ``first_slot``.
    """

    sizes: list[list[int]]
    deadlines: list[int]
    bandwidth: list[int]
    first_slot: int = 1
    unit: int = 1
    capacity: int = 1
    pinned: list[int] = field(default_factory=list)
    prestarted: bool = False

    def __post_init__(self):
        self.max_chunks = self.capacity // self.unit
        self.cum = [0, *accumulate(self.bandwidth)]

    @property
    def num_chunks(self) -> int:
        return len(self.deadlines)

    @property
    def last_slot(self) -> int:
        return self.first_slot + len(self.bandwidth) - 1

    def pinned_at(self, slot: int) -> int:
        return len(self.pinned) - bisect_left(self.pinned, slot)


@dataclass
class ForwardResult:
    """Output of a forward scan; slot numbers are absolute, 0 = untouched."""

    start: list[int]
    head: list[int]
    head_room: list[int]
    finish: list[int]
    residual: list[int]
    iterations: int


def forward_scan(win: Window, levels: Sequence[int]) -> ForwardResult:
    """Fetch the chosen sizes in order, each chunk as early as possible."""
    n = win.num_chunks
    work = list(win.bandwidth)
    start, head, room, finish = [0] * n, [0] * n, [0] * n, [0] * n
    kept_deadlines = list(win.pinned)
    first = win.first_slot
    i, j = 0, first
    remaining = None
    iterations = 0
    while i < n:
        iterations += 1
        if levels[i] == SKIP:
            i += 1
            continue
        if remaining is None:
            remaining = win.sizes[i][levels[i]]
            if win.prestarted and i == 0:
                start[i], room[i] = first, work[0] if work else 0
            elif remaining == 0:
                raise ModelError("non-skipped chunk with nothing to fetch")
        if j > win.deadlines[i] and remaining > 0:
            raise InfeasiblePlan(f"window chunk {i} misses its deadline")
        if remaining == 0:
            # prestarted chunk already complete
            kept_deadlines.append(win.deadlines[i])
            finish[i] = max(first, start[i])
            remaining = None
            i += 1
            continue
        if j > win.last_slot:
            raise InfeasiblePlan("ran out of slots")
        x = j - first
        if not start[i]:
            in_buffer = len(kept_deadlines) - bisect_left(kept_deadlines, j)
            if work[x] == 0 or in_buffer + 1 > win.max_chunks:
                j += 1
                continue
            start[i], room[i] = j, work[x]
        fetched = min(work[x], remaining)
        if j == start[i]:
            head[i] += fetched
        work[x] -= fetched
        remaining -= fetched
        if remaining == 0:
            finish[i] = j
            kept_deadlines.append(win.deadlines[i])
            remaining = None
            i += 1
        if work[x] == 0:
            j += 1
    return ForwardResult(start, head, room, finish, work, iterations)


class _Prefix:
    """Counts kept chunks before the scan position whose deadline is >= t."""

    def __init__(self, win: Window, levels: Sequence[int]):
        self.win = win
        self.deadlines = [d for d, lv in zip(win.deadlines, levels) if lv != SKIP]
        self.index = [k for k, lv in enumerate(levels) if lv != SKIP]

    def count(self, chunk: int, slot: int) -> int:
        # kept chunks with index < chunk
        upto = bisect_left(self.index, chunk)
        lo = bisect_left(self.deadlines, slot, 0, upto)
        return (upto - lo) + self.win.pinned_at(slot)


def _buffer_ok(win: Window, prefix_count, start: int, deadline: int, later_starts: list[int]) -> bool:
    """Check occupancy over [start, deadline] once the chunk is added.

    ``later_starts`` holds start slots of already placed later chunks in
    placement order (non-increasing).  The count of earlier chunks only drops
    with time and the count of later chunks only steps up at their starts, so
    those slots are the only candidates for the maximum.
    """
    cap = win.max_chunks
    # later chunks started by slot t: those at the tail of later_starts <= t
    neg = [-s for s in later_starts]  # non-decreasing

    def later(t):
        return len(neg) - bisect_left(neg, -t)

    if prefix_count(start) + 1 + later(start) > cap:
        return False
    k = len(later_starts) - 1
    while k >= 0 and later_starts[k] <= deadline:
        t = later_starts[k]
        if t >= start and prefix_count(t) + 1 + later(t) > cap:
            return False
        k -= 1
    return True


def _alap_start(win: Window, size: int, lo: int, hi: int, work: list[int], usable_lo: int) -> int:
    """Latest slot from which ``size`` fits in [lo, hi] filling backward; 0 if none."""
    first = win.first_slot
    if hi < lo or size <= 0:
        return 0 if size > 0 else hi
    h = hi - first
    if hi == lo:
        return lo if usable_lo >= size else 0
    top = work[h]
    if top >= size:
        return hi
    # slots strictly between lo and hi are untouched
    target = top + win.cum[h] - size
    sigma = bisect_right(win.cum, target) - 1  # largest x with cum[x] <= target
    if sigma > lo - first:
        return sigma + first
    between = win.cum[h] - win.cum[lo - first + 1]
    if top + between + usable_lo >= size:
        return lo
    return 0


def backward_scan(win: Window, layer: int, levels: Sequence[int], fwd: ForwardResult | None):
    """Decide ``layer`` for every chunk currently at ``layer - 1``.

    Returns ``(new_levels, iterations)``.
    """
    n = win.num_chunks
    first = win.first_slot
    new_levels = list(levels)
    prefix = _Prefix(win, levels)
    work = list(win.bandwidth)
    later_starts: list[int] = []
    iterations = 0
    i = n - 1
    j = win.last_slot
    remaining = None
    sigma = 0
    while i >= 0:
        iterations += 1
        candidate = levels[i] == layer - 1
        if levels[i] == SKIP and not candidate:
            i -= 1
            continue
        if remaining is None:
            if fwd is None or levels[i] == SKIP:
                lo, prefix_use = first, 0
            else:
                lo = fwd.start[i]
                prefix_use = win.bandwidth[lo - first] - fwd.head_room[i]
            if win.prestarted and i == 0:
                lo, prefix_use = first, 0
            hi = min(win.deadlines[i], j)
            usable_lo = work[lo - first] - prefix_use if lo <= win.last_slot else 0
            usable_lo = max(usable_lo, 0)
            if hi == lo:
                usable_lo = min(usable_lo, work[lo - first])

            def count(t, _i=i):
                return prefix.count(_i, t)

            def attempt(level):
                size = win.sizes[i][level]
                s = _alap_start(win, size, lo, hi, work, usable_lo)
                if size > 0 and not s:
                    return None
                occupy_from = first if (win.prestarted and i == 0) else (s or hi)
                if not _buffer_ok(win, count, occupy_from, win.deadlines[i], later_starts):
                    return None
                return size, occupy_from

            placed = attempt(layer) if candidate else None
            if placed is not None:
                new_levels[i] = layer
            elif levels[i] != SKIP:
                placed = attempt(levels[i])
                if placed is None:
                    raise InfeasiblePlan(f"window chunk {i} no longer fits at its previous size")
            else:
                i -= 1  # base layer does not fit: chunk skipped
                continue
            remaining, sigma = placed
            limit = hi
            if remaining == 0:
                later_starts.append(sigma)
                remaining = None
                i -= 1
                continue
            if j > limit:
                j = limit
                continue
        x = j - first
        cap = work[x]
        if j == lo:
            cap = min(cap, usable_lo)
        fetched = min(cap, remaining)
        work[x] -= fetched
        remaining -= fetched
        if remaining == 0:
            later_starts.append(sigma)
            remaining = None
            i -= 1
            if work[x] == 0:
                j -= 1
        else:
            j -= 1
    return new_levels, iterations


def plan_window(win: Window, num_levels: int, levels: Sequence[int] | None = None,
                fwd: ForwardResult | None = None, first_layer: int = 0):
    """Run backward/forward scans for layers ``first_layer``..``num_levels - 1``."""
    levels = list(levels) if levels is not None else [SKIP] * win.num_chunks
    iterations = []
    for layer in range(first_layer, num_levels):
        levels, it = backward_scan(win, layer, levels, fwd)
        iterations.append(it)
        fwd = forward_scan(win, levels)
        iterations.append(fwd.iterations)
    if fwd is None:
        fwd = forward_scan(win, levels)
    return levels, fwd, iterations


def offline_window(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace,
                   deadlines: Sequence[int], num_slots: int) -> Window:
    return Window(
        sizes=spec.cumulative_table(),
        deadlines=list(deadlines),
        bandwidth=trace.fit(num_slots),
        first_slot=1,
        unit=spec.chunk_duration,
        capacity=config.buffer_capacity,
    )


def _as_plan(spec, win, levels, fwd, iterations, stalls, mode) -> LayerPlan:
    table = spec.cumulative_table()
    return LayerPlan(
        levels=tuple(levels),
        sizes=tuple(table[i][lv] if lv != SKIP else 0 for i, lv in enumerate(levels)),
        deadlines=tuple(win.deadlines),
        lower=tuple(fwd.start),
        head=tuple(fwd.head),
        residual=tuple(fwd.residual),
        stalls=tuple(stalls),
        mode=mode,
        scan_iterations=tuple(iterations),
    )


def plan_offline_skip(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace,
                      check_weights: bool = True) -> LayerPlan:
    """Optimal skip-mode plan for the whole video against a known trace."""
    if check_weights and not validate_weights(spec, config).valid:
        raise ModelError("weights violate the layer-priority condition")
    deadlines = base_deadlines(spec, config.startup_delay)
    win = offline_window(spec, config, trace, deadlines, deadlines[-1])
    levels, fwd, iterations = plan_window(win, spec.num_levels)
    return _as_plan(spec, win, levels, fwd, iterations, [0] * spec.num_chunks, Mode.SKIP)
