"""Comparison policies, all run on the shared slot executor.

None of them look at future bandwidth.  NMS and the slope-based policy are
reconstructions from short descriptions; their constants are the defaults
below.
"""

from __future__ import annotations

from fractions import Fraction

from .model import SKIP, ModelError, VideoSpec
from .playback import Decision, SessionLog, SimulatorState, run_session

BBA_LOWER, BBA_UPPER = 40, 80
SLOPE_SB1, SLOPE_SB2 = Fraction(-7, 100), Fraction(-40, 100)


def _alive(state: SimulatorState, i: int) -> bool:
    return state.noskip or state.slot <= state.deadline(i)


def _buffered(state: SimulatorState) -> list[int]:
    """Touched, unplayed chunks that can still take bytes."""
    return [i for i in state.buffered() if _alive(state, i) and state.delivered[i] < state.max_size(i)]


def _size(state: SimulatorState, i: int, level: int) -> int:
    return state.spec.cumulative(level, i)


def _unfinished_base(state: SimulatorState) -> Decision | None:
    for i in _buffered(state):
        if state.level_of(i) == SKIP:
            return Decision(i, _size(state, i, 0))
    return None


def _next_new(state: SimulatorState) -> int | None:
    """First untouched chunk after everything touched so far, if it is still useful."""
    touched = [i for i in range(state.spec.num_chunks) if state.first_touch[i]]
    start = max(state.next_play, touched[-1] + 1 if touched else 0)
    for i in range(start, state.spec.num_chunks):
        if _alive(state, i):
            return i
    return None


def _prefetch(state: SimulatorState, level: int = 0) -> Decision | None:
    i = _next_new(state)
    if i is None or not state.has_room():
        return None
    return Decision(i, _size(state, i, level))


def _horizontal_upgrade(state: SimulatorState, chunks=None) -> Decision | None:
    chunks = _buffered(state) if chunks is None else chunks
    for n in range(1, state.spec.num_levels):
        for i in chunks:
            if state.delivered[i] < _size(state, i, n):
                return Decision(i, _size(state, i, n))
    return None


class Horizontal:
    """Base layers up to a full buffer, then EL1 of buffered chunks, then EL2, ..."""

    def decide(self, state):
        return _unfinished_base(state) or _prefetch(state) or _horizontal_upgrade(state)


class Vertical:
    """Every layer of a chunk before touching the next one."""

    def decide(self, state):
        live = _buffered(state)
        if live:
            i = live[-1]
            return Decision(i, state.max_size(i))
        i = _next_new(state)
        return None if i is None else Decision(i, state.max_size(i))


class Hybrid:
    """All layers of the chunk about to play, then later base layers, then their upgrades."""

    def decide(self, state):
        i = state.next_play
        if _alive(state, i) and state.delivered[i] < state.max_size(i):
            if state.first_touch[i] or state.has_room():
                return Decision(i, state.max_size(i))
        return _unfinished_base(state) or _prefetch(state) or _horizontal_upgrade(state)


def bba_level(buffer: int, num_enh_layers: int, lower: int = BBA_LOWER, upper: int = BBA_UPPER) -> int:
    """Buffer-to-layer map: base below ``lower``, top above ``upper``, linear steps between."""
    N = num_enh_layers
    if buffer < lower:
        return 0
    if buffer > upper or upper <= lower:
        return N
    return min(N, (buffer - lower) * (N + 1) // (upper - lower))


class _PerChunkLevel:
    """Fetch chunks in order, each to a level fixed when the chunk is first touched."""

    def __init__(self):
        self.level: dict[int, int] = {}

    def choose(self, state: SimulatorState, i: int) -> int:
        raise NotImplementedError

    def decide(self, state):
        live = _buffered(state)
        if live and live[-1] in self.level:
            i = live[-1]
            if state.delivered[i] < _size(state, i, self.level[i]):
                return Decision(i, _size(state, i, self.level[i]))
        i = _next_new(state)
        if i is None or not state.has_room():
            return None
        self.level[i] = self.choose(state, i)
        return Decision(i, _size(state, i, self.level[i]))


class BufferBased(_PerChunkLevel):
    def __init__(self, lower: int = BBA_LOWER, upper: int = BBA_UPPER):
        super().__init__()
        self.lower, self.upper = lower, upper

    def choose(self, state, i):
        return bba_level(state.occupancy(), state.spec.num_enh_layers, self.lower, self.upper)


def nms_level(spec: VideoSpec, i: int, estimate: Fraction | None) -> int:
    """Highest level whose per-slot rate fits the throughput estimate (base without one)."""
    if estimate is None:
        return 0
    best = 0
    for lv in range(spec.num_levels):
        if Fraction(spec.cumulative(lv, i), spec.chunk_duration) <= estimate:
            best = lv
    return best


class Throughput(_PerChunkLevel):
    """Last completed chunk's throughput picks the level; a low buffer forces base."""

    def __init__(self, lower: int):
        super().__init__()
        self.lower = lower

    def estimate(self, state) -> Fraction | None:
        done = [i for i in range(state.spec.num_chunks)
                if i in self.level and state.delivered[i] >= _size(state, i, self.level[i])]
        if not done:
            return None
        i = max(done, key=lambda k: state.done_slot[k])
        slots = state.done_slot[i] - state.first_touch[i] + 1
        return Fraction(state.delivered[i], slots)

    def choose(self, state, i):
        if state.occupancy() < self.lower:
            return 0
        return nms_level(state.spec, i, self.estimate(state))


def slope_threshold(layer: int, num_enh_layers: int, capacity: int, unit: int, slope: Fraction) -> Fraction:
    """Occupancy above which a missing ``layer`` is backfilled instead of prefetching."""
    return max(Fraction(unit), capacity * (1 - abs(slope) * (num_enh_layers + 1 - layer)))


class SlopeBased:
    """Backfill the lowest missing layer once the buffer clears that layer's threshold."""

    def __init__(self, slope: Fraction):
        self.slope = Fraction(slope)

    def decide(self, state):
        base = _unfinished_base(state)
        if base is not None:
            return base
        candidate = None
        for n in range(1, state.spec.num_levels):
            for i in _buffered(state):
                if state.delivered[i] < _size(state, i, n):
                    candidate = (n, i)
                    break
            if candidate:
                break
        occupancy = state.occupancy()
        L, cap = state.spec.chunk_duration, state.config.buffer_capacity
        if candidate and occupancy >= L:
            n, i = candidate
            full = not state.has_room()
            if full or occupancy >= slope_threshold(n, state.spec.num_enh_layers, cap, L, self.slope):
                return Decision(i, _size(state, i, n))
        prefetch = _prefetch(state)
        if prefetch is not None:
            return prefetch
        if candidate:
            n, i = candidate
            return Decision(i, _size(state, i, n))
        return None


def run_baseline1(spec, config, truth) -> SessionLog:
    return run_session(spec, config, truth, Horizontal())


def run_baseline2(spec, config, truth) -> SessionLog:
    return run_session(spec, config, truth, Vertical())


def run_baseline3(spec, config, truth) -> SessionLog:
    return run_session(spec, config, truth, Hybrid())


def run_bba(spec, config, truth, lower: int = BBA_LOWER, upper: int = BBA_UPPER) -> SessionLog:
    if lower < 0 or upper < lower:
        raise ModelError("BBA thresholds need 0 <= lower <= upper")
    return run_session(spec, config, truth, BufferBased(lower, upper))


def run_nms(spec, config, truth, lower: int | None = None) -> SessionLog:
    lower = config.buffer_capacity // 4 if lower is None else lower
    return run_session(spec, config, truth, Throughput(lower))


def run_slope(spec, config, truth, slope: Fraction = SLOPE_SB1) -> SessionLog:
    return run_session(spec, config, truth, SlopeBased(slope))


POLICIES = {
    "baseline1": run_baseline1,
    "baseline2": run_baseline2,
    "baseline3": run_baseline3,
    "bba": run_bba,
    "nms": run_nms,
    "sb1": lambda spec, config, truth: run_slope(spec, config, truth, SLOPE_SB1),
    "sb2": lambda spec, config, truth: run_slope(spec, config, truth, SLOPE_SB2),
}
