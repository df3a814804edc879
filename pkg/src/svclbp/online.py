"""Sliding-window online planner.

Every ``period`` slots the engine asks the predictor for ``window`` slots of
bandwidth, plans the chunks whose deadlines fall inside that horizon with the
offline scans (starting from the live buffer and any partly fetched chunk),
and then fetches in order against the true trace until the next replan.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import SKIP, BandwidthTrace, ModelError, StreamConfig, VideoSpec
from .noskip import window_forward_stalls
from .playback import Decision, SessionLog, SimulatorState, finish_log, advance
from .scans import InfeasiblePlan, Window, forward_scan, plan_window


@dataclass(frozen=True)
class OnlineConfig:
    window: int
    period: int = 1
    buffer_low: int = 0
    deadline_miss_threshold: int = 1

    def validate(self, config: StreamConfig) -> None:
        if not 1 <= self.period <= self.window:
            raise ModelError("replanning period must lie in [1, window]")
        if not 0 <= self.buffer_low <= config.buffer_capacity:
            raise ModelError("low-buffer threshold must lie in [0, buffer capacity]")
        if self.deadline_miss_threshold < 0:
            raise ModelError("deadline-miss threshold must be non-negative")


@dataclass(frozen=True)
class Replan:
    slot: int
    first_chunk: int  # 1-based
    last_chunk: int
    levels: tuple[int, ...]  # decided level per window chunk after degradation
    predicted: tuple[int, ...]


def degrade_for_low_buffer(decision: int, buffer: int, buffer_low: int) -> int:
    """Drop one layer when the buffer is below ``buffer_low`` (never below base)."""
    if decision >= 1 and buffer < buffer_low:
        return decision - 1
    return decision


class OnlineEngine:
    """Replanning fetch policy; drive it with :func:`run_online`."""

    def __init__(self, spec: VideoSpec, config: StreamConfig, online: OnlineConfig,
                 predictor, truth: BandwidthTrace):
        online.validate(config)
        self.spec, self.config, self.online = spec, config, online
        self.predictor, self.truth = predictor, truth
        self.table = spec.cumulative_table()
        self.targets: list[int | None] = [None] * spec.num_chunks
        self.expected: dict[int, int] = {}
        self.replans: list[Replan] = []
        self.starved = False

    # -- planning -------------------------------------------------------
    def on_slot(self, state: SimulatorState) -> None:
        if (state.slot - 1) % self.online.period == 0 or self.starved:
            self.starved = False
            self.replan(state)

    def _first_chunk(self, state: SimulatorState) -> tuple[int, bool]:
        touched = [i for i in range(state.next_play, self.spec.num_chunks) if state.first_touch[i]]
        if not touched:
            return state.next_play, False
        last = touched[-1]
        if state.delivered[last] < state.max_size(last) and state.can_fetch(last):
            return last, True
        return last + 1, False

    def _forecast(self, state: SimulatorState, first: int, length: int) -> list[int]:
        st = state.slot
        history = self.truth.capacities[:st - 1]
        pred = self.predictor.predict(st, self.online.window, history)
        if pred is None:  # nothing observed yet: aim for base layers
            L = self.spec.chunk_duration
            rate = -(-self.spec.layer_size(0, first) // L)
            pred = [rate] * self.online.window
        pred = list(pred[:self.online.window])
        tail = pred[-1] if pred else 0
        return (pred + [tail] * length)[:length]

    def replan(self, state: SimulatorState) -> None:
        spec, C = self.spec, self.spec.num_chunks
        sc, prestarted = self._first_chunk(state)
        if sc >= C:
            return
        st = state.slot
        horizon_end = st + self.online.window
        ec = next((k for k in range(sc, C) if state.deadline(k) >= horizon_end), C - 1)
        chunks = range(sc, ec + 1)
        deadlines = [state.deadline(i) for i in chunks]
        pinned = sorted(state.deadline(i) for i in range(state.next_play, sc) if state.first_touch[i])
        sizes = [[max(0, x - state.delivered[i]) for x in self.table[i]] for i in chunks]
        length = max(deadlines) - st + 1
        if state.noskip:
            length += self.online.window  # room for stalls
        bandwidth = self._forecast(state, sc, max(length, 1))
        win = Window(sizes, deadlines, bandwidth, first_slot=st, unit=spec.chunk_duration,
                     capacity=self.config.buffer_capacity, pinned=pinned, prestarted=prestarted)
        levels = self._plan(win, state.noskip)
        buffer = state.occupancy()
        levels = [lv if lv == SKIP else degrade_for_low_buffer(lv, buffer, self.online.buffer_low)
                  for lv in levels]
        for i, lv in zip(chunks, levels):
            self.targets[i] = 0 if lv == SKIP else self.table[i][lv]
        for i in range(ec + 1, C):
            self.targets[i] = None
        self.expected = {st + x: b for x, b in enumerate(bandwidth)}
        self.replans.append(Replan(st, sc + 1, ec + 1, tuple(levels), tuple(bandwidth[:self.online.window])))

    def _plan(self, win: Window, noskip: bool) -> list[int]:
        n = self.spec.num_levels
        if not noskip:
            levels, _, _ = plan_window(win, n)
            return levels
        try:
            stalls = window_forward_stalls(win)
        except ModelError:
            return [0] * win.num_chunks
        win.deadlines = [d + s for d, s in zip(win.deadlines, stalls)]
        try:
            levels = [0] * win.num_chunks
            levels, _, _ = plan_window(win, n, levels, forward_scan(win, levels), first_layer=1)
        except InfeasiblePlan:
            levels = [0] * win.num_chunks
        return levels

    # -- execution ------------------------------------------------------
    def _abandon(self, state: SimulatorState, i: int) -> bool:
        """Give up the rest of chunk ``i`` when it cannot finish in its last slots."""
        if state.level_of(i) == SKIP:
            return False
        slots_left = state.deadline(i) - state.slot + 1
        if slots_left > self.online.deadline_miss_threshold:
            return False
        outlook = state.left + sum(self.expected.get(state.slot + x, 0) for x in range(1, slots_left))
        return outlook < self.targets[i] - state.delivered[i]

    def decide(self, state: SimulatorState) -> Decision | None:
        for i in range(state.next_play, self.spec.num_chunks):
            target = self.targets[i]
            if target is None:
                self.starved = True
                return None
            if state.delivered[i] >= target:
                continue
            if not state.noskip and state.slot > state.deadline(i):
                continue
            if self._abandon(state, i):
                self.targets[i] = state.delivered[i]
                continue
            return Decision(i, target)
        return None


def run_online(spec: VideoSpec, config: StreamConfig, online: OnlineConfig, predictor,
               truth: BandwidthTrace) -> SessionLog:
    """Stream the whole video with periodic replanning against ``truth``."""
    engine = OnlineEngine(spec, config, online, predictor, truth)
    state = SimulatorState(spec, config)
    caps = truth.capacities
    truncated = False
    while not state.finished:
        if state.slot > len(caps) and state.noskip and state.level_of(state.next_play) == SKIP:
            truncated = True  # the trace ended while playback waits
            break
        engine.on_slot(state)
        advance(state, caps[state.slot - 1] if state.slot <= len(caps) else 0, engine)
    log = finish_log(state)
    log.replans = engine.replans
    log.truncated = truncated
    return log
