"""Slot-by-slot session executor.

Every slot first spends its bandwidth on the chunks the policy asks for and
then advances playback: the chunk due in that slot is played at its highest
complete layer, skipped (skip mode) or waited for (no-skip mode).  A chunk
holds ``L`` slots of buffer from the slot it is first touched until it is
played.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .model import SKIP, BandwidthTrace, LayerPlan, Mode, ModelError, StreamConfig, VideoSpec


@dataclass(frozen=True)
class Decision:
    chunk: int  # 0-based
    target: int  # cumulative kilobits wanted for the chunk


class Policy(Protocol):
    def decide(self, state: "SimulatorState") -> Decision | None: ...

    # optional: hold(state, chunk) -> bool keeps a no-skip session waiting
    # before playing ``chunk`` even though its base layer has arrived


@dataclass
class SimulatorState:
    spec: VideoSpec
    config: StreamConfig
    slot: int = 1  # the slot about to be (or being) processed
    next_play: int = 0
    stall: int = 0
    delivered: list[int] = field(default_factory=list)
    first_touch: list[int] = field(default_factory=list)
    done_slot: list[int] = field(default_factory=list)  # slot the delivered bytes completed
    played: list[int] = field(default_factory=list)  # level played, SKIP, or None if pending
    play_slot: list[int] = field(default_factory=list)
    stall_before: list[int] = field(default_factory=list)
    slot_used: list[int] = field(default_factory=list)
    slot_occupancy: list[int] = field(default_factory=list)
    allocations: list[tuple[int, int, int]] = field(default_factory=list)
    left: int = 0  # bandwidth still unused in the current slot

    def __post_init__(self):
        C = self.spec.num_chunks
        for name, value in (("delivered", 0), ("first_touch", 0), ("done_slot", 0),
                            ("played", None), ("play_slot", 0), ("stall_before", 0)):
            if not getattr(self, name):
                setattr(self, name, [value] * C)
        self._table = self.spec.cumulative_table()

    @property
    def finished(self) -> bool:
        return self.next_play >= self.spec.num_chunks

    @property
    def noskip(self) -> bool:
        return self.config.mode == Mode.NOSKIP

    def deadline(self, i: int) -> int:
        """Current playback slot of chunk ``i`` (shifted by stalls so far in no-skip mode)."""
        base = i * self.spec.chunk_duration + self.config.startup_delay
        return base + (self.stall if self.noskip else 0)

    def buffered(self) -> list[int]:
        """Touched chunks that have not been played yet."""
        return [i for i in range(self.next_play, self.spec.num_chunks) if self.first_touch[i]]

    def occupancy(self) -> int:
        """Buffered duration in slots."""
        return len(self.buffered()) * self.spec.chunk_duration

    def has_room(self) -> bool:
        return self.occupancy() + self.spec.chunk_duration <= self.config.buffer_capacity

    def level_of(self, i: int) -> int:
        """Highest complete cumulative level of chunk ``i`` so far (SKIP if none)."""
        level = SKIP
        for lv, size in enumerate(self._table[i]):
            if self.delivered[i] >= size:
                level = lv
        return level

    def max_size(self, i: int) -> int:
        return self._table[i][-1]

    def can_fetch(self, i: int) -> bool:
        if i < self.next_play or self.delivered[i] >= self.max_size(i):
            return False
        if not self.noskip and self.slot > self.deadline(i):
            return False
        return bool(self.first_touch[i]) or self.has_room()


def _fetch(state: SimulatorState, policy: Policy) -> None:
    while state.left > 0 and not state.finished:
        decision = policy.decide(state)
        if decision is None:
            break
        i = decision.chunk
        if not state.can_fetch(i):
            break
        target = min(decision.target, state.max_size(i))
        want = target - state.delivered[i]
        if want <= 0:
            break
        take = min(want, state.left)
        if not state.first_touch[i]:
            state.first_touch[i] = state.slot
        state.delivered[i] += take
        state.done_slot[i] = state.slot
        state.left -= take
        state.allocations.append((state.slot, i + 1, take))


def _play(state: SimulatorState, policy: Policy) -> None:
    while not state.finished and state.deadline(state.next_play) <= state.slot:
        i = state.next_play
        overdue = state.slot - state.deadline(i)  # only with a zero startup delay
        if overdue and state.noskip:
            state.stall += overdue
        level = state.level_of(i)
        hold = getattr(policy, "hold", None)
        if state.noskip and (level == SKIP or (hold is not None and hold(state, i))):
            state.stall += 1
            return
        state.played[i] = level
        state.play_slot[i] = state.slot
        state.stall_before[i] = state.stall if state.noskip else 0
        state.next_play += 1


def advance(state: SimulatorState, kb: int, policy: Policy) -> None:
    """In-place version of :func:`step`."""
    state.left = kb
    _fetch(state, policy)
    state.slot_used.append(kb - state.left)
    state.slot_occupancy.append(state.occupancy())
    _play(state, policy)
    state.slot += 1


def step(state: SimulatorState, kb: int, policy: Policy) -> SimulatorState:
    """One slot: fetch with ``kb`` kilobits of bandwidth, then advance playback."""
    nxt = copy.deepcopy(state)
    advance(nxt, kb, policy)
    return nxt


@dataclass
class SessionLog:
    mode: Mode
    levels: list[int]  # played level per chunk, SKIP when skipped
    delivered_kb: list[int]  # size of the played prefix
    received_kb: list[int]  # every byte received, partial layers included
    completion: list[int]  # slot the last received byte arrived, 0 if untouched
    first_touch: list[int]
    play_slot: list[int]
    stall_before: list[int]
    slot_used: list[int]
    slot_occupancy: list[int]
    allocations: list[tuple[int, int, int]]  # (slot, 1-based chunk, kilobits)
    replans: list = field(default_factory=list)
    truncated: bool = False  # the trace ended before playback did

    @property
    def skipped(self) -> list[int]:
        return [i + 1 for i, lv in enumerate(self.levels) if lv == SKIP]

    @property
    def total_stall(self) -> int:
        return self.stall_before[-1] if self.stall_before else 0

    @property
    def wasted_kb(self) -> int:
        """Bytes that never made it into played quality."""
        return sum(self.received_kb) - sum(self.delivered_kb)


def run_session(spec: VideoSpec, config: StreamConfig, truth: BandwidthTrace, policy: Policy,
                on_slot=None) -> SessionLog:
    """Drive ``policy`` against ``truth`` until every chunk is played or skipped.

    ``on_slot(state)`` runs before each slot's fetching (used for replanning).
    Slots past the end of the trace have zero bandwidth; in no-skip mode a
    trace that ends while playback waits is an error.
    """
    state = SimulatorState(spec, config)
    caps = truth.capacities
    while not state.finished:
        stuck = state.noskip and state.level_of(state.next_play) == SKIP
        if state.slot > len(caps) and stuck:
            raise ModelError("trace exhausted while playback is stalled")
        if on_slot is not None:
            on_slot(state)
        advance(state, caps[state.slot - 1] if state.slot <= len(caps) else 0, policy)
    return finish_log(state)


def finish_log(state: SimulatorState) -> SessionLog:
    table = state.spec.cumulative_table()
    levels = [SKIP if lv is None else lv for lv in state.played]
    return SessionLog(
        mode=state.config.mode,
        levels=levels,
        delivered_kb=[0 if lv == SKIP else table[i][lv] for i, lv in enumerate(levels)],
        received_kb=list(state.delivered),
        completion=list(state.done_slot),
        first_touch=list(state.first_touch),
        play_slot=list(state.play_slot),
        stall_before=list(state.stall_before),
        slot_used=list(state.slot_used),
        slot_occupancy=list(state.slot_occupancy),
        allocations=list(state.allocations),
    )


class InOrderPolicy:
    """Fetch chunks in order, each up to a fixed cumulative size, as early as possible."""

    def __init__(self, sizes: Sequence[int], play_slots: Sequence[int] | None = None):
        self.sizes = list(sizes)
        self.play_slots = list(play_slots) if play_slots is not None else None

    def hold(self, state: SimulatorState, i: int) -> bool:
        return self.play_slots is not None and state.slot < self.play_slots[i]

    def decide(self, state: SimulatorState) -> Decision | None:
        for i in range(state.next_play, len(self.sizes)):
            if state.delivered[i] >= self.sizes[i]:
                continue
            if not state.noskip and state.slot > state.deadline(i):
                continue  # too late for this one
            return Decision(i, self.sizes[i])
        return None


def execute_plan(plan: LayerPlan, spec: VideoSpec, config: StreamConfig, truth: BandwidthTrace) -> SessionLog:
    if plan.num_chunks != spec.num_chunks:
        raise ModelError("plan and video disagree on the number of chunks")
    table = spec.cumulative_table()
    for i, lv in enumerate(plan.levels):
        if lv != SKIP and not 0 <= lv < spec.num_levels:
            raise ModelError(f"chunk {i + 1} has an unknown level {lv}")
    sizes = [0 if lv == SKIP else table[i][lv] for i, lv in enumerate(plan.levels)]
    play_slots = list(plan.deadlines) if plan.mode == Mode.NOSKIP else None
    return run_session(spec, config, truth, InOrderPolicy(sizes, play_slots))
