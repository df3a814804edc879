"""Exhaustive optimizer for desk-sized instances.

Enumerates cumulative layer levels per chunk (the decoder constraint is built
in), depth first, checking feasibility with its own slot simulation: chunks
fetched in order, each started as early as bandwidth and buffer allow.  In
order, earliest-start fetching is feasible whenever any schedule is, so this
decides feasibility exactly.  Nothing here reuses the planner code.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import (
    SKIP,
    BandwidthTrace,
    ModelError,
    StreamConfig,
    VideoSpec,
    deadline_of,
    resolve_lambda,
)

MAX_CHUNKS = 10
MAX_ENH_LAYERS = 2


class OracleLimitError(ModelError):
    pass


@dataclass(frozen=True)
class SkipOptimum:
    objective: Fraction
    solutions: tuple[tuple[int, ...], ...]
    min_skips: int
    min_skip_sets: tuple[tuple[int, ...], ...]  # every feasible skip set of minimum size


@dataclass(frozen=True)
class NoSkipOptimum:
    min_stall: int
    objective: Fraction
    solutions: tuple[tuple[int, ...], ...]


def _check_limits(spec: VideoSpec):
    if spec.num_chunks > MAX_CHUNKS or spec.num_enh_layers > MAX_ENH_LAYERS:
        raise OracleLimitError(
            f"oracle limited to C <= {MAX_CHUNKS} and N <= {MAX_ENH_LAYERS}"
        )


def _integer_weights(spec: VideoSpec, config: StreamConfig):
    """Scaled integer weights with a common denominator, plus that denominator."""
    g, b = config.gamma, config.beta
    C, N = spec.num_chunks, spec.num_enh_layers
    scale = g.denominator**N * b.denominator**C
    table = []
    for i in range(C):
        row, acc = [], 0
        bpow = b.numerator ** (i + 1) * b.denominator ** (C - i - 1)
        for n in range(N + 1):
            gpow = g.numerator**n * g.denominator ** (N - n)
            acc += spec.layer_sizes[n][i] * gpow * bpow
            row.append(acc)
        table.append(row)
    return table, scale


def _fetch(bw, j, left, size, deadline, kept, cap, unit):
    """Greedy in-order fetch of one chunk.

    ``j`` is the current 0-based slot, ``left`` what remains in it.  Returns
    ``(j, left, finish_slot)`` with a 1-based finish slot, or None when the
    chunk cannot be started and completed by ``deadline`` (1-based).
    """
    T = len(bw)
    # start: first slot with spare bandwidth and buffer room
    while True:
        if j >= T or j + 1 > deadline:
            return None
        in_buffer = sum(1 for d in kept if d >= j + 1)
        if left > 0 and (in_buffer + 1) * unit <= cap:
            break
        j += 1
        if j < T:
            left = bw[j]
    while True:
        take = min(left, size)
        size -= take
        left -= take
        if size == 0:
            return j, left, j + 1
        j += 1
        if j >= T or j + 1 > deadline:
            return None
        left = bw[j]


def enumerate_optimal_skip(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace) -> SkipOptimum:
    _check_limits(spec)
    C, L, s = spec.num_chunks, spec.chunk_duration, config.startup_delay
    deadlines = [deadline_of(i + 1, L, s) for i in range(C)]
    bw = trace.fit(deadlines[-1])
    sizes = spec.cumulative_table()
    weights, scale = _integer_weights(spec, config)
    cap = config.buffer_capacity

    best = [-1]
    argmax: list[tuple[int, ...]] = []
    skip_sets: dict[int, set] = {}
    levels = [SKIP] * C

    def dfs(i, j, left, kept, value, skips):
        if i == C:
            skip_sets.setdefault(len(skips), set()).add(tuple(skips))
            if value > best[0]:
                best[0] = value
                argmax.clear()
            if value == best[0]:
                argmax.append(tuple(levels))
            return
        levels[i] = SKIP
        dfs(i + 1, j, left, kept, value, skips + [i + 1])
        for lv in range(spec.num_levels):
            res = _fetch(bw, j, left, sizes[i][lv], deadlines[i], kept, cap, L)
            if res is None:
                break  # bigger sizes cannot fit either
            nj, nleft, _ = res
            levels[i] = lv
            dfs(i + 1, nj, nleft, kept + [deadlines[i]], value + weights[i][lv], skips)
        levels[i] = SKIP

    first_left = bw[0] if bw else 0
    dfs(0, 0, first_left, [], 0, [])
    min_skips = min(skip_sets)
    return SkipOptimum(
        objective=Fraction(best[0], scale),
        solutions=tuple(argmax),
        min_skips=min_skips,
        min_skip_sets=tuple(sorted(skip_sets[min_skips])),
    )


def stall_of(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace, levels) -> int | None:
    """Minimum total stall for a no-skip level vector (None if never fetchable)."""
    result = _noskip_walk(spec, config, list(trace.capacities), spec.cumulative_table(), levels)
    return None if result is None else result


def _noskip_walk(spec, config, bw, sizes, levels):
    L, s, cap = spec.chunk_duration, config.startup_delay, config.buffer_capacity
    j, left, kept, stall = 0, (bw[0] if bw else 0), [], 0
    for i, lv in enumerate(levels):
        deadline = i * L + s + stall
        res = _fetch(bw, j, left, sizes[i][lv], len(bw), kept, cap, L)
        if res is None:
            return None
        j, left, finish = res
        if finish > deadline:
            stall += finish - deadline
            deadline = finish
        kept.append(deadline)
    return stall


def enumerate_optimal_noskip(spec: VideoSpec, config: StreamConfig, trace: BandwidthTrace) -> NoSkipOptimum:
    """Lexicographic optimum: least total stall, then best weighted quality."""
    _check_limits(spec)
    C, L, s = spec.num_chunks, spec.chunk_duration, config.startup_delay
    bw = list(trace.capacities)
    sizes = spec.cumulative_table()
    weights, scale = _integer_weights(spec, config)
    cap = config.buffer_capacity

    best = [None, -1]  # (stall, value)
    argmax: list[tuple[int, ...]] = []
    levels = [0] * C

    def dfs(i, j, left, kept, stall, value):
        if best[0] is not None and stall > best[0]:
            return
        if i == C:
            key_better = best[0] is None or stall < best[0] or (stall == best[0] and value > best[1])
            if key_better:
                best[0], best[1] = stall, value
                argmax.clear()
            if stall == best[0] and value == best[1]:
                argmax.append(tuple(levels))
            return
        for lv in range(spec.num_levels):
            deadline = i * L + s + stall
            res = _fetch(bw, j, left, sizes[i][lv], len(bw), kept, cap, L)
            if res is None:
                break
            nj, nleft, finish = res
            extra = max(0, finish - deadline)
            levels[i] = lv
            dfs(i + 1, nj, nleft, kept + [deadline + extra], stall + extra, value + weights[i][lv])
        levels[i] = 0

    dfs(0, 0, bw[0] if bw else 0, [], 0, 0)
    if best[0] is None:
        raise ModelError("the trace never delivers every base layer")
    lam = resolve_lambda(spec, config)
    objective = Fraction(best[1], scale) - lam * best[0]
    return NoSkipOptimum(min_stall=best[0], objective=objective, solutions=tuple(argmax))
