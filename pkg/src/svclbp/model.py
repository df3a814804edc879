"""Domain types, deadline arithmetic, objective evaluation and weight checks.

Units are integers throughout: sizes in kilobits, bandwidth in kilobits per
slot, time in slots (slot 1 is the first slot of the session).  Weights are
exact :class:`fractions.Fraction` values so that objective comparisons never
depend on floating point rounding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

SKIP = -1  # level of a chunk that is not fetched at all


class Mode(str, enum.Enum):
    SKIP = "skip"
    NOSKIP = "noskip"


class ModelError(ValueError):
    """Raised for malformed inputs (bad sizes, bad indices, broken plans)."""


@dataclass(frozen=True)
class VideoSpec:
    """An SVC video: ``num_chunks`` chunks of ``chunk_duration`` slots each.

    ``layer_sizes[n][i]`` is the size in kilobits of layer ``n`` of chunk
    ``i`` (0-based chunk index).  ``nominal`` remembers which layers were given
    as a single CBR size so the JSON form round-trips.
    """

    num_chunks: int
    chunk_duration: int
    layer_sizes: tuple[tuple[int, ...], ...]
    nominal: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.num_chunks < 1:
            raise ModelError("num_chunks must be positive")
        if self.chunk_duration < 1:
            raise ModelError("chunk_duration must be a positive number of slots")
        if not self.layer_sizes:
            raise ModelError("at least the base layer is required")
        for n, sizes in enumerate(self.layer_sizes):
            if len(sizes) != self.num_chunks:
                raise ModelError(
                    f"layer {n} has {len(sizes)} sizes, expected {self.num_chunks}"
                )
            if n == 0 and any(y <= 0 for y in sizes):
                raise ModelError("base layer sizes must be positive")
            if any(y < 0 for y in sizes):
                raise ModelError(f"layer {n} has a negative size")
        if not self.nominal:
            object.__setattr__(
                self,
                "nominal",
                tuple(len(set(s)) == 1 for s in self.layer_sizes),
            )

    @classmethod
    def from_layers(
        cls, num_chunks: int, chunk_duration: int, layers: Sequence[int | Sequence[int]]
    ) -> "VideoSpec":
        """Build from per-layer entries that are either an int or a per-chunk list."""
        expanded = []
        nominal = []
        for layer in layers:
            if isinstance(layer, int):
                expanded.append((layer,) * num_chunks)
                nominal.append(True)
            else:
                expanded.append(tuple(int(y) for y in layer))
                nominal.append(False)
        return cls(num_chunks, chunk_duration, tuple(expanded), tuple(nominal))

    @property
    def num_enh_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def num_levels(self) -> int:
        return len(self.layer_sizes)

    def layer_size(self, n: int, i: int) -> int:
        return self.layer_sizes[n][i]

    def cumulative(self, level: int, i: int) -> int:
        """X_level(i): size of chunk ``i`` delivered up to ``level`` (0 for SKIP)."""
        return sum(self.layer_sizes[m][i] for m in range(level + 1))

    def cumulative_table(self) -> list[list[int]]:
        """``table[i][level]`` for every chunk, levels 0..N."""
        table = []
        for i in range(self.num_chunks):
            acc, row = 0, []
            for n in range(self.num_levels):
                acc += self.layer_sizes[n][i]
                row.append(acc)
            table.append(row)
        return table

    def level_of_size(self, i: int, size: int) -> int:
        """Highest level whose cumulative size fits in ``size`` kilobits."""
        level, acc = SKIP, 0
        for n in range(self.num_levels):
            acc += self.layer_sizes[n][i]
            if acc > size:
                break
            level = n
        return level


@dataclass(frozen=True)
class StreamConfig:
    startup_delay: int
    buffer_capacity: int
    gamma: Fraction
    beta: Fraction = Fraction(1001, 1000)
    lam: Fraction | None = None
    mode: Mode = Mode.SKIP

    def __post_init__(self):
        if self.startup_delay < 0:
            raise ModelError("startup delay must be non-negative")
        if self.buffer_capacity < 1:
            raise ModelError("buffer capacity must be positive")
        if not 0 < self.gamma < 1:
            raise ModelError("gamma must lie in (0, 1)")
        if self.beta <= 1:
            raise ModelError("beta must exceed 1")
        if self.lam is not None and self.lam < 0:
            raise ModelError("lambda must be non-negative")


@dataclass(frozen=True)
class BandwidthTrace:
    capacities: tuple[int, ...]
    slot_duration: Fraction = Fraction(1)

    def __post_init__(self):
        if any(b < 0 for b in self.capacities):
            raise ModelError("bandwidth capacities must be non-negative")
        object.__setattr__(self, "capacities", tuple(int(b) for b in self.capacities))

    def __len__(self):
        return len(self.capacities)

    def fit(self, num_slots: int) -> list[int]:
        """Capacities for slots 1..num_slots, zero-extended or truncated."""
        caps = list(self.capacities[:num_slots])
        return caps + [0] * (num_slots - len(caps))


@dataclass(frozen=True)
class LayerPlan:
    """Per-chunk layer decisions plus the timing metadata of the last scans.

    All per-chunk vectors are 0-based by chunk; slot values are 1-based slot
    numbers (0 means "never touched").  ``residual`` is indexed by slot - 1.
    """

    levels: tuple[int, ...]
    sizes: tuple[int, ...]
    deadlines: tuple[int, ...]
    lower: tuple[int, ...] = ()
    head: tuple[int, ...] = ()
    residual: tuple[int, ...] = ()
    stalls: tuple[int, ...] = ()
    mode: Mode = Mode.SKIP
    scan_iterations: tuple[int, ...] = field(default=(), compare=False)

    @property
    def num_chunks(self) -> int:
        return len(self.levels)

    def layer_sets(self) -> list[list[int]]:
        """I_n for each layer as sorted 1-based chunk indices."""
        top = max(self.levels, default=SKIP)
        return [
            [i + 1 for i, lv in enumerate(self.levels) if lv >= n]
            for n in range(top + 1)
        ]

    @property
    def skipped(self) -> list[int]:
        return [i + 1 for i, lv in enumerate(self.levels) if lv == SKIP]

    @property
    def total_stall(self) -> int:
        return self.stalls[-1] if self.stalls else 0


def deadline_of(i: int, chunk_duration: int, startup_delay: int, num_chunks: int | None = None) -> int:
    """Playback deadline (slot) of 1-based chunk ``i``."""
    if i < 1 or (num_chunks is not None and i > num_chunks):
        raise ModelError(f"chunk index {i} out of range")
    return (i - 1) * chunk_duration + startup_delay


def base_deadlines(spec: VideoSpec, startup_delay: int, stalls: Sequence[int] | None = None) -> list[int]:
    stalls = stalls or [0] * spec.num_chunks
    return [
        deadline_of(i + 1, spec.chunk_duration, startup_delay) + stalls[i]
        for i in range(spec.num_chunks)
    ]


def chunk_weights(spec: VideoSpec, config: StreamConfig) -> list[list[Fraction]]:
    """``w[i][level]``: objective contribution of chunk ``i`` delivered at ``level``."""
    weights = []
    beta_pow = Fraction(1)
    for i in range(spec.num_chunks):
        beta_pow *= config.beta
        acc, row, gpow = Fraction(0), [], Fraction(1)
        for n in range(spec.num_levels):
            acc += gpow * spec.layer_sizes[n][i] * beta_pow
            row.append(acc)
            gpow *= config.gamma
        weights.append(row)
    return weights


def check_decoder(spec: VideoSpec, levels: Sequence[int]) -> None:
    if len(levels) != spec.num_chunks:
        raise ModelError("plan length does not match the video")
    for i, lv in enumerate(levels):
        if not SKIP <= lv <= spec.num_enh_layers:
            raise ModelError(f"chunk {i + 1} has invalid level {lv}")


def objective_value(plan: LayerPlan | Sequence[int], spec: VideoSpec, config: StreamConfig,
                    total_stall: int | None = None) -> Fraction:
    """Weighted layer objective; in NoSkip mode the stall penalty is subtracted.

    ``plan`` may be a :class:`LayerPlan` or a bare level vector.
    """
    if isinstance(plan, LayerPlan):
        levels = plan.levels
        if total_stall is None:
            total_stall = plan.total_stall
    else:
        levels = list(plan)
    check_decoder(spec, levels)
    weights = chunk_weights(spec, config)
    value = sum((weights[i][lv] for i, lv in enumerate(levels) if lv >= 0), Fraction(0))
    if config.mode is Mode.NOSKIP:
        value -= resolve_lambda(spec, config) * (total_stall or 0)
    return value


def _beta_sum(config: StreamConfig, num_chunks: int) -> Fraction:
    b, total = Fraction(1), Fraction(0)
    for _ in range(num_chunks):
        b *= config.beta
        total += b
    return total


@dataclass(frozen=True)
class WeightVerdict:
    layer_ok: tuple[bool, ...]
    lambda_ok: bool | None

    @property
    def valid(self) -> bool:
        return all(self.layer_ok) and self.lambda_ok is not False


def _layer_conditions(spec: VideoSpec, gamma: Fraction, beta_sum: Fraction) -> list[bool]:
    # VBR: smallest size of layer a against largest sizes of the layers above
    low = [min(s) for s in spec.layer_sizes]
    high = [max(s) for s in spec.layer_sizes]
    out = []
    for a in range(spec.num_enh_layers):
        lhs = gamma**a * low[a]
        rhs = sum((gamma**k * high[k] for k in range(a + 1, spec.num_levels)), Fraction(0)) * beta_sum
        out.append(lhs > rhs)
    return out


def max_quality_value(spec: VideoSpec, gamma: Fraction, beta: Fraction) -> Fraction:
    """Objective of every chunk at the top level (the bound lambda must beat)."""
    cfg = StreamConfig(startup_delay=0, buffer_capacity=1, gamma=gamma, beta=beta)
    return sum((row[-1] for row in chunk_weights(spec, cfg)), Fraction(0))


def resolve_lambda(spec: VideoSpec, config: StreamConfig) -> Fraction:
    if config.lam is not None:
        return config.lam
    return 2 * max_quality_value(spec, config.gamma, config.beta)


def validate_weights(spec: VideoSpec, config: StreamConfig) -> WeightVerdict:
    beta_sum = _beta_sum(config, spec.num_chunks)
    layer_ok = tuple(_layer_conditions(spec, config.gamma, beta_sum))
    lambda_ok = None
    if config.mode is Mode.NOSKIP:
        lam = resolve_lambda(spec, config)
        lambda_ok = lam > max_quality_value(spec, config.gamma, config.beta)
    return WeightVerdict(layer_ok, lambda_ok)


def default_gamma(spec: VideoSpec, beta: Fraction = Fraction(1001, 1000), iterations: int = 40) -> Fraction:
    """0.9 times the largest gamma satisfying the layer-priority condition."""
    beta_sum = Fraction(0)
    b = Fraction(1)
    for _ in range(spec.num_chunks):
        b *= beta
        beta_sum += b
    lo, hi = Fraction(0), Fraction(1)
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if all(_layer_conditions(spec, mid, beta_sum)):
            lo = mid
        else:
            hi = mid
    gamma = lo * Fraction(9, 10)
    if gamma == 0:
        raise ModelError("no gamma in (0, 1) satisfies the layer-priority condition")
    return gamma


def make_config(
    spec: VideoSpec,
    startup_delay: int,
    buffer_capacity: int,
    mode: Mode = Mode.SKIP,
    gamma: Fraction | None = None,
    beta: Fraction = Fraction(1001, 1000),
    lam: Fraction | None = None,
) -> StreamConfig:
    """StreamConfig with the documented defaults filled in for ``spec``."""
    if gamma is None:
        gamma = default_gamma(spec, beta)
    return StreamConfig(
        startup_delay=startup_delay,
        buffer_capacity=buffer_capacity,
        gamma=gamma,
        beta=beta,
        lam=lam,
        mode=mode,
    )


def abr_rate_mapping(cumulative_rates: Iterable[int], chunk_duration: int) -> list[int]:
    """Per-layer sizes for an ABR ladder: rate differences become layer rates."""
    rates = list(cumulative_rates)
    if not rates:
        raise ModelError("empty rate ladder")
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ModelError("ABR rates must be strictly ascending")
    sizes = [rates[0] * chunk_duration]
    sizes += [(b - a) * chunk_duration for a, b in zip(rates, rates[1:])]
    return sizes
