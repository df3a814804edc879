"""Quality-of-experience metrics for a finished session."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

from .model import SKIP, Mode, StreamConfig, VideoSpec, objective_value
from .playback import SessionLog


def lsr(delivered: Sequence[int], num_chunks: int, chunk_duration: int) -> Fraction:
    """Layer switching rate: total absolute size change between neighbours per video slot.

    Skipped chunks count as size 0.
    """
    if num_chunks < 1:
        return Fraction(0)
    total = sum(abs(b - a) for a, b in zip(delivered, delivered[1:]))
    return Fraction(total, num_chunks * chunk_duration)


def avg_playback_rate(delivered: Sequence[int], num_chunks: int, chunk_duration: int,
                      slot_seconds: Fraction = Fraction(1)) -> Fraction:
    """Mean delivered kilobits per second of video."""
    return Fraction(sum(delivered)) / (num_chunks * chunk_duration * Fraction(slot_seconds))


def layer_breakdown(levels: Sequence[int], spec: VideoSpec) -> dict[str, int]:
    """Chunk counts by highest complete layer: S (skipped), BL, EL1..ELN."""
    keys = ["S", "BL"] + [f"EL{n}" for n in range(1, spec.num_levels)]
    counts = dict.fromkeys(keys, 0)
    for lv in levels:
        counts[keys[lv + 1]] += 1  # SKIP is -1
    return counts


@dataclass(frozen=True)
class QoEReport:
    num_chunks: int
    skips: int
    skipped: tuple[int, ...]
    total_stall: int
    avg_rate_kbps: Fraction
    lsr: Fraction
    breakdown: dict
    objective: Fraction
    wasted_kb: int

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("avg_rate_kbps", "lsr", "objective"):
            out[key] = float(out[key])
        out["skipped"] = list(self.skipped)
        return out


def build_report(session: SessionLog, spec: VideoSpec, config: StreamConfig,
                 slot_seconds: Fraction = Fraction(1)) -> QoEReport:
    C, L = spec.num_chunks, spec.chunk_duration
    stall = session.total_stall if config.mode == Mode.NOSKIP else None
    return QoEReport(
        num_chunks=C,
        skips=sum(1 for lv in session.levels if lv == SKIP),
        skipped=tuple(session.skipped),
        total_stall=session.total_stall,
        avg_rate_kbps=avg_playback_rate(session.delivered_kb, C, L, slot_seconds),
        lsr=lsr(session.delivered_kb, C, L),
        breakdown=layer_breakdown(session.levels, spec),
        objective=objective_value(list(session.levels), spec, config, total_stall=stall),
        wasted_kb=session.wasted_kb,
    )
