"""Bandwidth predictors, synthetic prediction error and error statistics."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import BandwidthTrace, ModelError


class PredictorKind(str, enum.Enum):
    HARMONIC = "harmonic"
    CROWD = "crowd"
    ORACLE = "oracle"


@dataclass(frozen=True)
class PredictionConfig:
    kind: PredictorKind = PredictorKind.ORACLE
    history_slots: int = 5
    horizon_slots: int = 20
    pe: float | tuple[float, ...] = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.history_slots < 1 or self.horizon_slots < 1:
            raise ModelError("history and horizon must be at least one slot")
        if any(p < 0 for p in _as_tuple(self.pe)):
            raise ModelError("pe must be non-negative")


def _as_tuple(pe) -> tuple[float, ...]:
    return tuple(pe) if isinstance(pe, (tuple, list)) else (pe,)


def harmonic_mean_predict(history: Sequence[int], horizon: int) -> list[int]:
    """Constant forecast at the harmonic mean of ``history`` (zeros count as 1 kb)."""
    if not history:
        raise ModelError("harmonic mean needs at least one observation")
    inv = sum(Fraction(1, max(1, int(h))) for h in history)
    value = round(len(history) / inv)
    return [value] * horizon


def draw_errors(n: int, pe: float | Sequence[float], seed) -> np.ndarray:
    """``n`` relative errors, entry k uniform on [-pe_k, pe_k] (last pe repeats)."""
    rng = np.random.default_rng(seed)
    pes = np.asarray(_as_tuple(pe), dtype=float)
    scale = pes[np.minimum(np.arange(n), len(pes) - 1)]
    return rng.uniform(-1.0, 1.0, n) * scale


def inject_error(truth: BandwidthTrace, pe: float | Sequence[float], seed) -> BandwidthTrace:
    """Noisy copy of ``truth``: each slot scaled by (1 + e), negatives clamped to 0."""
    if all(p == 0 for p in _as_tuple(pe)):
        return truth
    caps = np.asarray(truth.capacities, dtype=float)
    noisy = caps * (1.0 + draw_errors(len(caps), pe, seed))
    values = np.rint(np.clip(noisy, 0.0, None)).astype(np.int64)
    return BandwidthTrace(tuple(int(v) for v in values), truth.slot_duration)


def crowd_mean_trace(traces: Sequence[BandwidthTrace], bin_slots: int = 1) -> BandwidthTrace:
    """Per-bin mean over index-aligned traces, each binned within itself first."""
    if not traces:
        raise ModelError("crowd mean needs at least one trace")
    if bin_slots < 1:
        raise ModelError("bin size must be positive")
    length = min(len(t) for t in traces) // bin_slots * bin_slots
    if length == 0:
        raise ModelError("traces are shorter than one bin")
    binned = np.stack([
        np.asarray(t.capacities[:length], dtype=float).reshape(-1, bin_slots).mean(axis=1)
        for t in traces
    ])
    mean = np.rint(binned.mean(axis=0)).astype(np.int64)
    return BandwidthTrace(tuple(int(v) for v in mean), traces[0].slot_duration * bin_slots)


def prediction_error_metric(pred: Sequence[int], truth: Sequence[int]) -> Fraction:
    """Mean of |truth - pred| / truth over the bins where truth is positive."""
    if len(pred) != len(truth):
        raise ModelError("prediction and truth differ in length")
    terms = [Fraction(abs(b - p), b) for p, b in zip(pred, truth) if b > 0]
    return sum(terms, Fraction(0)) / len(terms) if terms else Fraction(0)


class OraclePredictor:
    """Knows the true future."""

    def __init__(self, truth: BandwidthTrace):
        self.truth = truth

    def predict(self, slot: int, horizon: int, history: Sequence[int]) -> list[int]:
        return list(self.truth.capacities[slot - 1:slot - 1 + horizon])


class HarmonicPredictor:
    """Harmonic mean of the last ``history_slots`` observed capacities.

    Returns None before anything has been observed; the caller picks a
    cold-start forecast.
    """

    def __init__(self, history_slots: int = 5):
        self.history_slots = history_slots

    def predict(self, slot: int, horizon: int, history: Sequence[int]) -> list[int] | None:
        if not history:
            return None
        return harmonic_mean_predict(history[-self.history_slots:], horizon)


class CrowdPredictor:
    """A crowd-sourced mean trace, or the truth with synthetic error when none is given.

    Errors are drawn per prediction, keyed by (seed, slot), with pe indexed
    by the offset into the horizon when a vector is given.
    """

    def __init__(self, truth: BandwidthTrace, pe=0.0, seed: int = 0,
                 mean_trace: BandwidthTrace | None = None):
        self.truth, self.pe, self.seed, self.mean = truth, pe, seed, mean_trace

    def predict(self, slot: int, horizon: int, history: Sequence[int]) -> list[int]:
        source = self.mean if self.mean is not None else self.truth
        window = np.asarray(source.capacities[slot - 1:slot - 1 + horizon], dtype=float)
        if self.mean is None and any(p > 0 for p in _as_tuple(self.pe)):
            window = window * (1.0 + draw_errors(len(window), self.pe, [self.seed, slot]))
        return [int(v) for v in np.rint(np.clip(window, 0.0, None))]


def make_predictor(config: PredictionConfig, truth: BandwidthTrace,
                   mean_trace: BandwidthTrace | None = None):
    if config.kind == PredictorKind.ORACLE:
        return OraclePredictor(truth)
    if config.kind == PredictorKind.HARMONIC:
        return HarmonicPredictor(config.history_slots)
    return CrowdPredictor(truth, config.pe, config.seed, mean_trace)
