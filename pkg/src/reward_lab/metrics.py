"""PLCC, SROCC and MainScore between predicted and ground-truth scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class DegenerateSeriesError(ValueError):
    """Raised when a correlation is undefined (constant or too-short input)."""


@dataclass(frozen=True)
class CorrelationReport:
    plcc: float
    srocc: float
    main_score: float

    def format(self) -> str:
        return f"plcc={self.plcc:.4f} srocc={self.srocc:.4f} main_score={self.main_score:.4f}"

    def to_dict(self) -> dict:
        return {
            "plcc": round(self.plcc, 4),
            "srocc": round(self.srocc, 4),
            "main_score": round(self.main_score, 4),
        }


def _check_pair(pred: Sequence[float], gt: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gt, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("pred and gt must be one-dimensional")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: pred has {x.size}, gt has {y.size}")
    if x.size < 2:
        raise DegenerateSeriesError("need at least two paired values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series contain non-finite values")
    return x, y


def plcc(pred: Sequence[float], gt: Sequence[float]) -> float:
    """Pearson product-moment correlation; raises on zero-variance input."""
    x, y = _check_pair(pred, gt)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateSeriesError("correlation undefined for a constant series")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def rank_transform(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties share the mean of the positions they occupy."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot rank an empty series")
    return rankdata(v, method="average").astype(np.float64)


def srocc(pred: Sequence[float], gt: Sequence[float]) -> float:
    x, y = _check_pair(pred, gt)
    return plcc(rank_transform(x), rank_transform(y))


def main_score(plcc_value: float, srocc_value: float) -> float:
    for name, v in (("plcc", plcc_value), ("srocc", srocc_value)):
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [-1, 1]")
    return (plcc_value + srocc_value) / 2


def correlation_report(pred: Sequence[float], gt: Sequence[float]) -> CorrelationReport:
    p = plcc(pred, gt)
    s = srocc(pred, gt)
    return CorrelationReport(plcc=p, srocc=s, main_score=main_score(p, s))
