"""Composite verifiable reward: format check plus a shaped, floored accuracy term.

The four accuracy shapes are parameterised by a floor ``r_min`` and a decay
threshold ``d_0`` at which the un-floored reward reaches exactly ``r_min``.
Linear and quadratic shapes act on the raw score error; the exponential
shapes act on the error divided by the score span (4 on a 1-5 scale).
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

KINDS = ("l1", "l2", "laplacian", "gaussian")
SCORE_LO, SCORE_HI = 1.0, 5.0
SCORE_SPAN = SCORE_HI - SCORE_LO


class RewardSpecError(ValueError):
    pass


@dataclass(frozen=True)
class RewardSpec:
    kind: str = "l1"
    r_min: float = 0.05
    d_0: float = 1.0
    lam: float = 1.0
    normalize_linear_error: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RewardSpecError(f"unknown reward kind {self.kind!r}; expected one of {KINDS}")
        if not (0.0 < self.r_min < 1.0):
            raise RewardSpecError(f"r_min must lie in (0, 1), got {self.r_min}")
        if not (self.d_0 > 0.0 and math.isfinite(self.d_0)):
            raise RewardSpecError(f"d_0 must be positive, got {self.d_0}")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise RewardSpecError(f"lambda must be >= 0, got {self.lam}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class DerivedParams:
    alpha: Optional[float] = None
    tau: Optional[float] = None
    sigma: Optional[float] = None


def derive_params(spec: RewardSpec) -> DerivedParams:
    log_inv = math.log(1.0 / spec.r_min)
    if spec.kind == "gaussian":
        return DerivedParams(sigma=spec.d_0 / math.sqrt(2.0 * log_inv))
    if spec.kind == "laplacian":
        return DerivedParams(tau=spec.d_0 / log_inv)
    if spec.kind == "l1":
        return DerivedParams(alpha=(1.0 - spec.r_min) / spec.d_0)
    return DerivedParams(alpha=(1.0 - spec.r_min) / spec.d_0**2)


def error_measure(s_pred, s_gt, spec: RewardSpec):
    """The error each shape decays over: raw |diff| for l1/l2, |diff|/4 otherwise."""
    diff = np.abs(np.asarray(s_pred, dtype=np.float64) - np.asarray(s_gt, dtype=np.float64))
    if spec.kind in ("l1", "l2") and not spec.normalize_linear_error:
        return diff
    return diff / SCORE_SPAN


def shaped_reward(err, spec: RewardSpec):
    """Un-floored shape value at error ``err`` (already on the kind's scale)."""
    err = np.asarray(err, dtype=np.float64)
    p = derive_params(spec)
    if spec.kind == "l1":
        return 1.0 - p.alpha * err
    if spec.kind == "l2":
        return 1.0 - p.alpha * err**2
    if spec.kind == "laplacian":
        return np.exp(-err / p.tau)
    return np.exp(-(err**2) / (2.0 * p.sigma**2))


def _check_gt(s_gt) -> None:
    gt = np.asarray(s_gt, dtype=np.float64)
    if not np.all((gt >= SCORE_LO) & (gt <= SCORE_HI)):
        raise ValueError(f"ground-truth score outside [{SCORE_LO}, {SCORE_HI}]: {s_gt}")


def accuracy_reward(s_pred, s_gt, spec: RewardSpec):
    """Floored accuracy reward. Works elementwise on arrays; floats in, float out."""
    _check_gt(s_gt)
    r = np.maximum(shaped_reward(error_measure(s_pred, s_gt, spec), spec), spec.r_min)
    return float(r) if r.ndim == 0 else r


# --- response parsing -------------------------------------------------------

_TAGS = ("<think>", "</think>", "<answer>", "</answer>")
_LAYOUT = re.compile(r"\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*", re.DOTALL)
_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")


@dataclass(frozen=True)
class ParsedResponse:
    format_ok: bool
    score: Optional[float] = None


def parse_response(text: str) -> ParsedResponse:
    """Accept exactly ``<think>..</think><answer>NUMBER</answer>``, whitespace aside."""
    if any(text.count(tag) != 1 for tag in _TAGS):
        return ParsedResponse(False)
    m = _LAYOUT.fullmatch(text)
    if m is None:
        return ParsedResponse(False)
    body = m.group(2).strip()
    if not _DECIMAL.fullmatch(body):
        return ParsedResponse(False)
    score = float(body)
    if not math.isfinite(score):
        return ParsedResponse(False)
    return ParsedResponse(True, score)


# --- composite ----------------------------------------------------------------

@dataclass(frozen=True)
class RewardBreakdown:
    r_acc: float
    r_fmt: float
    r_total: float
    format_ok: bool = False
    score: Optional[float] = None


def composite_reward(text: str, s_gt: float, spec: RewardSpec = RewardSpec()) -> RewardBreakdown:
    _check_gt(s_gt)
    parsed = parse_response(text)
    if not parsed.format_ok:
        return RewardBreakdown(0.0, 0.0, 0.0)
    r_acc = accuracy_reward(parsed.score, s_gt, spec)
    return RewardBreakdown(r_acc, 1.0, r_acc + spec.lam * 1.0, True, parsed.score)


def composite_reward_arrays(format_ok, s_pred, s_gt, spec: RewardSpec) -> np.ndarray:
    """Vectorised composite reward for already-parsed rollouts.

    Matches ``composite_reward(render(t), s_gt)`` for every trajectory whose
    text round-trips, which is how the synthetic environment renders them.
    """
    format_ok = np.asarray(format_ok, dtype=bool)
    r_acc = np.asarray(accuracy_reward(np.asarray(s_pred, dtype=np.float64), s_gt, spec))
    return np.where(format_ok, r_acc + spec.lam * 1.0, 0.0)


def format_breakdown(b: RewardBreakdown) -> str:
    return f"r_acc={b.r_acc:.6f} r_fmt={b.r_fmt:.0f} r_total={b.r_total:.6f}"
