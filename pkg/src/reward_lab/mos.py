"""Subjective-study ratings -> screened, z-scored, rescaled MOS tables.

Pipeline: ``ingest_ratings`` -> ``screen_observers`` (raw scores) ->
``zscore_normalize`` -> ``aggregate`` -> ``rescale_to_range``.
All standard deviations in this module are population (divide-by-n).
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

DIMENSIONS = ("text_alignment", "fidelity", "quality", "overall")
HEADER = ("participant", "sample", "dimension", "score")
RAW_LO, RAW_HI = 1.0, 10.0

# Observer screening constants (ITU-R BT.500 Annex procedure).
NORMAL_KURTOSIS = (2.0, 4.0)
NORMAL_WIDTH = 2.0
NONNORMAL_WIDTH = math.sqrt(20.0)
REJECT_FRACTION = 0.05
REJECT_BALANCE = 0.3


class RatingsError(ValueError):
    """Ingestion failure; ``problems`` holds (row, message) pairs for every bad row."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        super().__init__("; ".join(f"row {r}: {m}" for r, m in problems))


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    participant_id: str
    sample_id: str
    dimension: str
    raw_score: float


@dataclass(frozen=True)
class NormalizedRating:
    participant_id: str
    sample_id: str
    dimension: str
    z: float
    degenerate: bool = False


@dataclass(frozen=True)
class ScreeningReport:
    p_counts: Mapping[str, int]
    q_counts: Mapping[str, int]
    n_ratings: Mapping[str, int]
    rejected: frozenset
    thresholds: Mapping[str, float]

    def to_json(self) -> str:
        doc = {
            "participants": {
                pid: {"P": self.p_counts[pid], "Q": self.q_counts[pid], "ratings": self.n_ratings[pid]}
                for pid in sorted(self.n_ratings)
            },
            "rejected": sorted(self.rejected),
            "thresholds": dict(sorted(self.thresholds.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class MosEntry:
    mos: float
    rater_count: int


@dataclass
class MosTable:
    entries: dict[tuple[str, str], MosEntry]
    excluded: list[tuple[str, str]] = field(default_factory=list)
    constant_dimensions: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["sample,dimension,mos,raters"]
        for (sample, dim), e in sorted(self.entries.items()):
            lines.append(f"{sample},{dim},{e.mos:.4f},{e.rater_count}")
        return "\n".join(lines) + "\n"


def ingest_ratings(rows: Iterable[str] | str) -> list[RatingRecord]:
    """Parse comma-separated rating rows; an optional header row is skipped.

    Rows are numbered from 1 over data rows. Every malformed or duplicate row
    is collected before raising, so one error lists all problems.
    """
    if isinstance(rows, str):
        rows = io.StringIO(rows)
    records: list[RatingRecord] = []
    problems: list[tuple[int, str]] = []
    seen: dict[tuple[str, str, str], int] = {}
    index = 0
    for fields in csv.reader(rows):
        if not fields or all(not f.strip() for f in fields):
            continue
        if index == 0 and not records and not problems and tuple(f.strip() for f in fields) == HEADER:
            continue
        index += 1
        if len(fields) != 4:
            problems.append((index, f"expected 4 fields, got {len(fields)}"))
            continue
        pid, sid, dim, raw = (f.strip() for f in fields)
        if not pid or not sid:
            problems.append((index, "empty participant or sample id"))
            continue
        if dim not in DIMENSIONS:
            problems.append((index, f"unknown dimension {dim!r}"))
            continue
        try:
            score = float(raw)
        except ValueError:
            problems.append((index, f"score {raw!r} is not a number"))
            continue
        if not (RAW_LO <= score <= RAW_HI):
            problems.append((index, f"score {score} outside [{RAW_LO:g}, {RAW_HI:g}]"))
            continue
        key = (pid, sid, dim)
        if key in seen:
            problems.append((index, f"duplicate key {key} (rows {seen[key]} and {index})"))
            continue
        seen[key] = index
        records.append(RatingRecord(pid, sid, dim, score))
    if problems:
        raise RatingsError(problems)
    return records


def zscore_normalize(records: list[RatingRecord]) -> list[NormalizedRating]:
    """Standardise each participant's scores, pooled over samples and dimensions."""
    if not records:
        raise ValueError("no ratings to normalise")
    by_participant: dict[str, list[float]] = defaultdict(list)
    for r in records:
        by_participant[r.participant_id].append(r.raw_score)
    stats = {}
    for pid, xs in by_participant.items():
        a = np.asarray(xs)
        stats[pid] = (a.mean(), a.std())
    out = []
    for r in records:
        mu, sd = stats[r.participant_id]
        if sd == 0.0:
            out.append(NormalizedRating(r.participant_id, r.sample_id, r.dimension, 0.0, True))
        else:
            z = float((r.raw_score - mu) / sd)
            out.append(NormalizedRating(r.participant_id, r.sample_id, r.dimension, z))
    return out


def screen_observers(records: list[RatingRecord]) -> ScreeningReport:
    """Kurtosis-gated observer rejection on raw scores.

    A stimulus is one (sample, dimension) pair. A rating counts toward P (Q)
    when it lies above (below) the stimulus mean by more than 2 sigma if the
    stimulus kurtosis is in [2, 4], else by more than sqrt(20) sigma. A
    participant is rejected iff (P+Q)/n > 0.05 and |P-Q|/(P+Q) < 0.3.
    """
    participants = sorted({r.participant_id for r in records})
    if len(participants) < 2:
        raise ScreeningError(f"screening needs at least 2 participants, got {len(participants)}")
    by_stimulus: dict[tuple[str, str], list[RatingRecord]] = defaultdict(list)
    for r in records:
        by_stimulus[(r.sample_id, r.dimension)].append(r)
    thin = sorted(k for k, v in by_stimulus.items() if len(v) < 2)
    if thin:
        raise ScreeningError(f"stimuli rated by fewer than 2 participants: {thin[:5]}")

    p_counts = dict.fromkeys(participants, 0)
    q_counts = dict.fromkeys(participants, 0)
    n_ratings = dict.fromkeys(participants, 0)
    for r in records:
        n_ratings[r.participant_id] += 1

    for key in sorted(by_stimulus):
        group = by_stimulus[key]
        x = np.array([r.raw_score for r in group])
        mean = x.mean()
        dev = x - mean
        m2 = float(np.mean(dev**2))
        if m2 == 0.0:
            continue
        kurt = float(np.mean(dev**4)) / m2**2
        sd = math.sqrt(m2)
        lo, hi = NORMAL_KURTOSIS
        width = NORMAL_WIDTH if lo <= kurt <= hi else NONNORMAL_WIDTH
        for r, xi in zip(group, x):
            if xi > mean + width * sd:
                p_counts[r.participant_id] += 1
            elif xi < mean - width * sd:
                q_counts[r.participant_id] += 1

    rejected = set()
    for pid in participants:
        flagged = p_counts[pid] + q_counts[pid]
        if flagged == 0:
            continue
        if flagged / n_ratings[pid] > REJECT_FRACTION and abs(p_counts[pid] - q_counts[pid]) / flagged < REJECT_BALANCE:
            rejected.add(pid)

    return ScreeningReport(
        p_counts=p_counts,
        q_counts=q_counts,
        n_ratings=n_ratings,
        rejected=frozenset(rejected),
        thresholds={
            "kurtosis_lo": NORMAL_KURTOSIS[0],
            "kurtosis_hi": NORMAL_KURTOSIS[1],
            "width_normal": NORMAL_WIDTH,
            "width_nonnormal": NONNORMAL_WIDTH,
            "reject_fraction": REJECT_FRACTION,
            "reject_balance": REJECT_BALANCE,
        },
    )


def aggregate(normalized: list[NormalizedRating], screening: ScreeningReport | None = None) -> MosTable:
    if not normalized:
        raise ValueError("no normalised ratings to aggregate")
    rejected = screening.rejected if screening is not None else frozenset()
    kept: dict[tuple[str, str], list[float]] = defaultdict(list)
    keys = set()
    for n in normalized:
        key = (n.sample_id, n.dimension)
        keys.add(key)
        if n.participant_id not in rejected:
            kept[key].append(n.z)
    entries = {k: MosEntry(float(np.mean(v)), len(v)) for k, v in kept.items()}
    excluded = sorted(keys - set(entries))
    return MosTable(entries=entries, excluded=excluded)


def rescale_to_range(table: MosTable, lo: float = 1.0, hi: float = 5.0) -> MosTable:
    """Per dimension, map the observed min..max affinely onto lo..hi."""
    if not hi > lo:
        raise ValueError(f"need hi > lo, got lo={lo}, hi={hi}")
    if not table.entries:
        raise ValueError("cannot rescale an empty table")
    by_dim: dict[str, list[float]] = defaultdict(list)
    for (_, dim), e in table.entries.items():
        by_dim[dim].append(e.mos)
    bounds = {d: (min(v), max(v)) for d, v in by_dim.items()}
    constant = sorted(d for d, (a, b) in bounds.items() if a == b)
    entries = {}
    for key, e in table.entries.items():
        a, b = bounds[key[1]]
        if a == b:
            value = (lo + hi) / 2
        else:
            value = lo + (e.mos - a) * (hi - lo) / (b - a)
            value = min(hi, max(lo, value))
        entries[key] = MosEntry(value, e.rater_count)
    return MosTable(entries=entries, excluded=list(table.excluded), constant_dimensions=constant)


def run_pipeline(text: str, lo: float = 1.0, hi: float = 5.0) -> tuple[MosTable, MosTable, ScreeningReport]:
    """ingest -> screen -> normalise -> aggregate -> rescale. Returns (z table, rescaled, report)."""
    records = ingest_ratings(text)
    if not records:
        raise ValueError("input contains no ratings")
    report = screen_observers(records)
    z_table = aggregate(zscore_normalize(records), report)
    return z_table, rescale_to_range(z_table, lo, hi), report
