"""Scoring and distance-bucket analysis.

Micro P/R/F1 exclude the negative label from both numerators, following the
usual convention for this task. One deliberate edge choice: an empty
prediction set scores P = 0, not 1, so a model that never predicts a
relation cannot claim perfect precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .data_model import Example, Registry
from .errors import ConfigError, InputError

Bucket = tuple[int, int | None]

DEFAULT_BUCKETS: tuple[Bucket, ...] = ((0, 7), (8, 10), (11, None))
DISTANCE_METRICS = ("boundary", "start")


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    correct: int    # true positives over non-negative labels
    predicted: int  # predictions with a non-negative label
    gold: int       # gold non-negative labels
    n: int          # examples scored


@dataclass(frozen=True)
class BucketRow:
    lo: int
    hi: int | None  # None = unbounded
    score: Score

    @property
    def label(self) -> str:
        return f"{self.lo}+" if self.hi is None else f"{self.lo}-{self.hi}"


@dataclass(frozen=True)
class EvalReport:
    overall: Score
    buckets: tuple[BucketRow, ...]
    long_range_avg_f1: float     # mean of per-bucket F1 over buckets with lo >= 11
    long_range_pooled_f1: float  # F1 of those buckets' merged counts
    distance_metric: str


def _prf(correct: int, predicted: int, gold: int, n: int) -> Score:
    precision = correct / predicted if predicted > 0 else 0.0
    recall = correct / gold if gold > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Score(precision, recall, f1, correct, predicted, gold, n)


def score(golds, preds, no_relation: int) -> Score:
    """Micro P/R/F1 with the no_relation index excluded from both numerators."""
    golds = list(golds)
    preds = list(preds)
    if len(golds) != len(preds):
        raise InputError(f"{len(golds)} golds vs {len(preds)} predictions")
    correct = sum(1 for g, p in zip(golds, preds) if p != no_relation and g == p)
    predicted = sum(1 for p in preds if p != no_relation)
    gold = sum(1 for g in golds if g != no_relation)
    return _prf(correct, predicted, gold, len(golds))


def entity_distance(ex: Example, metric: str = "boundary") -> int:
    """Span separation in word tokens; adjacent spans are distance 0."""
    if metric == "start":
        return abs(ex.subj_span[0] - ex.obj_span[0])
    if metric != "boundary":
        raise ConfigError(f"unknown distance metric: {metric!r}")
    if ex.subj_span[0] <= ex.obj_span[0]:
        first, second = ex.subj_span, ex.obj_span
    else:
        first, second = ex.obj_span, ex.subj_span
    return max(0, second[0] - first[1] - 1)


def parse_buckets(spec: str) -> tuple[Bucket, ...]:
    """Parse "0-7,8-10,11+" into ((0,7),(8,10),(11,None))."""
    buckets: list[Bucket] = []
    for part in spec.split(","):
        part = part.strip()
        try:
            if part.endswith("+"):
                buckets.append((int(part[:-1]), None))
            else:
                lo_s, hi_s = part.split("-")
                buckets.append((int(lo_s), int(hi_s)))
        except ValueError:
            raise ConfigError(f"cannot parse bucket {part!r}; expected lo-hi or lo+") from None
    return validate_buckets(tuple(buckets))


def validate_buckets(buckets: tuple[Bucket, ...]) -> tuple[Bucket, ...]:
    """Buckets must partition [0, inf): contiguous, non-overlapping, open-ended last."""
    if not buckets:
        raise ConfigError("no buckets given")
    ordered = tuple(sorted(buckets, key=lambda b: b[0]))
    expected_lo = 0
    for i, (lo, hi) in enumerate(ordered):
        last = i == len(ordered) - 1
        if lo < expected_lo:
            raise ConfigError(f"buckets overlap at {lo}")
        if lo > expected_lo:
            raise ConfigError(f"buckets leave a gap before {lo}")
        if hi is None:
            if not last:
                raise ConfigError("only the last bucket may be open-ended")
        else:
            if hi < lo:
                raise ConfigError(f"bucket {lo}-{hi} is empty")
            expected_lo = hi + 1
    if ordered[-1][1] is not None:
        raise ConfigError("last bucket must be open-ended (lo+) to cover all distances")
    return ordered


def _bucket_index(buckets: tuple[Bucket, ...], distance: int) -> int:
    for i, (lo, hi) in enumerate(buckets):
        if distance >= lo and (hi is None or distance <= hi):
            return i
    raise ConfigError(f"distance {distance} falls in no bucket")


def bucket_report(
    golds,
    preds,
    distances,
    no_relation: int,
    buckets: tuple[Bucket, ...] = DEFAULT_BUCKETS,
    distance_metric: str = "boundary",
) -> EvalReport:
    golds = list(golds)
    preds = list(preds)
    distances = list(distances)
    if not (len(golds) == len(preds) == len(distances)):
        raise InputError(
            f"misaligned inputs: {len(golds)} golds, {len(preds)} preds, {len(distances)} distances"
        )
    buckets = validate_buckets(buckets)
    per_bucket: list[list[int]] = [[] for _ in buckets]
    for i, d in enumerate(distances):
        if d < 0:
            raise InputError(f"negative distance {d} at position {i}")
        per_bucket[_bucket_index(buckets, d)].append(i)

    rows = []
    for (lo, hi), members in zip(buckets, per_bucket):
        s = score([golds[i] for i in members], [preds[i] for i in members], no_relation)
        rows.append(BucketRow(lo=lo, hi=hi, score=s))

    long_rows = [row for row in rows if row.lo >= 11]
    long_avg = sum(r.score.f1 for r in long_rows) / len(long_rows) if long_rows else 0.0
    pooled = _prf(
        sum(r.score.correct for r in long_rows),
        sum(r.score.predicted for r in long_rows),
        sum(r.score.gold for r in long_rows),
        sum(r.score.n for r in long_rows),
    )
    return EvalReport(
        overall=score(golds, preds, no_relation),
        buckets=tuple(rows),
        long_range_avg_f1=long_avg,
        long_range_pooled_f1=pooled.f1,
        distance_metric=distance_metric,
    )


def evaluate_predictions(
    examples,
    preds,
    no_relation: int,
    buckets: tuple[Bucket, ...] = DEFAULT_BUCKETS,
    distance_metric: str = "boundary",
) -> EvalReport:
    """Bucketed report straight from Example records and predicted label indices."""
    examples = list(examples)
    golds = [ex.relation.index for ex in examples]
    distances = [entity_distance(ex, distance_metric) for ex in examples]
    return bucket_report(golds, preds, distances, no_relation, buckets, distance_metric)


# ---------------------------------------------------------------------------
# report and prediction emission


def _score_dict(s: Score) -> dict:
    return {
        "precision": s.precision,
        "recall": s.recall,
        "f1": s.f1,
        "correct": s.correct,
        "predicted": s.predicted,
        "gold": s.gold,
        "n": s.n,
    }


def report_to_dict(report: EvalReport) -> dict:
    return {
        "overall": _score_dict(report.overall),
        "buckets": [
            {"range": row.label, "lo": row.lo, "hi": row.hi, **_score_dict(row.score)}
            for row in report.buckets
        ],
        "long_range_avg_f1": report.long_range_avg_f1,
        "long_range_pooled_f1": report.long_range_pooled_f1,
        "distance_metric": report.distance_metric,
    }


def save_report_json(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "count", "precision", "recall", "f1"])
        for row in report.buckets:
            s = row.score
            writer.writerow([row.label, s.n, f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}"])
        o = report.overall
        writer.writerow(["overall", o.n, f"{o.precision:.6f}", f"{o.recall:.6f}", f"{o.f1:.6f}"])
        long_n = sum(r.score.n for r in report.buckets if r.lo >= 11)
        writer.writerow(["long_range_avg", long_n, "", "", f"{report.long_range_avg_f1:.6f}"])
        writer.writerow(["long_range_pooled", long_n, "", "", f"{report.long_range_pooled_f1:.6f}"])


def save_predictions(path: str | Path, ids, labels, registry: Registry) -> None:
    """JSON array of {"id", "label"} with label names, aligned by position."""
    rows = [{"id": i, "label": registry.relations[p].name} for i, p in zip(ids, labels)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")
