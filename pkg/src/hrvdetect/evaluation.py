"""Confusion-matrix metrics (precision, recall, F1, F-beta), sentence-to-post
roll-up, and run report tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

SentenceKey = tuple[str, int, int]
PostKey = tuple[str, int]


class EvaluationError(Exception):
    pass


class AlignmentError(EvaluationError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise EvaluationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    level: str  # "sentence" | "post"
    precision: float
    recall: float
    f1: float
    f2: float
    counts: ConfusionCounts
    model_name: str = ""
    variant_id: str = ""
    flags: list[str] = field(default_factory=list)


def confusion(
    predictions: Mapping[SentenceKey, int] | Sequence[int],
    golds: Mapping[SentenceKey, int] | Sequence[int],
) -> ConfusionCounts:
    """Exact counts with the positive class = 1.

    Mapping inputs are aligned by key (mismatched key sets are an error);
    sequence inputs are aligned positionally.
    """
    if isinstance(predictions, Mapping) != isinstance(golds, Mapping):
        raise AlignmentError("predictions and golds must align the same way")
    if isinstance(predictions, Mapping):
        if set(predictions) != set(golds):
            raise AlignmentError("prediction and gold keys differ")
        pairs = [(predictions[k], golds[k]) for k in predictions]
    else:
        if len(predictions) != len(golds):
            raise AlignmentError("prediction and gold lengths differ")
        pairs = list(zip(predictions, golds))
    tp = sum(1 for p, g in pairs if p == 1 and g == 1)
    fp = sum(1 for p, g in pairs if p == 1 and g == 0)
    fn = sum(1 for p, g in pairs if p == 0 and g == 1)
    tn = sum(1 for p, g in pairs if p == 0 and g == 0)
    return ConfusionCounts(tp, fp, fn, tn)


def precision_recall(counts: ConfusionCounts) -> tuple[float, float, list[str]]:
    """P and R with degenerate denominators defined as 0 and flagged."""
    flags = []
    if counts.tp + counts.fp == 0:
        p, flag = 0.0, "precision-undefined"
        flags.append(flag)
    else:
        p = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        r = 0.0
        flags.append("recall-undefined")
    else:
        r = counts.tp / (counts.tp + counts.fn)
    return p, r, flags


def f_beta_from_pr(p: float, r: float, beta: float) -> float:
    if beta <= 0:
        raise EvaluationError("beta must be positive")
    if p == 0.0 and r == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def f_beta(counts: ConfusionCounts, beta: float) -> float:
    p, r, _ = precision_recall(counts)
    return f_beta_from_pr(p, r, beta)


def metrics_report(
    counts: ConfusionCounts,
    level: str = "sentence",
    model_name: str = "",
    variant_id: str = "",
) -> MetricsReport:
    p, r, flags = precision_recall(counts)
    return MetricsReport(
        level=level,
        precision=p,
        recall=r,
        f1=f_beta_from_pr(p, r, 1.0),
        f2=f_beta_from_pr(p, r, 2.0),
        counts=counts,
        model_name=model_name,
        variant_id=variant_id,
        flags=flags,
    )


def rollup_posts(
    sentence_predictions: Mapping[SentenceKey, int],
    sentence_golds: Mapping[SentenceKey, int],
) -> tuple[dict[PostKey, int], dict[PostKey, int]]:
    """Post label = 1 iff any of the post's sentences is labeled 1, applied
    independently to predictions and golds.  Gold post labels are always
    recomputed from gold sentence labels, never stored separately."""
    if set(sentence_predictions) != set(sentence_golds):
        raise AlignmentError("prediction and gold sentence keys differ")
    post_preds: dict[PostKey, int] = {}
    post_golds: dict[PostKey, int] = {}
    for (channel_id, post_id, _), pred in sentence_predictions.items():
        pk = (channel_id, post_id)
        post_preds[pk] = max(post_preds.get(pk, 0), pred)
    for (channel_id, post_id, _), gold in sentence_golds.items():
        pk = (channel_id, post_id)
        post_golds[pk] = max(post_golds.get(pk, 0), gold)
    return post_preds, post_golds


def performance_report(
    runs: Sequence[tuple[str, str, MetricsReport]],
    footnotes: Sequence[str] = (),
) -> tuple[str, str]:
    """Render runs grouped by variant then model.

    Returns (csv_text, aligned_table_text); the best F2 row is marked in the
    aligned table.
    """
    if not runs:
        raise EvaluationError("no runs to report")
    seen = set()
    for model_name, variant_id, _ in runs:
        if (model_name, variant_id) in seen:
            raise EvaluationError(f"duplicate run ({model_name}, {variant_id})")
        seen.add((model_name, variant_id))

    ordered = sorted(runs, key=lambda r: (r[1], r[0]))
    best_f2 = max(rep.f2 for _, _, rep in ordered)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["model", "variant", "level", "P", "R", "F1", "F2"])
    for model_name, variant_id, rep in ordered:
        writer.writerow(
            [
                model_name,
                variant_id,
                rep.level,
                f"{rep.precision:.2f}",
                f"{rep.recall:.2f}",
                f"{rep.f1:.2f}",
                f"{rep.f2:.2f}",
            ]
        )
    csv_text = buf.getvalue()

    lines = []
    header = f"{'Model':<24} {'Variant':<8} {'Level':<9} {'P':>5} {'R':>5} {'F1':>5} {'F2':>5}"
    lines.append(header)
    lines.append("-" * len(header))
    current_variant = None
    for model_name, variant_id, rep in ordered:
        if variant_id != current_variant:
            if current_variant is not None:
                lines.append("")
            current_variant = variant_id
        mark = " *" if abs(rep.f2 - best_f2) < 1e-12 else ""
        lines.append(
            f"{model_name:<24} {variant_id:<8} {rep.level:<9} "
            f"{rep.precision:>5.2f} {rep.recall:>5.2f} {rep.f1:>5.2f} "
            f"{rep.f2:>5.2f}{mark}"
        )
    lines.append("")
    lines.append("* best F2")
    for note in footnotes:
        lines.append(f"note: {note}")
    return csv_text, "\n".join(lines) + "\n"


def flagged_posts(
    sentence_predictions: Mapping[SentenceKey, int],
    texts: Mapping[SentenceKey, str] | None = None,
) -> list[dict]:
    """Posts containing predicted-positive sentences, with the positive
    sentence indices marked, for analyst review."""
    by_post: dict[PostKey, list[int]] = {}
    for (channel_id, post_id, idx), pred in sentence_predictions.items():
        if pred == 1:
            by_post.setdefault((channel_id, post_id), []).append(idx)
    out = []
    for (channel_id, post_id), indices in sorted(by_post.items()):
        rec = {
            "channel_id": channel_id,
            "post_id": post_id,
            "hrv_sentence_indices": sorted(indices),
        }
        if texts is not None:
            rec["hrv_sentences"] = [
                texts.get((channel_id, post_id, i), "") for i in sorted(indices)
            ]
        out.append(rec)
    return out
