"""Annotation workflow: agreement scoring, double-annotation pool selection,
adjudication, and interchange with annotation-tool export files."""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

HRV_CATEGORIES = (
    "killing_civilians",
    "civil_object_destruction",
    "rape_torture_execution",
    "prisoner_mistreatment",
)

SentenceKey = tuple[str, int, int]
PostKey = tuple[str, int]


class AnnotationError(Exception):
    pass


class UnresolvedConflictError(AnnotationError):
    def __init__(self, keys: list[SentenceKey]):
        self.keys = keys
        super().__init__(f"{len(keys)} records disagree without an adjudicator label")


@dataclass
class AnnotationRecord:
    channel_id: str
    post_id: int
    sent_index: int
    labels: dict[str, int] = field(default_factory=dict)
    gold: int | None = None
    hrv_category: str | None = None
    text: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for annotator, label in self.labels.items():
            if label not in (0, 1):
                raise AnnotationError(
                    f"non-binary label {label!r} from annotator {annotator!r}"
                )
        if self.hrv_category is not None and self.hrv_category not in HRV_CATEGORIES:
            raise AnnotationError(f"unknown hrv_category {self.hrv_category!r}")

    @property
    def key(self) -> SentenceKey:
        return (self.channel_id, self.post_id, self.sent_index)

    @property
    def post_key(self) -> PostKey:
        return (self.channel_id, self.post_id)


@dataclass
class AgreementReport:
    n_items: int
    observed_agreement: float
    chance_agreement: float
    kappa: float
    degenerate: bool = False


def cohens_kappa(labels_a: Sequence[int], labels_b: Sequence[int]) -> AgreementReport:
    """Chance-corrected agreement between two binary label vectors.

    Binary labels make weighted and unweighted kappa coincide, so this is the
    plain unweighted form.  pe == 1 cannot be chance-corrected; the report is
    flagged degenerate with kappa 1 on perfect agreement, else 0.
    """
    if len(labels_a) != len(labels_b):
        raise AnnotationError("label vectors must have equal length")
    n = len(labels_a)
    if n == 0:
        raise AnnotationError("empty label vectors")
    for v in (*labels_a, *labels_b):
        if v not in (0, 1):
            raise AnnotationError(f"non-binary label {v!r}")
    po = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    pe = 0.0
    for c in (0, 1):
        pa = sum(1 for a in labels_a if a == c) / n
        pb = sum(1 for b in labels_b if b == c) / n
        pe += pa * pb
    if pe >= 1.0 - 1e-15:
        return AgreementReport(n, po, pe, 1.0 if po == 1.0 else 0.0, degenerate=True)
    return AgreementReport(n, po, pe, (po - pe) / (1 - pe))


def select_double_annotation_pool(
    prelabels: Iterable[AnnotationRecord],
    classifier_flags: set[PostKey],
    seed: int,
) -> list[PostKey]:
    """Posts to route through double annotation.

    Pool = posts with any positive pre-label, plus an equal-sized uniform
    random sample of all-negative posts, plus classifier-flagged posts.
    Returned in a seed-randomized presentation order.
    """
    by_post: dict[PostKey, list[int]] = {}
    for rec in prelabels:
        label = rec.gold if rec.gold is not None else next(iter(rec.labels.values()), 0)
        by_post.setdefault(rec.post_key, []).append(label)
    positive = {k for k, labels in by_post.items() if any(labels)}
    negative = sorted(k for k in by_post if k not in positive)
    rng = random.Random(seed)
    if len(negative) < len(positive):
        warnings.warn(
            f"only {len(negative)} all-negative posts available for a "
            f"sample of {len(positive)}; taking all"
        )
    n_sample = min(len(positive), len(negative))
    sampled = set(rng.sample(negative, n_sample)) if n_sample else set()
    pool = list(positive | sampled | classifier_flags)
    rng.shuffle(pool)
    return pool


def adjudicate(
    records: Iterable[AnnotationRecord], adjudicator_id: str
) -> list[AnnotationRecord]:
    """Fill in gold labels: annotator consensus, else the adjudicator's label.

    Single-annotator (pre-labeled) records keep their pre-label as gold.
    Disagreements without an adjudicator label raise, listing the keys.
    """
    out: list[AnnotationRecord] = []
    unresolved: list[SentenceKey] = []
    for rec in records:
        votes = {a: l for a, l in rec.labels.items() if a != adjudicator_id}
        if not votes:
            raise AnnotationError(f"record {rec.key} has no annotator labels")
        distinct = set(votes.values())
        if len(distinct) == 1:
            gold = distinct.pop()
        elif adjudicator_id in rec.labels:
            gold = rec.labels[adjudicator_id]
        else:
            unresolved.append(rec.key)
            continue
        out.append(
            AnnotationRecord(
                channel_id=rec.channel_id,
                post_id=rec.post_id,
                sent_index=rec.sent_index,
                labels=dict(rec.labels),
                gold=gold,
                hrv_category=rec.hrv_category,
                text=rec.text,
                extra=dict(rec.extra),
            )
        )
    if unresolved:
        raise UnresolvedConflictError(sorted(unresolved))
    return out


# ---------------------------------------------------------------------------
# Annotation-tool interchange (task list with per-annotator choice results)

_CHOICE_TO_LABEL = {"HRV": 1, "non-HRV": 0}
_LABEL_TO_CHOICE = {1: "HRV", 0: "non-HRV"}


def import_annotations(stream: IO[str]) -> list[AnnotationRecord]:
    try:
        tasks = json.load(stream)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"malformed annotation file: {exc}") from exc
    if not isinstance(tasks, list):
        raise AnnotationError("annotation file must contain a task list")
    records: list[AnnotationRecord] = []
    for i, task in enumerate(tasks):
        try:
            data = task["data"]
            rec = AnnotationRecord(
                channel_id=str(data["channel_id"]),
                post_id=int(data["post_id"]),
                sent_index=int(data["sent_index"]),
                text=str(data.get("text", "")),
                extra={
                    k: v
                    for k, v in task.items()
                    if k not in ("data", "annotations")
                },
            )
            for ann in task.get("annotations", []):
                choice = ann["result"][0]["value"]["choices"][0]
                if choice not in _CHOICE_TO_LABEL:
                    raise AnnotationError(
                        f"task {i}: unknown choice {choice!r}"
                    )
                rec.labels[str(ann["completed_by"])] = _CHOICE_TO_LABEL[choice]
            if "gold" in data and data["gold"] is not None:
                rec.gold = int(data["gold"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise AnnotationError(f"task {i}: schema violation ({exc})") from exc
        records.append(rec)
    return records


def export_annotations(records: Iterable[AnnotationRecord], stream: IO[str]) -> None:
    tasks = []
    for rec in records:
        data = {
            "text": rec.text,
            "post_id": rec.post_id,
            "channel_id": rec.channel_id,
            "sent_index": rec.sent_index,
        }
        if rec.gold is not None:
            data["gold"] = rec.gold
        task = {
            "data": data,
            "annotations": [
                {
                    "completed_by": annotator,
                    "result": [
                        {"value": {"choices": [_LABEL_TO_CHOICE[label]]}}
                    ],
                }
                for annotator, label in sorted(rec.labels.items())
            ],
        }
        task.update(rec.extra)
        tasks.append(task)
    json.dump(tasks, stream, ensure_ascii=False, indent=2)
