"""Metrics: variable-token F1, RandIndex, session grouping, anomaly F1, prompt score, ratings."""

from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass, field
from math import comb

from .core import AnomalyVerdict, Label, LogTemplate, Session, Task


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float | None:
        denom = self.tp + self.fp
        return self.tp / denom if denom else None

    @property
    def recall(self) -> float | None:
        denom = self.tp + self.fn
        return self.tp / denom if denom else None

    @property
    def f1(self) -> float | None:
        p, r = self.precision, self.recall
        if p is None and r is None:
            return None
        # one side undefined means tp == 0, so the other side is 0 as well
        if not p or not r:
            return 0.0
        # harmonic mean of p and r, as one division so it is correctly rounded
        return 2 * self.tp / (2 * self.tp + self.fp + self.fn)

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class EvalReport:
    task: Task
    level: str  # "token" | "session" | "template"
    counts: ConfusionCounts
    n_items: int
    rand_index: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def precision(self) -> float | None:
        return self.counts.precision

    @property
    def recall(self) -> float | None:
        return self.counts.recall

    @property
    def f1(self) -> float | None:
        return self.counts.f1

    def to_dict(self) -> dict:
        d = {
            "task": self.task.value,
            "level": self.level,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "n_items": self.n_items,
            "counts": self.counts.to_dict(),
        }
        if self.rand_index is not None:
            d["rand_index"] = self.rand_index
        if self.extra:
            d.update(self.extra)
        return d


def _as_template(t: LogTemplate | str) -> LogTemplate:
    return t if isinstance(t, LogTemplate) else LogTemplate.from_text(t)


def parsing_token_confusion(pred: LogTemplate | str, gold: LogTemplate | str) -> ConfusionCounts:
    """Per-position confusion; the shorter token list is padded with static tokens."""
    p = [t.is_variable for t in _as_template(pred).tokens]
    g = [t.is_variable for t in _as_template(gold).tokens]
    width = max(len(p), len(g))
    p += [False] * (width - len(p))
    g += [False] * (width - len(g))
    tp = sum(a and b for a, b in zip(p, g))
    tn = sum(not a and not b for a, b in zip(p, g))
    fp = sum(a and not b for a, b in zip(p, g))
    fn = sum(not a and b for a, b in zip(p, g))
    return ConfusionCounts(tp, tn, fp, fn)


def parsing_f1(pairs: Sequence[tuple[LogTemplate | str, LogTemplate | str]]) -> EvalReport:
    """Micro-averaged variable-token F1 over (prediction, gold) template pairs."""
    if not pairs:
        raise ValueError("parsing_f1 needs at least one pair")
    total = ConfusionCounts()
    for pred, gold in pairs:
        total = total + parsing_token_confusion(pred, gold)
    return EvalReport(Task.PARSING, "token", total, len(pairs))


def parsing_report(pred_templates: Sequence[str], gold_templates: Sequence[str]) -> EvalReport:
    """Token F1 plus RandIndex, clustering logs by canonical template text."""
    report = parsing_f1(list(zip(pred_templates, gold_templates)))
    ri = rand_index(list(pred_templates), list(gold_templates)) if len(pred_templates) >= 2 else None
    return EvalReport(report.task, report.level, report.counts, report.n_items, rand_index=ri)


def _labels(assignment: Mapping[Hashable, Hashable] | Sequence[Hashable]) -> dict:
    if isinstance(assignment, Mapping):
        return dict(assignment)
    return dict(enumerate(assignment))


def rand_index(pred_assignment, gold_assignment) -> float:
    """Rand (1971) agreement between two clusterings of the same items.

    Either argument may be a mapping item -> cluster id or a sequence of ids.
    Counted via the contingency table rather than pair enumeration.
    """
    pred, gold = _labels(pred_assignment), _labels(gold_assignment)
    if pred.keys() != gold.keys():
        raise ValueError("both assignments must cover the same items")
    n = len(pred)
    if n < 2:
        raise ValueError("RandIndex needs at least two items")
    together_pred = sum(comb(c, 2) for c in Counter(pred.values()).values())
    together_gold = sum(comb(c, 2) for c in Counter(gold.values()).values())
    together_both = sum(comb(c, 2) for c in Counter((pred[k], gold[k]) for k in pred).values())
    total = comb(n, 2)
    disagreements = together_pred + together_gold - 2 * together_both
    return (total - disagreements) / total


def group_sessions(
    templates: Sequence[str],
    verdicts: Sequence[AnomalyVerdict | None],
    gold: Sequence[Label | None] | None = None,
    window: int = 100,
) -> list[Session]:
    """Cut the template stream into consecutive, non-overlapping windows."""
    if window < 1:
        raise ValueError("window must be at least 1")
    if not templates:
        raise ValueError("cannot group an empty template stream")
    if len(verdicts) != len(templates) or (gold is not None and len(gold) != len(templates)):
        raise ValueError("templates, verdicts and gold labels must have equal length")
    sessions = []
    for start in range(0, len(templates), window):
        stop = start + window
        sessions.append(
            Session(
                start=start,
                templates=tuple(templates[start:stop]),
                verdicts=tuple(verdicts[start:stop]),
                gold=tuple(gold[start:stop]) if gold is not None else (),
            )
        )
    return sessions


def anomaly_f1(pred_labels: Sequence[Label], gold_labels: Sequence[Label], level: str = "template") -> EvalReport:
    """Binary confusion with abnormal as the positive class."""
    if len(pred_labels) != len(gold_labels):
        raise ValueError(f"label lists differ in length: {len(pred_labels)} vs {len(gold_labels)}")
    if level not in ("session", "template"):
        raise ValueError(f"level must be 'session' or 'template', got {level!r}")
    tp = tn = fp = fn = 0
    for p, g in zip(pred_labels, gold_labels):
        pa, ga = Label(p) is Label.ABNORMAL, Label(g) is Label.ABNORMAL
        tp += pa and ga
        tn += not pa and not ga
        fp += pa and not ga
        fn += not pa and ga
    return EvalReport(Task.ANOMALY, level, ConfusionCounts(tp, tn, fp, fn), len(pred_labels))


def session_report(sessions: Sequence[Session]) -> EvalReport:
    gold = [s.gold_label for s in sessions]
    if any(g is None for g in gold):
        raise ValueError("every session needs gold labels for its members")
    return anomaly_f1([s.predicted for s in sessions], gold, level="session")


def prompt_score(report: EvalReport) -> float:
    """Average of RandIndex and F1."""
    if report.f1 is None or report.rand_index is None:
        raise ValueError("prompt score needs both F1 and RandIndex")
    return (report.rand_index + report.f1) / 2


def rating_summary(scores: Sequence[int], threshold: int = 4, mode: str = "at-least") -> tuple[float, float]:
    """Mean rating and the share of high ratings.

    ``mode="at-least"`` counts ratings >= threshold, ``"strict"`` counts > threshold.
    """
    if not scores:
        raise ValueError("no ratings given")
    bad = [s for s in scores if not (isinstance(s, int) and 1 <= s <= 5)]
    if bad:
        raise ValueError(f"ratings must be integers in 1..5, got {bad}")
    if mode == "at-least":
        high = sum(s >= threshold for s in scores)
    elif mode == "strict":
        high = sum(s > threshold for s in scores)
    else:
        raise ValueError(f"mode must be 'at-least' or 'strict', got {mode!r}")
    return sum(scores) / len(scores), high / len(scores)
