"""Turn raw model text into numbered answers, canonical templates and verdicts."""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field

from .core import WILDCARD, Label, LogTemplate, ParsedAnswer, Task

_ORDINAL_LINE = re.compile(r"^\s*\((\d+)\)\s*(.*)$")
_VERDICT_KEYWORD = re.compile(r"\b(abnormal|anomalous|anomaly|normal|0|1)\b", re.IGNORECASE)
_HYPHEN = re.compile(r"\s*-\s*")

ABNORMAL_WORDS = frozenset({"abnormal", "anomalous", "anomaly", "1"})
NORMAL_WORDS = frozenset({"normal", "0"})

# substring rewrites, longest spellings first
WILDCARD_SPELLINGS = ("{{variable}}", "〈*〉", "⟨*⟩", "{*}", "[*]", "<VAR>")


class VerdictError(ValueError):
    pass


@dataclass
class ParseDiagnostics:
    missing_ordinals: list[int] = field(default_factory=list)
    extra_lines: list[str] = field(default_factory=list)
    duplicate_ordinals: list[int] = field(default_factory=list)
    normalization_notes: dict[int, list[str]] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return not self.missing_ordinals

    def to_dict(self) -> dict:
        return {
            "missing_ordinals": self.missing_ordinals,
            "extra_lines": self.extra_lines,
            "duplicate_ordinals": self.duplicate_ordinals,
            "normalization_notes": {str(k): v for k, v in self.normalization_notes.items()},
        }


def _split_answer(rest: str, task: Task) -> tuple[str, str]:
    if task is Task.ANOMALY:
        keyword = _VERDICT_KEYWORD.search(rest)
        start = keyword.end() if keyword else 0
        hyphen = _HYPHEN.search(rest, start)
        if hyphen:
            return rest[: hyphen.start()].strip(), rest[hyphen.end():].strip()
        return rest.strip(), ""
    x, sep, y = rest.partition(" - ")
    if sep:
        return x.strip(), y.strip()
    return rest.strip(), ""


def parse_numbered_answers(
    text: str, expected_n: int, task: Task | str = Task.PARSING
) -> tuple[list[ParsedAnswer], ParseDiagnostics]:
    """Scan ``(i) x - y`` lines.

    Never raises on odd input: preamble, out-of-range ordinals and repeats end
    up in the diagnostics. The first occurrence of an ordinal wins.
    """
    if expected_n < 1:
        raise ValueError("expected_n must be at least 1")
    task = Task(task)
    diag = ParseDiagnostics()
    found: dict[int, ParsedAnswer] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _ORDINAL_LINE.match(line)
        if not m or not 1 <= int(m.group(1)) <= expected_n:
            diag.extra_lines.append(line.strip())
            continue
        ordinal = int(m.group(1))
        if ordinal in found:
            diag.duplicate_ordinals.append(ordinal)
            continue
        answer, reason = _split_answer(m.group(2), task)
        found[ordinal] = ParsedAnswer(ordinal, answer, reason)
    diag.missing_ordinals = [i for i in range(1, expected_n + 1) if i not in found]
    return [found[k] for k in sorted(found)], diag


def normalize_template(answer_text: str, notes: list[str] | None = None) -> LogTemplate:
    text = answer_text.strip()
    while len(text) >= 2 and text[0] == text[-1] and text[0] in "`'\"":
        text = text[1:-1].strip()
        if notes is not None:
            notes.append("stripped enclosing quotes")
    for spelling in WILDCARD_SPELLINGS:
        if spelling in text:
            text = text.replace(spelling, WILDCARD)
            if notes is not None:
                notes.append(f"{spelling} -> {WILDCARD}")
    tokens = [WILDCARD if tok == "*" else tok for tok in text.split()]
    if not tokens:
        raise ValueError("template text is empty")
    if notes is not None and "*" in text.split():
        notes.append(f"* -> {WILDCARD}")
    return LogTemplate.from_text(" ".join(tokens))


def normalize_verdict(answer_text: str) -> Label:
    """Map the first recognised keyword in the answer to a label."""
    m = _VERDICT_KEYWORD.search(answer_text)
    if not m:
        raise VerdictError(f"unrecognised verdict {answer_text!r}")
    return Label.ABNORMAL if m.group(1).lower() in ABNORMAL_WORDS else Label.NORMAL


def validate_coverage(answers: Sequence[ParsedAnswer], expected_n: int, task: Task | str = Task.PARSING) -> bool:
    if [a.ordinal for a in answers] != list(range(1, expected_n + 1)):
        return False
    if Task(task) is Task.PARSING:
        return all(a.answer.strip() for a in answers)
    if Task(task) is Task.ANOMALY:
        try:
            for a in answers:
                normalize_verdict(a.answer)
        except VerdictError:
            return False
    return True


def response_validator(expected_n: int, task: Task | str):
    """Bind the coverage check for use by the gateway's retry loop.

    The returned callable maps raw text to ``(answers, diagnostics, ok)``.
    """
    task = Task(task)

    def check(text: str) -> tuple[list[ParsedAnswer], ParseDiagnostics, bool]:
        answers, diag = parse_numbered_answers(text, expected_n, task)
        return answers, diag, validate_coverage(answers, expected_n, task)

    return check
