"""Shared domain types: logs, templates, verdicts, sessions and parsed answers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

WILDCARD = "<*>"


class Task(str, Enum):
    PARSING = "parsing"
    ANOMALY = "anomaly"


class Label(str, Enum):
    ABNORMAL = "abnormal"
    NORMAL = "normal"

    @classmethod
    def from_flag(cls, value: int | bool) -> Label:
        return cls.ABNORMAL if value else cls.NORMAL

    @property
    def flag(self) -> int:
        return 1 if self is Label.ABNORMAL else 0


class TokenKind(str, Enum):
    STATIC = "static"
    VARIABLE = "variable"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind

    @classmethod
    def classify(cls, text: str) -> Token:
        # mixed tokens such as "id=<*>" count as variables
        kind = TokenKind.VARIABLE if WILDCARD in text else TokenKind.STATIC
        return cls(text, kind)

    @property
    def is_variable(self) -> bool:
        return self.kind is TokenKind.VARIABLE


@dataclass(frozen=True)
class LogTemplate:
    """A template in canonical form: whitespace-separated tokens, variables as ``<*>``."""

    tokens: tuple[Token, ...]

    @classmethod
    def from_text(cls, text: str) -> LogTemplate:
        return cls(tuple(Token.classify(t) for t in text.split()))

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    @property
    def n_variables(self) -> int:
        return sum(t.is_variable for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class RawLog:
    index: int
    content: str
    timestamp: str | None = None
    gold_template: str | None = None
    gold_anomaly: Label | None = None

    def __post_init__(self) -> None:
        if not self.content.strip():
            raise ValueError(f"log {self.index} has empty content")
        if self.index < 0:
            raise ValueError(f"negative log index {self.index}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "content": self.content,
            "timestamp": self.timestamp,
            "gold_template": self.gold_template,
            "gold_anomaly": None if self.gold_anomaly is None else self.gold_anomaly.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RawLog:
        anomaly = d.get("gold_anomaly")
        return cls(
            index=d["index"],
            content=d["content"],
            timestamp=d.get("timestamp"),
            gold_template=d.get("gold_template"),
            gold_anomaly=None if anomaly is None else Label(anomaly),
        )


@dataclass(frozen=True)
class AnomalyVerdict:
    label: Label
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label.value, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AnomalyVerdict:
        return cls(Label(d["label"]), d.get("reason", ""))


@dataclass(frozen=True)
class Session:
    """A fixed window over the template stream.

    ``verdicts`` may hold ``None`` for templates whose query failed; those
    members never make a session abnormal.
    """

    start: int
    templates: tuple[str, ...]
    verdicts: tuple[AnomalyVerdict | None, ...]
    gold: tuple[Label | None, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.verdicts) != len(self.templates):
            raise ValueError("one verdict slot per template is required")
        if self.gold and len(self.gold) != len(self.templates):
            raise ValueError("gold labels must cover every template")

    @property
    def predicted(self) -> Label:
        if any(v is not None and v.label is Label.ABNORMAL for v in self.verdicts):
            return Label.ABNORMAL
        return Label.NORMAL

    @property
    def gold_label(self) -> Label | None:
        if not self.gold or any(g is None for g in self.gold):
            return None
        return Label.ABNORMAL if Label.ABNORMAL in self.gold else Label.NORMAL

    def __len__(self) -> int:
        return len(self.templates)

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": self.start,
            "templates": list(self.templates),
            "verdicts": [None if v is None else v.to_dict() for v in self.verdicts],
            "gold": [None if g is None else g.value for g in self.gold],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Session:
        return cls(
            start=d["start"],
            templates=tuple(d["templates"]),
            verdicts=tuple(None if v is None else AnomalyVerdict.from_dict(v) for v in d["verdicts"]),
            gold=tuple(None if g is None else Label(g) for g in d.get("gold", [])),
        )


@dataclass(frozen=True)
class ParsedAnswer:
    ordinal: int
    answer: str
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"ordinal": self.ordinal, "answer": self.answer, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ParsedAnswer:
        return cls(d["ordinal"], d["answer"], d.get("reason", ""))
