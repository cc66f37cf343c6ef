"""Prompt assembly: format controls, the prompt strategies and length-budget batching.

Every prompt is ``prefix + " " + input_control(logs) + " " + answer_control(S)``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

from .core import Task


class Strategy(str, Enum):
    SIMPLE = "simple"
    SELF = "self"
    COT_IMPLICIT = "cot_implicit"
    COT_EXPLICIT = "cot_explicit"
    IN_CONTEXT = "in_context"

    @classmethod
    def from_flag(cls, flag: str) -> Strategy:
        """Accept CLI spellings such as ``cot-implicit`` and ``incontext``."""
        key = flag.strip().lower().replace("-", "_")
        if key == "incontext":
            key = "in_context"
        return cls(key)

    @property
    def flag(self) -> str:
        return "incontext" if self is Strategy.IN_CONTEXT else self.value.replace("_", "-")


ANSWER_RANGE_PARSING = "a parsed log template"
ANSWER_RANGE_ANOMALY = "a binary choice between abnormal and normal"
ANSWER_RANGE_BINARY = "a binary choice between 0 and 1"

SIMPLE_ANOMALY_PREFIX = "Classify the given log entries into normal and abnormal categories:"
SIMPLE_PARSING_PREFIX = "Parse the given log entries into log templates:"
REASON_REQUEST = "Concisely explain your reason for each log."
COT_EXPLICIT_PREFIX = (
    "Classify the given log entries into normal and abnormal categories. "
    "Do it with these steps: "
    "(a) Mark it normal when values (such as memory address, floating number and register value) "
    "in a log are invalid. "
    "(b) Mark it normal when lack of information. "
    "(c) Never consider 〈*〉 and missing values as abnormal patterns. "
    "(d) Mark it abnormal when and only when the alert is explicitly expressed in textual content "
    "(such as keywords like error or interrupt). "
    + REASON_REQUEST
)
INCONTEXT_ANOMALY_LEAD = (
    "Classify the given log entries into 0 and 1 categories based on semantic similarity "
    "to the following labelled example logs:"
)
INCONTEXT_PARSING_LEAD = (
    "Parse the given log entries into log templates based on semantic similarity "
    "to the following labelled example logs:"
)


@dataclass(frozen=True)
class PromptSpec:
    prefix: str
    inputs: tuple[str, ...]
    answer_directive: str
    strategy_tag: Strategy
    temperature: float = 0.5

    def __post_init__(self) -> None:
        if not self.inputs:
            raise ValueError("a prompt needs at least one input log")
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    @property
    def text(self) -> str:
        return " ".join((self.prefix, input_control(self.inputs), self.answer_directive))

    def __len__(self) -> int:
        return len(self.text)

    def to_dict(self) -> dict:
        return {
            "prefix": self.prefix,
            "inputs": list(self.inputs),
            "answer_directive": self.answer_directive,
            "strategy_tag": self.strategy_tag.value,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PromptSpec:
        return cls(
            prefix=d["prefix"],
            inputs=tuple(d["inputs"]),
            answer_directive=d["answer_directive"],
            strategy_tag=Strategy(d["strategy_tag"]),
            temperature=d.get("temperature", 0.5),
        )


def _flatten(log: str) -> str:
    return " ".join(log.splitlines())


def input_control(logs: Sequence[str]) -> str:
    if not logs:
        raise ValueError("input_control needs at least one log")
    body = "\n ".join(f"({i}){_flatten(log)}" for i, log in enumerate(logs, 1))
    return f"There are {len(logs)} logs, the logs begin: {body}"


def answer_control(answer_range: str) -> str:
    if not answer_range:
        raise ValueError("answer range text must be non-empty")
    return (
        "Organize your answer to be the following format: "
        "(1) x-y\n (2) x-y\n … \n (N) x-y, "
        f"where x is {answer_range} and y is the reason."
    )


def _spec(prefix: str, logs: Sequence[str], answer_range: str, tag: Strategy, temperature: float) -> PromptSpec:
    return PromptSpec(
        prefix=prefix,
        inputs=tuple(_flatten(log) for log in logs),
        answer_directive=answer_control(answer_range),
        strategy_tag=tag,
        temperature=temperature,
    )


def build_simple_prompt(
    task: Task | str,
    logs: Sequence[str],
    prefix: str | None = None,
    temperature: float = 0.5,
) -> PromptSpec:
    task = Task(task)
    if task is Task.ANOMALY:
        return _spec(prefix or SIMPLE_ANOMALY_PREFIX, logs, ANSWER_RANGE_ANOMALY, Strategy.SIMPLE, temperature)
    return _spec(prefix or SIMPLE_PARSING_PREFIX, logs, ANSWER_RANGE_PARSING, Strategy.SIMPLE, temperature)


def build_cot_prompt(logs: Sequence[str], cot_mode: str = "explicit", temperature: float = 0.5) -> PromptSpec:
    """Anomaly-detection CoT prompt.

    The implicit variant is the simple prompt plus a request for reasons; the
    explicit variant spells out the decision steps as well.
    """
    if cot_mode == "explicit":
        return _spec(COT_EXPLICIT_PREFIX, logs, ANSWER_RANGE_ANOMALY, Strategy.COT_EXPLICIT, temperature)
    if cot_mode == "implicit":
        prefix = f"{SIMPLE_ANOMALY_PREFIX} {REASON_REQUEST}"
        return _spec(prefix, logs, ANSWER_RANGE_ANOMALY, Strategy.COT_IMPLICIT, temperature)
    raise ValueError(f"cot_mode must be 'implicit' or 'explicit', got {cot_mode!r}")


def incontext_prefix(pairs: Sequence[tuple[str, str]], task: Task | str) -> str:
    task = Task(task)
    if not pairs:
        raise ValueError("in-context prompt needs at least one labelled example")
    label = "Category" if task is Task.ANOMALY else "Template"
    lead = INCONTEXT_ANOMALY_LEAD if task is Task.ANOMALY else INCONTEXT_PARSING_LEAD
    examples = " ".join(f"({i}) Log: {_flatten(log)} {label}: {value}" for i, (log, value) in enumerate(pairs, 1))
    return f"{lead} {examples}."


def build_incontext_prompt(
    logs: Sequence[str],
    pairs: Sequence[tuple[str, str]],
    task: Task | str,
    temperature: float = 0.5,
) -> PromptSpec:
    task = Task(task)
    answer_range = ANSWER_RANGE_BINARY if task is Task.ANOMALY else ANSWER_RANGE_PARSING
    return _spec(incontext_prefix(pairs, task), logs, answer_range, Strategy.IN_CONTEXT, temperature)


def build_self_prompt(
    logs: Sequence[str],
    selected_prefix: str,
    answer_range: str = ANSWER_RANGE_PARSING,
    temperature: float = 0.5,
) -> PromptSpec:
    if not selected_prefix.strip():
        raise ValueError("self-prompt prefix must be non-empty")
    return _spec(selected_prefix.strip(), logs, answer_range, Strategy.SELF, temperature)


Builder = Callable[[Sequence[str]], PromptSpec]


def batch_logs(logs: Sequence[str], budget: int, builder: Builder) -> list[list[str]]:
    """Greedily pack logs, in order, into prompts no longer than ``budget`` characters.

    ``builder`` turns a candidate batch into a PromptSpec so the exact
    scaffolding of the chosen strategy is measured.
    """
    batches: list[list[str]] = []
    current: list[str] = []
    for log in logs:
        if current and len(builder([*current, log]).text) <= budget:
            current.append(log)
            continue
        if current:
            batches.append(current)
        if len(builder([log]).text) > budget:
            raise ValueError(
                f"log of {len(log)} characters does not fit a {budget}-character prompt on its own"
            )
        current = [log]
    if current:
        batches.append(current)
    return batches
