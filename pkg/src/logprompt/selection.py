"""Self-prompt selection: score each candidate prefix on a calibration slice, keep the best."""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .core import LogTemplate, RawLog, Task
from .evaluation import EvalReport, parsing_report, prompt_score
from .gateway import Gateway
from .prompts import build_self_prompt
from .responses import normalize_template
from .runner import run_task

logger = logging.getLogger(__name__)

_LIST_ITEM = re.compile(r"^\s*(?:\((\d+)\)|(\d+)[.)]|prompt\s+(\d+)\s*:)\s*(.+?)\s*$", re.IGNORECASE)


class SelectionError(ValueError):
    pass


def _data(name: str) -> str:
    return resources.files("logprompt").joinpath("data", name).read_text(encoding="utf-8")


def _id_key(cid: str) -> tuple:
    return (0, int(cid), cid) if cid.isdigit() else (1, 0, cid)


@dataclass(frozen=True)
class CandidatePool:
    candidates: tuple[tuple[str, str], ...]
    source: str = "user_file"  # "user_file" | "model_generated"

    def __post_init__(self) -> None:
        ids = [cid for cid, _ in self.candidates]
        if len(set(ids)) != len(ids):
            raise SelectionError("candidate ids must be unique")
        if any(not text.strip() for _, text in self.candidates):
            raise SelectionError("candidate prefixes must be non-empty")

    def __len__(self) -> int:
        return len(self.candidates)

    def prefix(self, cid: str) -> str:
        return dict(self.candidates)[cid]

    def dumps(self) -> str:
        return "".join(f"{cid}\t{text}\n" for cid, text in self.candidates)


@dataclass
class SelectionResult:
    scores: dict[str, float]
    winner: str
    calibration_size: int
    reports: dict[str, dict] = field(default_factory=dict)
    flagged: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "winner": self.winner,
            "scores": self.scores,
            "calibration_size": self.calibration_size,
            "flagged": self.flagged,
            "reports": self.reports,
        }


def parse_pool(text: str, source: str = "user_file") -> CandidatePool:
    candidates = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cid, sep, prefix = line.partition("\t")
        if not sep or not cid.strip() or not prefix.strip():
            raise SelectionError(f"pool line {lineno}: expected 'id<TAB>prompt'")
        candidates.append((cid.strip(), prefix.strip()))
    if not candidates:
        raise SelectionError("candidate pool is empty")
    return CandidatePool(tuple(candidates), source)


def load_pool(path: str | Path | None = None) -> CandidatePool:
    """Read a pool file; without a path, the bundled five-candidate parsing pool."""
    if path is None:
        return parse_pool(_data("candidates.tsv"))
    return parse_pool(Path(path).read_text(encoding="utf-8"))


def default_self_prefix() -> str:
    return load_pool().prefix("2")


def meta_prompt(k: int, task_description: str | None = None, template: str | None = None) -> str:
    template = template or _data("meta_prompt.txt").strip()
    task_description = task_description or _data("parsing_task.txt").strip()
    return template.format(k=k, task=task_description)


def parse_candidate_list(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        m = _LIST_ITEM.match(line)
        if m:
            items.append(m.group(4).strip().strip("\"'"))
    return items


def elicit_candidates(
    gateway: Gateway, k: int, task_description: str | None = None, template: str | None = None
) -> CandidatePool:
    """Ask the model itself for ``k`` candidate prompts."""
    if k < 1:
        raise SelectionError("k must be at least 1")
    config = gateway.config
    prompt = meta_prompt(k, task_description, template)
    temperature = config.initial_temperature
    responses = []
    for n in range(config.max_retries + 1):
        if n:
            temperature = config.next_temperature(temperature)
        raw = gateway.complete(prompt, temperature)
        items = parse_candidate_list(raw)
        if len(items) >= k:
            return CandidatePool(tuple((str(i), t) for i, t in enumerate(items[:k], 1)), "model_generated")
        responses.append(f"attempt {n + 1}: {len(items)} items parsed from {raw[:120]!r}")
    raise SelectionError("could not parse a candidate list: " + "; ".join(responses))


def evaluate_candidate(
    prefix: str,
    calibration: Sequence[RawLog],
    gateway: Gateway,
    budget: int,
) -> tuple[EvalReport, bool]:
    """Parse the calibration logs with one prefix.

    Logs lost to failed batches are scored as if left unparsed (their raw
    text is the template). Returns the report and whether every batch failed.
    """
    contents = [log.content for log in calibration]
    temperature = gateway.config.initial_temperature
    run = run_task(
        contents,
        Task.PARSING,
        lambda batch: build_self_prompt(batch, prefix, temperature=temperature),
        gateway,
        budget,
    )
    preds = [
        p.answer if p is not None else normalize_template(log).text
        for p, log in zip(run.predictions, contents)
    ]
    golds = [normalize_template(log.gold_template).text for log in calibration]
    return parsing_report(preds, golds), len(run.failed_batches) == run.n_batches


def select_prompt(
    pool: CandidatePool,
    calibration: Sequence[RawLog],
    gateway: Gateway,
    budget: int = 3000,
) -> SelectionResult:
    if not len(pool):
        raise SelectionError("candidate pool is empty")
    if len(calibration) < 2:
        raise SelectionError("calibration slice needs at least two logs")
    if any(log.gold_template is None for log in calibration):
        raise SelectionError("calibration logs must carry gold templates")
    if not any(LogTemplate.from_text(log.gold_template).n_variables for log in calibration):
        raise SelectionError("calibration gold templates contain no variables; F1 would be undefined")

    scores: dict[str, float] = {}
    reports: dict[str, dict] = {}
    flagged: list[str] = []
    for cid, prefix in pool.candidates:
        report, wholly_failed = evaluate_candidate(prefix, calibration, gateway, budget)
        if wholly_failed:
            logger.warning("candidate %s: every batch failed; scored 0", cid)
            flagged.append(cid)
            scores[cid] = 0.0
        else:
            scores[cid] = prompt_score(report) if report.f1 is not None else 0.0
        reports[cid] = report.to_dict()
    return SelectionResult(scores, argmax(scores), len(calibration), reports, flagged)


def argmax(scores: dict[str, float]) -> str:
    """Highest score; ties go to the lowest id (numeric ids compare as numbers)."""
    if not scores:
        raise SelectionError("no scores to choose from")
    best = max(scores.values())
    return min((cid for cid, s in scores.items() if s == best), key=_id_key)
