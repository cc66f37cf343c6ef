"""Batch, query, parse and normalise a list of logs with one prompt strategy."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .core import Label, Task
from .gateway import Gateway, RunRecord
from .prompts import PromptSpec, batch_logs
from .responses import normalize_template, normalize_verdict, response_validator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prediction:
    position: int  # index into the input list
    log: str
    answer: str  # canonical template text, or a Label value
    reason: str
    batch: int


@dataclass
class TaskRun:
    predictions: list[Prediction | None]
    records: list[RunRecord]
    failed: list[int] = field(default_factory=list)  # input positions with no answer
    failed_batches: list[int] = field(default_factory=list)
    batch_of: list[int] = field(default_factory=list)  # batch number per input position

    @property
    def n_batches(self) -> int:
        return len(self.records)


def run_task(
    logs: Sequence[str],
    task: Task | str,
    builder: Callable[[Sequence[str]], PromptSpec],
    gateway: Gateway,
    budget: int,
) -> TaskRun:
    task = Task(task)
    batches = batch_logs(logs, budget, builder)
    prompts = [builder(b) for b in batches]
    validators = [response_validator(len(b), task) for b in batches]
    results = gateway.query_many(prompts, validators)

    run = TaskRun(predictions=[None] * len(logs), records=[])
    run.batch_of = [i for i, b in enumerate(batches) for _ in b]
    position = 0
    for batch_no, (batch, (answers, record)) in enumerate(zip(batches, results)):
        run.records.append(record)
        if not record.ok:
            logger.warning("batch %d failed: %s", batch_no, record.failure)
            run.failed_batches.append(batch_no)
            run.failed.extend(range(position, position + len(batch)))
            position += len(batch)
            continue
        for log, ans in zip(batch, answers):
            if task is Task.ANOMALY:
                answer = normalize_verdict(ans.answer).value
            else:
                try:
                    answer = normalize_template(ans.answer).text
                except ValueError:
                    # answer was only quotes; treat the log as variable-free
                    answer = normalize_template(log).text
            run.predictions[position] = Prediction(position, log, answer, ans.reason, batch_no)
            position += 1
    return run


def verdict_labels(run: TaskRun) -> list[Label | None]:
    return [None if p is None else Label(p.answer) for p in run.predictions]
