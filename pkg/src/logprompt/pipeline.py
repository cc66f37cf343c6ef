"""End-to-end runs and their on-disk layout.

A run directory holds:

    config.json        snapshot of the RunConfig
    predictions.jsonl  one record per predicted log (or template occurrence)
    runs.jsonl         one RunRecord per queried batch
    failed.jsonl       inputs lost to failed batches
    report.json        metrics, when gold labels exist
    summary.txt        human-readable digest

Exit codes: 0 full success, 2 some batches failed within the failure
budget, 1 fatal (including an exceeded failure budget).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

from .core import AnomalyVerdict, Label, LogTemplate, RawLog, Task
from .corpus import (
    Corpus,
    CorpusFormat,
    Split,
    chronological_split,
    head_slice,
    load_corpus,
    load_template_assignments,
    sample_incontext_pairs,
    split_at,
)
from .evaluation import anomaly_f1, group_sessions, parsing_report, rating_summary, session_report
from .gateway import BackendConfig, Gateway, format_failure_rate
from .prompts import (
    ANSWER_RANGE_ANOMALY,
    Strategy,
    build_cot_prompt,
    build_incontext_prompt,
    build_self_prompt,
    build_simple_prompt,
)
from .responses import normalize_template
from .runner import TaskRun, run_task
from .selection import SelectionResult, default_self_prefix, elicit_candidates, load_pool, select_prompt

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
DEFAULT_STRATEGY = {Task.PARSING: "self", Task.ANOMALY: "cot-explicit"}
SHEET_COLUMNS = ("id", "index", "log", "prediction", "reason", "gold", "usefulness", "readability")


class PipelineError(RuntimeError):
    pass


@dataclass
class RunConfig:
    task: str = "parsing"
    corpus: str = ""
    format: str | None = None
    split_ratio: float | None = None
    split_at: int | None = None
    strategies: tuple[str, ...] = ()  # empty: the command default
    m: int = 20
    seed: int = 0
    cot_mode: str = "explicit"
    prefix: str | None = None
    prefix_file: str | None = None
    templates: str | None = None
    window: int = 100
    budget: int = 3000
    failure_budget: float = 0.05  # tolerated fraction of failed batches
    out: str = "runs/latest"
    backend: BackendConfig = field(default_factory=BackendConfig)
    # select
    pool: str | None = None
    elicit: int | None = None
    calibration: int = 100

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = list(self.strategies)
        return d


@dataclass
class RunOutcome:
    out: Path
    exit_code: int
    reports: dict = field(default_factory=dict)


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _dump_lines(path: Path, rows: Iterable[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_lines(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _load(config: RunConfig) -> Corpus:
    fmt = CorpusFormat.parse(config.format) if config.format else None
    return load_corpus(config.corpus, fmt)


def _split(config: RunConfig, corpus: Corpus, default_ratio: float) -> Split:
    if config.split_at is not None:
        return split_at(corpus, config.split_at)
    ratio = default_ratio if config.split_ratio is None else config.split_ratio
    return chronological_split(corpus, ratio)


def _self_prefix(config: RunConfig) -> str:
    if config.prefix:
        return config.prefix
    if config.prefix_file:
        return Path(config.prefix_file).read_text(encoding="utf-8").strip()
    return default_self_prefix()


def resolve_strategy(flag: str, cot_mode: str = "explicit") -> Strategy:
    if flag.strip().lower() == "cot":
        return Strategy.COT_EXPLICIT if cot_mode == "explicit" else Strategy.COT_IMPLICIT
    return Strategy.from_flag(flag)


def _exit_code(run: TaskRun, failure_budget: float) -> int:
    if not run.failed_batches:
        return EXIT_OK
    if len(run.failed_batches) / run.n_batches > failure_budget:
        return EXIT_FATAL
    return EXIT_PARTIAL


def _fmt(x: float | None) -> str:
    return "undefined" if x is None else f"{x:.4f}"


def _write_runs(out: Path, run: TaskRun) -> None:
    _dump_lines(out / "runs.jsonl", (r.to_dict() for r in run.records))


def parsing_builder(config: RunConfig, train: Sequence[RawLog], strategy: Strategy):
    temperature = config.backend.initial_temperature
    if strategy is Strategy.SIMPLE:
        return lambda b: build_simple_prompt(Task.PARSING, b, prefix=config.prefix, temperature=temperature)
    if strategy is Strategy.SELF:
        prefix = _self_prefix(config)
        return lambda b: build_self_prompt(b, prefix, temperature=temperature)
    if strategy is Strategy.IN_CONTEXT:
        pairs = sample_incontext_pairs(list(train), config.m, Task.PARSING, config.seed)
        return lambda b: build_incontext_prompt(b, pairs, Task.PARSING, temperature=temperature)
    raise PipelineError(f"strategy {strategy.flag!r} is not available for log parsing")


def cmd_parse(config: RunConfig, backend=None) -> RunOutcome:
    """``backend`` overrides the one described by ``config.backend`` (tests, recording)."""
    config = replace(config, task=Task.PARSING.value)
    corpus = _load(config)
    split = _split(config, corpus, 0.1)
    if not split.test:
        raise PipelineError("test split is empty")
    flags = config.strategies or (DEFAULT_STRATEGY[Task.PARSING],)
    if len(flags) != 1:
        raise PipelineError("parse takes exactly one strategy")
    strategy = resolve_strategy(flags[0], config.cot_mode)
    builder = parsing_builder(config, split.train, strategy)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", config.to_dict())

    logs = list(split.test)
    gateway = Gateway(config.backend, backend)
    run = run_task([log.content for log in logs], Task.PARSING, builder, gateway, config.budget)
    _write_runs(out, run)

    records = []
    for log, pred in zip(logs, run.predictions):
        if pred is None:
            continue
        row = {"index": log.index, "log": log.content, "template": pred.answer, "reason": pred.reason, "batch": pred.batch}
        if log.gold_template is not None:
            row["gold_template"] = log.gold_template
        records.append(row)
    _dump_lines(out / "predictions.jsonl", records)
    _dump_lines(out / "failed.jsonl", ({"index": logs[i].index, "batch": run.batch_of[i]} for i in run.failed))

    reports = {}
    if corpus.has_templates:
        preds = [p.answer if p else normalize_template(log.content).text for p, log in zip(run.predictions, logs)]
        golds = [normalize_template(log.gold_template).text for log in logs]
        report = parsing_report(preds, golds).to_dict()
        report["n_failed"] = len(run.failed)
        reports["parsing"] = report
        _dump(out / "report.json", reports)

    code = _exit_code(run, config.failure_budget)
    lines = [
        f"task: parsing   strategy: {strategy.flag}   corpus: {corpus.name}",
        f"train/test: {len(split.train)}/{len(split.test)}   batches: {run.n_batches}   failed batches: {len(run.failed_batches)}",
        f"first-attempt format failure rate: {format_failure_rate(run.records):.4f}" if run.records else "no queries",
    ]
    if reports:
        r = reports["parsing"]
        lines.append(f"F1 {_fmt(r['f1'])}   precision {_fmt(r['precision'])}   recall {_fmt(r['recall'])}   RandIndex {_fmt(r.get('rand_index'))}")
    lines.append(f"exit code: {code}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return RunOutcome(out, code, reports)


def template_stream(config: RunConfig, corpus: Corpus, logs: Sequence[RawLog]) -> list[str]:
    """Per-log template texts, from an assignment file or the corpus gold column."""
    if config.templates:
        assigned = load_template_assignments(config.templates)
        missing = [log.index for log in logs if log.index not in assigned]
        if missing:
            raise PipelineError(f"template assignment lacks {len(missing)} logs, first index {missing[0]}")
        return [normalize_template(assigned[log.index]).text for log in logs]
    if not corpus.has_templates:
        raise PipelineError("detect needs templates: use a corpus with a template column or --templates")
    return [normalize_template(log.gold_template).text for log in logs]


def anomaly_builder(config: RunConfig, train_examples: Sequence[RawLog], strategy: Strategy):
    temperature = config.backend.initial_temperature
    if strategy is Strategy.SIMPLE:
        return lambda b: build_simple_prompt(Task.ANOMALY, b, prefix=config.prefix, temperature=temperature)
    if strategy is Strategy.COT_IMPLICIT:
        return lambda b: build_cot_prompt(b, "implicit", temperature=temperature)
    if strategy is Strategy.COT_EXPLICIT:
        return lambda b: build_cot_prompt(b, "explicit", temperature=temperature)
    if strategy is Strategy.IN_CONTEXT:
        pairs = sample_incontext_pairs(list(train_examples), config.m, Task.ANOMALY, config.seed)
        return lambda b: build_incontext_prompt(b, pairs, Task.ANOMALY, temperature=temperature)
    if strategy is Strategy.SELF:
        if not (config.prefix or config.prefix_file):
            raise PipelineError("self strategy for detection needs --prefix or --prefix-file")
        prefix = _self_prefix(config)
        return lambda b: build_self_prompt(b, prefix, answer_range=ANSWER_RANGE_ANOMALY, temperature=temperature)
    raise PipelineError(f"unknown strategy {strategy!r}")


def _detect_one(
    config: RunConfig,
    strategy: Strategy,
    logs: Sequence[RawLog],
    stream: list[str],
    train_examples: Sequence[RawLog],
    out: Path,
    has_gold: bool,
    gateway: Gateway,
) -> tuple[int, dict]:
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", {**config.to_dict(), "strategies": [strategy.flag]})

    # each distinct template is queried once; verdicts propagate along the stream
    unique = list(dict.fromkeys(stream))
    builder = anomaly_builder(config, train_examples, strategy)
    run = run_task(unique, Task.ANOMALY, builder, gateway, config.budget)
    _write_runs(out, run)
    by_template = {t: p for t, p in zip(unique, run.predictions)}
    failed_templates = {unique[i] for i in run.failed}

    verdicts: list[AnomalyVerdict | None] = []
    records, failed = [], []
    for pos, (log, template) in enumerate(zip(logs, stream)):
        pred = by_template[template]
        if pred is None:
            verdicts.append(None)
            failed.append({"position": pos, "index": log.index, "template": template})
            continue
        verdict = AnomalyVerdict(Label(pred.answer), pred.reason)
        verdicts.append(verdict)
        row = {"position": pos, "index": log.index, "template": template, "verdict": verdict.label.value, "reason": verdict.reason}
        if log.gold_anomaly is not None:
            row["gold"] = log.gold_anomaly.value
        records.append(row)
    _dump_lines(out / "predictions.jsonl", records)
    _dump_lines(out / "failed.jsonl", failed)

    gold = [log.gold_anomaly for log in logs] if has_gold else None
    sessions = group_sessions(stream, verdicts, gold, config.window)
    _dump_lines(out / "sessions.jsonl", (
        {"start": s.start, "size": len(s), "predicted": s.predicted.value,
         "gold": None if s.gold_label is None else s.gold_label.value}
        for s in sessions
    ))

    reports = {}
    if has_gold:
        # a failed query leaves no abnormal tag, so it counts as normal
        pred_labels = [v.label if v else Label.NORMAL for v in verdicts]
        reports["session"] = session_report(sessions).to_dict()
        reports["template"] = anomaly_f1(pred_labels, gold, level="template").to_dict()
        for r in reports.values():
            r["n_failed"] = len(failed)
        _dump(out / "report.json", reports)

    code = _exit_code(run, config.failure_budget)
    lines = [
        f"task: anomaly   strategy: {strategy.flag}   window: {config.window}",
        f"stream: {len(stream)} templates ({len(unique)} distinct)   sessions: {len(sessions)}",
        f"batches: {run.n_batches}   failed batches: {len(run.failed_batches)}   failed templates: {len(failed_templates)}",
    ]
    for level, r in reports.items():
        lines.append(f"{level:8s} F1 {_fmt(r['f1'])}   precision {_fmt(r['precision'])}   recall {_fmt(r['recall'])}")
    lines.append(f"exit code: {code}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return code, reports


def cmd_detect(config: RunConfig, backend=None) -> RunOutcome:
    config = replace(config, task=Task.ANOMALY.value)
    corpus = _load(config)
    split = _split(config, corpus, 0.0)
    if not split.test:
        raise PipelineError("test split is empty")
    logs = list(split.test)
    stream = template_stream(config, corpus, logs)
    flags = config.strategies or (DEFAULT_STRATEGY[Task.ANOMALY],)
    strategies = [resolve_strategy(s, config.cot_mode) for s in flags]
    if len(set(strategies)) != len(strategies):
        raise PipelineError("duplicate strategies")

    train = list(split.train)
    if any(s is Strategy.IN_CONTEXT for s in strategies):
        # demonstrations are shown as templates, like the inputs
        train_stream = template_stream(config, corpus, train) if train else []
        train = [
            RawLog(log.index, text, log.timestamp, log.gold_template, log.gold_anomaly)
            for log, text in zip(train, train_stream)
        ]

    gateway = Gateway(config.backend, backend)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if len(strategies) == 1:
        code, reports = _detect_one(config, strategies[0], logs, stream, train, out, corpus.has_anomaly_labels, gateway)
        return RunOutcome(out, code, reports)

    _dump(out / "config.json", config.to_dict())
    all_reports, codes = {}, []
    for strategy in strategies:
        code, reports = _detect_one(
            config, strategy, logs, stream, train, out / strategy.flag, corpus.has_anomaly_labels, gateway
        )
        codes.append(code)
        all_reports[strategy.flag] = reports
    if corpus.has_anomaly_labels:
        _dump(out / "ablation.json", all_reports)
        (out / "ablation.md").write_text(ablation_table(all_reports), encoding="utf-8")
    code = EXIT_FATAL if EXIT_FATAL in codes else max(codes)
    return RunOutcome(out, code, all_reports)


def ablation_table(reports: dict[str, dict]) -> str:
    rows = [
        "| strategy | S-F1 | T-F1 | S-precision | S-recall | T-precision | T-recall |",
        "|---|---|---|---|---|---|---|",
    ]
    for name, r in reports.items():
        s, t = r["session"], r["template"]
        rows.append(
            f"| {name} | {_fmt(s['f1'])} | {_fmt(t['f1'])} | {_fmt(s['precision'])} | "
            f"{_fmt(s['recall'])} | {_fmt(t['precision'])} | {_fmt(t['recall'])} |"
        )
    return "\n".join(rows) + "\n"


def cmd_select(config: RunConfig, backend=None) -> tuple[RunOutcome, SelectionResult]:
    corpus = _load(config)
    if not corpus.has_templates:
        raise PipelineError("selection needs a corpus with gold templates")
    gateway = Gateway(config.backend, backend)
    if config.elicit:
        pool = elicit_candidates(gateway, config.elicit)
    else:
        pool = load_pool(config.pool)
    calibration = head_slice(corpus, config.calibration)
    result = select_prompt(pool, calibration, gateway, config.budget)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", config.to_dict())
    (out / "pool.tsv").write_text(pool.dumps(), encoding="utf-8")
    _dump(out / "selection.json", result.to_dict())
    lines = [f"calibration logs: {result.calibration_size}   candidates: {len(pool)}   source: {pool.source}"]
    lines += [f"  {cid:>4}  s(p) = {score:.4f}" + ("  (all batches failed)" if cid in result.flagged else "")
              for cid, score in result.scores.items()]
    lines.append(f"winner: {result.winner}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return RunOutcome(out, EXIT_OK, {"selection": result.to_dict()}), result


def load_criteria() -> dict:
    text = resources.files("logprompt").joinpath("data", "criteria.json").read_text(encoding="utf-8")
    return json.loads(text)


def _criteria_header(task: Task) -> list[str]:
    criteria = load_criteria()
    lines = ["# Human scoring criteria for interpretability (rate each row 1-5)."]
    scale = ", ".join(f"{k} - {v}" for k, v in criteria["scale"].items())
    lines.append(f"# Score ranking: {scale}.")
    lines.append("# Usefulness:")
    lines += [f"#   {k}: {v}" for k, v in criteria["usefulness"][task.value].items()]
    lines.append("# Readability:")
    lines += [f"#   {k}: {v}" for k, v in criteria["readability"].items()]
    return lines


def _run_task(run_dir: Path) -> Task:
    return Task(json.loads((run_dir / "config.json").read_text(encoding="utf-8"))["task"])


def cmd_export_annotations(run_dir: str | Path, sample: int, seed: int = 0, out: str | Path | None = None) -> Path:
    """Write a rating sheet for a random sample of a run's predictions.

    Wrong predictions are left out when gold labels exist. Anomaly samples
    are balanced between predicted-abnormal and predicted-normal rows; parsing
    rows must contain at least one variable.
    """
    run_dir = Path(run_dir)
    task = _run_task(run_dir)
    records = _read_lines(run_dir / "predictions.jsonl")
    if sample < 0:
        raise ValueError("sample size must be non-negative")
    rng = random.Random(seed)

    if task is Task.ANOMALY:
        seen, candidates = set(), []
        for r in records:
            if r["template"] in seen or ("gold" in r and r["gold"] != r["verdict"]):
                continue
            seen.add(r["template"])
            candidates.append(r)
        abnormal = [r for r in candidates if r["verdict"] == Label.ABNORMAL.value]
        normal = [r for r in candidates if r["verdict"] == Label.NORMAL.value]
        want_abnormal, want_normal = math.ceil(sample / 2), sample // 2
        if len(abnormal) < want_abnormal or len(normal) < want_normal:
            raise PipelineError(
                f"need {want_abnormal} abnormal and {want_normal} normal usable records, "
                f"have {len(abnormal)} and {len(normal)}"
            )
        chosen = rng.sample(abnormal, want_abnormal) + rng.sample(normal, want_normal)
        rows = [(r["index"], r["template"], r["verdict"], r["reason"], r.get("gold", "")) for r in chosen]
    else:
        candidates = []
        for r in records:
            if not LogTemplate.from_text(r["template"]).n_variables:
                continue
            gold = r.get("gold_template")
            if gold is not None and normalize_template(gold).text != r["template"]:
                continue
            candidates.append(r)
        if len(candidates) < sample:
            raise PipelineError(f"only {len(candidates)} usable records for a sample of {sample}")
        chosen = rng.sample(candidates, sample)
        rows = [(r["index"], r["log"], r["template"], r["reason"], r.get("gold_template", "")) for r in chosen]

    rows.sort(key=lambda row: row[0])
    buf = io.StringIO()
    buf.write("\n".join(_criteria_header(task)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SHEET_COLUMNS)
    for i, row in enumerate(rows, 1):
        writer.writerow((i, *row, "", ""))
    path = Path(out) if out else run_dir / "annotations.csv"
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_sheet(path: str | Path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def cmd_score_annotations(path: str | Path, threshold: int = 4, mode: str = "at-least") -> dict:
    rows = read_sheet(path)
    if not rows:
        raise PipelineError("annotation sheet has no rows")
    summary = {"threshold": threshold, "mode": mode, "n": len(rows)}
    for dim in ("usefulness", "readability"):
        cells = [r[dim].strip() for r in rows]
        blank = [r["id"] for r, c in zip(rows, cells) if not c]
        if blank:
            raise PipelineError(f"{dim} is unrated for rows {blank}")
        try:
            scores = [int(c) for c in cells]
        except ValueError as exc:
            raise PipelineError(f"non-integer {dim} rating: {exc}") from exc
        mean, hip = rating_summary(scores, threshold, mode)
        summary[dim] = {"mean": mean, "hip": hip}
    return summary
