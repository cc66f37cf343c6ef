"""Prompt-based, training-free log parsing and log anomaly detection with explanations."""

from .core import AnomalyVerdict, Label, LogTemplate, ParsedAnswer, RawLog, Session, Task, Token, TokenKind
from .corpus import Corpus, CorpusFormat, Split, chronological_split, head_slice, load_corpus, sample_incontext_pairs, split_at
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    anomaly_f1,
    group_sessions,
    parsing_f1,
    parsing_token_confusion,
    prompt_score,
    rand_index,
    rating_summary,
)
from .gateway import BackendConfig, Gateway, RunRecord, ScriptedBackend, format_failure_rate, query_with_retry
from .prompts import (
    PromptSpec,
    Strategy,
    answer_control,
    batch_logs,
    build_cot_prompt,
    build_incontext_prompt,
    build_self_prompt,
    build_simple_prompt,
    input_control,
)
from .responses import normalize_template, normalize_verdict, parse_numbered_answers, validate_coverage
from .selection import CandidatePool, SelectionResult, elicit_candidates, load_pool, select_prompt

__all__ = [
    "AnomalyVerdict",
    "Label",
    "LogTemplate",
    "ParsedAnswer",
    "RawLog",
    "Session",
    "Task",
    "Token",
    "TokenKind",
    "Corpus",
    "CorpusFormat",
    "Split",
    "chronological_split",
    "head_slice",
    "load_corpus",
    "sample_incontext_pairs",
    "split_at",
    "ConfusionCounts",
    "EvalReport",
    "anomaly_f1",
    "group_sessions",
    "parsing_f1",
    "parsing_token_confusion",
    "prompt_score",
    "rand_index",
    "rating_summary",
    "BackendConfig",
    "Gateway",
    "RunRecord",
    "ScriptedBackend",
    "format_failure_rate",
    "query_with_retry",
    "PromptSpec",
    "Strategy",
    "answer_control",
    "batch_logs",
    "build_cot_prompt",
    "build_incontext_prompt",
    "build_self_prompt",
    "build_simple_prompt",
    "input_control",
    "normalize_template",
    "normalize_verdict",
    "parse_numbered_answers",
    "validate_coverage",
    "CandidatePool",
    "SelectionResult",
    "elicit_candidates",
    "load_pool",
    "select_prompt",
]

__version__ = "0.1.0"
