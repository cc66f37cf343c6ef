"""Test-side stand-ins for a language model and small corpus writers.

The responder reads the numbered logs back out of a prompt with its own
regex, so it does not depend on the prompt builders it is checking.
"""

from __future__ import annotations

import csv
import itertools
import re
from fractions import Fraction
from pathlib import Path

_BEGIN = "the logs begin: "
_END = " Organize your answer to be the following format:"
_MARKER = re.compile(r"(?:^|\n )\((\d+)\)")


def extract_inputs(prompt_text: str) -> list[str]:
    start = prompt_text.rindex(_BEGIN) + len(_BEGIN)
    end = prompt_text.rindex(_END)
    region = prompt_text[start:end]
    pieces = _MARKER.split(region)
    # split yields ["", "1", log1, "2", log2, ...]
    return [pieces[i + 1] for i in range(1, len(pieces), 2)]


def table_responder(table: dict[str, str], reason: str = "scripted reason", default: str | None = None):
    """Answer every input log from ``table`` in the ``(i) x - y`` format."""

    def respond(prompt_text: str) -> str:
        logs = extract_inputs(prompt_text)
        lines = []
        for i, log in enumerate(logs, 1):
            answer = table.get(log, default)
            if answer is None:
                answer = log
            lines.append(f"({i}) {answer} - {reason}")
        return "\n".join(lines)

    return respond


def write_corpus(path: Path, rows: list[dict], columns: list[str], delimiter: str = ",") -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])
    return path


def oracle_token_counts(pred: str, gold: str) -> tuple[int, int, int, int]:
    """(tp, tn, fp, fn) over whitespace tokens; any token holding <*> is a variable."""
    p, g = pred.split(), gold.split()
    tp = tn = fp = fn = 0
    for i in range(max(len(p), len(g))):
        pv = i < len(p) and "<*>" in p[i]
        gv = i < len(g) and "<*>" in g[i]
        if pv and gv:
            tp += 1
        elif gv:
            fn += 1
        elif pv:
            fp += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def oracle_f1(tp: int, fp: int, fn: int) -> Fraction | None:
    if tp == 0:
        return None if tp + fp == 0 and tp + fn == 0 else Fraction(0)
    return Fraction(2 * tp, 2 * tp + fp + fn)


def oracle_rand(pred, gold) -> Fraction:
    pairs = list(itertools.combinations(range(len(pred)), 2))
    agree = sum((pred[i] == pred[j]) == (gold[i] == gold[j]) for i, j in pairs)
    return Fraction(agree, len(pairs))


def oracle_prompt_score(preds: list[str], golds: list[str]) -> Fraction:
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        c = oracle_token_counts(p, g)
        tp, fp, fn = tp + c[0], fp + c[2], fn + c[3]
    return (oracle_rand(preds, golds) + oracle_f1(tp, fp, fn)) / 2


CALIBRATION_TEMPLATES = [
    ("session opened for user {}", "session opened for user <*>"),
    ("connection from {} port {}", "connection from <*> port <*>"),
    ("disk check finished", "disk check finished"),
    ("job {} took {} ms", "job <*> took <*> ms"),
]


def calibration_rows(n: int = 12) -> list[tuple[str, str]]:
    """(content, gold template) pairs cycling through four template families."""
    rows = []
    for i in range(n):
        fmt, template = CALIBRATION_TEMPLATES[i % len(CALIBRATION_TEMPLATES)]
        values = [f"n{100 + i}", str(7 * i + 3)][: fmt.count("{}")]
        rows.append((fmt.format(*values), template))
    return rows


def prefix_responder(qualities: dict[str, int], prefixes: dict[str, str], golds: list[str]):
    """Answer the gold template for the first ``q`` logs and the raw text after that.

    ``qualities`` maps candidate id to q; the candidate is recognised by its
    prefix at the start of the prompt. Assumes the whole slice is one batch.
    """

    def respond(prompt_text: str) -> str:
        cid = next(c for c, p in prefixes.items() if prompt_text.startswith(p + " "))
        q = qualities[cid]
        logs = extract_inputs(prompt_text)
        assert len(logs) == len(golds), "calibration slice was split across batches"
        lines = [f"({i}) {golds[i - 1] if i <= q else log} - scripted" for i, log in enumerate(logs, 1)]
        return "\n".join(lines)

    return respond


def anomaly_rows(n: int, n_normal: int, abnormal_at: dict[int, int]) -> list[dict]:
    """Synthetic labelled stream; position p carries abnormal template k when abnormal_at[p] == k."""
    rows = []
    for pos in range(n):
        if pos in abnormal_at:
            k = abnormal_at[pos]
            rows.append({"content": f"kernel fault {k} at 0x{pos:04x}", "template": f"kernel fault {k} at <*>", "anomaly": "1"})
        else:
            k = (pos * 7) % n_normal
            rows.append({"content": f"service {k} heartbeat {pos}", "template": f"service {k} heartbeat <*>", "anomaly": "0"})
    return rows


def verdict_responder(invert: bool = False, garbage_if: str | None = None):
    """Call a log abnormal iff it mentions a fault; optionally invert or refuse."""

    def respond(prompt_text: str) -> str:
        logs = extract_inputs(prompt_text)
        if garbage_if and any(garbage_if in log for log in logs):
            return "I am not able to classify these."
        lines = []
        for i, log in enumerate(logs, 1):
            abnormal = ("fault" in log) != invert
            lines.append(f"({i}) {'abnormal' if abnormal else 'normal'} - {'fault keyword' if abnormal else 'routine message'}")
        return "\n".join(lines)

    return respond
