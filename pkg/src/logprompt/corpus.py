"""Corpus loading, chronological splits and in-context example sampling.

Corpora are delimiter-separated text files, one log per line. With a header
line, columns are located by name (case-insensitive, Loghub-style aliases
accepted). Without one, the column layout is declared explicitly, e.g.
``tsv:content,template,anomaly``.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .core import Label, RawLog, Task

COLUMN_ALIASES = {
    "content": ("content", "message", "log"),
    "template": ("gold_template", "template", "eventtemplate"),
    "anomaly": ("gold_anomaly", "anomaly", "label", "is_anomaly"),
    "timestamp": ("timestamp", "time", "date"),
}
DELIMITERS = {"csv": ",", "tsv": "\t"}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusFormat:
    delimiter: str = ","
    header: bool = True
    layout: tuple[str, ...] = ()  # headerless column roles, in file order

    @classmethod
    def parse(cls, spec: str) -> CorpusFormat:
        """Parse ``csv``, ``tsv`` or ``<csv|tsv>:<role>,<role>,...`` (headerless)."""
        kind, _, cols = spec.partition(":")
        if kind not in DELIMITERS:
            raise CorpusError(f"unknown corpus format {spec!r}; expected csv or tsv")
        if not cols:
            return cls(DELIMITERS[kind])
        layout = tuple(c.strip() for c in cols.split(","))
        unknown = set(layout) - set(COLUMN_ALIASES) - {"skip"}
        if unknown or "content" not in layout:
            raise CorpusError(f"bad column layout {cols!r}")
        return cls(DELIMITERS[kind], header=False, layout=layout)

    @classmethod
    def for_path(cls, path: str | Path) -> CorpusFormat:
        return cls("\t" if str(path).endswith((".tsv", ".tab")) else ",")


@dataclass(frozen=True)
class Corpus:
    name: str
    logs: tuple[RawLog, ...]
    has_templates: bool = False
    has_anomaly_labels: bool = False

    def __len__(self) -> int:
        return len(self.logs)

    def __iter__(self):
        return iter(self.logs)


@dataclass(frozen=True)
class Split:
    train: tuple[RawLog, ...]
    test: tuple[RawLog, ...]
    ratio: float


def _locate_columns(header: list[str]) -> dict[str, int]:
    lowered = [h.strip().lower() for h in header]
    found = {}
    for role, aliases in COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in lowered:
                found[role] = lowered.index(alias)
                break
    if "content" not in found:
        raise CorpusError(f"no content column in header {header!r}")
    return found


def _parse_anomaly(cell: str, lineno: int, loghub: bool = False) -> Label:
    cell = cell.strip()
    if loghub and cell not in ("0", "1"):
        # Loghub "Label" column: "-" for normal, an alert category otherwise
        return Label.NORMAL if cell == "-" else Label.ABNORMAL
    if cell not in ("0", "1"):
        raise CorpusError(f"line {lineno}: anomaly label must be 0 or 1, got {cell!r}")
    return Label.from_flag(cell == "1")


def load_corpus(path: str | Path, fmt: CorpusFormat | None = None, name: str | None = None) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    fmt = fmt or CorpusFormat.for_path(path)

    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=fmt.delimiter))

    first_lineno = 1
    if fmt.header:
        if not rows:
            raise CorpusError(f"{path}: missing header line")
        columns = _locate_columns(rows[0])
        loghub_labels = "anomaly" in columns and rows[0][columns["anomaly"]].strip().lower() == "label"
        rows = rows[1:]
        first_lineno = 2
    else:
        columns = {role: i for i, role in enumerate(fmt.layout) if role != "skip"}
        loghub_labels = False

    width = max(columns.values()) + 1
    cells: dict[str, list[str | None]] = {role: [] for role in columns}
    for offset, row in enumerate(rows):
        lineno = first_lineno + offset
        if not row:
            continue
        if len(row) < width:
            raise CorpusError(f"line {lineno}: expected at least {width} columns, got {len(row)}")
        if not row[columns["content"]].strip():
            raise CorpusError(f"line {lineno}: empty log content")
        for role, col in columns.items():
            value = row[col].strip()
            cells[role].append(value or None)

    def labelled(role: str) -> bool:
        values = cells.get(role)
        if not values:
            return False
        present = [v is not None for v in values]
        if any(present) and not all(present):
            missing = present.index(False) + first_lineno
            raise CorpusError(f"inconsistent {role} labels: line {missing} is unlabelled")
        return all(present)

    has_templates = labelled("template")
    has_anomaly = labelled("anomaly")
    logs = []
    for i, content in enumerate(cells["content"]):
        anomaly = None
        if has_anomaly:
            anomaly = _parse_anomaly(cells["anomaly"][i], first_lineno + i, loghub_labels)
        logs.append(
            RawLog(
                index=i,
                content=" ".join(content.splitlines()),
                timestamp=cells["timestamp"][i] if "timestamp" in cells else None,
                gold_template=cells["template"][i] if has_templates else None,
                gold_anomaly=anomaly,
            )
        )
    return Corpus(name or path.stem, tuple(logs), has_templates, has_anomaly)


def load_template_assignments(path: str | Path) -> dict[int, str]:
    """Read ``index<TAB>template`` lines produced by an external parser."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"template assignment file not found: {path}")
    assignments: dict[int, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            index, sep, template = line.partition("\t")
            if not sep or not index.strip().isdigit() or not template.strip():
                raise CorpusError(f"{path}:{lineno}: expected 'index<TAB>template'")
            idx = int(index)
            if idx in assignments:
                raise CorpusError(f"{path}:{lineno}: duplicate index {idx}")
            assignments[idx] = template.strip()
    return assignments


def chronological_split(corpus: Corpus, ratio: float) -> Split:
    if not 0 <= ratio <= 1:
        raise ValueError(f"split ratio must lie in [0, 1], got {ratio}")
    # the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    k = min(math.floor(ratio * len(corpus) + 1e-9), len(corpus))
    return Split(corpus.logs[:k], corpus.logs[k:], ratio)


def split_at(corpus: Corpus, k: int) -> Split:
    """Chronological split with an absolute training size (clamped to the corpus)."""
    if k < 0:
        raise ValueError(f"split point must be non-negative, got {k}")
    k = min(k, len(corpus))
    return Split(corpus.logs[:k], corpus.logs[k:], k / len(corpus) if len(corpus) else 0.0)


def head_slice(corpus: Corpus, n: int) -> list[RawLog]:
    if n < 0:
        raise ValueError(f"slice size must be non-negative, got {n}")
    return list(corpus.logs[:n])


def sample_incontext_pairs(
    logs: Corpus | list[RawLog] | tuple[RawLog, ...], m: int, task: Task | str, seed: int
) -> list[tuple[str, str]]:
    """Draw ``m`` labelled demonstrations.

    Anomaly samples are class-balanced (ceil(m/2) abnormal, floor(m/2)
    normal), drawn without replacement within each class and interleaved
    abnormal-first. Labels render as ``"1"``/``"0"``.
    """
    task = Task(task)
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")
    pool = list(logs.logs if isinstance(logs, Corpus) else logs)
    if m == 0:
        return []
    rng = random.Random(seed)

    if task is Task.PARSING:
        templated = [log for log in pool if log.gold_template is not None]
        if len(templated) < m:
            raise CorpusError(f"need {m} logs with gold templates, found {len(templated)}")
        return [(log.content, log.gold_template) for log in rng.sample(templated, m)]

    abnormal = [log for log in pool if log.gold_anomaly is Label.ABNORMAL]
    normal = [log for log in pool if log.gold_anomaly is Label.NORMAL]
    n_abnormal, n_normal = math.ceil(m / 2), m // 2
    if len(abnormal) < n_abnormal or len(normal) < n_normal:
        raise CorpusError(
            f"need {n_abnormal} abnormal and {n_normal} normal labelled logs, "
            f"found {len(abnormal)} and {len(normal)}"
        )
    picked_abnormal = rng.sample(abnormal, n_abnormal)
    picked_normal = rng.sample(normal, n_normal)
    pairs = []
    for i in range(n_abnormal):
        pairs.append((picked_abnormal[i].content, "1"))
        if i < n_normal:
            pairs.append((picked_normal[i].content, "0"))
    return pairs
