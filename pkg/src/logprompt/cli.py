"""Command-line entry point.

A ``--config`` file holds ``key = value`` lines named after the long flags
(``split-ratio = 0.1``); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import CorpusError
from .gateway import BackendConfig, GatewayError
from .pipeline import (
    EXIT_FATAL,
    EXIT_OK,
    PipelineError,
    RunConfig,
    cmd_detect,
    cmd_export_annotations,
    cmd_parse,
    cmd_score_annotations,
    cmd_select,
)
from .selection import SelectionError

RUN_COMMANDS = ("parse", "detect", "select")


def _add_run_flags(p: argparse.ArgumentParser, task: str) -> None:
    p.add_argument("--corpus", required=True, help="delimiter-separated log file")
    p.add_argument("--format", help="csv | tsv | <csv|tsv>:<role>,... for headerless files")
    split = p.add_mutually_exclusive_group()
    split.add_argument("--split-ratio", type=float, help="fraction of the corpus used as the training prefix")
    split.add_argument("--split-at", type=int, help="absolute size of the training prefix")
    default_strategy = {"parse": "self", "detect": "cot-explicit", "select": "self"}[task]
    p.add_argument(
        "--strategy",
        default=default_strategy,
        help="simple | self | cot-implicit | cot-explicit | cot | incontext; detect accepts a comma list",
    )
    p.add_argument("--m", type=int, default=20, help="in-context examples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cot-mode", choices=("implicit", "explicit"), default="explicit")
    p.add_argument("--prefix", help="prompt prefix text (self / simple strategies)")
    p.add_argument("--prefix-file")
    p.add_argument("--templates", help="index<TAB>template file from an external parser (detect)")
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--budget", type=int, default=3000, help="max characters per prompt")
    p.add_argument("--failure-budget", type=float, default=0.05, help="tolerated fraction of failed batches")
    p.add_argument("--out", default=f"runs/{task}")
    p.add_argument("--pool", help="candidate pool file, id<TAB>prefix per line (select)")
    p.add_argument("--elicit", type=int, help="ask the model for this many candidates instead of --pool (select)")
    p.add_argument("--calibration", type=int, default=100, help="calibration slice size (select)")

    b = p.add_argument_group("backend")
    b.add_argument("--backend", choices=("http_chat", "scripted"), default="http_chat")
    b.add_argument("--endpoint", default="https://api.openai.com/v1/chat/completions")
    b.add_argument("--model", default="gpt-3.5-turbo")
    b.add_argument("--auth-env", default="OPENAI_API_KEY", help="environment variable holding the API key")
    b.add_argument("--fixtures", help="JSON digest->response map for the scripted backend")
    b.add_argument("--timeout", type=float, default=60.0)
    b.add_argument("--temperature", type=float, default=0.5, help="initial sampling temperature")
    b.add_argument("--retry-step", type=float, default=0.4)
    b.add_argument("--retry-mode", choices=("add", "set"), default="add")
    b.add_argument("--temperature-cap", type=float, default=2.0)
    b.add_argument("--max-retries", type=int, default=5)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--min-interval", type=float, default=0.0, help="seconds between requests")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logprompt", description="Prompt-based log parsing and anomaly detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUN_COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file mirroring the flags")
        _add_run_flags(p, name)

    ex = sub.add_parser("export-annotations", help="sample a run into a rating sheet")
    ex.add_argument("--config")
    ex.add_argument("--run", required=True, help="run directory")
    ex.add_argument("--sample", type=int, default=200)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--out", help="sheet path (default: <run>/annotations.csv)")

    sc = sub.add_parser("score-annotations", help="Mean and HIP of a filled rating sheet")
    sc.add_argument("--config")
    sc.add_argument("--sheet", required=True)
    sc.add_argument("--threshold", type=int, default=4)
    sc.add_argument("--hip-mode", choices=("at-least", "strict"), default="at-least")
    return parser


def config_file_args(path: str) -> list[str]:
    args = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
        args += ["--" + key.strip().replace("_", "-"), value.strip()]
    return args


def expand_config(argv: list[str]) -> list[str]:
    """Splice config-file flags in right after the subcommand so explicit flags override them."""
    for i, arg in enumerate(argv):
        path = None
        if arg == "--config" and i + 1 < len(argv):
            path, rest = argv[i + 1], argv[:i] + argv[i + 2:]
        elif arg.startswith("--config="):
            path, rest = arg.split("=", 1)[1], argv[:i] + argv[i + 1:]
        if path:
            cmd_pos = next((j for j, a in enumerate(rest) if not a.startswith("-")), 0)
            return rest[: cmd_pos + 1] + config_file_args(path) + rest[cmd_pos + 1:]
    return argv


def run_config(args: argparse.Namespace) -> RunConfig:
    backend = BackendConfig(
        kind=args.backend,
        endpoint=args.endpoint,
        model_name=args.model,
        auth=args.auth_env,
        timeout=args.timeout,
        max_retries=args.max_retries,
        initial_temperature=args.temperature,
        temperature_step=args.retry_step,
        temperature_cap=args.temperature_cap,
        retry_mode=args.retry_mode,
        min_interval=args.min_interval,
        workers=args.workers,
        fixtures=args.fixtures,
    )
    return RunConfig(
        task="anomaly" if args.command == "detect" else "parsing",
        corpus=args.corpus,
        format=args.format,
        split_ratio=args.split_ratio,
        split_at=args.split_at,
        strategies=tuple(s.strip() for s in args.strategy.split(",") if s.strip()),
        m=args.m,
        seed=args.seed,
        cot_mode=args.cot_mode,
        prefix=args.prefix,
        prefix_file=args.prefix_file,
        templates=args.templates,
        window=args.window,
        budget=args.budget,
        failure_budget=args.failure_budget,
        out=args.out,
        backend=backend,
        pool=args.pool,
        elicit=args.elicit,
        calibration=args.calibration,
    )


def main(argv: list[str] | None = None) -> int:
    argv = expand_config(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "export-annotations":
            path = cmd_export_annotations(args.run, args.sample, args.seed, args.out)
            print(path)
            return EXIT_OK
        if args.command == "score-annotations":
            print(json.dumps(cmd_score_annotations(args.sheet, args.threshold, args.hip_mode), indent=2))
            return EXIT_OK

        config = run_config(args)
        if args.command == "parse":
            outcome = cmd_parse(config)
        elif args.command == "detect":
            outcome = cmd_detect(config)
        else:
            outcome, _ = cmd_select(config)
    except (PipelineError, CorpusError, SelectionError, GatewayError, FileNotFoundError, ValueError) as exc:
        print(f"logprompt: error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    summary = outcome.out / "summary.txt"
    if summary.exists():
        print(summary.read_text(encoding="utf-8"), end="")
    ablation = outcome.out / "ablation.md"
    if ablation.exists():
        print(ablation.read_text(encoding="utf-8"), end="")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
