"""Command-line pipeline driver: every stage is a subcommand.

Subcommands: prepare-data, build-instructions, analyze, features, var,
monitor. Exit codes partition error classes: 0 success, 2 usage, 3 config,
4 I/O or data format, 5 gateway.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path

from .analytics import (
    ReportStore,
    StoreError,
    aggregate_features,
    export_features_csv,
    var_quantile,
)
from .corpus import CorpusError, NewsArticle, SplitSpec, load_articles, split_dataset
from .gateway import (
    Gateway,
    GatewayError,
    GenerationParams,
    HttpCompletionBackend,
    MockBackend,
)
from .prompting import (
    DEFAULT_INSTRUCTION_TEXT,
    DEFAULT_SYSTEM_TEXT,
    PromptEnvelope,
    build_instruction_record,
    estimate_length_budget,
    export_training_file,
    render_prompt,
)
from .report_parser import AnalysisReport, parse_report, report_from_json
from .run_monitor import LossLogError, compare_runs, detect_overfit, parse_loss_log

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_GATEWAY = 5

ENV_PREFIX = "FINNEWS_"


class ConfigError(Exception):
    """Invalid or incomplete pipeline configuration."""


@dataclass
class PipelineConfig:
    """Single-file pipeline configuration; FINNEWS_* env vars override."""

    corpus_path: str = ""
    corpus_format: str = "csv"
    validation_fraction: float = 0.25
    split_seed: int = 0
    system_text: str = DEFAULT_SYSTEM_TEXT
    instruction_text: str = DEFAULT_INSTRUCTION_TEXT
    backend: str = "mock"
    llm_url: str = ""
    llm_key: str = ""
    fixtures_path: str = ""
    timeout: float = 120.0
    max_retries: int = 3
    backoff_base: float = 1.0
    parallelism: int = 1
    max_new_tokens: int = 1024
    temperature: float = 0.0
    store_path: str = "reports.jsonl"
    chars_per_token: float = 4.0
    token_budget: int = 2048
    var_alpha: float = 0.05
    bootstrap_draws: int = 1000
    bootstrap_seed: int = 0

    _ENV_KEYS = {
        "llm_url": "FINNEWS_LLM_URL",
        "llm_key": "FINNEWS_LLM_KEY",
        "backend": "FINNEWS_BACKEND",
        "fixtures_path": "FINNEWS_FIXTURES",
        "store_path": "FINNEWS_STORE_PATH",
    }

    def validate(self) -> None:
        if self.backend not in ("mock", "http"):
            raise ConfigError(f"backend must be 'mock' or 'http', got {self.backend!r}")
        if self.backend == "http" and not self.llm_url:
            raise ConfigError("http backend requires llm_url (or FINNEWS_LLM_URL)")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if not 0.0 < self.var_alpha < 1.0:
            raise ConfigError("var_alpha must be in (0, 1)")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


def load_pipeline_config(path: str | Path | None) -> PipelineConfig:
    """Load config from a JSON file (optional), then apply env overrides."""
    config = PipelineConfig()
    known = {f.name for f in fields(PipelineConfig) if not f.name.startswith("_")}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        for key, value in payload.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, value)
    for attr, env in PipelineConfig._ENV_KEYS.items():
        value = os.environ.get(env)
        if value:
            setattr(config, attr, value)
    config.validate()
    return config


def build_gateway(config: PipelineConfig) -> Gateway:
    if config.backend == "http":
        backend = HttpCompletionBackend(
            config.llm_url, api_key=config.llm_key or None, timeout=config.timeout
        )
    else:
        mock = MockBackend()
        if config.fixtures_path:
            mock.load_fixture_file(config.fixtures_path)
        backend = mock
    return Gateway(backend, max_retries=config.max_retries, backoff_base=config.backoff_base)


def analyze_article(
    article: NewsArticle,
    gateway: Gateway,
    store: ReportStore,
    config: PipelineConfig,
) -> tuple[AnalysisReport, int]:
    """Prompt, complete, parse, persist; returns the report and record id.

    Gateway errors propagate (the store stays unchanged); parse problems
    never fail — they surface as diagnostics on the stored report.
    """
    envelope = PromptEnvelope(
        input_text=article.body,
        system_text=config.system_text,
        instruction_text=config.instruction_text,
    )
    params = GenerationParams(
        max_new_tokens=config.max_new_tokens, temperature=config.temperature
    )
    completion = gateway.complete(render_prompt(envelope), params)
    report = parse_report(completion.text)
    for note in report.parse_diagnostics:
        print(f"{article.id}: {note}", file=sys.stderr)
    record_id = store.append_report(article.id, article.published_at, report)
    return report, record_id


def _article_to_row(article: NewsArticle) -> dict:
    return {
        "id": article.id,
        "publisher": article.publisher,
        "date": article.published_at.isoformat() if article.published_at else None,
        "title": article.title,
        "text": article.body,
    }


def _write_jsonl(rows: list[dict], path: Path) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _cmd_prepare_data(args: argparse.Namespace) -> int:
    result = load_articles(args.input, format=args.format, tolerant=not args.strict)
    spec = SplitSpec(validation_fraction=args.fraction, seed=args.seed)
    train, validation = split_dataset(result.articles, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl([_article_to_row(a) for a in train], out_dir / "train.jsonl")
    _write_jsonl([_article_to_row(a) for a in validation], out_dir / "validation.jsonl")
    manifest = {
        "loaded": result.loaded,
        "dropped_empty": result.dropped_empty,
        "skipped": result.skipped,
        "train": len(train),
        "validation": len(validation),
        "validation_fraction": spec.validation_fraction,
        "seed": spec.seed,
    }
    (out_dir / "split_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"loaded {result.loaded} articles ({result.dropped_empty} empty dropped, "
        f"{len(result.skipped)} skipped); split {len(train)}/{len(validation)} into {out_dir}"
    )
    return EXIT_OK


def _cmd_build_instructions(args: argparse.Namespace) -> int:
    result = load_articles(args.articles, format=args.format)
    by_id = {a.id: a for a in result.articles}
    records = []
    flagged = 0
    missing = 0
    with Path(args.targets).open("r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            article = by_id.get(obj["article_id"])
            if article is None:
                missing += 1
                continue
            record = build_instruction_record(article, report_from_json(obj["report"]))
            estimate = estimate_length_budget(
                record, chars_per_token=args.chars_per_token, budget=args.token_budget
            )
            if estimate.over_budget:
                flagged += 1
                if args.skip_over_budget:
                    continue
            records.append(record)
    count = export_training_file(records, args.out)
    print(
        f"wrote {count} records to {args.out} "
        f"({flagged} over token budget, {missing} targets without articles)"
    )
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = load_pipeline_config(args.config)
    if args.store:
        config.store_path = args.store
    gateway = build_gateway(config)
    store = ReportStore(config.store_path)
    result = load_articles(args.input, format=args.format)
    articles = result.articles
    if args.article_id:
        articles = [a for a in articles if a.id == args.article_id]
        if not articles:
            print(f"article id {args.article_id!r} not found", file=sys.stderr)
            return EXIT_IO
    analyzed = 0
    failed = 0
    for article in articles:
        try:
            report, record_id = analyze_article(article, gateway, store, config)
        except GatewayError as exc:
            failed += 1
            print(f"{article.id}: gateway error: {exc}", file=sys.stderr)
            if len(articles) == 1:
                return EXIT_GATEWAY
            continue
        analyzed += 1
        print(f"{article.id}: record {record_id}, {len(report.entities)} entities")
    print(f"analyzed {analyzed}, failed {failed}")
    return EXIT_OK if analyzed else EXIT_GATEWAY


def _parse_window(text: str) -> tuple[date, date]:
    try:
        start_s, _, end_s = text.partition(":")
        return (date.fromisoformat(start_s), date.fromisoformat(end_s))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"window must be YYYY-MM-DD:YYYY-MM-DD, got {text!r}"
        ) from exc


def _cmd_features(args: argparse.Namespace) -> int:
    store = ReportStore(args.store)
    windows = args.window if args.window else [None]
    features = aggregate_features(store, args.entity, windows)
    rows = export_features_csv(features, args.out)
    print(f"wrote {rows} feature rows for {args.entity!r} to {args.out}")
    return EXIT_OK


def _cmd_var(args: argparse.Namespace) -> int:
    samples = []
    with Path(args.samples).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                samples.append(float(line))
            except ValueError:
                print(f"{args.samples}:{line_no}: not a number", file=sys.stderr)
                return EXIT_IO
    if not samples:
        print(f"{args.samples}: no samples", file=sys.stderr)
        return EXIT_IO
    print(format(var_quantile(samples, alpha=args.alpha), "g"))
    return EXIT_OK


def _cmd_monitor(args: argparse.Namespace) -> int:
    run = parse_loss_log(args.log)
    print(f"run {run.run_id}: {len(run.points)} epochs")
    evaluated = [p for p in run.points if p.eval_loss is not None]
    if len(evaluated) >= args.patience + 1:
        epoch = detect_overfit(run.points, patience=args.patience)
        print(f"overfit epoch: {epoch if epoch is not None else 'none'}")
    else:
        print("overfit epoch: insufficient eval points")
    if args.compare:
        other = parse_loss_log(args.compare)
        div = compare_runs(run, other)
        eval_part = (
            f", eval max {div.max_eval:.6g} mean {div.mean_eval:.6g}"
            if div.max_eval is not None
            else ""
        )
        print(f"divergence: train max {div.max_train:.6g} mean {div.mean_train:.6g}{eval_part}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finnews", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="load, clean, and split a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--strict", action="store_true", help="malformed rows are fatal")
    p.set_defaults(func=_cmd_prepare_data)

    p = sub.add_parser("build-instructions", help="export a training JSONL")
    p.add_argument("--articles", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    p.add_argument("--targets", required=True, help="JSONL of {article_id, report}")
    p.add_argument("--out", required=True)
    p.add_argument("--chars-per-token", type=float, default=4.0)
    p.add_argument("--token-budget", type=int, default=2048)
    p.add_argument("--skip-over-budget", action="store_true")
    p.set_defaults(func=_cmd_build_instructions)

    p = sub.add_parser("analyze", help="prompt, complete, parse, and persist")
    p.add_argument("--config", default=None)
    p.add_argument("--input", required=True, help="article file (csv or jsonl)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    p.add_argument("--article-id", default=None, help="analyze a single article")
    p.add_argument("--store", default=None, help="override store path")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("features", help="aggregate entity sentiment features to CSV")
    p.add_argument("--store", required=True)
    p.add_argument("--entity", required=True)
    p.add_argument(
        "--window",
        action="append",
        type=_parse_window,
        help="YYYY-MM-DD:YYYY-MM-DD, repeatable; omit for an unwindowed aggregate",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("var", help="empirical quantile of a samples file")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("samples")
    p.set_defaults(func=_cmd_var)

    p = sub.add_parser("monitor", help="parse a loss log and report signals")
    p.add_argument("--log", required=True)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--compare", default=None, help="second loss log to diff against")
    p.set_defaults(func=_cmd_monitor)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GatewayError as exc:
        print(f"gateway error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY
    except (CorpusError, StoreError, LossLogError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
