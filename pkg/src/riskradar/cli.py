"""riskradar command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 network error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ENV_VAR, ConfigError, PipelineConfig, load_config, resolve_config_path
from .embedding import RemoteProviderError
from .extraction import ExtractionError
from .matcher import MatchError, QueryMode, render_jsonl, render_markdown
from .newsfeed import FetchError, GkgSchema, PayloadError, SourceDescriptor, ingest_source
from .pipeline import (
    REPORT_JSONL_ARTIFACT,
    REPORT_MD_ARTIFACT,
    PipelineError,
    RunSummary,
    extract_stage,
    graph_stage,
    ingest_risks,
    load_lexicon,
    match_stage,
    run_pipeline,
)
from .store import RecordStore, StoreError, StoreLocked

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NETWORK = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="riskradar", description=__doc__)
    parser.add_argument("--config", help="config file path (env RISKRADAR_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-risks", help="load a risk repository file")
    p.add_argument("--file", required=True)

    sub.add_parser("extract", help="decompose stored risks")

    graph = sub.add_parser("graph", help="knowledge graph commands")
    graph_sub = graph.add_subparsers(dest="graph_command", required=True)
    p = graph_sub.add_parser("export", help="export the graph")
    p.add_argument("--format", choices=("dot", "json"), required=True)
    p.add_argument("--out", help="output path (default: stdout)")

    news = sub.add_parser("news", help="news ingestion commands")
    news_sub = news.add_subparsers(dest="news_command", required=True)
    p = news_sub.add_parser("fetch", help="fetch and parse one source")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--source", help="source name from the config file")
    group.add_argument("--fixture", help="local fixture path")
    p.add_argument("--schema", help="GKG schema JSON path")
    p.add_argument("--max-bytes", type=int, default=16 * 1024 * 1024)
    p.add_argument("--timeout-secs", type=float, default=10.0)

    p = sub.add_parser("match", help="rank news per risk")
    p.add_argument("--mode", choices=[m.value for m in QueryMode])
    p.add_argument("--threshold", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--no-prefilter", action="store_true")

    sub.add_parser("run", help="run the full pipeline")

    p = sub.add_parser("report", help="render the match report")
    p.add_argument("--format", choices=("jsonl", "md"), required=True)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--figures-dir", help="directory for rendered figures")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("serve", help="read-only HTTP API over a completed run")
    p.add_argument("--addr", help="HOST:PORT (default from config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load(args.config)
        return _dispatch(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FetchError, RemoteProviderError) as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (
        ConfigError,
        StoreError,
        StoreLocked,
        PipelineError,
        ExtractionError,
        MatchError,
        PayloadError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _load(cli_config: str | None) -> PipelineConfig:
    path = resolve_config_path(cli_config)
    explicit = cli_config is not None or os.environ.get(ENV_VAR) is not None
    if not explicit and not path.exists():
        return load_config(None)
    return load_config(path)


def _store(config: PipelineConfig) -> RecordStore:
    return RecordStore.open(config.store_root)


def _dispatch(args, config: PipelineConfig) -> int:
    command = args.command
    if command == "ingest-risks":
        added, dupes = ingest_risks(args.file, _store(config))
        print(f"ingested={added} duplicates={dupes}")
        return EXIT_OK

    if command == "extract":
        store = _store(config)
        summary = RunSummary(config_digest=config.digest)
        decs = extract_stage(store, load_lexicon(config), summary)
        print(
            f"decomposed={len(decs)} full={summary.decomposed_full} "
            f"partial={summary.decomposed_partial} "
            f"trigger_only={summary.decomposed_trigger_only} "
            f"failures={summary.extraction_failures}"
        )
        return EXIT_OK

    if command == "graph":
        store = _store(config)
        summary = RunSummary(config_digest=config.digest)
        graph = graph_stage(store, store.read_decompositions(), summary)
        text = graph.export(args.format)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    if command == "news":
        return _news_fetch(args, config)

    if command == "match":
        store = _store(config)
        overrides = {}
        if args.mode:
            overrides["mode"] = QueryMode(args.mode)
        if args.threshold is not None:
            overrides["threshold"] = args.threshold
        if args.top_k is not None:
            overrides["top_k"] = args.top_k
        if args.no_prefilter:
            overrides["keyword_prefilter"] = False
        match_config = replace(config.match, **overrides) if overrides else config.match
        run_config = replace(config, match=match_config)
        summary = RunSummary(config_digest=config.digest)
        report = match_stage(store, run_config, summary)
        print(
            f"risks={len(report.results)} matches={summary.matches_emitted} "
            f"errors={len(report.errors)}"
        )
        return EXIT_OK

    if command == "run":
        store = _store(config)
        summary = run_pipeline(config, store)
        for line in summary.lines():
            print(line)
        return EXIT_OK

    if command == "report":
        return _report(args, config)

    if command == "serve":
        from .server import parse_addr, serve

        if args.addr:
            try:
                parse_addr(args.addr)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
        store = RecordStore.open(config.store_root, create=False)
        if store.pending_stage():
            raise StoreError(
                f"store has unfinished stage {store.pending_stage()!r}; rerun first"
            )
        serve(config, store, addr=args.addr)
        return EXIT_OK

    raise UsageError(f"unknown command {command!r}")


def _news_fetch(args, config: PipelineConfig) -> int:
    store = _store(config)
    if args.fixture:
        fmt = "rss" if Path(args.fixture).suffix.lower() in (".xml", ".rss", ".atom") else "gkg"
        descriptor = SourceDescriptor(
            name="fixture",
            kind="local_fixture",
            locator=args.fixture,
            format=fmt,
            timeout_secs=args.timeout_secs,
            max_bytes=args.max_bytes,
        )
    else:
        matching = [s for s in config.sources if s.name == args.source]
        if not matching:
            raise UsageError(f"source {args.source!r} not in config")
        descriptor = replace(
            matching[0], timeout_secs=args.timeout_secs, max_bytes=args.max_bytes
        )
    schema = GkgSchema.from_file(args.schema) if args.schema else config.gkg_schema()
    items, errors = ingest_source(descriptor, schema)
    added, dupes = store.append_news(items)
    print(
        f"parsed={len(items)} errors={len(errors)} added={added} duplicates={dupes}"
    )
    return EXIT_OK


def _stored_report_rows(store: RecordStore) -> list[dict]:
    from .matcher import MatchReport, report_rows

    report = MatchReport()
    for result in store.read_matches():
        report.results.setdefault(result.risk_id, []).append(result)
    for results in report.results.values():
        results.sort(key=lambda r: r.rank)
    news_by_id = {item.id: item for item in store.read_news()}
    return report_rows(report, news_by_id)


def _report(args, config: PipelineConfig) -> int:
    store = _store(config)
    rows = _stored_report_rows(store)
    artifact = REPORT_JSONL_ARTIFACT if args.format == "jsonl" else REPORT_MD_ARTIFACT
    try:
        text = store.read_artifact(artifact)
    except StoreError:
        text = render_jsonl(rows) if args.format == "jsonl" else render_markdown(rows)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)

    if not args.no_figures and (args.figures_dir or args.out):
        from .figures import render_report_figures

        figures_dir = (
            Path(args.figures_dir)
            if args.figures_dir
            else Path(args.out).parent / "figures"
        )
        for path in render_report_figures(rows, figures_dir):
            print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
