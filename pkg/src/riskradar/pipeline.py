"""Stage orchestration: ingest -> extract -> graph -> news -> match.

Each stage persists its output before the next one starts, so a partial run
is inspectable and a crash leaves a marker naming the stage to redo. Given
unchanged inputs and config, reports and graph exports are byte-identical
across runs.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .config import PipelineConfig
from .embedding import EmbeddingProvider, HashingEncoder, RemoteEncoder
from .extraction import (
    Confidence,
    ExtractionError,
    ExtractionLexicon,
    LexiconExtractor,
    RiskDecomposition,
    load_risk_records,
)
from .hashing import fnv1a_64
from .matcher import MatchReport, match_all, render_jsonl, render_markdown, report_rows
from .newsfeed import ParseError, ingest_source
from .riskgraph import KnowledgeGraph, build_graph
from .store import RecordStore
from .stopwords import load_stopwords

logger = logging.getLogger(__name__)

GRAPH_JSON_ARTIFACT = "exports/graph.json"
GRAPH_DOT_ARTIFACT = "exports/graph.dot"
REPORT_JSONL_ARTIFACT = "reports/matches.jsonl"
REPORT_MD_ARTIFACT = "reports/matches.md"

STAGES = ("ingest", "extract", "graph", "news", "match")


class PipelineError(Exception):
    pass


@dataclass
class RunSummary:
    config_digest: str = ""
    risks_ingested: int = 0
    risks_duplicate: int = 0
    risks_total: int = 0
    decomposed_full: int = 0
    decomposed_partial: int = 0
    decomposed_trigger_only: int = 0
    extraction_failures: int = 0
    graph_nodes: int = 0
    graph_edges: int = 0
    graph_rejected: int = 0
    news_parsed: int = 0
    news_added: int = 0
    news_duplicate: int = 0
    parse_errors: int = 0
    candidates: int = 0
    matches_emitted: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"config_digest={self.config_digest}"]
        for name in (
            "risks_ingested", "risks_duplicate", "risks_total",
            "decomposed_full", "decomposed_partial", "decomposed_trigger_only",
            "extraction_failures", "graph_nodes", "graph_edges", "graph_rejected",
            "news_parsed", "news_added", "news_duplicate", "parse_errors",
            "candidates", "matches_emitted",
        ):
            out.append(f"{name}={getattr(self, name)}")
        for stage, secs in self.stage_seconds.items():
            out.append(f"stage_seconds.{stage}={secs:.3f}")
        return out


def make_provider(config: PipelineConfig) -> EmbeddingProvider:
    if config.provider_kind == "remote":
        return RemoteEncoder(
            endpoint=config.remote_endpoint,
            model=config.remote_model,
            dim=config.remote_dim,
            batch_size=config.remote_batch_size,
            bearer_token=config.remote_bearer_token or None,
        )
    return HashingEncoder(config.encoder)


def load_lexicon(config: PipelineConfig) -> ExtractionLexicon:
    if config.lexicon_path is not None:
        return ExtractionLexicon.from_file(config.lexicon_path)
    return ExtractionLexicon()


def ingest_risks(path, store: RecordStore) -> tuple[int, int]:
    """Persist risk records from a repository file; returns (added, dupes)."""
    records = load_risk_records(path)
    if not records:
        raise PipelineError(f"no valid risk records in {path}")
    return store.append_risks(records)


def extract_stage(
    store: RecordStore, lexicon: ExtractionLexicon, summary: RunSummary
) -> list[RiskDecomposition]:
    extractor = LexiconExtractor(lexicon)
    decompositions = []
    for record in store.read_risks():
        try:
            dec = extractor.decompose(record)
        except ExtractionError as exc:
            logger.warning("extraction failed: %s", exc)
            summary.extraction_failures += 1
            continue
        decompositions.append(dec)
        if dec.confidence is Confidence.FULL:
            summary.decomposed_full += 1
        elif dec.confidence is Confidence.PARTIAL:
            summary.decomposed_partial += 1
        else:
            summary.decomposed_trigger_only += 1
    store.write_decompositions(decompositions)
    return decompositions


def graph_stage(
    store: RecordStore, decompositions: list[RiskDecomposition], summary: RunSummary
) -> KnowledgeGraph:
    graph, rejected = build_graph(decompositions)
    summary.graph_nodes = len(graph.nodes)
    summary.graph_edges = len(graph.edges)
    summary.graph_rejected = len(rejected)
    store.write_artifact(GRAPH_JSON_ARTIFACT, graph.export("json"))
    store.write_artifact(GRAPH_DOT_ARTIFACT, graph.export("dot"))
    return graph


def news_stage(
    store: RecordStore, config: PipelineConfig, summary: RunSummary
) -> list[ParseError]:
    schema = config.gkg_schema()
    all_errors: list[ParseError] = []
    items_total = []
    for source in config.sources:
        items, errors = ingest_source(source, schema)
        logger.info(
            "source %s: %d items, %d errors", source.name, len(items), len(errors)
        )
        items_total.extend(items)
        all_errors.extend(errors)
    summary.news_parsed += len(items_total)
    summary.parse_errors += len(all_errors)
    added, dupes = store.append_news(items_total)
    summary.news_added += added
    summary.news_duplicate += dupes
    return all_errors


def match_stage(
    store: RecordStore, config: PipelineConfig, summary: RunSummary
) -> MatchReport:
    records = {r.id: r for r in store.read_risks()}
    decs = {d.risk_id: d for d in store.read_decompositions()}
    corpus = store.read_news()
    summary.candidates = len(corpus)
    provider = make_provider(config)

    pairs = [(record, decs.get(rid)) for rid, record in sorted(records.items())]
    cache_digest = config.digest or "default"
    _, cached = store.load_vectors(cache_digest)
    # cache file keys are id hashes; match_all wants id-keyed vectors, so the
    # on-disk cache only short-circuits embedding for ids present in the corpus
    id_keyed = {}
    for item in corpus:
        key = fnv1a_64(item.id.encode("utf-8"))
        if key in cached:
            id_keyed[item.id] = cached[key]

    report = match_all(
        pairs,
        corpus,
        provider,
        config.match,
        news_vectors=id_keyed,
        stopwords=load_stopwords(config.stopwords_path),
    )
    store.save_vectors(cache_digest, id_keyed, provider.dim)
    results = report.all_results()
    summary.matches_emitted = len(results)
    store.write_matches(results)

    news_by_id = {item.id: item for item in corpus}
    rows = report_rows(report, news_by_id)
    store.write_artifact(REPORT_JSONL_ARTIFACT, render_jsonl(rows))
    store.write_artifact(REPORT_MD_ARTIFACT, render_markdown(rows))
    return report


def run_pipeline(config: PipelineConfig, store: RecordStore) -> RunSummary:
    """Execute all stages under the store lock.

    A failing stage aborts the ones after it but keeps everything already
    persisted, leaving the partial-run marker naming the unfinished stage.
    """
    summary = RunSummary(config_digest=config.digest)
    pending = store.pending_stage()
    if pending:
        logger.warning("previous run left stage %r unfinished; redoing it", pending)
    store.acquire_lock()
    try:
        started = time.monotonic()
        store.set_stage_marker("ingest")
        if config.risks_path is not None:
            added, dupes = ingest_risks(config.risks_path, store)
            summary.risks_ingested, summary.risks_duplicate = added, dupes
        risks = store.read_risks()
        summary.risks_total = len(risks)
        if not risks:
            raise PipelineError("no risks in store; ingest first")
        summary.stage_seconds["ingest"] = time.monotonic() - started

        started = time.monotonic()
        store.set_stage_marker("extract")
        lexicon = load_lexicon(config)
        decompositions = extract_stage(store, lexicon, summary)
        summary.stage_seconds["extract"] = time.monotonic() - started

        started = time.monotonic()
        store.set_stage_marker("graph")
        graph_stage(store, decompositions, summary)
        summary.stage_seconds["graph"] = time.monotonic() - started

        started = time.monotonic()
        store.set_stage_marker("news")
        news_stage(store, config, summary)
        summary.stage_seconds["news"] = time.monotonic() - started

        started = time.monotonic()
        store.set_stage_marker("match")
        match_stage(store, config, summary)
        summary.stage_seconds["match"] = time.monotonic() - started

        store.clear_stage_marker()
        return summary
    finally:
        store.release_lock()
