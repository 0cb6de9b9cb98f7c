"""Score candidate news against risks and emit ranked, thresholded matches.

Ranking policy is fixed and explicit: score descending, then newest first,
then news id ascending. Everything downstream (reports, the HTTP API, the
evaluation harness) relies on that ordering being reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .embedding import EmbeddingProvider, EmbeddingVector, cosine
from .extraction import RiskDecomposition, RiskRecord
from .newsfeed import EmptyKeywordSet, NewsItem, build_keywords, keyword_filter
from .stopwords import STOPWORDS

logger = logging.getLogger(__name__)


class MatchError(ValueError):
    pass


class QueryMode(str, Enum):
    FULL_TEXT = "full_text"
    TRIGGER_ONLY = "trigger_only"
    TRIGGER_PLUS_OUTCOME = "trigger_plus_outcome"


@dataclass(frozen=True)
class MatchConfig:
    mode: QueryMode = QueryMode.FULL_TEXT
    threshold: float = 0.35
    top_k: int = 10
    keyword_prefilter: bool = True

    def __post_init__(self) -> None:
        # thresholds above 1 are legal no-op filters (they reject everything)
        if self.threshold < -1.0:
            raise MatchError(f"threshold {self.threshold} below -1")
        if self.top_k < 1:
            raise MatchError(f"top_k must be >= 1, got {self.top_k}")


@dataclass(frozen=True)
class MatchResult:
    risk_id: str
    news_id: str
    score: float
    rank: int


@dataclass
class MatchReport:
    """Per-risk ranked results plus any per-risk failures."""

    results: dict[str, list[MatchResult]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def all_results(self) -> list[MatchResult]:
        out: list[MatchResult] = []
        for risk_id in sorted(self.results):
            out.extend(self.results[risk_id])
        return out


def build_query(
    record: RiskRecord,
    decomposition: RiskDecomposition | None,
    mode: QueryMode,
) -> str:
    if mode is QueryMode.FULL_TEXT:
        return record.raw_text
    if decomposition is None:
        raise MatchError(
            f"mode {mode.value} requires a decomposition for risk {record.id!r}"
        )
    if mode is QueryMode.TRIGGER_ONLY:
        return decomposition.trigger
    return " ".join([decomposition.trigger, *decomposition.outcomes])


def _sort_key(item: NewsItem, score: float) -> tuple:
    ts = item.published_at.timestamp() if item.published_at else float("-inf")
    return (-score, -ts, item.id)


def rank_candidates(
    scored: list[tuple[NewsItem, float]], config: MatchConfig
) -> list[tuple[NewsItem, float]]:
    """Threshold, sort by the tie-break policy, truncate to top_k."""
    kept = [(item, score) for item, score in scored if score >= config.threshold]
    kept.sort(key=lambda pair: _sort_key(pair[0], pair[1]))
    return kept[: config.top_k]


def match_risk(
    record: RiskRecord,
    decomposition: RiskDecomposition | None,
    corpus: Sequence[NewsItem],
    provider: EmbeddingProvider,
    config: MatchConfig,
    news_vectors: dict[str, EmbeddingVector] | None = None,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[MatchResult]:
    """Rank one risk's candidate news.

    ``news_vectors`` is a shared write-once cache keyed by news id; items
    missing from it are embedded via the provider and added.
    """
    candidates = list(corpus)
    if config.keyword_prefilter and decomposition is not None:
        try:
            keys = build_keywords(decomposition, stopwords)
        except EmptyKeywordSet:
            logger.warning(
                "risk %s: empty keyword set, prefilter skipped", record.id
            )
        else:
            candidates = keyword_filter(candidates, keys)
    if not candidates:
        return []

    query_vec = provider.embed_batch([build_query(record, decomposition, config.mode)])[0]

    cache = news_vectors if news_vectors is not None else {}
    missing = [item for item in candidates if item.id not in cache]
    if missing:
        for item, vec in zip(missing, provider.embed_batch([i.headline for i in missing])):
            cache[item.id] = vec

    scored = [(item, cosine(query_vec, cache[item.id])) for item in candidates]
    ranked = rank_candidates(scored, config)
    return [
        MatchResult(risk_id=record.id, news_id=item.id, score=score, rank=rank)
        for rank, (item, score) in enumerate(ranked, start=1)
    ]


def match_all(
    risks: Sequence[tuple[RiskRecord, RiskDecomposition | None]],
    corpus: Sequence[NewsItem],
    provider: EmbeddingProvider,
    config: MatchConfig,
    news_vectors: dict[str, EmbeddingVector] | None = None,
    stopwords: frozenset[str] = STOPWORDS,
) -> MatchReport:
    """Match every risk against a shared corpus.

    News embeddings are computed once up front and reused across risks;
    per-risk failures are recorded in the report without stopping the run.
    """
    report = MatchReport()
    cache = news_vectors if news_vectors is not None else {}
    fresh = [item for item in corpus if item.id not in cache]
    if fresh:
        for item, vec in zip(fresh, provider.embed_batch([i.headline for i in fresh])):
            cache[item.id] = vec
    for record, decomposition in sorted(risks, key=lambda pair: pair[0].id):
        try:
            report.results[record.id] = match_risk(
                record,
                decomposition,
                corpus,
                provider,
                config,
                news_vectors=cache,
                stopwords=stopwords,
            )
        except MatchError as exc:
            logger.warning("risk %s: match failed: %s", record.id, exc)
            report.errors[record.id] = str(exc)
    return report


# --- report rendering --------------------------------------------------------

REPORT_FIELDS = ("risk_id", "rank", "score", "headline", "url", "source", "published_at")


def report_rows(
    report: MatchReport, news_by_id: dict[str, NewsItem]
) -> list[dict]:
    rows = []
    for result in report.all_results():
        item = news_by_id.get(result.news_id)
        rows.append(
            {
                "risk_id": result.risk_id,
                "rank": result.rank,
                "score": round(result.score, 4),
                "headline": item.headline if item else "",
                "url": item.url if item else "",
                "source": item.source if item else "",
                "published_at": (
                    item.published_at.strftime("%Y-%m-%dT%H:%M:%SZ")
                    if item and item.published_at
                    else ""
                ),
            }
        )
    return rows


def render_jsonl(rows: list[dict]) -> str:
    import json

    lines = [
        json.dumps({k: row[k] for k in REPORT_FIELDS}, ensure_ascii=False)
        for row in rows
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def render_markdown(rows: list[dict]) -> str:
    header = "| " + " | ".join(REPORT_FIELDS) + " |"
    rule = "|" + "|".join(" --- " for _ in REPORT_FIELDS) + "|"
    lines = [header, rule]
    for row in rows:
        cells = [
            str(row["risk_id"]),
            str(row["rank"]),
            f"{row['score']:.4f}",
            _md_escape(row["headline"]),
            _md_escape(row["url"]),
            _md_escape(row["source"]),
            row["published_at"],
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _md_escape(value: str) -> str:
    return value.replace("|", "\\|")
