"""Matching-quality harness over a constructed labeled corpus.

Real relevance data for this problem is proprietary, so quality checks run
against synthetic headlines with known labels: per risk, relevant headlines
share at least two trigger content tokens with the risk and distractors
share none. Reported precision@k and accuracy-at-threshold are NOT
comparable to any externally published figure; they only exercise the
ranking machinery.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ._text import word_tokens
from .extraction import RiskDecomposition
from .matcher import MatchResult
from .newsfeed import MIN_KEYWORD_LEN, NewsItem, make_news_item
from .stopwords import STOPWORDS

# Vocabulary pools for synthetic headlines. Chosen to be disjoint from every
# Table-style trigger token so "shares zero trigger tokens" is true by
# construction for distractors.
FILLER_WORDS = (
    "report", "update", "analysts", "officials", "statement", "latest",
    "coverage", "sources", "briefing", "overview", "summary", "morning",
    "evening", "weekly", "regional", "global",
)
DISTRACTOR_WORDS = (
    "celebrity", "wedding", "photos", "recipe", "garden", "festival",
    "movie", "premiere", "playoffs", "championship", "concert", "tour",
    "fashion", "runway", "travel", "island", "museum", "exhibit",
    "puzzle", "weather", "sunny", "forecast", "bakery", "marathon",
)


def trigger_content_tokens(decomposition: RiskDecomposition) -> list[str]:
    """Hyphen-split content tokens of the trigger, stopwords and short
    tokens removed; the vocabulary relevant headlines are built from."""
    tokens: list[str] = []
    for tok in word_tokens(decomposition.trigger):
        tokens.extend(tok.split("-") if "-" in tok else [tok])
    seen: list[str] = []
    for tok in tokens:
        if len(tok) >= MIN_KEYWORD_LEN and tok not in STOPWORDS and tok not in seen:
            seen.append(tok)
    return seen


@dataclass
class LabeledCorpus:
    items: list[NewsItem]
    # (risk_id, news_id) pairs labeled relevant
    relevant: set[tuple[str, str]] = field(default_factory=set)

    def labels_for(self, risk_id: str) -> set[str]:
        return {news_id for rid, news_id in self.relevant if rid == risk_id}


def generate_labeled_corpus(
    decompositions: list[RiskDecomposition],
    relevant_per_risk: int = 50,
    distractors_per_risk: int = 150,
    seed: int = 7,
    pad_to: int = 0,
) -> LabeledCorpus:
    """Deterministic synthetic corpus with per-risk relevance labels.

    Raises if a risk's trigger yields fewer than two content tokens, since
    the relevance construction needs at least two to share.
    """
    rng = random.Random(seed)
    corpus = LabeledCorpus(items=[])
    for dec in decompositions:
        tokens = trigger_content_tokens(dec)
        if len(tokens) < 2:
            raise ValueError(
                f"risk {dec.risk_id!r}: need >=2 trigger content tokens, "
                f"got {tokens}"
            )
        for n in range(relevant_per_risk):
            share = rng.randint(2, len(tokens))
            words = rng.sample(tokens, share) + rng.sample(
                FILLER_WORDS, rng.randint(2, 4)
            )
            rng.shuffle(words)
            item = _headline_item(words, dec.risk_id, "relevant", n)
            corpus.items.append(item)
            corpus.relevant.add((dec.risk_id, item.id))
        for n in range(distractors_per_risk):
            words = rng.sample(DISTRACTOR_WORDS, rng.randint(5, 8))
            corpus.items.append(
                _headline_item(words, dec.risk_id, "distractor", n)
            )
    for n in range(max(0, pad_to - len(corpus.items))):
        words = rng.sample(DISTRACTOR_WORDS, rng.randint(5, 8))
        corpus.items.append(_headline_item(words, "pad", "pad", n))
    return corpus


def _headline_item(words: list[str], risk_id: str, tag: str, n: int) -> NewsItem:
    headline = " ".join(words)
    url = f"https://synthetic.example/{risk_id}/{tag}/{n}/{'-'.join(words)}"
    return make_news_item(url=url, headline=headline, source="synthetic")


def precision_at_k(
    results: list[MatchResult], relevant_ids: set[str], k: int
) -> float:
    top = [r for r in results if r.rank <= k]
    if not top:
        return 0.0
    hits = sum(1 for r in top if r.news_id in relevant_ids)
    return hits / len(top)


def accuracy_at_threshold(
    scored: list[tuple[str, float]], relevant_ids: set[str], threshold: float
) -> float:
    """Binary relevance accuracy: predict relevant iff score >= threshold."""
    if not scored:
        return 0.0
    correct = sum(
        1
        for news_id, score in scored
        if (score >= threshold) == (news_id in relevant_ids)
    )
    return correct / len(scored)


def sweep_thresholds(
    scored: list[tuple[str, float]],
    relevant_ids: set[str],
    thresholds: list[float],
) -> list[tuple[float, float]]:
    """(threshold, accuracy) rows for calibrating the match threshold."""
    return [
        (t, accuracy_at_threshold(scored, relevant_ids, t)) for t in thresholds
    ]
