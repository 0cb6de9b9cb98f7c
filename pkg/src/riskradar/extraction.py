"""Decompose risk sentences into trigger / exposure vessel / outcome(s).

The grammar is deliberately boring: a risk sentence is segmented around the
leftmost causal marker ("causing", "resulting in", ...) and, within the text
before it, the leftmost connector ("targeting", "affecting", "in", ...).
Everything is driven by an immutable lexicon so behaviour is a pure function
of (text, lexicon). A learned extractor can replace the grammar behind the
``Extractor`` protocol without touching downstream modules.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol

_ARTICLES = frozenset({"the", "a", "an"})
_HYPHEN_GAP_RE = re.compile(r"(?<=[^\W_]) - (?=[^\W_])", re.UNICODE)
_EDGE_PUNCT_RE = re.compile(r"^[\W_]+|[\W_]+$", re.UNICODE)
_WS_RE = re.compile(r"\s+")


class ExtractionError(ValueError):
    """Base class for extraction failures."""


class InvalidRiskText(ExtractionError):
    """Raised for empty or whitespace-only risk text."""


class ExtractionFailed(ExtractionError):
    """Raised when segmentation leaves no usable trigger."""


class Confidence(str, Enum):
    FULL = "full"
    PARTIAL = "partial"
    TRIGGER_ONLY = "trigger_only"


def normalize_phrase(raw: str) -> str:
    """Canonicalize a phrase for node identity and lookups.

    Lowercases, collapses whitespace, strips punctuation off both ends,
    drops leading articles and fuses spaced hyphens ("us - china" ->
    "us-china"). Applied to a fixed point, so the function is idempotent by
    construction. All-punctuation input normalizes to "".
    """
    text = raw
    # every changing pass after the first strictly shortens the text, so the
    # fixed point arrives within len(raw) passes; the bound is just a guard
    for _ in range(len(raw) + 2):
        before = text
        text = text.lower()
        text = _WS_RE.sub(" ", text).strip()
        text = _EDGE_PUNCT_RE.sub("", text)
        words = text.split(" ")
        while words and words[0] in _ARTICLES:
            words.pop(0)
        text = " ".join(words)
        text = _HYPHEN_GAP_RE.sub("-", text)
        if text == before:
            break
    return text


@dataclass(frozen=True)
class RiskRecord:
    id: str
    raw_text: str
    source_tag: str = ""

    def __post_init__(self) -> None:
        if not self.raw_text.strip():
            raise InvalidRiskText(f"risk {self.id!r} has empty text")


@dataclass(frozen=True)
class ExtractionLexicon:
    """Connector/causal-marker vocabulary. Immutable after construction."""

    connectors: tuple[str, ...] = (
        "targeting",
        "affecting",
        "impacting",
        "disrupting",
        "hitting",
        "in",
    )
    causal_markers: tuple[str, ...] = ("causing", "resulting in", "leading to")
    outcome_splitters: tuple[str, ...] = ("and/or", "or")

    def __post_init__(self) -> None:
        for name, entries in (
            ("connectors", self.connectors),
            ("causal_markers", self.causal_markers),
            ("outcome_splitters", self.outcome_splitters),
        ):
            for entry in entries:
                if not entry:
                    raise ValueError(f"{name} contains an empty entry")
                if entry != entry.lower():
                    raise ValueError(f"{name} entry {entry!r} is not lowercase")
        marker_tokens = {m for m in self.causal_markers}
        overlap = set(self.connectors) & marker_tokens
        if overlap:
            raise ValueError(f"connectors overlap causal markers: {sorted(overlap)}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ExtractionLexicon":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            connectors=tuple(doc.get("connectors", cls.connectors)),
            causal_markers=tuple(doc.get("causal_markers", cls.causal_markers)),
            outcome_splitters=tuple(doc.get("outcome_splitters", cls.outcome_splitters)),
        )


@dataclass(frozen=True)
class RiskDecomposition:
    risk_id: str
    trigger: str
    exposure_vessels: tuple[str, ...] = ()
    outcomes: tuple[str, ...] = ()
    connector: str | None = None
    causal_marker: str | None = None
    confidence: Confidence = Confidence.TRIGGER_ONLY

    def to_dict(self) -> dict:
        return {
            "risk_id": self.risk_id,
            "trigger": self.trigger,
            "exposure_vessels": list(self.exposure_vessels),
            "outcomes": list(self.outcomes),
            "connector": self.connector,
            "causal_marker": self.causal_marker,
            "confidence": self.confidence.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RiskDecomposition":
        return cls(
            risk_id=doc["risk_id"],
            trigger=doc["trigger"],
            exposure_vessels=tuple(doc.get("exposure_vessels", ())),
            outcomes=tuple(doc.get("outcomes", ())),
            connector=doc.get("connector"),
            causal_marker=doc.get("causal_marker"),
            confidence=Confidence(doc.get("confidence", "trigger_only")),
        )


@dataclass(frozen=True)
class RawSegments:
    """Whitespace-token segmentation of one risk sentence, pre-normalization.

    Invariant: trigger + connector + vessel + marker + outcome tokens, in
    order, reproduce the original token sequence exactly.
    """

    trigger: tuple[str, ...]
    connector: tuple[str, ...]
    vessel: tuple[str, ...]
    marker: tuple[str, ...]
    outcome: tuple[str, ...]


def _find_marker(tokens: list[str], markers: Iterable[str]) -> tuple[int, int] | None:
    """Leftmost marker match as (start, token_length); longest wins at ties."""
    marker_seqs = sorted(
        (tuple(m.split(" ")) for m in markers), key=len, reverse=True
    )
    lowered = [t.lower() for t in tokens]
    for start in range(len(tokens)):
        for seq in marker_seqs:
            if tuple(lowered[start : start + len(seq)]) == seq:
                return start, len(seq)
    return None


def segment_tokens(tokens: list[str], lexicon: ExtractionLexicon) -> RawSegments:
    """Split a token sequence around the first causal marker and connector."""
    marker_hit = _find_marker(tokens, lexicon.causal_markers)
    if marker_hit is None:
        return RawSegments(tuple(tokens), (), (), (), ())
    m_start, m_len = marker_hit
    pre = tokens[:m_start]
    marker = tuple(tokens[m_start : m_start + m_len])
    outcome = tuple(tokens[m_start + m_len :])

    connectors = set(lexicon.connectors)
    c_index = next(
        (i for i, tok in enumerate(pre) if tok.lower() in connectors), None
    )
    if c_index is None:
        return RawSegments(tuple(pre), (), (), marker, outcome)
    return RawSegments(
        trigger=tuple(pre[:c_index]),
        connector=(pre[c_index],),
        vessel=tuple(pre[c_index + 1 :]),
        marker=marker,
        outcome=outcome,
    )


def split_outcomes(segment: str, lexicon: ExtractionLexicon) -> list[str]:
    """Split an outcome segment on splitter tokens ("and/or", "or"), left to
    right, normalizing each piece and dropping empties. Bare "and" never
    splits; it occurs inside entity names."""
    tokens = segment.split()
    splitter_seqs = sorted(
        (tuple(s.split(" ")) for s in lexicon.outcome_splitters), key=len, reverse=True
    )
    lowered = [t.lower() for t in tokens]
    pieces: list[list[str]] = [[]]
    i = 0
    while i < len(tokens):
        matched = next(
            (
                seq
                for seq in splitter_seqs
                if tuple(lowered[i : i + len(seq)]) == seq
            ),
            None,
        )
        if matched is not None:
            pieces.append([])
            i += len(matched)
        else:
            pieces[-1].append(tokens[i])
            i += 1
    out = []
    for piece in pieces:
        phrase = normalize_phrase(" ".join(piece))
        if phrase:
            out.append(phrase)
    return out


def decompose_risk(record: RiskRecord, lexicon: ExtractionLexicon) -> RiskDecomposition:
    """Run the connector/marker grammar over one risk sentence.

    Missing marker -> the whole sentence is the trigger (trigger_only).
    Marker without connector -> pre-marker text is the trigger (partial).
    """
    if not record.raw_text.strip():
        raise InvalidRiskText(f"risk {record.id!r} has empty text")
    tokens = record.raw_text.split()
    segments = segment_tokens(tokens, lexicon)

    trigger = normalize_phrase(" ".join(segments.trigger))
    if not trigger:
        raise ExtractionFailed(
            f"risk {record.id!r}: trigger segment normalized to empty"
        )

    if not segments.marker:
        return RiskDecomposition(
            risk_id=record.id, trigger=trigger, confidence=Confidence.TRIGGER_ONLY
        )

    outcomes = tuple(split_outcomes(" ".join(segments.outcome), lexicon))
    vessel = normalize_phrase(" ".join(segments.vessel))
    vessels = (vessel,) if vessel else ()
    confidence = (
        Confidence.FULL if (vessels and outcomes) else Confidence.PARTIAL
    )
    return RiskDecomposition(
        risk_id=record.id,
        trigger=trigger,
        exposure_vessels=vessels,
        outcomes=outcomes,
        connector=segments.connector[0].lower() if segments.connector else None,
        causal_marker=" ".join(segments.marker).lower(),
        confidence=confidence,
    )


class Extractor(Protocol):
    """Anything that turns a RiskRecord into a RiskDecomposition."""

    def decompose(self, record: RiskRecord) -> RiskDecomposition: ...


@dataclass(frozen=True)
class LexiconExtractor:
    """Default grammar-backed extractor."""

    lexicon: ExtractionLexicon = field(default_factory=ExtractionLexicon)

    def decompose(self, record: RiskRecord) -> RiskDecomposition:
        return decompose_risk(record, self.lexicon)


def load_risk_records(path: str | Path) -> list[RiskRecord]:
    """Read a risk repository file.

    Two formats, auto-detected by the first non-blank character: JSON Lines
    records with id/raw_text/source_tag, or plain text with one risk sentence
    per line (ids auto-assigned R0001...). Duplicate-id handling belongs to
    the store, not here.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    if lines[0].lstrip().startswith("{"):
        records = []
        for n, line in enumerate(lines, start=1):
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidRiskText(f"{path}:{n}: bad record: {exc}") from exc
            records.append(
                RiskRecord(
                    id=str(doc["id"]),
                    raw_text=str(doc["raw_text"]),
                    source_tag=str(doc.get("source_tag", "")),
                )
            )
        return records
    return [
        RiskRecord(id=f"R{n:04d}", raw_text=line.strip(), source_tag=path.name)
        for n, line in enumerate(lines, start=1)
    ]
