"""News ingestion: GDELT GKG 2.1 files, RSS 2.0/Atom feeds, keyword filters.

Parsers are total: any byte sequence yields items plus recorded errors,
never an exception, and items_emitted + errors_recorded always equals the
input line/item count. GKG records carry no headline, so one is derived
from the URL slug rather than fetching pages.
"""
from __future__ import annotations

import io
import logging
import threading
import time
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from enum import Enum
from pathlib import Path
from urllib.parse import urlsplit
from xml.etree import ElementTree

from ._text import word_tokens
from .extraction import RiskDecomposition
from .hashing import content_id
from .stopwords import STOPWORDS

logger = logging.getLogger(__name__)

MIN_KEYWORD_LEN = 3


class ParseErrorKind(str, Enum):
    WRONG_FIELD_COUNT = "wrong_field_count"
    BAD_TIMESTAMP = "bad_timestamp"
    EMPTY_URL = "empty_url"
    MISSING_TITLE = "missing_title"
    MALFORMED_XML = "malformed_xml"


@dataclass(frozen=True)
class ParseError:
    kind: ParseErrorKind
    line_no: int
    reason: str


@dataclass(frozen=True)
class NewsItem:
    id: str
    headline: str
    url: str
    source: str
    published_at: datetime | None
    language: str = "und"
    themes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "headline": self.headline,
            "url": self.url,
            "source": self.source,
            "published_at": self.published_at.strftime("%Y-%m-%dT%H:%M:%SZ")
            if self.published_at
            else None,
            "language": self.language,
            "themes": list(self.themes),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NewsItem":
        ts = doc.get("published_at")
        return cls(
            id=doc["id"],
            headline=doc["headline"],
            url=doc["url"],
            source=doc.get("source", ""),
            published_at=datetime.strptime(ts, "%Y-%m-%dT%H:%M:%SZ").replace(
                tzinfo=timezone.utc
            )
            if ts
            else None,
            language=doc.get("language", "und"),
            themes=tuple(doc.get("themes", ())),
        )


def make_news_item(
    url: str,
    headline: str,
    source: str = "",
    published_at: datetime | None = None,
    language: str = "und",
    themes: tuple[str, ...] = (),
) -> NewsItem:
    return NewsItem(
        id=content_id(url, headline),
        headline=headline,
        url=url,
        source=source,
        published_at=published_at,
        language=language,
        themes=themes,
    )


# --- GDELT GKG -------------------------------------------------------------

@dataclass(frozen=True)
class GkgSchema:
    """Column layout of a GKG file. Defaults follow the GKG 2.1 codebook
    (27 tab-separated fields); keep them in config because column drift is a
    known GDELT hazard."""

    field_count: int = 27
    record_id: int = 0
    date: int = 1
    source_name: int = 3
    document_url: int = 4
    themes: int = 7
    tone: int = 15

    def __post_init__(self) -> None:
        indices = [
            self.record_id,
            self.date,
            self.source_name,
            self.document_url,
            self.themes,
            self.tone,
        ]
        if len(set(indices)) != len(indices):
            raise ValueError("gkg schema indices must be distinct")
        if any(i < 0 or i >= self.field_count for i in indices):
            raise ValueError("gkg schema index out of range")

    @classmethod
    def from_file(cls, path: str | Path) -> "GkgSchema":
        import json

        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValueError(f"{path}: bad schema file: {exc}") from exc


def headline_from_url(url: str) -> str:
    """Headline substitute from the URL slug: last path segment, extension
    stripped, separators to spaces, numeric tokens dropped. Falls back to the
    host when the path yields nothing."""
    parts = urlsplit(url.strip())
    segment = parts.path.rstrip("/").rsplit("/", 1)[-1]
    if "." in segment:
        stem, ext = segment.rsplit(".", 1)
        if ext.isalnum() and len(ext) <= 5:
            segment = stem
    words = [
        w
        for w in segment.replace("-", " ").replace("_", " ").lower().split()
        if w and not w.isdigit()
    ]
    if not words:
        return parts.netloc or url.strip()
    return " ".join(words)


def _parse_gkg_date(raw: str) -> datetime:
    if len(raw) != 14 or not raw.isdigit():
        raise ValueError(f"expected YYYYMMDDHHMMSS, got {raw!r}")
    return datetime.strptime(raw, "%Y%m%d%H%M%S").replace(tzinfo=timezone.utc)


def parse_gkg_line(
    line: str, schema: GkgSchema, line_no: int = 0
) -> NewsItem | ParseError:
    fields = line.split("\t")
    if len(fields) != schema.field_count:
        return ParseError(
            ParseErrorKind.WRONG_FIELD_COUNT,
            line_no,
            f"expected {schema.field_count} fields, got {len(fields)}",
        )
    url = fields[schema.document_url].strip()
    if not url:
        return ParseError(ParseErrorKind.EMPTY_URL, line_no, "empty document url")
    try:
        published = _parse_gkg_date(fields[schema.date].strip())
    except ValueError as exc:
        return ParseError(ParseErrorKind.BAD_TIMESTAMP, line_no, str(exc))
    themes = tuple(t for t in fields[schema.themes].split(";") if t)
    headline = headline_from_url(url)
    return make_news_item(
        url=url,
        headline=headline,
        source=fields[schema.source_name].strip(),
        published_at=published,
        themes=themes,
    )


def parse_gkg_file(
    text: str, schema: GkgSchema
) -> tuple[list[NewsItem], list[ParseError]]:
    """Parse a whole GKG file; items + errors always account for every line.

    Lines are LF-delimited (CR tolerated before LF). Other control
    characters are field content, not line boundaries, so the accounting
    matches `wc -l` on any input.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline is a terminator, not an empty record
    items: list[NewsItem] = []
    errors: list[ParseError] = []
    for line_no, line in enumerate(lines, start=1):
        result = parse_gkg_line(line.rstrip("\r"), schema, line_no)
        if isinstance(result, ParseError):
            errors.append(result)
        else:
            items.append(result)
    return items, errors


# --- RSS / Atom ------------------------------------------------------------

_ATOM_NS = "{http://www.w3.org/2005/Atom}"


def _parse_feed_date(raw: str) -> datetime | None:
    raw = raw.strip()
    if not raw:
        return None
    for parser in (_parse_rfc822, _parse_iso8601):
        try:
            dt = parser(raw)
        except (ValueError, TypeError):
            continue
        if dt is not None:
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            return dt.astimezone(timezone.utc).replace(microsecond=0)
    return None


def _parse_rfc822(raw: str) -> datetime | None:
    return parsedate_to_datetime(raw)


def _parse_iso8601(raw: str) -> datetime | None:
    return datetime.fromisoformat(raw.replace("Z", "+00:00"))


def parse_feed(xml: str) -> tuple[list[NewsItem], list[ParseError]]:
    """Parse one RSS 2.0 or Atom document. Malformed XML is a single fatal
    error; per-item defects skip the item and record an error."""
    try:
        root = ElementTree.fromstring(xml)
    except ElementTree.ParseError as exc:
        return [], [ParseError(ParseErrorKind.MALFORMED_XML, 0, str(exc))]

    if root.tag == "rss":
        return _parse_rss(root)
    if root.tag == f"{_ATOM_NS}feed":
        return _parse_atom(root)
    return [], [
        ParseError(
            ParseErrorKind.MALFORMED_XML, 0, f"unrecognized feed root {root.tag!r}"
        )
    ]


def _text_of(parent: ElementTree.Element, tag: str) -> str:
    el = parent.find(tag)
    return (el.text or "").strip() if el is not None else ""


def _parse_rss(root: ElementTree.Element) -> tuple[list[NewsItem], list[ParseError]]:
    channel = root.find("channel")
    if channel is None:
        return [], []
    feed_title = _text_of(channel, "title")
    language = _text_of(channel, "language") or "und"
    items: list[NewsItem] = []
    errors: list[ParseError] = []
    for n, entry in enumerate(channel.findall("item"), start=1):
        title = _text_of(entry, "title")
        if not title:
            errors.append(
                ParseError(ParseErrorKind.MISSING_TITLE, n, "item has no title")
            )
            continue
        source = _text_of(entry, "source") or feed_title
        items.append(
            make_news_item(
                url=_text_of(entry, "link"),
                headline=title,
                source=source,
                published_at=_parse_feed_date(_text_of(entry, "pubDate")),
                language=language,
            )
        )
    return items, errors


def _parse_atom(root: ElementTree.Element) -> tuple[list[NewsItem], list[ParseError]]:
    feed_title = _text_of(root, f"{_ATOM_NS}title")
    language = root.get("{http://www.w3.org/XML/1998/namespace}lang") or "und"
    items: list[NewsItem] = []
    errors: list[ParseError] = []
    for n, entry in enumerate(root.findall(f"{_ATOM_NS}entry"), start=1):
        title = _text_of(entry, f"{_ATOM_NS}title")
        if not title:
            errors.append(
                ParseError(ParseErrorKind.MISSING_TITLE, n, "entry has no title")
            )
            continue
        link_el = entry.find(f"{_ATOM_NS}link")
        url = link_el.get("href", "") if link_el is not None else ""
        published = _parse_feed_date(
            _text_of(entry, f"{_ATOM_NS}updated")
            or _text_of(entry, f"{_ATOM_NS}published")
        )
        items.append(
            make_news_item(
                url=url,
                headline=title,
                source=feed_title,
                published_at=published,
                language=language,
            )
        )
    return items, errors


# --- keyword candidate filters ----------------------------------------------

class EmptyKeywordSet(ValueError):
    pass


@dataclass(frozen=True)
class KeywordSet:
    risk_id: str
    keywords: frozenset[str]
    source_fields: tuple[str, ...] = ("trigger",)

    def match_tokens(self) -> frozenset[str]:
        """Keywords expanded so hyphenated entries match fused and split
        headline forms ("cyber-attacks" also matches "cyberattacks",
        "cyber", "attacks")."""
        expanded: set[str] = set()
        for kw in self.keywords:
            expanded.add(kw)
            if "-" in kw:
                expanded.add(kw.replace("-", ""))
                expanded.update(part for part in kw.split("-") if part)
        return frozenset(expanded)


def build_keywords(
    decomposition: RiskDecomposition,
    stopwords: frozenset[str] = STOPWORDS,
    source_fields: tuple[str, ...] = ("trigger",),
) -> KeywordSet:
    """Content tokens of the selected decomposition fields, minus stopwords
    and tokens shorter than three characters."""
    if not decomposition.trigger:
        raise EmptyKeywordSet(f"risk {decomposition.risk_id!r} has no trigger")
    phrases: list[str] = []
    if "trigger" in source_fields:
        phrases.append(decomposition.trigger)
    if "outcome" in source_fields:
        phrases.extend(decomposition.outcomes)
    if "vessel" in source_fields:
        phrases.extend(decomposition.exposure_vessels)
    tokens = {
        tok
        for phrase in phrases
        for tok in phrase.lower().split()
        if len(tok) >= MIN_KEYWORD_LEN and tok not in stopwords
    }
    if not tokens:
        raise EmptyKeywordSet(
            f"risk {decomposition.risk_id!r}: empty keyword set after filtering"
        )
    return KeywordSet(
        risk_id=decomposition.risk_id,
        keywords=frozenset(tokens),
        source_fields=tuple(source_fields),
    )


def keyword_filter(items: list[NewsItem], keys: KeywordSet) -> list[NewsItem]:
    """Retain items whose headline or theme tokens intersect the keyword set.
    Order is preserved; output is always a subset of the input."""
    wanted = keys.match_tokens()
    kept = []
    for item in items:
        tokens = set(word_tokens(item.headline))
        for theme in item.themes:
            tokens.update(word_tokens(theme))
        if tokens & wanted:
            kept.append(item)
    return kept


# --- fetching ---------------------------------------------------------------

class FetchError(Exception):
    """Network-side failure (transport error after retries, timeout)."""


class PayloadError(Exception):
    """Payload-side failure (size cap exceeded, bad zip wrapping)."""


@dataclass(frozen=True)
class SourceDescriptor:
    name: str
    kind: str  # gdelt_file | rss_url | local_fixture
    locator: str
    format: str = ""  # gkg | rss; inferred from kind when empty
    timeout_secs: float = 10.0
    max_bytes: int = 16 * 1024 * 1024
    max_retries: int = 2
    backoff_secs: float = 0.5

    def parser_format(self) -> str:
        if self.format:
            return self.format
        return "rss" if self.kind == "rss_url" else "gkg"


_HOST_LIMIT = 2
_host_semaphores: dict[str, threading.BoundedSemaphore] = {}
_host_lock = threading.Lock()


def _host_semaphore(host: str) -> threading.BoundedSemaphore:
    with _host_lock:
        sem = _host_semaphores.get(host)
        if sem is None:
            sem = threading.BoundedSemaphore(_HOST_LIMIT)
            _host_semaphores[host] = sem
        return sem


def _read_capped(stream: io.BufferedIOBase, max_bytes: int, what: str) -> bytes:
    data = stream.read(max_bytes + 1)
    if data is not None and len(data) > max_bytes:
        raise PayloadError(f"{what} exceeds size cap of {max_bytes} bytes")
    return data or b""


def _fetch_url(url: str, timeout: float, max_bytes: int, retries: int, backoff: float) -> bytes:
    host = urlsplit(url).netloc
    last_exc: Exception | None = None
    for attempt in range(retries + 1):
        try:
            with _host_semaphore(host):
                with urllib.request.urlopen(url, timeout=timeout) as resp:
                    return _read_capped(resp, max_bytes, url)
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            last_exc = exc
            if attempt < retries:
                time.sleep(backoff * (2**attempt))
    raise FetchError(f"fetch failed after {retries + 1} attempts: {url}: {last_exc}")


def _unwrap_zip(payload: bytes, max_bytes: int) -> bytes:
    try:
        archive = zipfile.ZipFile(io.BytesIO(payload))
    except zipfile.BadZipFile as exc:
        raise PayloadError(f"bad zip payload: {exc}") from exc
    names = archive.namelist()
    if len(names) != 1:
        raise PayloadError(f"expected exactly 1 zip member, found {len(names)}")
    with archive.open(names[0]) as member:
        return _read_capped(member, max_bytes, f"zip member {names[0]!r}")


def fetch_source(descriptor: SourceDescriptor) -> bytes:
    """Return the raw payload for a source, transparently unzipping
    single-member zip wrappers for GDELT files."""
    kind = descriptor.kind
    if kind == "local_fixture" or (
        kind == "gdelt_file" and "://" not in descriptor.locator
    ):
        path = Path(descriptor.locator)
        if path.stat().st_size > descriptor.max_bytes:
            raise PayloadError(
                f"{path} exceeds size cap of {descriptor.max_bytes} bytes"
            )
        payload = path.read_bytes()
    elif kind in ("gdelt_file", "rss_url"):
        payload = _fetch_url(
            descriptor.locator,
            descriptor.timeout_secs,
            descriptor.max_bytes,
            descriptor.max_retries,
            descriptor.backoff_secs,
        )
    else:
        raise ValueError(f"unknown source kind {descriptor.kind!r}")

    if payload[:4] == b"PK\x03\x04":
        payload = _unwrap_zip(payload, descriptor.max_bytes)
    return payload


def ingest_source(
    descriptor: SourceDescriptor, schema: GkgSchema | None = None
) -> tuple[list[NewsItem], list[ParseError]]:
    """Fetch and parse one source end to end."""
    payload = fetch_source(descriptor)
    text = payload.decode("utf-8", errors="replace")
    if descriptor.parser_format() == "rss":
        return parse_feed(text)
    return parse_gkg_file(text, schema or GkgSchema())
