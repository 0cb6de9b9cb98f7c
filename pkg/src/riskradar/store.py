"""Plain-file record store backing the pipeline.

Layout under one root directory:

    manifest.json          schema version + sha256 digest per tracked file
    risks.jsonl            append-only source entities, deduped by id on read
    news.jsonl             append-only source entities, deduped by id on read
    decompositions.jsonl   derived; rewritten atomically by the extract stage
    matches.jsonl          derived; rewritten atomically by the match stage
    vectors-<cfg>.rrv      binary embedding cache, one per encoder config
    exports/, reports/     graph exports and match reports
    lock                   advisory single-writer lock (pid inside)
    partial_run            stage marker present only while a stage runs

Everything is diffable text except the vector cache. The manifest is
verified on open so silent corruption is caught before a run builds on it.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .embedding import EmbeddingVector, read_vector_cache, write_vector_cache
from .extraction import RiskDecomposition, RiskRecord
from .matcher import MatchResult
from .newsfeed import NewsItem

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = "riskradar-store/1"

RISKS_FILE = "risks.jsonl"
NEWS_FILE = "news.jsonl"
DECOMPOSITIONS_FILE = "decompositions.jsonl"
MATCHES_FILE = "matches.jsonl"
LOCK_FILE = "lock"
MARKER_FILE = "partial_run"


class StoreError(Exception):
    pass


class StoreLocked(StoreError):
    pass


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RecordStore:
    root: Path

    @classmethod
    def open(cls, root: str | Path, create: bool = True) -> "RecordStore":
        root = Path(root)
        if not root.exists():
            if not create:
                raise StoreError(f"store root {root} does not exist")
            root.mkdir(parents=True)
        store = cls(root=root)
        store._verify_manifest()
        return store

    # -- manifest ------------------------------------------------------------

    def _manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _load_manifest(self) -> dict:
        path = self._manifest_path()
        if not path.exists():
            return {"schema": MANIFEST_SCHEMA, "files": {}}
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StoreError(f"corrupt manifest: {exc}") from exc
        if doc.get("schema") != MANIFEST_SCHEMA:
            raise StoreError(f"unsupported store schema {doc.get('schema')!r}")
        return doc

    def _verify_manifest(self) -> None:
        doc = self._load_manifest()
        in_flight = self.pending_stage() is not None
        stale: list[str] = []
        for name, meta in doc["files"].items():
            path = self.root / name
            if not path.exists():
                if in_flight:
                    stale.append(name)
                    continue
                raise StoreError(f"manifest lists missing file {name}")
            if _sha256(path) != meta["sha256"]:
                if in_flight:
                    stale.append(name)
                    continue
                raise StoreError(f"digest mismatch for {name}; store is corrupt")
        if stale:
            # a run died between writing data and updating the manifest;
            # the marker scopes the damage, so repair and let a rerun redo
            # the unfinished stage
            logger.warning(
                "repairing manifest after interrupted run (stage %r): %s",
                self.pending_stage(), ", ".join(stale),
            )
            present = [name for name in stale if (self.root / name).exists()]
            for name in stale:
                if name not in present:
                    del doc["files"][name]
            tmp = self._manifest_path().with_suffix(".tmp")
            tmp.write_text(
                json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            os.replace(tmp, self._manifest_path())
            if present:
                self._track(*present)

    def _track(self, *names: str) -> None:
        doc = self._load_manifest()
        for name in names:
            path = self.root / name
            doc["files"][name] = {
                "sha256": _sha256(path),
                "bytes": path.stat().st_size,
            }
        tmp = self._manifest_path().with_suffix(".tmp")
        tmp.write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        os.replace(tmp, self._manifest_path())

    # -- generic jsonl helpers -------------------------------------------------

    def _append_unique(self, name: str, docs: list[dict], key: str) -> tuple[int, int]:
        path = self.root / name
        existing = {doc[key] for doc in self._read_jsonl(name)}
        added = 0
        skipped: list = []
        with open(path, "a", encoding="utf-8") as fh:
            for doc in docs:
                if doc[key] in existing:
                    skipped.append(doc[key])
                    continue
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
                existing.add(doc[key])
                added += 1
        if skipped:
            logger.warning(
                "%s: %d duplicate %s(s) ignored (first: %r)",
                name, len(skipped), key, skipped[0],
            )
        self._track(name)
        return added, len(skipped)

    def _rewrite(self, name: str, docs: list[dict]) -> None:
        path = self.root / name
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
        os.replace(tmp, path)
        self._track(name)

    def _read_jsonl(self, name: str) -> list[dict]:
        path = self.root / name
        if not path.exists():
            return []
        docs = []
        for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                docs.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StoreError(f"{name}:{n}: corrupt record: {exc}") from exc
        return docs

    def _dedup(self, docs: list[dict], key: str, name: str) -> list[dict]:
        seen: set = set()
        out = []
        dupes = 0
        for doc in docs:
            if doc[key] in seen:
                dupes += 1
                continue
            seen.add(doc[key])
            out.append(doc)
        if dupes:
            logger.warning("%s: %d duplicate %s(s) ignored on read", name, dupes, key)
        return out

    # -- entities ----------------------------------------------------------------

    def append_risks(self, records: list[RiskRecord]) -> tuple[int, int]:
        docs = [
            {"id": r.id, "raw_text": r.raw_text, "source_tag": r.source_tag}
            for r in records
        ]
        return self._append_unique(RISKS_FILE, docs, "id")

    def read_risks(self) -> list[RiskRecord]:
        return [
            RiskRecord(id=d["id"], raw_text=d["raw_text"], source_tag=d.get("source_tag", ""))
            for d in self._dedup(self._read_jsonl(RISKS_FILE), "id", RISKS_FILE)
        ]

    def append_news(self, items: list[NewsItem]) -> tuple[int, int]:
        return self._append_unique(NEWS_FILE, [i.to_dict() for i in items], "id")

    def read_news(self) -> list[NewsItem]:
        return [
            NewsItem.from_dict(d)
            for d in self._dedup(self._read_jsonl(NEWS_FILE), "id", NEWS_FILE)
        ]

    def write_decompositions(self, decs: list[RiskDecomposition]) -> None:
        self._rewrite(DECOMPOSITIONS_FILE, [d.to_dict() for d in decs])

    def read_decompositions(self) -> list[RiskDecomposition]:
        return [
            RiskDecomposition.from_dict(d)
            for d in self._dedup(
                self._read_jsonl(DECOMPOSITIONS_FILE), "risk_id", DECOMPOSITIONS_FILE
            )
        ]

    def write_matches(self, results: list[MatchResult]) -> None:
        docs = [
            {
                "risk_id": r.risk_id,
                "news_id": r.news_id,
                "score": round(r.score, 4),
                "rank": r.rank,
            }
            for r in results
        ]
        self._rewrite(MATCHES_FILE, docs)

    def read_matches(self) -> list[MatchResult]:
        return [
            MatchResult(
                risk_id=d["risk_id"],
                news_id=d["news_id"],
                score=float(d["score"]),
                rank=int(d["rank"]),
            )
            for d in self._read_jsonl(MATCHES_FILE)
        ]

    # -- artifacts and vector cache ---------------------------------------------

    def write_artifact(self, relpath: str, text: str) -> Path:
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
        self._track(relpath)
        return path

    def read_artifact(self, relpath: str) -> str:
        path = self.root / relpath
        if not path.exists():
            raise StoreError(f"artifact {relpath} not found")
        return path.read_text(encoding="utf-8")

    def vector_cache_name(self, config_digest: str) -> str:
        return f"vectors-{config_digest[:8]}.rrv"

    def save_vectors(
        self, config_digest: str, vectors: dict[str, EmbeddingVector], dim: int
    ) -> None:
        name = self.vector_cache_name(config_digest)
        write_vector_cache(self.root / name, vectors, dim)
        self._track(name)

    def load_vectors(self, config_digest: str) -> tuple[int, dict[int, EmbeddingVector]]:
        path = self.root / self.vector_cache_name(config_digest)
        if not path.exists():
            return 0, {}
        return read_vector_cache(path)

    # -- run lifecycle -------------------------------------------------------------

    def acquire_lock(self) -> None:
        path = self.root / LOCK_FILE
        if path.exists():
            try:
                pid = int(path.read_text().strip())
            except ValueError:
                pid = -1
            if pid > 0 and _pid_alive(pid):
                raise StoreLocked(f"store locked by running pid {pid}")
            logger.warning("removing stale lock (pid %s)", pid)
            path.unlink()
        path.write_text(str(os.getpid()), encoding="utf-8")

    def release_lock(self) -> None:
        path = self.root / LOCK_FILE
        if path.exists():
            path.unlink()

    def set_stage_marker(self, stage: str) -> None:
        (self.root / MARKER_FILE).write_text(stage + "\n", encoding="utf-8")

    def clear_stage_marker(self) -> None:
        path = self.root / MARKER_FILE
        if path.exists():
            path.unlink()

    def pending_stage(self) -> str | None:
        path = self.root / MARKER_FILE
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8").strip() or None


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
