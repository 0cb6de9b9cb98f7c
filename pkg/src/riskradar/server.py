"""Read-only HTTP API over a completed run.

The store snapshot is loaded once at startup (and after each optional poll
refresh); request handlers never touch the filesystem, so concurrent reads
are trivially safe. Write paths stay CLI-only.
"""
from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .config import PipelineConfig
from .matcher import report_rows
from .pipeline import GRAPH_DOT_ARTIFACT, GRAPH_JSON_ARTIFACT, RunSummary, match_stage, news_stage
from .store import RecordStore, StoreError

logger = logging.getLogger(__name__)


@dataclass
class Snapshot:
    risks: dict = field(default_factory=dict)
    decompositions: dict = field(default_factory=dict)
    matches_by_risk: dict = field(default_factory=dict)
    news_by_id: dict = field(default_factory=dict)
    graph_json: str = "{}\n"
    graph_dot: str = "digraph risks {\n}\n"
    config_digest: str = ""


def load_snapshot(store: RecordStore, config: PipelineConfig) -> Snapshot:
    snap = Snapshot(config_digest=config.digest)
    snap.risks = {
        r.id: {"id": r.id, "raw_text": r.raw_text, "source_tag": r.source_tag}
        for r in store.read_risks()
    }
    snap.decompositions = {d.risk_id: d.to_dict() for d in store.read_decompositions()}
    snap.news_by_id = {item.id: item for item in store.read_news()}
    for result in store.read_matches():
        snap.matches_by_risk.setdefault(result.risk_id, []).append(result)
    try:
        snap.graph_json = store.read_artifact(GRAPH_JSON_ARTIFACT)
        snap.graph_dot = store.read_artifact(GRAPH_DOT_ARTIFACT)
    except StoreError:
        logger.warning("no graph exports in store yet")
    return snap


class RiskRadarApi:
    """Route table + snapshot holder, separable from the HTTP plumbing."""

    def __init__(self, store: RecordStore, config: PipelineConfig):
        self.store = store
        self.config = config
        self._lock = threading.Lock()
        self._snapshot = load_snapshot(store, config)

    @property
    def snapshot(self) -> Snapshot:
        with self._lock:
            return self._snapshot

    def refresh(self) -> None:
        """Re-poll configured sources, rematch, reload the snapshot."""
        summary = RunSummary(config_digest=self.config.digest)
        self.store.acquire_lock()
        try:
            news_stage(self.store, self.config, summary)
            match_stage(self.store, self.config, summary)
        finally:
            self.store.release_lock()
        with self._lock:
            self._snapshot = load_snapshot(self.store, self.config)

    def handle(self, path: str, query: dict) -> tuple[int, str, str]:
        """Return (status, content_type, body) for a GET."""
        snap = self.snapshot
        if path == "/healthz":
            return 200, "application/json", _json(
                {"status": "ok", "config_digest": snap.config_digest}
            )
        if path == "/risks":
            return 200, "application/json", _json(
                [snap.risks[rid] for rid in sorted(snap.risks)]
            )
        if path == "/graph":
            fmt = (query.get("format") or ["json"])[0]
            if fmt == "dot":
                return 200, "text/plain; charset=utf-8", snap.graph_dot
            if fmt == "json":
                return 200, "application/json", snap.graph_json
            return 400, "application/json", _json(
                {"error": f"unknown graph format {fmt!r}"}
            )
        if path.startswith("/risks/"):
            rest = path[len("/risks/") :]
            if rest.endswith("/matches"):
                risk_id = rest[: -len("/matches")]
                if risk_id not in snap.risks:
                    return _not_found(f"risk {risk_id!r}")
                results = sorted(
                    snap.matches_by_risk.get(risk_id, []), key=lambda r: r.rank
                )
                rows = report_rows(_single_risk_report(results), snap.news_by_id)
                return 200, "application/json", _json(rows)
            risk_id = rest
            if risk_id not in snap.risks:
                return _not_found(f"risk {risk_id!r}")
            return 200, "application/json", _json(
                {
                    "record": snap.risks[risk_id],
                    "decomposition": snap.decompositions.get(risk_id),
                }
            )
        return _not_found(path)


def _single_risk_report(results):
    from .matcher import MatchReport

    report = MatchReport()
    for r in results:
        report.results.setdefault(r.risk_id, []).append(r)
    return report


def _json(doc) -> str:
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def _not_found(what: str) -> tuple[int, str, str]:
    return 404, "application/json", _json({"error": f"not found: {what}"})


class _Handler(BaseHTTPRequestHandler):
    server: "ApiServer"

    def do_GET(self):  # noqa: N802 (http.server API)
        parts = urlsplit(self.path)
        query = parse_qs(parts.query)
        try:
            status, ctype, body = self.server.api.handle(parts.path, query)
        except Exception:  # pragma: no cover - defensive
            logger.exception("request failed: %s", self.path)
            status, ctype, body = 500, "application/json", _json({"error": "internal"})
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # quiet by default
        logger.debug("http: " + fmt, *args)


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], api: RiskRadarApi):
        super().__init__(addr, _Handler)
        self.api = api


def serve(
    config: PipelineConfig, store: RecordStore, addr: str | None = None
) -> None:
    """Run the API until interrupted; optional fixed-interval source re-poll."""
    host, port = parse_addr(addr or config.serve_addr)
    api = RiskRadarApi(store, config)
    server = ApiServer((host, port), api)
    stop = threading.Event()
    poller = None
    if config.poll_interval_secs > 0:
        poller = threading.Thread(
            target=_poll_loop, args=(api, config.poll_interval_secs, stop), daemon=True
        )
        poller.start()
    logger.info("serving on %s:%d", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        server.shutdown()
        server.server_close()


def _poll_loop(api: RiskRadarApi, interval: float, stop: threading.Event) -> None:
    while not stop.wait(interval):
        try:
            api.refresh()
        except Exception:
            logger.exception("poll refresh failed")


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {addr!r}")
    return host, int(port)
