from __future__ import annotations

import json
import shutil
import urllib.error
import urllib.request
from pathlib import Path

import pytest

from riskradar.config import load_config
from riskradar.pipeline import run_pipeline
from riskradar.server import ApiServer, RiskRadarApi, parse_addr
from riskradar.store import RecordStore

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("serve")
    for name in ("demo.conf", "demo_risks.txt", "news_gkg_1000.tsv", "google_news.rss"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    config = load_config(tmp_path / "demo.conf")
    store = RecordStore.open(config.store_root)
    run_pipeline(config, store)
    api = RiskRadarApi(store, config)
    server = ApiServer(("127.0.0.1", 0), api)
    import threading

    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", config
    server.shutdown()
    server.server_close()


def _get(base: str, path: str):
    with urllib.request.urlopen(base + path, timeout=5) as resp:
        return resp.status, resp.headers.get("Content-Type", ""), resp.read().decode()


def test_healthz(served):
    base, config = served
    status, _, body = _get(base, "/healthz")
    assert status == 200
    doc = json.loads(body)
    assert doc["status"] == "ok"
    assert doc["config_digest"] == config.digest


def test_list_risks(served):
    base, _ = served
    status, _, body = _get(base, "/risks")
    assert status == 200
    risks = json.loads(body)
    assert [r["id"] for r in risks] == ["R0001", "R0002", "R0003", "R0004"]
    assert risks[0]["raw_text"].startswith("Cyber-attacks")


def test_risk_detail_includes_decomposition(served):
    base, _ = served
    status, _, body = _get(base, "/risks/R0001")
    assert status == 200
    doc = json.loads(body)
    assert doc["record"]["id"] == "R0001"
    assert doc["decomposition"]["trigger"] == "cyber-attacks"
    assert doc["decomposition"]["confidence"] == "full"


def test_unknown_risk_404(served):
    base, _ = served
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        _get(base, "/risks/unknown")
    assert excinfo.value.code == 404


def test_risk_matches_ranked(served):
    base, _ = served
    status, _, body = _get(base, "/risks/R0001/matches")
    assert status == 200
    rows = json.loads(body)
    assert rows, "expected matches for R0001 on the demo fixture"
    assert [row["rank"] for row in rows] == list(range(1, len(rows) + 1))
    assert all(row["risk_id"] == "R0001" for row in rows)


def test_graph_json(served):
    base, _ = served
    status, ctype, body = _get(base, "/graph?format=json")
    assert status == 200
    assert "json" in ctype
    doc = json.loads(body)
    assert len(doc["nodes"]) == 11
    assert len(doc["edges"]) == 10


def test_graph_dot(served):
    base, _ = served
    status, ctype, body = _get(base, "/graph?format=dot")
    assert status == 200
    assert ctype.startswith("text/plain")
    assert body.startswith("digraph risks {")


def test_graph_default_format_json(served):
    base, _ = served
    _, ctype, _ = _get(base, "/graph")
    assert "json" in ctype


def test_graph_bad_format_400(served):
    base, _ = served
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        _get(base, "/graph?format=png")
    assert excinfo.value.code == 400


def test_unknown_path_404(served):
    base, _ = served
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        _get(base, "/nope")
    assert excinfo.value.code == 404


def test_post_not_allowed(served):
    base, _ = served
    request = urllib.request.Request(base + "/risks", data=b"{}", method="POST")
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        urllib.request.urlopen(request, timeout=5)
    assert excinfo.value.code == 501  # read-only API: no POST handler at all


def test_refresh_rebuilds_snapshot(served, tmp_path):
    base, config = served
    store = RecordStore.open(config.store_root)
    api = RiskRadarApi(store, config)
    before = len(api.snapshot.news_by_id)
    api.refresh()
    assert len(api.snapshot.news_by_id) == before  # same fixtures, same corpus


@pytest.mark.parametrize(
    "addr,expected",
    [("127.0.0.1:8787", ("127.0.0.1", 8787)), ("0.0.0.0:80", ("0.0.0.0", 80))],
)
def test_parse_addr(addr, expected):
    assert parse_addr(addr) == expected


@pytest.mark.parametrize("addr", ["nonsense", ":", "host:", ":90x", "8787"])
def test_parse_addr_rejects(addr):
    with pytest.raises(ValueError):
        parse_addr(addr)
