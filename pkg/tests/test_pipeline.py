from __future__ import annotations

import hashlib
import shutil
from pathlib import Path

import pytest

from riskradar.config import load_config
from riskradar.pipeline import (
    GRAPH_DOT_ARTIFACT,
    GRAPH_JSON_ARTIFACT,
    REPORT_JSONL_ARTIFACT,
    REPORT_MD_ARTIFACT,
    PipelineError,
    ingest_risks,
    run_pipeline,
)
from riskradar.store import RecordStore

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

ARTIFACTS = (
    REPORT_JSONL_ARTIFACT,
    REPORT_MD_ARTIFACT,
    GRAPH_JSON_ARTIFACT,
    GRAPH_DOT_ARTIFACT,
)


@pytest.fixture()
def bundle(tmp_path) -> Path:
    """Relocatable copy of the committed demo fixture bundle."""
    for name in (
        "demo.conf",
        "demo_risks.txt",
        "news_gkg_1000.tsv",
        "google_news.rss",
    ):
        shutil.copy(FIXTURES / name, tmp_path / name)
    return tmp_path


def _artifact_digests(store: RecordStore) -> dict[str, str]:
    return {
        name: hashlib.sha256(store.read_artifact(name).encode()).hexdigest()
        for name in ARTIFACTS
    }


def test_full_run_summary_counts(bundle):
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    summary = run_pipeline(config, store)
    assert summary.risks_total == 4
    assert summary.decomposed_full == 4
    assert summary.news_parsed == 1003  # 1000 gkg + 3 rss
    assert summary.parse_errors == 0
    assert summary.graph_nodes == 11
    assert summary.graph_edges == 10
    assert summary.matches_emitted > 0
    assert store.pending_stage() is None


def test_rerun_is_byte_identical(bundle):
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    run_pipeline(config, store)
    first = _artifact_digests(store)
    summary = run_pipeline(config, store)
    assert _artifact_digests(store) == first
    assert summary.risks_ingested == 0
    assert summary.risks_duplicate == 4
    assert summary.news_added == 0


def test_ingest_risks_duplicate_handling(bundle):
    store = RecordStore.open(bundle / "store")
    added, dupes = ingest_risks(bundle / "demo_risks.txt", store)
    assert (added, dupes) == (4, 0)
    added, dupes = ingest_risks(bundle / "demo_risks.txt", store)
    assert (added, dupes) == (0, 4)


def test_ingest_empty_file_rejected(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    store = RecordStore.open(tmp_path / "store")
    with pytest.raises(PipelineError, match="no valid risk records"):
        ingest_risks(empty, store)


def test_corrupt_gkg_counts_as_errors(bundle):
    # every line short one field -> zero items, parse_errors == line count
    gkg = bundle / "news_gkg_1000.tsv"
    lines = gkg.read_text(encoding="utf-8").splitlines()
    gkg.write_text(
        "\n".join(line.rsplit("\t", 1)[0] for line in lines) + "\n", encoding="utf-8"
    )
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    summary = run_pipeline(config, store)
    assert summary.news_parsed == 3  # the rss fixture still parses
    assert summary.parse_errors == 1000
    assert summary.news_parsed + summary.parse_errors == 1003


def test_stage_failure_leaves_marker_and_store_opens(bundle):
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    (bundle / "news_gkg_1000.tsv").unlink()  # news stage will blow up
    with pytest.raises(OSError):
        run_pipeline(config, store)
    assert store.pending_stage() == "news"
    # store remains openable and earlier stage output is present
    reopened = RecordStore.open(config.store_root)
    assert len(reopened.read_risks()) == 4
    assert reopened.read_artifact(GRAPH_JSON_ARTIFACT)
    # restoring the input lets the next run complete and clear the marker
    shutil.copy(FIXTURES / "news_gkg_1000.tsv", bundle / "news_gkg_1000.tsv")
    summary = run_pipeline(config, reopened)
    assert summary.matches_emitted > 0
    assert reopened.pending_stage() is None


def test_store_round_trip_after_run(bundle):
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    run_pipeline(config, store)
    reopened = RecordStore.open(config.store_root)
    assert reopened.read_risks() == store.read_risks()
    assert reopened.read_news() == store.read_news()
    assert reopened.read_matches() == store.read_matches()
    assert reopened.read_decompositions() == store.read_decompositions()


def test_run_without_risks_fails(tmp_path):
    (tmp_path / "riskradar.conf").write_text("store.root = s\n", encoding="utf-8")
    config = load_config(tmp_path / "riskradar.conf")
    store = RecordStore.open(config.store_root)
    with pytest.raises(PipelineError, match="no risks in store"):
        run_pipeline(config, store)
    assert (store.root / "lock").exists() is False  # lock released on failure


def test_summary_lines_shape(bundle):
    config = load_config(bundle / "demo.conf")
    store = RecordStore.open(config.store_root)
    summary = run_pipeline(config, store)
    lines = summary.lines()
    assert lines[0].startswith("config_digest=")
    assert any(line.startswith("news_parsed=1003") for line in lines)
    assert any(line.startswith("stage_seconds.match=") for line in lines)
