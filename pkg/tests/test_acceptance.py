"""Acceptance gate: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances and runtime bounds are pinned here, not configurable.
"""
from __future__ import annotations

import random
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from riskradar.embedding import EncoderConfig, HashingEncoder, cosine, embed
from riskradar.evaluation import generate_labeled_corpus, precision_at_k
from riskradar.extraction import Confidence, decompose_risk
from riskradar.hashing import fnv1a_64
from riskradar.matcher import MatchConfig, QueryMode, match_all, match_risk
from riskradar.newsfeed import GkgSchema, NewsItem, ParseError, parse_gkg_file
from riskradar.riskgraph import NodeKind, Relation, build_graph
from riskradar.newsfeed import make_news_item

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
PROVIDER = HashingEncoder(EncoderConfig())


def _passed(n: int, detail: str) -> None:
    print(f"criterion {n}: PASS — {detail}")


def test_criterion_1_demo_extraction(demo_records, lexicon):
    started = time.monotonic()
    decs = [decompose_risk(r, lexicon) for r in demo_records]
    assert all(d.confidence is Confidence.FULL for d in decs)
    first = decs[0]
    assert first.trigger == "cyber-attacks"
    assert first.exposure_vessels == ("retail banking business",)
    assert first.outcomes == ("loss of customer data",)
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    _passed(1, f"4/4 risks decomposed full, exact strings, {elapsed:.3f}s")


def test_criterion_2_knowledge_graph(demo_decompositions):
    graph, rejected = build_graph(demo_decompositions)
    assert rejected == []
    node_kinds = {kind: 0 for kind in NodeKind}
    for kind, _ in graph.nodes:
        node_kinds[kind] += 1
    edge_kinds = {rel: 0 for rel in Relation}
    for rel, _, _ in graph.edges:
        edge_kinds[rel] += 1
    assert len(graph.nodes) == 11
    assert node_kinds == {
        NodeKind.TRIGGER: 4,
        NodeKind.OUTCOME: 4,
        NodeKind.EXPOSURE_VESSEL: 3,
    }
    assert len(graph.edges) == 10
    assert edge_kinds == {Relation.CAUSES: 5, Relation.IMPACTS: 5}
    assert graph.shared_outcomes() == [("reputational damage", {"R0003", "R0004"})]
    # byte stability across two independent builds
    rebuilt, _ = build_graph(demo_decompositions)
    assert rebuilt.export("dot") == graph.export("dot")
    assert rebuilt.export("json") == graph.export("json")
    _passed(2, "11 nodes (4/4/3), 10 edges (5/5), exports byte-stable")


def _mutate_gkg_corpus(lines: list[str], total: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    mutated = []
    for n in range(total):
        line = lines[n % len(lines)]
        roll = rng.random()
        if roll < 0.25:
            line = line.rsplit("\t", 1)[0]  # wrong field count (short)
        elif roll < 0.35:
            line = line + "\textra"  # wrong field count (long)
        elif roll < 0.50:
            fields = line.split("\t")
            fields[1] = rng.choice(["2019", "not-a-date", "20191399999999", ""])
            line = "\t".join(fields)
        elif roll < 0.60:
            fields = line.split("\t")
            fields[4] = ""
            line = "\t".join(fields)
        elif roll < 0.70:
            line = "".join(
                chr(rng.randint(1, 0x2FF)) for _ in range(rng.randint(0, 80))
            ).replace("\n", " ").replace("\t", " ")
        # else: leave the line valid
        mutated.append(line)
    return mutated


def test_criterion_3_parser_robustness():
    base = (FIXTURES / "news_gkg_1000.tsv").read_text(encoding="utf-8").splitlines()
    corpus = _mutate_gkg_corpus(base, total=10_000, seed=42)
    started = time.monotonic()
    items, errors = parse_gkg_file("\n".join(corpus), GkgSchema())
    elapsed = time.monotonic() - started
    assert all(isinstance(i, NewsItem) for i in items)
    assert all(isinstance(e, ParseError) for e in errors)
    assert len(items) + len(errors) == 10_000
    assert elapsed < 5.0
    _passed(
        3,
        f"10,000 fuzzed lines -> {len(items)} items + {len(errors)} errors, "
        f"no crash, {elapsed:.2f}s",
    )


def _random_strings(count: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    alphabets = (
        "abcdefghijklmnopqrstuvwxyz -",
        "абвгдежзийклмнопрстуфхцчшщъыьэюя ",
        "日本語の見出しテキスト金融リスク",
        "0123456789!@#$%^&*()",
    )
    out = []
    for _ in range(count):
        alphabet = rng.choice(alphabets)
        out.append("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60))))
    return out


def test_criterion_4_embedder():
    config = EncoderConfig()
    for text in _random_strings(10_000, seed=99):
        vec = embed(text, config)
        norm = float(np.linalg.norm(vec.values))
        assert vec.is_zero or abs(norm - 1.0) <= 1e-4

    # FNV-1a-64 golden values recomputed by an in-test oracle
    def oracle(data: bytes) -> int:
        h = 14695981039346656037
        for b in data:
            h = ((h ^ b) * 1099511628211) % (1 << 64)
        return h

    goldens = {
        b"": 0xCBF29CE484222325,
        b"a": 0xAF63DC4C8601EC8C,
        b"hello": 0xA430D84680AABD0B,
        b"w:trade": 12228539841845158786,
        b"w:cyber-attacks": 582961954708379269,
    }
    for data, expected in goldens.items():
        assert fnv1a_64(data) == expected == oracle(data)

    # bit-identical vectors across two separate interpreter processes
    snippet = (
        "import hashlib\n"
        "from riskradar.embedding import embed, EncoderConfig\n"
        "texts = ['us china trade war', 'cyber-attacks', 'риск новостей', '金融危機']\n"
        "h = hashlib.sha256()\n"
        "for t in texts:\n"
        "    h.update(embed(t, EncoderConfig()).tobytes())\n"
        "print(h.hexdigest())\n"
    )
    digests = {
        subprocess.run(
            [sys.executable, "-c", snippet], capture_output=True, text=True, check=True
        ).stdout.strip()
        for _ in range(2)
    }
    assert len(digests) == 1
    _passed(4, "unit norm on 10k strings, FNV goldens, cross-process bit-identity")


def test_criterion_5_matching_quality(demo_records, demo_decompositions):
    corpus = generate_labeled_corpus(demo_decompositions, seed=7, pad_to=1000)
    config = MatchConfig(
        mode=QueryMode.TRIGGER_ONLY, threshold=-1.0, top_k=10, keyword_prefilter=False
    )
    started = time.monotonic()
    cache: dict = {}
    report = match_all(
        list(zip(demo_records, demo_decompositions)),
        corpus.items,
        PROVIDER,
        config,
        news_vectors=cache,
    )
    elapsed = time.monotonic() - started
    assert elapsed < 10.0

    for record, dec in zip(demo_records, demo_decompositions):
        results = report.results[record.id]
        labels = corpus.labels_for(record.id)
        assert precision_at_k(results, labels, 10) == 1.0

        # brute-force oracle: score everything, sort by policy, cut
        query_vec = PROVIDER.embed_batch([dec.trigger])[0]
        scored = []
        for item in corpus.items:
            score = cosine(query_vec, cache[item.id])
            ts = item.published_at.timestamp() if item.published_at else float("-inf")
            scored.append((item.id, score, ts))
        scored = [s for s in scored if s[1] >= config.threshold]
        scored.sort(key=lambda s: (-s[1], -s[2], s[0]))
        expected = [
            (news_id, score, rank)
            for rank, (news_id, score, _) in enumerate(scored[:10], start=1)
        ]
        assert [(r.news_id, r.score, r.rank) for r in results] == expected
    _passed(
        5,
        f"precision@10 = 1.0 on all 4 risks over 1,000 headlines, "
        f"oracle-exact ordering, {elapsed:.2f}s",
    )


def test_criterion_6_monotonicity_suite(demo_records, demo_decompositions):
    rng = random.Random(2024)
    vocab = (
        "trade war china cyber attacks misconduct failure bank market rally "
        "garden recipe weather festival concert museum tariffs revenue outage"
    ).split()
    trials = 0
    cache: dict = {}
    while trials < 200:
        idx = rng.randrange(4)
        record, dec = demo_records[idx], demo_decompositions[idx]
        corpus = [
            make_news_item(
                f"https://mono.example/{trials}/{n}",
                " ".join(rng.sample(vocab, rng.randint(2, 6))),
            )
            for n in range(rng.randint(5, 25))
        ]
        low, high = sorted([rng.uniform(-1, 1), rng.uniform(-1, 1)])
        k = rng.randint(1, 12)

        def run(threshold, top_k):
            config = MatchConfig(
                mode=QueryMode.TRIGGER_ONLY,
                threshold=threshold,
                top_k=top_k,
                keyword_prefilter=False,
            )
            return match_risk(record, dec, corpus, PROVIDER, config, news_vectors=cache)

        loose = run(low, 50)
        tight = run(high, 50)
        assert {r.news_id for r in tight} <= {r.news_id for r in loose}

        smaller = run(low, k)
        larger = run(low, k + 1)
        assert [(r.news_id, r.rank) for r in smaller] == [
            (r.news_id, r.rank) for r in larger
        ][: len(smaller)]
        trials += 1
    _passed(6, f"threshold nesting and top_k prefix held over {trials} trials")


ARTIFACTS = (
    "demo_store/reports/matches.jsonl",
    "demo_store/reports/matches.md",
    "demo_store/exports/graph.json",
    "demo_store/exports/graph.dot",
)


def test_criterion_7_end_to_end_determinism(tmp_path):
    for name in ("demo.conf", "demo_risks.txt", "news_gkg_1000.tsv", "google_news.rss"):
        shutil.copy(FIXTURES / name, tmp_path / name)

    def run_once() -> tuple[float, dict[str, bytes]]:
        started = time.monotonic()
        proc = subprocess.run(
            [sys.executable, "-m", "riskradar", "--config", "demo.conf", "run"],
            cwd=tmp_path,
            capture_output=True,
            text=True,
        )
        elapsed = time.monotonic() - started
        assert proc.returncode == 0, proc.stderr
        return elapsed, {name: (tmp_path / name).read_bytes() for name in ARTIFACTS}

    first_elapsed, first = run_once()
    second_elapsed, second = run_once()
    assert first == second
    assert first_elapsed < 10.0 and second_elapsed < 10.0
    _passed(
        7,
        f"two `riskradar run` invocations byte-identical "
        f"({first_elapsed:.1f}s, {second_elapsed:.1f}s)",
    )
