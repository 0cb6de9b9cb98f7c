from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from riskradar.embedding import RemoteEncoder, RemoteProviderError


class MockProvider(BaseHTTPRequestHandler):
    """Echo server: deterministic vector per text, plus failure knobs."""

    behaviour = "ok"  # ok | short | wrong_dim | unnormalized | garbage
    requests_seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append(
            {"body": body, "auth": self.headers.get("Authorization")}
        )
        texts = body["texts"]
        if self.behaviour == "garbage":
            return self._reply(200, b"not json")
        if self.behaviour == "short":
            vectors = [self._vector(t) for t in texts[:-1]]
            return self._reply(200, self._doc(8, vectors))
        if self.behaviour == "wrong_dim":
            return self._reply(200, self._doc(4, [[1, 0, 0, 0] for _ in texts]))
        if self.behaviour == "unnormalized":
            return self._reply(
                200, self._doc(8, [[2.0, 0, 0, 0, 0, 0, 0, 0] for _ in texts])
            )
        return self._reply(200, self._doc(8, [self._vector(t) for t in texts]))

    @staticmethod
    def _vector(text: str) -> list[float]:
        seed = sum(text.encode()) % 7 + 1
        vec = [float((seed + i) % 5 + 1) for i in range(8)]
        return vec

    @staticmethod
    def _doc(dim: int, vectors: list) -> bytes:
        return json.dumps({"dim": dim, "vectors": vectors}).encode()

    def _reply(self, status: int, payload: bytes):
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def provider_server():
    MockProvider.behaviour = "ok"
    MockProvider.requests_seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), MockProvider)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/embed"
    server.shutdown()
    server.server_close()


def _encoder(endpoint: str, **kwargs) -> RemoteEncoder:
    defaults = dict(model="mock-model", dim=8, max_retries=0, backoff_secs=0.0)
    defaults.update(kwargs)
    return RemoteEncoder(endpoint, **defaults)


def test_three_texts_three_unit_vectors_in_order(provider_server):
    encoder = _encoder(provider_server)
    vectors = encoder.embed_batch(["alpha", "beta", "gamma"])
    assert len(vectors) == 3
    for vec in vectors:
        assert abs(float(np.linalg.norm(vec.values)) - 1.0) <= 1e-6
    # order preserved: recompute the expected raw vector per text
    for text, vec in zip(["alpha", "beta", "gamma"], vectors):
        raw = np.asarray(MockProvider._vector(text), dtype=np.float64)
        expected = (raw / np.linalg.norm(raw)).astype(np.float32)
        assert np.allclose(vec.values, expected, atol=1e-6)


def test_short_response_rejected(provider_server):
    MockProvider.behaviour = "short"
    with pytest.raises(RemoteProviderError, match="2 vectors for 3"):
        _encoder(provider_server).embed_batch(["a", "b", "c"])


def test_wrong_dim_rejected(provider_server):
    MockProvider.behaviour = "wrong_dim"
    with pytest.raises(RemoteProviderError, match="dim"):
        _encoder(provider_server).embed_batch(["a"])


def test_unnormalized_vector_renormalized(provider_server):
    MockProvider.behaviour = "unnormalized"
    (vec,) = _encoder(provider_server).embed_batch(["a"])
    assert np.allclose(vec.values, [1, 0, 0, 0, 0, 0, 0, 0], atol=1e-7)


def test_garbage_response_rejected(provider_server):
    MockProvider.behaviour = "garbage"
    with pytest.raises(RemoteProviderError, match="JSON"):
        _encoder(provider_server).embed_batch(["a"])


def test_bearer_token_sent(provider_server):
    encoder = _encoder(provider_server, bearer_token="sesame")
    encoder.embed_batch(["a"])
    assert MockProvider.requests_seen[0]["auth"] == "Bearer sesame"


def test_model_field_in_request(provider_server):
    _encoder(provider_server).embed_batch(["a"])
    assert MockProvider.requests_seen[0]["body"]["model"] == "mock-model"


def test_batching_preserves_order(provider_server):
    texts = [f"text-{i}" for i in range(7)]
    encoder = _encoder(provider_server, batch_size=2, concurrency=3)
    vectors = encoder.embed_batch(texts)
    assert len(vectors) == 7
    for text, vec in zip(texts, vectors):
        raw = np.asarray(MockProvider._vector(text), dtype=np.float64)
        expected = (raw / np.linalg.norm(raw)).astype(np.float32)
        assert np.allclose(vec.values, expected, atol=1e-6)
    assert len(MockProvider.requests_seen) == 4  # ceil(7 / 2)


def test_empty_batch_no_request(provider_server):
    assert _encoder(provider_server).embed_batch([]) == []
    assert MockProvider.requests_seen == []


def test_transport_failure_raises():
    encoder = _encoder("http://127.0.0.1:9/unreachable", timeout_secs=0.2)
    with pytest.raises(RemoteProviderError, match="failed after"):
        encoder.embed_batch(["a"])
