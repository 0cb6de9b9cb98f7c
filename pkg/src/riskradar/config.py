"""Pipeline configuration: one flat ``key = value`` file.

Blank lines and ``#`` comment lines are ignored, keys are dotted and
case-sensitive, and unknown keys are rejected so typos fail loudly instead
of silently using a default. Relative paths resolve against the config
file's directory. ``RISKRADAR_CONFIG`` overrides the default path; a
``--config`` flag overrides both.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EncoderConfig
from .matcher import MatchConfig, QueryMode
from .newsfeed import GkgSchema, SourceDescriptor

DEFAULT_CONFIG_PATH = "riskradar.conf"
ENV_VAR = "RISKRADAR_CONFIG"

_TOP_KEYS = {
    "store.root",
    "risks.path",
    "fixtures.dir",
    "stopwords.path",
    "lexicon.path",
    "gkg.schema.path",
    "encoder.dim",
    "encoder.use_word_tokens",
    "encoder.use_char_trigrams",
    "encoder.tf_weighting",
    "encoder.hash_seed",
    "embedding.provider",
    "remote.endpoint",
    "remote.model",
    "remote.dim",
    "remote.batch_size",
    "remote.bearer_token",
    "match.mode",
    "match.threshold",
    "match.top_k",
    "match.keyword_prefilter",
    "serve.addr",
    "poll.interval_secs",
}
_SOURCE_KEYS = {"kind", "locator", "format", "timeout_secs", "max_bytes"}


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    store_root: Path = Path("riskradar_store")
    risks_path: Path | None = None
    fixtures_dir: Path | None = None
    stopwords_path: Path | None = None
    lexicon_path: Path | None = None
    gkg_schema_path: Path | None = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    provider_kind: str = "hashing"  # hashing | remote
    remote_endpoint: str = ""
    remote_model: str = ""
    remote_dim: int = 384
    remote_batch_size: int = 32
    remote_bearer_token: str = ""
    match: MatchConfig = field(default_factory=MatchConfig)
    sources: list[SourceDescriptor] = field(default_factory=list)
    serve_addr: str = "127.0.0.1:8787"
    poll_interval_secs: float = 0.0
    digest: str = ""

    def gkg_schema(self) -> GkgSchema:
        if self.gkg_schema_path is not None:
            return GkgSchema.from_file(self.gkg_schema_path)
        return GkgSchema()


def resolve_config_path(cli_path: str | None) -> Path:
    if cli_path:
        return Path(cli_path)
    return Path(os.environ.get(ENV_VAR, DEFAULT_CONFIG_PATH))


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load the config file, or defaults when ``path`` is None/missing and
    was not explicitly requested."""
    if path is None:
        return _finish(PipelineConfig(), {}, Path("."))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    pairs = _parse_pairs(path.read_text(encoding="utf-8"), path)
    return _build(pairs, path.parent.resolve(), _digest(pairs))


def _parse_pairs(text: str, path: Path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in pairs:
            raise ConfigError(f"{path}:{n}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _digest(pairs: dict[str, str]) -> str:
    canon = "\n".join(f"{k} = {pairs[k]}" for k in sorted(pairs))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _build(pairs: dict[str, str], base: Path, digest: str) -> PipelineConfig:
    source_names: dict[str, dict[str, str]] = {}
    for key, value in pairs.items():
        if key.startswith("source."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _SOURCE_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            source_names.setdefault(parts[1], {})[parts[2]] = value
        elif key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key {key!r}")

    def path_of(key: str) -> Path | None:
        raw = pairs.get(key, "")
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else base / p

    cfg = PipelineConfig(
        store_root=path_of("store.root") or base / "riskradar_store",
        risks_path=path_of("risks.path"),
        fixtures_dir=path_of("fixtures.dir"),
        stopwords_path=path_of("stopwords.path"),
        lexicon_path=path_of("lexicon.path"),
        gkg_schema_path=path_of("gkg.schema.path"),
        encoder=EncoderConfig(
            dim=_int(pairs, "encoder.dim", 384),
            use_word_tokens=_bool(pairs, "encoder.use_word_tokens", True),
            use_char_trigrams=_bool(pairs, "encoder.use_char_trigrams", True),
            tf_weighting=pairs.get("encoder.tf_weighting", "sublinear"),
            hash_seed=_int(pairs, "encoder.hash_seed", 0),
        ),
        provider_kind=pairs.get("embedding.provider", "hashing"),
        remote_endpoint=pairs.get("remote.endpoint", ""),
        remote_model=pairs.get("remote.model", ""),
        remote_dim=_int(pairs, "remote.dim", 384),
        remote_batch_size=_int(pairs, "remote.batch_size", 32),
        remote_bearer_token=pairs.get("remote.bearer_token", ""),
        match=MatchConfig(
            mode=QueryMode(pairs.get("match.mode", "full_text")),
            threshold=_float(pairs, "match.threshold", 0.35),
            top_k=_int(pairs, "match.top_k", 10),
            keyword_prefilter=_bool(pairs, "match.keyword_prefilter", True),
        ),
        serve_addr=pairs.get("serve.addr", "127.0.0.1:8787"),
        poll_interval_secs=_float(pairs, "poll.interval_secs", 0.0),
        digest=digest,
    )
    for name in sorted(source_names):
        fields = source_names[name]
        if "kind" not in fields or "locator" not in fields:
            raise ConfigError(f"source {name!r} needs kind and locator")
        locator = fields["locator"]
        if fields["kind"] in ("local_fixture", "gdelt_file") and "://" not in locator:
            p = Path(locator)
            if not p.is_absolute():
                locator = str((cfg.fixtures_dir or base) / p)
        cfg.sources.append(
            SourceDescriptor(
                name=name,
                kind=fields["kind"],
                locator=locator,
                format=fields.get("format", ""),
                timeout_secs=float(fields.get("timeout_secs", 10.0)),
                max_bytes=int(fields.get("max_bytes", 16 * 1024 * 1024)),
            )
        )
    return _finish(cfg, pairs, base)


def _finish(cfg: PipelineConfig, pairs: dict[str, str], base: Path) -> PipelineConfig:
    if cfg.provider_kind not in ("hashing", "remote"):
        raise ConfigError(f"unknown embedding provider {cfg.provider_kind!r}")
    if cfg.provider_kind == "remote" and not cfg.remote_endpoint:
        raise ConfigError("embedding.provider=remote requires remote.endpoint")
    for label, p in (
        ("risks.path", cfg.risks_path),
        ("stopwords.path", cfg.stopwords_path),
        ("lexicon.path", cfg.lexicon_path),
        ("gkg.schema.path", cfg.gkg_schema_path),
    ):
        if p is not None and not Path(p).exists():
            raise ConfigError(f"{label} references missing file {p}")
    for src in cfg.sources:
        if src.kind in ("local_fixture", "gdelt_file") and "://" not in src.locator:
            if not Path(src.locator).exists():
                raise ConfigError(
                    f"source {src.name!r} references missing file {src.locator}"
                )
    if not cfg.digest:
        cfg.digest = _digest(pairs)
    return cfg


def _bool(pairs: dict[str, str], key: str, default: bool) -> bool:
    raw = pairs.get(key)
    if raw is None:
        return default
    if raw.lower() in ("true", "yes", "on", "1"):
        return True
    if raw.lower() in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _int(pairs: dict[str, str], key: str, default: int) -> int:
    raw = pairs.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _float(pairs: dict[str, str], key: str, default: float) -> float:
    raw = pairs.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
