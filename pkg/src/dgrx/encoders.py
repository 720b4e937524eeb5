"""Encoded-sentence providers: hashed stand-in, binary cache, remote service.

All providers emit EncodedSentence values with one row per word, so the rest
of the pipeline never cares where vectors came from. Gradients stop here: the
encoder is frozen and only the graph head trains.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import requests

from .data_model import EncodedSentence, Example, Provenance
from .errors import (
    CacheFormatError,
    CacheLookupError,
    ContractError,
    InputError,
    TransportError,
)
from .preprocess import (
    AlignmentMap,
    MaskedSentence,
    MaskRegistry,
    align_subwords,
    example_stream_seed,
    mask_entities,
    project_states,
)

# ---------------------------------------------------------------------------
# hashed provider


def _hash_key(seed: int, *parts: str) -> int:
    """Collision-resistant key over length-prefixed parts; stable across platforms."""
    h = hashlib.blake2b(digest_size=16)
    for part in (str(int(seed)), *parts):
        raw = part.encode("utf-8")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return int.from_bytes(h.digest(), "little")


def _hashed_vector(key: int, d_enc: int) -> np.ndarray:
    rng = np.random.default_rng(key)
    return rng.uniform(-1.0, 1.0, size=d_enc)


def hashed_encode(masked: MaskedSentence, d_enc: int, seed: int) -> EncodedSentence:
    """Deterministic pseudo-embeddings: row i depends only on (token i, i, seed)."""
    if d_enc < 1:
        raise InputError(f"d_enc must be >= 1, got {d_enc}")
    states = np.empty((len(masked.tokens), d_enc), dtype=np.float64)
    for i, token in enumerate(masked.tokens):
        states[i] = _hashed_vector(_hash_key(seed, "token", str(i), token), d_enc)
    cls = _hashed_vector(_hash_key(seed, "cls", *masked.tokens), d_enc)
    return EncodedSentence(cls=cls, word_states=states, provenance=Provenance("hashed", seed))


# ---------------------------------------------------------------------------
# binary cache

_MAGIC = b"DGRX"
_VERSION = 1
_DTYPES = {8: "<f8", 4: "<f4"}


def cache_write(path: str | Path, sentences, dtype: str = "f64") -> None:
    """Write (id, EncodedSentence) pairs with an index table for random access.

    Layout, all little-endian: magic "DGRX", version u32, d_enc u32,
    bytes-per-value u32, provider string (u32 length + utf-8), seed i64,
    record count u32, then per record (id length u32, id bytes, row count u32,
    payload offset u64), then payloads (cls row followed by word rows).
    """
    sentences = list(sentences)
    if not sentences:
        raise InputError("refusing to write an empty embedding cache")
    itemsize = {"f64": 8, "f32": 4}.get(dtype)
    if itemsize is None:
        raise InputError(f"cache dtype must be f64 or f32, got {dtype!r}")
    d_enc = sentences[0][1].d_enc
    provenance = sentences[0][1].provenance
    ids_seen = set()
    for sid, enc in sentences:
        if enc.d_enc != d_enc:
            raise InputError(f"record {sid!r} has d_enc {enc.d_enc}, cache has {d_enc}")
        if enc.provenance != provenance:
            raise InputError(f"record {sid!r} provenance {enc.provenance} differs from {provenance}")
        if sid in ids_seen:
            raise InputError(f"duplicate cache id {sid!r}")
        ids_seen.add(sid)

    provider_raw = provenance.provider.encode("utf-8")
    header = bytearray()
    header += _MAGIC
    header += struct.pack("<II", _VERSION, d_enc)
    header += struct.pack("<I", itemsize)
    header += struct.pack("<I", len(provider_raw)) + provider_raw
    header += struct.pack("<q", provenance.seed)
    header += struct.pack("<I", len(sentences))

    table_size = sum(4 + len(sid.encode("utf-8")) + 4 + 8 for sid, _ in sentences)
    offset = len(header) + table_size
    table = bytearray()
    payload = bytearray()
    np_dtype = _DTYPES[itemsize]
    for sid, enc in sentences:
        id_raw = sid.encode("utf-8")
        n = enc.n_words
        table += struct.pack("<I", len(id_raw)) + id_raw + struct.pack("<IQ", n, offset)
        block = np.concatenate([enc.cls[None, :], enc.word_states], axis=0).astype(np_dtype)
        payload += block.tobytes(order="C")
        offset += (1 + n) * d_enc * itemsize

    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(table)
        fh.write(payload)


class EmbeddingCache:
    """Random-access reader for the binary cache format."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        raw = self.path.read_bytes()
        self._raw = raw
        try:
            if raw[:4] != _MAGIC:
                raise CacheFormatError(f"{path}: bad magic {raw[:4]!r}")
            pos = 4
            version, d_enc = struct.unpack_from("<II", raw, pos)
            pos += 8
            if version != _VERSION:
                raise CacheFormatError(f"{path}: unsupported cache version {version}")
            (itemsize,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            if itemsize not in _DTYPES:
                raise CacheFormatError(f"{path}: unsupported bytes-per-value {itemsize}")
            (provider_len,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            provider = raw[pos : pos + provider_len].decode("utf-8")
            pos += provider_len
            (seed,) = struct.unpack_from("<q", raw, pos)
            pos += 8
            (n_records,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            records: dict[str, tuple[int, int]] = {}
            for _ in range(n_records):
                (id_len,) = struct.unpack_from("<I", raw, pos)
                pos += 4
                sid = raw[pos : pos + id_len].decode("utf-8")
                pos += id_len
                n, rec_offset = struct.unpack_from("<IQ", raw, pos)
                pos += 12
                end = rec_offset + (1 + n) * d_enc * itemsize
                if end > len(raw):
                    raise CacheFormatError(
                        f"{path}: record {sid!r} payload runs past end of file ({end} > {len(raw)})"
                    )
                records[sid] = (n, rec_offset)
        except struct.error as exc:
            raise CacheFormatError(f"{path}: truncated header or record table: {exc}") from None
        self.d_enc = d_enc
        self.itemsize = itemsize
        self.provenance = Provenance(provider, seed)
        self._records = records

    def ids(self) -> list[str]:
        return list(self._records)

    def __contains__(self, sid: str) -> bool:
        return sid in self._records

    def read(self, sid: str) -> EncodedSentence:
        try:
            n, offset = self._records[sid]
        except KeyError:
            raise CacheLookupError(f"{self.path}: no cached record for id {sid!r}") from None
        count = (1 + n) * self.d_enc
        block = np.frombuffer(self._raw, dtype=_DTYPES[self.itemsize], count=count, offset=offset)
        block = block.astype(np.float64).reshape(1 + n, self.d_enc)
        return EncodedSentence(cls=block[0], word_states=block[1:], provenance=self.provenance)


def cache_read(path: str | Path, sid: str) -> EncodedSentence:
    return EmbeddingCache(path).read(sid)


# ---------------------------------------------------------------------------
# remote provider


def remote_encode(
    endpoint: str,
    masked: MaskedSentence,
    seed: int,
    d_enc: int | None = None,
    strategy: str = "random",
    timeout: float = 10.0,
    attempts: int = 3,
    backoff: float = 0.2,
) -> tuple[EncodedSentence, AlignmentMap]:
    """Fetch subword states over HTTP, then sample one subword per word locally."""
    import time

    url = endpoint.rstrip("/") + "/embed"
    body = {"tokens": list(masked.tokens), "mask_tokens_are_reserved": True}
    last_error = None
    for attempt in range(attempts):
        try:
            resp = requests.post(url, json=body, timeout=timeout)
        except requests.RequestException as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            if attempt + 1 < attempts:
                time.sleep(backoff * (attempt + 1))
            continue
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            if attempt + 1 < attempts:
                time.sleep(backoff * (attempt + 1))
            continue
        if resp.status_code != 200:
            raise ContractError(f"embedding service rejected the request: HTTP {resp.status_code}: {resp.text[:200]}")
        break
    else:
        raise TransportError(f"embedding service unreachable after {attempts} attempts: {last_error}")

    try:
        doc = resp.json()
        d = int(doc["d"])
        cls = np.asarray(doc["cls"], dtype=np.float64)
        subword_states = np.asarray(doc["subword_states"], dtype=np.float64)
        word_to_subwords = [list(map(int, lst)) for lst in doc["word_to_subwords"]]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ContractError(f"malformed embedding service response: {exc}") from None
    if d_enc is not None and d != d_enc:
        raise ContractError(f"embedding service returned d={d}, configuration expects d_enc={d_enc}")
    if subword_states.ndim != 2 or subword_states.shape[1] != d or cls.shape != (d,):
        raise ContractError(
            f"embedding service response shapes inconsistent: cls {cls.shape}, states {subword_states.shape}, d {d}"
        )
    placeholder_subwords = [f"sw{i}" for i in range(subword_states.shape[0])]
    amap = align_subwords(masked.tokens, placeholder_subwords, word_to_subwords, seed, strategy)
    enc = project_states(subword_states, cls, amap, provenance=Provenance("remote", seed))
    return enc, amap


# ---------------------------------------------------------------------------
# provider objects used by training and the CLI


class HashedProvider:
    kind = "hashed"

    def __init__(self, d_enc: int, seed: int) -> None:
        if d_enc < 1:
            raise InputError(f"d_enc must be >= 1, got {d_enc}")
        self.d_enc = d_enc
        self.seed = seed

    def encode(self, ex: Example, masks: MaskRegistry) -> EncodedSentence:
        return hashed_encode(mask_entities(ex, masks), self.d_enc, self.seed)


class CacheProvider:
    kind = "cache"

    def __init__(self, path: str | Path) -> None:
        self.cache = EmbeddingCache(path)
        self.d_enc = self.cache.d_enc
        self.seed = self.cache.provenance.seed

    def encode(self, ex: Example, masks: MaskRegistry) -> EncodedSentence:
        enc = self.cache.read(ex.id)
        if enc.n_words != len(ex.tokens):
            raise ContractError(
                f"cached record {ex.id!r} has {enc.n_words} rows for {len(ex.tokens)} tokens"
            )
        return enc


class RemoteProvider:
    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        seed: int,
        d_enc: int | None = None,
        strategy: str = "random",
        timeout: float = 10.0,
        attempts: int = 3,
        backoff: float = 0.2,
    ) -> None:
        self.endpoint = endpoint
        self.seed = seed
        self.d_enc = d_enc
        self.strategy = strategy
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff

    def encode(self, ex: Example, masks: MaskRegistry) -> EncodedSentence:
        masked = mask_entities(ex, masks)
        stream_seed = example_stream_seed(self.seed, ex.id)
        enc, _ = remote_encode(
            self.endpoint,
            masked,
            stream_seed,
            d_enc=self.d_enc,
            strategy=self.strategy,
            timeout=self.timeout,
            attempts=self.attempts,
            backoff=self.backoff,
        )
        if self.d_enc is None:
            self.d_enc = enc.d_enc
        # stamp the provider-level seed: with the example id it reproduces the
        # alignment stream, it is shared by every record of a corpus, and it
        # fits the cache header's signed seed field (stream seeds need not)
        return EncodedSentence(
            cls=enc.cls, word_states=enc.word_states, provenance=Provenance("remote", self.seed)
        )
