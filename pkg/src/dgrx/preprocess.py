"""Entity masking and subword-to-word alignment.

Masking replaces every token of an entity span with one reserved token keyed
by (role, NER type), so the classifier sees entity type and position but not
surface form. Alignment picks one subword per word, by seeded uniform
sampling, so downstream layers operate on the word-level dependency tree.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import EncodedSentence, Example, NerType, Provenance, Registry, validate_example
from .errors import AlignmentError, ConfigError, InputError, SchemaError, ShapeError

ROLES = ("subj", "obj")


@dataclass(frozen=True)
class MaskEntry:
    role: str
    ner: str
    token: str


class MaskRegistry:
    """Reserved-token table keyed by (role, NER type name)."""

    def __init__(self, entries: list[MaskEntry] | tuple[MaskEntry, ...]) -> None:
        mapping: dict[tuple[str, str], str] = {}
        tokens_seen: dict[str, tuple[str, str]] = {}
        for e in entries:
            if e.role not in ROLES:
                raise SchemaError(f"mask registry role must be one of {ROLES}, got {e.role!r}")
            key = (e.role, e.ner)
            if key in mapping:
                raise SchemaError(f"duplicate mask registry entry for {key}")
            if e.token in tokens_seen:
                raise SchemaError(f"reserved token {e.token!r} assigned to both {tokens_seen[e.token]} and {key}")
            mapping[key] = e.token
            tokens_seen[e.token] = key
        self.entries = tuple(entries)
        self._mapping = mapping

    def token(self, role: str, ner: NerType | str) -> str:
        name = ner.name if isinstance(ner, NerType) else ner
        try:
            return self._mapping[(role, name)]
        except KeyError:
            raise ConfigError(f"mask registry has no entry for role={role!r}, ner={name!r}") from None

    def reserved_tokens(self) -> frozenset[str]:
        return frozenset(self._mapping.values())

    @classmethod
    def from_list(cls, rows: list[dict]) -> MaskRegistry:
        try:
            entries = [MaskEntry(row["role"], row["ner"], row["token"]) for row in rows]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"mask registry rows need role/ner/token fields: {exc}") from None
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> MaskRegistry:
        with open(path, encoding="utf-8") as fh:
            try:
                rows = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"mask registry {path} is not valid JSON: {exc}") from None
        if not isinstance(rows, list):
            raise SchemaError("mask registry file must hold a JSON array")
        return cls.from_list(rows)

    @classmethod
    def default_for(cls, registry: Registry) -> MaskRegistry:
        """Assign [unused_i] tokens: subject roles first (by NER index), then object roles."""
        entries = []
        i = 1
        for role in ROLES:
            for ner in registry.ner:
                entries.append(MaskEntry(role, ner.name, f"[unused_{i}]"))
                i += 1
        return cls(entries)

    def to_list(self) -> list[dict]:
        return [{"role": e.role, "ner": e.ner, "token": e.token} for e in self.entries]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_list(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class MaskedSentence:
    tokens: tuple[str, ...]
    mask_registry: MaskRegistry


@dataclass(frozen=True)
class AlignmentMap:
    """Per-word subword index lists and the one index selected for each word."""

    word_to_subwords: tuple[tuple[int, ...], ...]
    chosen: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.chosen) != len(self.word_to_subwords):
            raise AlignmentError("chosen length does not match word count")
        for i, (c, lst) in enumerate(zip(self.chosen, self.word_to_subwords)):
            if c not in lst:
                raise AlignmentError(f"chosen index {c} for word {i} not in its subword list {lst}")


def mask_entities(ex: Example, registry: MaskRegistry) -> MaskedSentence:
    """Replace both entity spans with their reserved tokens; everything else passes through."""
    # masking never looks at the parse, so a missing one is not a violation here
    violations = [v for v in validate_example(ex) if v != "heads: missing"]
    if violations:
        raise InputError(f"example {ex.id}: " + "; ".join(violations))
    subj_token = registry.token("subj", ex.subj_ner)
    obj_token = registry.token("obj", ex.obj_ner)
    tokens = list(ex.tokens)
    for i in range(ex.subj_span[0], ex.subj_span[1] + 1):
        tokens[i] = subj_token
    for i in range(ex.obj_span[0], ex.obj_span[1] + 1):
        tokens[i] = obj_token
    return MaskedSentence(tokens=tuple(tokens), mask_registry=registry)


def example_stream_seed(seed: int, example_id: str) -> int:
    """Stable per-example RNG seed; independent of corpus order and platform."""
    digest = hashlib.blake2b(
        example_id.encode("utf-8"), digest_size=8, key=str(int(seed)).encode("ascii")
    ).digest()
    return int.from_bytes(digest, "little")


def _check_partition(word_to_subwords, n_subwords: int) -> None:
    position = 0
    for i, lst in enumerate(word_to_subwords):
        if len(lst) == 0:
            raise AlignmentError(f"word {i} has an empty subword list")
        for idx in lst:
            if idx != position:
                raise AlignmentError(
                    f"word_to_subwords is not an in-order partition: expected index {position}, got {idx}"
                )
            position += 1
    if position != n_subwords:
        raise AlignmentError(
            f"word_to_subwords covers {position} subwords but there are {n_subwords}"
        )


def align_subwords(words, subwords, word_to_subwords, rng_seed: int, strategy: str = "random") -> AlignmentMap:
    """Select one subword per word.

    strategy "random" draws uniformly from each word's subword list using a
    stream seeded only by rng_seed; "first" always takes the first subword.
    """
    if len(word_to_subwords) != len(words):
        raise AlignmentError(
            f"word_to_subwords has {len(word_to_subwords)} entries for {len(words)} words"
        )
    _check_partition(word_to_subwords, len(subwords))
    if strategy == "first":
        chosen = tuple(lst[0] for lst in word_to_subwords)
    elif strategy == "random":
        rng = np.random.default_rng(rng_seed)
        chosen = tuple(int(lst[int(rng.integers(len(lst)))]) for lst in word_to_subwords)
    else:
        raise ConfigError(f"unknown alignment strategy: {strategy!r}")
    return AlignmentMap(
        word_to_subwords=tuple(tuple(int(i) for i in lst) for lst in word_to_subwords),
        chosen=chosen,
    )


def project_states(
    subword_states: np.ndarray,
    cls: np.ndarray,
    amap: AlignmentMap,
    provenance: Provenance | None = None,
) -> EncodedSentence:
    """Copy the chosen subword row for each word; cls passes through unchanged."""
    subword_states = np.asarray(subword_states, dtype=np.float64)
    n_rows = subword_states.shape[0]
    for c in amap.chosen:
        if c < 0 or c >= n_rows:
            raise ShapeError(f"chosen subword index {c} out of range for {n_rows} rows")
    word_states = subword_states[list(amap.chosen), :]
    if provenance is None:
        provenance = Provenance(provider="projected", seed=0)
    return EncodedSentence(cls=cls, word_states=word_states, provenance=provenance)
