"""Corpus ingestion: TACRED-style JSON records and CoNLL-U dependency parses.

Field names follow the public TACRED schema (token, subj_start, subj_type,
stanford_head, ...). Records whose stored parse is not a tree are rejected
with a per-example diagnostic instead of being repaired; the graph layers
assume a tree and silent repair would hide data bugs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .data_model import Example, Registry, validate_example
from .errors import AlignmentError, CorpusParseError, InputError, SchemaError

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class CorpusSplit:
    name: str
    examples: tuple[Example, ...]

    def __post_init__(self) -> None:
        if self.name not in SPLIT_NAMES:
            raise InputError(f"split name must be one of {SPLIT_NAMES}, got {self.name!r}")
        ids = [ex.id for ex in self.examples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate example ids in split {self.name!r}: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def _record_to_example(record: dict, index: int, registry: Registry, require_heads: bool) -> Example:
    try:
        ex_id = str(record["id"])
        tokens = tuple(str(t) for t in record["token"])
        subj_span = (int(record["subj_start"]), int(record["subj_end"]))
        obj_span = (int(record["obj_start"]), int(record["obj_end"]))
        subj_type = record["subj_type"]
        obj_type = record["obj_type"]
        relation = record["relation"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusParseError(f"record {index}: missing or malformed field: {exc}") from None

    heads = None
    raw_heads = record.get("stanford_head", record.get("head"))
    if raw_heads is not None:
        try:
            heads = tuple(int(h) for h in raw_heads)
        except (TypeError, ValueError) as exc:
            raise CorpusParseError(f"record {index} ({ex_id}): malformed head list: {exc}") from None
    elif require_heads:
        raise CorpusParseError(f"record {index} ({ex_id}): no dependency heads; load with require_heads=False and attach parses")

    n = len(tokens)
    for label, (start, end) in (("subj", subj_span), ("obj", obj_span)):
        if start > end:
            raise SchemaError(f"record {index} ({ex_id}): {label}_start {start} > {label}_end {end}")
        if start < 0 or end >= n:
            raise SchemaError(f"record {index} ({ex_id}): {label} span [{start}, {end}] out of bounds for {n} tokens")

    ex = Example(
        id=ex_id,
        tokens=tokens,
        subj_span=subj_span,
        obj_span=obj_span,
        subj_ner=registry.ner.by_name(subj_type),
        obj_ner=registry.ner.by_name(obj_type),
        relation=registry.relations.by_name(relation),
        heads=heads,
    )
    violations = validate_example(ex)
    if heads is None:
        violations = [v for v in violations if v != "heads: missing"]
    if violations:
        raise CorpusParseError(f"record {index} ({ex_id}): " + "; ".join(violations))
    return ex


def load_tacred_json(path: str | Path, registry: Registry, split: str = "train", require_heads: bool = True) -> CorpusSplit:
    """Load one split; every returned Example has been validated."""
    with open(path, encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(records, list):
        raise CorpusParseError(f"{path}: expected a JSON array of records")
    examples = [
        _record_to_example(record, i, registry, require_heads) for i, record in enumerate(records)
    ]
    return CorpusSplit(name=split, examples=tuple(examples))


def to_tacred_record(ex: Example) -> dict:
    record = {
        "id": ex.id,
        "token": list(ex.tokens),
        "subj_start": ex.subj_span[0],
        "subj_end": ex.subj_span[1],
        "obj_start": ex.obj_span[0],
        "obj_end": ex.obj_span[1],
        "subj_type": ex.subj_ner.name,
        "obj_type": ex.obj_ner.name,
        "relation": ex.relation.name,
    }
    if ex.heads is not None:
        record["stanford_head"] = list(ex.heads)
    return record


def save_tacred_json(split: CorpusSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([to_tacred_record(ex) for ex in split], fh, indent=1)
        fh.write("\n")


def load_conllu(path: str | Path) -> list[tuple[list[str], list[int]]]:
    """Read (tokens, heads) per sentence block; multiword ranges and empty nodes are skipped."""
    sentences: list[tuple[list[str], list[int]]] = []
    tokens: list[str] = []
    heads: list[int] = []

    def flush() -> None:
        nonlocal tokens, heads
        if tokens:
            sentences.append((tokens, heads))
            tokens, heads = [], []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 7:
                raise CorpusParseError(f"{path}:{lineno}: expected >= 7 tab-separated columns, got {len(cols)}")
            word_id = cols[0]
            if "-" in word_id or "." in word_id:
                continue
            try:
                idx = int(word_id)
                head = int(cols[6])
            except ValueError as exc:
                raise CorpusParseError(f"{path}:{lineno}: non-integer ID or HEAD: {exc}") from None
            if idx != len(tokens) + 1:
                raise CorpusParseError(f"{path}:{lineno}: non-contiguous token ID {idx}, expected {len(tokens) + 1}")
            tokens.append(cols[1])
            heads.append(head)
    flush()
    return sentences


def attach_parses(split: CorpusSplit, parses: list[tuple[list[str], list[int]]]) -> CorpusSplit:
    """Populate heads from parses aligned 1:1 with examples by order."""
    if len(parses) != len(split.examples):
        raise AlignmentError(f"{len(parses)} parses for {len(split.examples)} examples in split {split.name!r}")
    updated = []
    for ex, (parse_tokens, parse_heads) in zip(split.examples, parses):
        if len(parse_tokens) != len(ex.tokens):
            raise AlignmentError(
                f"example {ex.id}: parse has {len(parse_tokens)} tokens, example has {len(ex.tokens)}"
            )
        new_ex = replace(ex, heads=tuple(parse_heads))
        violations = validate_example(new_ex)
        if violations:
            raise CorpusParseError(f"example {ex.id}: " + "; ".join(violations))
        updated.append(new_ex)
    return CorpusSplit(name=split.name, examples=tuple(updated))
