"""Core domain types: examples, label registries, graphs, encodings, parameters.

Head indices follow the dependency-corpus convention: 1-based with 0 marking
the root. Spans are inclusive word-index ranges, never subword ranges. All
types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaError
from .numerics import Tensor

Span = tuple[int, int]


@dataclass(frozen=True)
class RelationLabel:
    name: str
    index: int
    is_no_relation: bool = False


@dataclass(frozen=True)
class NerType:
    name: str
    index: int


class LabelRegistry:
    """Closed, ordered set of relation labels with exactly one negative label."""

    def __init__(self, labels: list[RelationLabel] | tuple[RelationLabel, ...]) -> None:
        ordered = tuple(sorted(labels, key=lambda lab: lab.index))
        indices = [lab.index for lab in ordered]
        if indices != list(range(len(ordered))):
            raise SchemaError(f"relation indices must be a bijection onto [0, {len(ordered)}), got {indices}")
        negatives = [lab for lab in ordered if lab.is_no_relation]
        if len(negatives) != 1:
            raise SchemaError(f"expected exactly one no-relation label, found {len(negatives)}")
        names = [lab.name for lab in ordered]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate relation label names")
        self.labels = ordered
        self.no_relation = negatives[0]
        self._by_name = {lab.name: lab for lab in ordered}

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, index: int) -> RelationLabel:
        return self.labels[index]

    def by_name(self, name: str) -> RelationLabel:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown relation label: {name!r}") from None


class NerRegistry:
    """Closed set of named-entity types."""

    def __init__(self, types: list[NerType] | tuple[NerType, ...]) -> None:
        ordered = tuple(sorted(types, key=lambda t: t.index))
        indices = [t.index for t in ordered]
        if indices != list(range(len(ordered))):
            raise SchemaError(f"NER indices must be a bijection onto [0, {len(ordered)}), got {indices}")
        names = [t.name for t in ordered]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate NER type names")
        self.types = ordered
        self._by_name = {t.name: t for t in ordered}

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def by_name(self, name: str) -> NerType:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown NER type: {name!r}") from None


@dataclass(frozen=True)
class Registry:
    """Relation and NER registries loaded from one sidecar JSON file."""

    relations: LabelRegistry
    ner: NerRegistry

    @classmethod
    def from_dict(cls, doc: dict) -> Registry:
        try:
            no_relation = doc["no_relation"]
            relation_rows = doc["relations"]
            ner_rows = doc["ner_types"]
        except KeyError as exc:
            raise SchemaError(f"registry file is missing the {exc.args[0]!r} field") from None
        labels = [
            RelationLabel(row["name"], int(row["index"]), row["name"] == no_relation)
            for row in relation_rows
        ]
        types = [NerType(row["name"], int(row["index"])) for row in ner_rows]
        registry = cls(LabelRegistry(labels), NerRegistry(types))
        if not registry.relations.no_relation.name == no_relation:
            raise SchemaError(f"no_relation name {no_relation!r} not present in the relation list")
        return registry

    @classmethod
    def load(cls, path: str | Path) -> Registry:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"registry file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def from_names(cls, relation_names: list[str], no_relation: str, ner_names: list[str]) -> Registry:
        doc = {
            "relations": [{"name": n, "index": i} for i, n in enumerate(relation_names)],
            "no_relation": no_relation,
            "ner_types": [{"name": n, "index": i} for i, n in enumerate(ner_names)],
        }
        return cls.from_dict(doc)

    @classmethod
    def default(cls) -> Registry:
        """The bundled 42-relation / 17-NER-type registry."""
        with resources.files("dgrx.data").joinpath("tacred_registry.json").open(encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "relations": [{"name": lab.name, "index": lab.index} for lab in self.relations],
            "no_relation": self.relations.no_relation.name,
            "ner_types": [{"name": t.name, "index": t.index} for t in self.ner],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class Example:
    """One sentence with entity spans, NER types, dependency heads, and a gold relation."""

    id: str
    tokens: tuple[str, ...]
    subj_span: Span
    obj_span: Span
    subj_ner: NerType
    obj_ner: NerType
    relation: RelationLabel
    heads: tuple[int, ...] | None = None


def validate_heads(heads, n: int) -> list[str]:
    """Structural checks for 1-based head indices over n words; 0 marks the root."""
    violations: list[str] = []
    if len(heads) != n:
        return [f"heads: length {len(heads)} does not match token count {n}"]
    roots = sum(1 for h in heads if h == 0)
    if roots == 0:
        violations.append("heads: no root")
    elif roots > 1:
        violations.append(f"heads: multiple roots ({roots})")
    if any(h < 0 or h > n for h in heads):
        violations.append("heads: parent index out of range")
        return violations
    if roots == 1:
        for start in range(n):
            node, steps = start, 0
            while heads[node] != 0:
                node = heads[node] - 1
                steps += 1
                if steps > n:
                    violations.append("heads: cycle detected")
                    return violations
    return violations


def _span_violations(name: str, span: Span, n: int) -> list[str]:
    start, end = span
    if start > end:
        return [f"{name}: empty span [{start}, {end}]"]
    if start < 0 or end >= n:
        return [f"{name}: out of bounds [{start}, {end}] for {n} tokens"]
    return []


def validate_example(ex: Example) -> list[str]:
    """Return all invariant violations; an empty list means the example is well formed."""
    violations: list[str] = []
    n = len(ex.tokens)
    if n == 0:
        violations.append("tokens: empty")
        return violations
    violations += _span_violations("subj_span", ex.subj_span, n)
    violations += _span_violations("obj_span", ex.obj_span, n)
    if not violations:
        if max(ex.subj_span[0], ex.obj_span[0]) <= min(ex.subj_span[1], ex.obj_span[1]):
            violations.append("spans: overlapping spans")
    if ex.heads is None:
        violations.append("heads: missing")
    else:
        violations += validate_heads(ex.heads, n)
    return violations


@dataclass(frozen=True)
class DependencyGraph:
    """Symmetric adjacency with self-loops derived from a parse tree."""

    n: int
    adjacency: np.ndarray  # (n, n) of {0, 1}


@dataclass(frozen=True)
class Provenance:
    provider: str
    seed: int


@dataclass(frozen=True)
class EncodedSentence:
    """Sentence-level vector plus one contextual vector per word."""

    cls: np.ndarray          # (d_enc,)
    word_states: np.ndarray  # (n, d_enc)
    provenance: Provenance

    def __post_init__(self) -> None:
        cls_arr = np.array(self.cls, dtype=np.float64)
        states = np.array(self.word_states, dtype=np.float64)
        if cls_arr.ndim != 1 or states.ndim != 2 or states.shape[1] != cls_arr.shape[0]:
            raise SchemaError(
                f"encoded sentence shapes inconsistent: cls {cls_arr.shape}, states {states.shape}"
            )
        if not (np.isfinite(cls_arr).all() and np.isfinite(states).all()):
            raise SchemaError("encoded sentence contains non-finite values")
        cls_arr.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "cls", cls_arr)
        object.__setattr__(self, "word_states", states)

    @property
    def d_enc(self) -> int:
        return self.cls.shape[0]

    @property
    def n_words(self) -> int:
        return self.word_states.shape[0]


@dataclass(frozen=True)
class ModelConfig:
    """Head hyperparameters. Learning rates default to the two-group scheme."""

    gcn_layers: int = 2
    d_gcn: int = 400
    d_ff: int = 400
    activation: str = "relu"
    adjacency_normalization: str = "none"
    seed: int = 13
    lr_encoder: float = 3e-5
    lr_head: float = 0.01

    def __post_init__(self) -> None:
        if self.gcn_layers < 1:
            raise ConfigError(f"gcn_layers must be >= 1, got {self.gcn_layers}")
        if self.d_gcn < 1 or self.d_ff < 1:
            raise ConfigError(f"dimensions must be >= 1, got d_gcn={self.d_gcn} d_ff={self.d_ff}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation: {self.activation!r}")
        if self.adjacency_normalization not in ("none", "degree"):
            raise ConfigError(f"unsupported adjacency normalization: {self.adjacency_normalization!r}")
        if self.lr_encoder < 0 or self.lr_head < 0:
            raise ConfigError("learning rates must be >= 0")


@dataclass
class ModelParams:
    """All trainable tensors of the head.

    Weight matrices are stored (out_dim, in_dim) and applied to column
    vectors, so a layer computes rows of H @ W^T.
    """

    gcn_weights: tuple[Tensor, ...]      # each (d_gcn, d_gcn)
    gcn_biases: tuple[Tensor, ...]       # each (d_gcn,)
    input_proj: Tensor | None            # (d_gcn, d_enc) when d_enc != d_gcn
    head_weight: Tensor                  # (d_ff, 3 * d_gcn)
    head_bias: Tensor                    # (d_ff,)
    classifier_weight: Tensor            # (|R|, d_enc + d_ff)
    classifier_bias: Tensor              # (|R|,)

    def tensors(self) -> dict[str, Tensor]:
        named: dict[str, Tensor] = {}
        if self.input_proj is not None:
            named["input_proj"] = self.input_proj
        for i, (w, b) in enumerate(zip(self.gcn_weights, self.gcn_biases)):
            named[f"gcn.{i}.weight"] = w
            named[f"gcn.{i}.bias"] = b
        named["head.weight"] = self.head_weight
        named["head.bias"] = self.head_bias
        named["classifier.weight"] = self.classifier_weight
        named["classifier.bias"] = self.classifier_bias
        return named

    @property
    def n_layers(self) -> int:
        return len(self.gcn_weights)

    @property
    def d_gcn(self) -> int:
        return self.gcn_weights[0].shape[0]

    @property
    def d_ff(self) -> int:
        return self.head_weight.shape[0]

    @property
    def d_enc(self) -> int:
        return self.classifier_weight.shape[1] - self.d_ff

    @property
    def n_relations(self) -> int:
        return self.classifier_weight.shape[0]

    def validate(self) -> None:
        d = self.d_gcn
        if len(self.gcn_weights) != len(self.gcn_biases) or not self.gcn_weights:
            raise SchemaError("mismatched or empty GCN layer lists")
        for i, (w, b) in enumerate(zip(self.gcn_weights, self.gcn_biases)):
            if w.shape != (d, d) or b.shape != (d,):
                raise SchemaError(f"GCN layer {i} shapes inconsistent: {w.shape}, {b.shape}")
        if self.head_weight.shape != (self.d_ff, 3 * d) or self.head_bias.shape != (self.d_ff,):
            raise SchemaError(f"head shapes inconsistent: {self.head_weight.shape}, {self.head_bias.shape}")
        if self.input_proj is not None and self.input_proj.shape != (d, self.d_enc):
            raise SchemaError(f"input projection shape {self.input_proj.shape} inconsistent with d_enc {self.d_enc}")
        if self.input_proj is None and self.d_enc != d:
            raise SchemaError(f"no input projection but d_enc {self.d_enc} != d_gcn {d}")
        if self.classifier_bias.shape != (self.n_relations,):
            raise SchemaError("classifier bias shape inconsistent")
        for name, t in self.tensors().items():
            if not np.isfinite(t.data).all():
                raise SchemaError(f"parameter {name} contains non-finite values")
