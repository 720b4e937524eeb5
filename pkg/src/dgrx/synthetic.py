"""Planted-signal toy corpora for end-to-end checks.

Every example opens with a trigger token unique to its relation, no_relation
included, so the label is a deterministic function of one marker drawn from
a closed five-way vocabulary. Construction keeps the marker's learned
representation identical across examples, which is what lets a working head
reach F1 = 1.0 on held-out data (anything well below that on a large sample
indicates a pipeline bug, not hard data):

- The marker sits at position 0: the hashed provider keys vectors by
  (token, position, seed), so only a position-stable token yields one
  consistent vector.
- Parses are chains and position 1 holds a constant anchor token, so the
  marker's graph neighborhood is the same in every sentence and its
  convolved features carry no tree-dependent noise.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusSplit
from .data_model import Example, Registry

SYNTH_RELATIONS = ("no_relation", "rel_0", "rel_1", "rel_2", "rel_3")
SYNTH_NER = ("PERSON", "ORGANIZATION", "LOCATION")


def synth_registry() -> Registry:
    return Registry.from_names(list(SYNTH_RELATIONS), "no_relation", list(SYNTH_NER))


def random_tree_heads(rng: np.random.Generator, n: int) -> tuple[int, ...]:
    # Random recursive tree: node 0 is the root, every later node attaches to
    # an earlier one. Heads are 1-based with 0 marking the root.
    heads = [0]
    for i in range(1, n):
        heads.append(int(rng.integers(1, i + 1)))
    return tuple(heads)


def make_corpus(
    n: int,
    seed: int,
    split: str = "train",
    distance_range: tuple[int, int] = (0, 14),
    registry: Registry | None = None,
) -> CorpusSplit:
    """Generate n examples with entity gaps drawn uniformly from distance_range."""
    registry = registry or synth_registry()
    rng = np.random.default_rng(seed)
    relations = list(registry.relations)
    ner_types = list(registry.ner)
    lo, hi = distance_range
    examples = []
    for i in range(n):
        relation = relations[int(rng.integers(len(relations)))]
        subj_len = int(rng.integers(1, 3))
        obj_len = int(rng.integers(1, 3))
        gap = int(rng.integers(lo, hi + 1))
        signal = f"trigger_{relation.name}"
        prefix = [signal, "anchor"] + [f"w{int(rng.integers(20))}" for _ in range(int(rng.integers(0, 3)))]
        suffix = [f"w{int(rng.integers(20))}" for _ in range(int(rng.integers(1, 4)))]
        subj = [f"e{int(rng.integers(8))}" for _ in range(subj_len)]
        obj = [f"e{int(rng.integers(8))}" for _ in range(obj_len)]
        gap_fill = [f"w{int(rng.integers(20))}" for _ in range(gap)]
        tokens = prefix + subj + gap_fill + obj + suffix
        subj_start = len(prefix)
        subj_span = (subj_start, subj_start + subj_len - 1)
        obj_start = subj_span[1] + 1 + gap
        obj_span = (obj_start, obj_start + obj_len - 1)
        if rng.random() < 0.5:
            subj_span, obj_span = obj_span, subj_span
        examples.append(
            Example(
                id=f"synth-{seed}-{i}",
                tokens=tuple(tokens),
                subj_span=subj_span,
                obj_span=obj_span,
                subj_ner=ner_types[int(rng.integers(len(ner_types)))],
                obj_ner=ner_types[int(rng.integers(len(ner_types)))],
                relation=relation,
                heads=tuple([0] + list(range(1, len(tokens)))),
            )
        )
    return CorpusSplit(name=split, examples=tuple(examples))
