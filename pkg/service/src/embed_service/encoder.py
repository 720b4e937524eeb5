"""Seeded stand-in for a pretrained masked-language-model encoder.

No model weights ship with this service. Every state is a pure function of
the request and the model's seed, so shapes, alignment maps, and determinism
behave exactly as they would with a real checkpoint behind the same API.
Each vector mixes a per-piece component with a whole-sequence component, so
the same piece gets different states in different sentences, the way a
contextual encoder would produce them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .tokenizer import CLS, SEP, tokenize


class InputError(ValueError):
    """Request malformed: empty input, wrong types, unknown model."""


class LengthBudgetError(ValueError):
    """Sequence longer than the encoder accepts."""


@dataclass(frozen=True)
class ModelSpec:
    d: int
    max_subwords: int  # budget counts the two special positions
    weight_seed: int


MODELS = {
    "stub-mlm-tiny": ModelSpec(d=32, max_subwords=128, weight_seed=11),
    "stub-mlm-base": ModelSpec(d=64, max_subwords=256, weight_seed=23),
    "stub-mlm-large": ModelSpec(d=128, max_subwords=512, weight_seed=47),
}
DEFAULT_MODEL = "stub-mlm-base"


@dataclass(frozen=True)
class EmbedResult:
    d: int
    cls: list[float]
    subword_states: list[list[float]]
    word_to_subwords: list[list[int]]
    model_id: str

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "cls": self.cls,
            "subword_states": self.subword_states,
            "word_to_subwords": self.word_to_subwords,
            "model_id": self.model_id,
        }


def _key(seed: int, *parts: str) -> int:
    h = hashlib.blake2b(digest_size=16)
    for part in (str(seed), *parts):
        raw = part.encode("utf-8")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return int.from_bytes(h.digest(), "little")


def _unit(key: int, d: int) -> np.ndarray:
    return np.random.default_rng(key).uniform(-1.0, 1.0, size=d)


class StubEncoder:
    def __init__(self, model_id: str = DEFAULT_MODEL) -> None:
        spec = MODELS.get(model_id)
        if spec is None:
            raise InputError(f"unknown model id {model_id!r}; available: {', '.join(sorted(MODELS))}")
        self.model_id = model_id
        self.spec = spec

    @property
    def d(self) -> int:
        return self.spec.d

    def encode(self, tokens, mask_tokens_are_reserved: bool = True) -> EmbedResult:
        if not isinstance(tokens, list) or not tokens:
            raise InputError("tokens must be a non-empty list of words")
        for i, word in enumerate(tokens):
            if not isinstance(word, str) or not word:
                raise InputError(f"token {i} must be a non-empty string, got {word!r}")

        pieces, mapping = tokenize(tokens, reserved_intact=bool(mask_tokens_are_reserved))
        sequence = [CLS, *pieces, SEP]
        if len(sequence) > self.spec.max_subwords:
            raise LengthBudgetError(
                f"{len(sequence)} subwords exceed the {self.spec.max_subwords}-subword budget of {self.model_id}"
            )

        # whole-sequence fingerprint drives the contextual component
        ctx = hashlib.blake2b("\x00".join(sequence).encode("utf-8"), digest_size=16).hexdigest()
        seed = self.spec.weight_seed
        d = self.spec.d

        def state(position: int, piece: str) -> np.ndarray:
            local = _unit(_key(seed, "piece", str(position), piece), d)
            context = _unit(_key(seed, "ctx", ctx, str(position)), d)
            return 0.8 * local + 0.2 * context

        cls_vec = state(0, CLS)
        rows = [state(1 + j, piece) for j, piece in enumerate(pieces)]
        return EmbedResult(
            d=d,
            cls=cls_vec.tolist(),
            subword_states=[row.tolist() for row in rows],
            word_to_subwords=mapping,
            model_id=self.model_id,
        )
