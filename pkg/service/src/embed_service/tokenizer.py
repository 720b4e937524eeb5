"""Deterministic subword splitting in the WordPiece style.

A real encoder carves words into pieces from a learned vocabulary file. This
service ships no checkpoint, so the piece count comes from a hash of the word
instead: the same word splits the same way on every machine and every run,
which is all the alignment contract needs. Continuation pieces carry the
usual ## marker.
"""

from __future__ import annotations

import hashlib
import re

CLS = "[CLS]"
SEP = "[SEP]"
# reserved ids that entity masking substitutes for real tokens
_RESERVED = re.compile(r"\[unused_\d+\]\Z")


def _digest(word: str) -> int:
    return int.from_bytes(hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest(), "little")


def is_reserved(word: str) -> bool:
    return bool(_RESERVED.match(word)) or word in (CLS, SEP)


def split_word(word: str, reserved_intact: bool = True) -> list[str]:
    """Split one word into 1..4 pieces, deterministically.

    Reserved tokens stay whole when reserved_intact is set, mirroring an
    encoder whose vocabulary has dedicated entries for them.
    """
    if reserved_intact and is_reserved(word):
        return [word]
    if len(word) <= 4:
        return [word]
    k = 1 + _digest(word) % min(4, len(word) // 2)
    if k == 1:
        return [word]
    bounds = [round(i * len(word) / k) for i in range(k + 1)]
    pieces = [word[bounds[i] : bounds[i + 1]] for i in range(k)]
    return [pieces[0]] + ["##" + p for p in pieces[1:]]


def tokenize(tokens, reserved_intact: bool = True) -> tuple[list[str], list[list[int]]]:
    """Flatten words into pieces plus a per-word map of piece indices.

    Indices refer to the flattened piece list only; [CLS] and [SEP] are added
    later by the encoder and never appear in the map. The map lists are
    strictly increasing and partition range(len(pieces)) in order.
    """
    pieces: list[str] = []
    mapping: list[list[int]] = []
    for word in tokens:
        split = split_word(word, reserved_intact)
        start = len(pieces)
        pieces.extend(split)
        mapping.append(list(range(start, len(pieces))))
    return pieces, mapping
