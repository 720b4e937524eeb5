"""Independent oracles the tests compare the library against.

These deliberately avoid the library's vectorized code paths: the GCN oracle
is a per-node double loop and the scorer oracle is an explicit tally, so a
bug in the real implementation cannot hide in a shared kernel.
"""

from __future__ import annotations

import numpy as np


def naive_gcn(word_states, adjacency, params):
    """Per-node, per-neighbor evaluation of the layer rule."""
    h = np.array(word_states, dtype=np.float64)
    n = h.shape[0]
    if params.input_proj is not None:
        h = np.stack([params.input_proj.data @ h[i] for i in range(n)])
    for w, b in zip(params.gcn_weights, params.gcn_biases):
        nxt = np.zeros((n, w.data.shape[0]))
        for i in range(n):
            z = b.data.copy()
            for j in range(n):
                z = z + adjacency[i, j] * (w.data @ h[j])
            nxt[i] = np.maximum(z, 0.0)
        h = nxt
    return h


def brute_score(golds, preds, no_relation):
    """Explicit TP/FP/FN tally over aligned label pairs."""
    tp = fp = fn = 0
    for g, p in zip(golds, preds):
        if p != no_relation:
            if g == p:
                tp += 1
            else:
                fp += 1
        if g != no_relation and g != p:
            fn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def naive_max_pool(rows):
    """Column-wise max by scalar loops."""
    rows = np.asarray(rows, dtype=np.float64)
    out = np.full(rows.shape[1], -np.inf)
    for i in range(rows.shape[0]):
        for c in range(rows.shape[1]):
            if rows[i, c] > out[c]:
                out[c] = rows[i, c]
    return out


def segment_permutation(n, subj, obj, rng):
    """A permutation of range(n) that keeps both spans contiguous.

    Returns (perm, new_subj, new_obj) where perm[new_position] = old_position;
    segments between/around the spans are shuffled internally and the five
    segments are reordered, so spans land at new offsets but stay blocks.
    """
    (s_lo, s_hi), (o_lo, o_hi) = sorted([subj, obj])
    segments = [
        list(range(0, s_lo)),
        list(range(s_lo, s_hi + 1)),
        list(range(s_hi + 1, o_lo)),
        list(range(o_lo, o_hi + 1)),
        list(range(o_hi + 1, n)),
    ]
    for seg in segments:
        rng.shuffle(seg)
    order = list(rng.permutation(5))
    perm: list[int] = []
    spans_at: dict[int, tuple[int, int]] = {}
    for seg_idx in order:
        if seg_idx in (1, 3):
            spans_at[seg_idx] = (len(perm), len(perm) + len(segments[seg_idx]) - 1)
        perm.extend(segments[seg_idx])
    first, second = spans_at[1], spans_at[3]
    if subj <= obj:
        new_subj, new_obj = first, second
    else:
        new_subj, new_obj = second, first
    return np.array(perm), new_subj, new_obj
