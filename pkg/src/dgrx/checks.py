"""Finite-difference gradient checking on small random model instances.

Central differences sit 1e-5 from the evaluation point, so instances are
resampled until every ReLU pre-activation and every pooling column gap
clears a 1e-3 margin; at a kink or a pooling tie the analytic and numeric
derivatives legitimately disagree and the check would report noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data_model import DependencyGraph, EncodedSentence, ModelConfig, ModelParams, Provenance
from .errors import InputError
from .graph import build_graph, normalize_adjacency
from .model import forward_example, init_params
from .numerics import Tape, grad_check
from .synthetic import random_tree_heads

Span = tuple[int, int]


@dataclass(frozen=True)
class GradcheckInstance:
    params: ModelParams
    encoded: EncodedSentence
    graph: DependencyGraph
    subj_span: Span
    obj_span: Span
    gold: int
    config: ModelConfig
    seed: int  # the seed that produced margin-safe values


def instance_margin(params: ModelParams, enc: EncodedSentence, adjacency: np.ndarray, spans) -> float:
    """Smallest |pre-ReLU| value and pooling top-two column gap, by plain numpy forward."""
    h = enc.word_states
    if params.input_proj is not None:
        h = h @ params.input_proj.data.T
    margin = np.inf
    for w, b in zip(params.gcn_weights, params.gcn_biases):
        z = adjacency @ h @ w.data.T + b.data
        margin = min(margin, float(np.min(np.abs(z))))
        h = np.maximum(z, 0.0)
    n = h.shape[0]
    masks = [np.ones(n, dtype=bool)]
    for lo, hi in spans:
        m = np.zeros(n, dtype=bool)
        m[lo : hi + 1] = True
        masks.append(m)
    for m in masks:
        rows = h[m]
        if rows.shape[0] < 2:
            continue
        top2 = np.sort(rows, axis=0)[-2:, :]
        margin = min(margin, float(np.min(top2[1] - top2[0])))
    return margin


def build_instance(
    seed: int,
    n_tokens: int = 5,
    d_enc: int = 8,
    n_relations: int = 5,
    config: ModelConfig | None = None,
    margin: float = 1e-3,
    max_tries: int = 200,
) -> GradcheckInstance:
    """Draw random (params, sentence, tree, spans) with all margins >= margin."""
    if n_tokens < 2:
        raise InputError(f"gradcheck instance needs >= 2 tokens, got {n_tokens}")
    config = config or ModelConfig(gcn_layers=2, d_gcn=6, d_ff=6, seed=seed)
    for attempt in range(max_tries):
        draw_seed = seed + 1000 * attempt
        rng = np.random.default_rng(draw_seed)
        graph = build_graph(random_tree_heads(rng, n_tokens))
        adjacency = normalize_adjacency(graph, config.adjacency_normalization)
        enc = EncodedSentence(
            cls=rng.uniform(-1, 1, d_enc),
            word_states=rng.uniform(-1, 1, (n_tokens, d_enc)),
            provenance=Provenance("gradcheck", draw_seed),
        )
        subj_start = int(rng.integers(n_tokens))
        subj = (subj_start, min(n_tokens - 1, subj_start + int(rng.integers(2))))
        remaining = [i for i in range(n_tokens) if i < subj[0] or i > subj[1]]
        if not remaining:
            continue
        obj_start = int(rng.choice(remaining))
        obj_end = obj_start
        while obj_end + 1 in remaining and rng.random() < 0.3:
            obj_end += 1
        obj = (obj_start, obj_end)
        gold = int(rng.integers(n_relations))
        params = init_params(replace(config, seed=draw_seed), d_enc, n_relations)
        if instance_margin(params, enc, adjacency, [subj, obj]) >= margin:
            return GradcheckInstance(
                params=params,
                encoded=enc,
                graph=graph,
                subj_span=subj,
                obj_span=obj,
                gold=gold,
                config=config,
                seed=draw_seed,
            )
    raise InputError(f"no margin-safe gradcheck instance found in {max_tries} tries from seed {seed}")


def run_gradcheck(instance: GradcheckInstance, eps: float = 1e-5, bug_scale: float = 1.0) -> float:
    """Worst relative error over every parameter coordinate.

    bug_scale != 1 corrupts one parameter gradient after backward, simulating
    a backward-pass defect so the check itself can be shown to catch one.
    """

    def loss_fn(_tensors):
        tape = Tape()
        out = forward_example(
            tape,
            instance.encoded,
            instance.graph,
            instance.subj_span,
            instance.obj_span,
            instance.params,
            instance.config,
            gold=instance.gold,
        )
        if bug_scale != 1.0:
            target = instance.params.head_bias

            def corrupt() -> None:
                if target.grad is not None:
                    target.grad *= bug_scale

            # runs last in the reversed replay, after all accumulation
            tape._steps.insert(0, corrupt)
        return tape, out.loss

    return grad_check(loss_fn, instance.params.tensors(), eps=eps)
