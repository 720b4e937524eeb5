"""The graph head: L GCN layers, span max-pooling, concatenation, classifier.

Layer rule, per node i: h_i = relu(sum_j A_ij (W h_j) + b), evaluated in
matrix form as relu(A @ H @ W^T + b). The final representation is the raw
sentence vector concatenated with an affine map of the three pooled vectors,
then classified by a single affine layer with softmax.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import DependencyGraph, ModelConfig, ModelParams
from .errors import CheckpointError, ShapeError
from .graph import normalize_adjacency
from .numerics import Tape, Tensor, softmax

Span = tuple[int, int]


@dataclass(frozen=True)
class PooledFeatures:
    h_sentence: Tensor
    h_s: Tensor
    h_o: Tensor


@dataclass(frozen=True)
class FinalRepresentation:
    h_final: Tensor  # d_enc + d_ff


@dataclass(frozen=True)
class ClassifierOutput:
    logits: Tensor
    probabilities: np.ndarray
    loss: Tensor | None

    @property
    def predicted(self) -> int:
        return int(np.argmax(self.logits.data))


def _xavier(rng: np.random.Generator, out_dim: int, in_dim: int) -> Tensor:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return Tensor(rng.uniform(-limit, limit, size=(out_dim, in_dim)))


def init_params(config: ModelConfig, d_enc: int, n_relations: int) -> ModelParams:
    """Seeded Xavier-uniform weights, zero biases; draw order is fixed."""
    rng = np.random.default_rng(config.seed)
    d = config.d_gcn
    input_proj = _xavier(rng, d, d_enc) if d_enc != d else None
    gcn_weights = tuple(_xavier(rng, d, d) for _ in range(config.gcn_layers))
    gcn_biases = tuple(Tensor(np.zeros(d)) for _ in range(config.gcn_layers))
    head_weight = _xavier(rng, config.d_ff, 3 * d)
    head_bias = Tensor(np.zeros(config.d_ff))
    classifier_weight = _xavier(rng, n_relations, d_enc + config.d_ff)
    classifier_bias = Tensor(np.zeros(n_relations))
    params = ModelParams(
        gcn_weights=gcn_weights,
        gcn_biases=gcn_biases,
        input_proj=input_proj,
        head_weight=head_weight,
        head_bias=head_bias,
        classifier_weight=classifier_weight,
        classifier_bias=classifier_bias,
    )
    params.validate()
    return params


def gcn_layer(tape: Tape, h_prev: Tensor, adjacency: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """relu(A @ H @ W^T + b); one neighborhood aggregation step."""
    projected = tape.matmul_nt(h_prev, weight)
    aggregated = tape.matmul(adjacency, projected)
    return tape.relu(tape.add_bias(aggregated, bias))


def run_gcn(tape: Tape, h0_states: np.ndarray, adjacency: np.ndarray, params: ModelParams, config: ModelConfig) -> Tensor:
    """Project word states to d_gcn if needed, then apply every GCN layer."""
    h0_states = np.asarray(h0_states, dtype=np.float64)
    if h0_states.ndim != 2:
        raise ShapeError(f"word states must be 2-D, got shape {h0_states.shape}")
    n = h0_states.shape[0]
    if adjacency.shape != (n, n):
        raise ShapeError(f"adjacency {adjacency.shape} does not match {n} words")
    h = Tensor(h0_states)
    if params.input_proj is not None:
        h = tape.matmul_nt(h, params.input_proj)
    elif h0_states.shape[1] != params.d_gcn:
        raise ShapeError(f"d_enc {h0_states.shape[1]} != d_gcn {params.d_gcn} and no input projection")
    adj = Tensor(adjacency)
    for weight, bias in zip(params.gcn_weights, params.gcn_biases):
        h = gcn_layer(tape, h, adj, weight, bias)
    return h


def _span_mask(n: int, span: Span) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[span[0] : span[1] + 1] = True
    return mask


def pool_features(tape: Tape, gcn_out: Tensor, subj_span: Span, obj_span: Span) -> PooledFeatures:
    """Column-wise max over all rows, subject rows, and object rows."""
    n = gcn_out.shape[0]
    h_sentence, _ = tape.masked_max_pool(gcn_out, np.ones(n, dtype=bool))
    h_s, _ = tape.masked_max_pool(gcn_out, _span_mask(n, subj_span))
    h_o, _ = tape.masked_max_pool(gcn_out, _span_mask(n, obj_span))
    return PooledFeatures(h_sentence=h_sentence, h_s=h_s, h_o=h_o)


def final_rep(tape: Tape, h0: np.ndarray, pooled: PooledFeatures, params: ModelParams) -> FinalRepresentation:
    """[h0; W_c([h_sentence; h_s; h_o]) + b_c]; no activation on the projection."""
    z = tape.concat([pooled.h_sentence, pooled.h_s, pooled.h_o])
    suffix = tape.add_bias(tape.matvec(params.head_weight, z), params.head_bias)
    h_final = tape.concat([Tensor(np.asarray(h0, dtype=np.float64)), suffix])
    return FinalRepresentation(h_final=h_final)


def classify(tape: Tape, rep: FinalRepresentation, params: ModelParams, gold: int | None = None) -> ClassifierOutput:
    logits = tape.add_bias(tape.matvec(params.classifier_weight, rep.h_final), params.classifier_bias)
    loss = tape.softmax_xent(logits, gold) if gold is not None else None
    return ClassifierOutput(logits=logits, probabilities=softmax(logits.data), loss=loss)


def forward_example(
    tape: Tape,
    encoded,
    graph: DependencyGraph,
    subj_span: Span,
    obj_span: Span,
    params: ModelParams,
    config: ModelConfig,
    gold: int | None = None,
) -> ClassifierOutput:
    """Full head forward pass for one sentence; loss attached when gold is given."""
    adjacency = normalize_adjacency(graph, config.adjacency_normalization)
    gcn_out = run_gcn(tape, encoded.word_states, adjacency, params, config)
    pooled = pool_features(tape, gcn_out, subj_span, obj_span)
    rep = final_rep(tape, encoded.cls, pooled, params)
    return classify(tape, rep, params, gold)


def predict(encoded, graph: DependencyGraph, subj_span: Span, obj_span: Span, params: ModelParams, config: ModelConfig) -> int:
    """Argmax label index; the throwaway tape records but never replays."""
    out = forward_example(Tape(), encoded, graph, subj_span, obj_span, params, config)
    return out.predicted


# ---------------------------------------------------------------------------
# checkpoints

_CKPT_MAGIC = b"DGCK"
_CKPT_VERSION = 1


def save_checkpoint(path: str | Path, params: ModelParams, config: ModelConfig, meta: dict) -> None:
    """magic, version u32, meta JSON (u64 length-prefixed), then named f64 tensors."""
    doc = {
        "config": {
            "gcn_layers": config.gcn_layers,
            "d_gcn": config.d_gcn,
            "d_ff": config.d_ff,
            "activation": config.activation,
            "adjacency_normalization": config.adjacency_normalization,
            "seed": config.seed,
            "lr_encoder": config.lr_encoder,
            "lr_head": config.lr_head,
        },
        "meta": meta,
    }
    blob = json.dumps(doc, sort_keys=True).encode("utf-8")
    named = params.tensors()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", _CKPT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(named)))
        for name, tensor in named.items():
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_name)))
            fh.write(raw_name)
            shape = tensor.data.shape
            fh.write(struct.pack("<I", len(shape)))
            for dim in shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(tensor.data.astype("<f8").tobytes(order="C"))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, ModelConfig, dict]:
    raw = Path(path).read_bytes()
    try:
        if raw[:4] != _CKPT_MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint magic {raw[:4]!r}")
        pos = 4
        (version,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if version != _CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        blob = raw[pos : pos + blob_len]
        if len(blob) != blob_len:
            raise CheckpointError(f"{path}: truncated metadata blob")
        pos += blob_len
        doc = json.loads(blob.decode("utf-8"))
        config = ModelConfig(**doc["config"])
        meta = doc.get("meta", {})
        (n_tensors,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        tensors: dict[str, Tensor] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            name = raw[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            shape = []
            for _ in range(ndim):
                (dim,) = struct.unpack_from("<Q", raw, pos)
                pos += 8
                shape.append(dim)
            count = int(np.prod(shape)) if shape else 1
            end = pos + count * 8
            if end > len(raw):
                raise CheckpointError(f"{path}: tensor {name!r} payload runs past end of file")
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape)
            pos += count * 8
            tensors[name] = Tensor(data)
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint: {exc}") from None

    def take(name: str) -> Tensor:
        try:
            return tensors.pop(name)
        except KeyError:
            raise CheckpointError(f"{path}: checkpoint is missing tensor {name!r}") from None

    input_proj = tensors.pop("input_proj", None)
    gcn_weights = tuple(take(f"gcn.{i}.weight") for i in range(config.gcn_layers))
    gcn_biases = tuple(take(f"gcn.{i}.bias") for i in range(config.gcn_layers))
    params = ModelParams(
        gcn_weights=gcn_weights,
        gcn_biases=gcn_biases,
        input_proj=input_proj,
        head_weight=take("head.weight"),
        head_bias=take("head.bias"),
        classifier_weight=take("classifier.weight"),
        classifier_bias=take("classifier.bias"),
    )
    if tensors:
        raise CheckpointError(f"{path}: unexpected tensors in checkpoint: {sorted(tensors)}")
    try:
        params.validate()
    except Exception as exc:
        raise CheckpointError(f"{path}: inconsistent checkpoint tensors: {exc}") from None
    return params, config, meta
