import dataclasses
import struct

import numpy as np
import pytest

from dgrx.checks import build_instance, instance_margin, run_gradcheck
from dgrx.data_model import EncodedSentence, ModelConfig, ModelParams, Provenance
from dgrx.errors import CheckpointError, ShapeError
from dgrx.graph import build_graph, normalize_adjacency
from dgrx.model import (
    classify,
    final_rep,
    forward_example,
    gcn_layer,
    init_params,
    load_checkpoint,
    pool_features,
    predict,
    run_gcn,
    save_checkpoint,
)
from dgrx.numerics import Tape, Tensor
from dgrx.synthetic import random_tree_heads

from helpers import naive_gcn, naive_max_pool, segment_permutation


def identity_params(d, layers=1, d_ff=None, n_relations=3):
    """Params with identity GCN weights and zero biases for pinned examples."""
    d_ff = d_ff or d
    cfg = ModelConfig(gcn_layers=layers, d_gcn=d, d_ff=d_ff)
    params = init_params(cfg, d_enc=d, n_relations=n_relations)
    for w in params.gcn_weights:
        w.data[:] = np.eye(d)
    for b in params.gcn_biases:
        b.data[:] = 0.0
    return params, cfg


class TestInitParams:
    def test_seed_determinism(self):
        cfg = ModelConfig(gcn_layers=2, d_gcn=6, d_ff=6, seed=21)
        a = init_params(cfg, d_enc=8, n_relations=4)
        b = init_params(cfg, d_enc=8, n_relations=4)
        for (na, ta), (nb, tb) in zip(a.tensors().items(), b.tensors().items()):
            assert na == nb
            assert np.array_equal(ta.data, tb.data)

    def test_different_seeds_differ(self):
        a = init_params(ModelConfig(d_gcn=6, d_ff=6, seed=1), d_enc=8, n_relations=4)
        b = init_params(ModelConfig(d_gcn=6, d_ff=6, seed=2), d_enc=8, n_relations=4)
        assert not np.array_equal(a.gcn_weights[0].data, b.gcn_weights[0].data)

    def test_biases_zero_and_weights_bounded(self):
        cfg = ModelConfig(gcn_layers=2, d_gcn=6, d_ff=10)
        params = init_params(cfg, d_enc=8, n_relations=4)
        assert np.all(params.head_bias.data == 0.0)
        assert np.all(params.classifier_bias.data == 0.0)
        for b in params.gcn_biases:
            assert np.all(b.data == 0.0)
        limit = np.sqrt(6.0 / (6 + 6))
        assert np.all(np.abs(params.gcn_weights[0].data) <= limit)
        limit_head = np.sqrt(6.0 / (18 + 10))
        assert np.all(np.abs(params.head_weight.data) <= limit_head)

    def test_projection_only_when_dimensions_differ(self):
        with_proj = init_params(ModelConfig(d_gcn=6, d_ff=6), d_enc=8, n_relations=3)
        without = init_params(ModelConfig(d_gcn=8, d_ff=6), d_enc=8, n_relations=3)
        assert with_proj.input_proj is not None
        assert with_proj.input_proj.shape == (6, 8)
        assert without.input_proj is None


class TestGcnLayer:
    def test_single_node_relu(self):
        out = gcn_layer(
            Tape(),
            Tensor([[1.0, -1.0]]),
            Tensor([[1.0]]),
            Tensor(np.eye(2)),
            Tensor(np.zeros(2)),
        )
        assert np.array_equal(out.data, [[1.0, 0.0]])

    def test_two_node_aggregation(self):
        # full 2-node graph with self-loops sums both rows
        out = gcn_layer(
            Tape(),
            Tensor([[1.0, 0.0], [0.0, 1.0]]),
            Tensor(np.ones((2, 2))),
            Tensor(np.eye(2)),
            Tensor(np.zeros(2)),
        )
        assert np.array_equal(out.data, [[1.0, 1.0], [1.0, 1.0]])

    def test_bias_applies_before_activation(self):
        out = gcn_layer(
            Tape(),
            Tensor([[-2.0]]),
            Tensor([[1.0]]),
            Tensor([[1.0]]),
            Tensor([3.0]),
        )
        assert np.array_equal(out.data, [[1.0]])

    def test_all_negative_preactivations_zero_out(self):
        out = gcn_layer(
            Tape(),
            Tensor([[1.0, 2.0]]),
            Tensor([[1.0]]),
            Tensor(-np.eye(2)),
            Tensor(np.zeros(2)),
        )
        assert np.array_equal(out.data, [[0.0, 0.0]])


class TestRunGcn:
    def test_matches_per_node_oracle(self):
        rng = np.random.default_rng(23)
        for trial in range(30):
            n = int(rng.integers(1, 10))
            d_enc = int(rng.choice([4, 6]))
            d_gcn = int(rng.choice([4, 5]))
            layers = int(rng.integers(1, 4))
            cfg = ModelConfig(gcn_layers=layers, d_gcn=d_gcn, d_ff=4, seed=int(rng.integers(1000)))
            params = init_params(cfg, d_enc=d_enc, n_relations=3)
            graph = build_graph(random_tree_heads(rng, n))
            mode = "degree" if trial % 2 else "none"
            adjacency = normalize_adjacency(graph, mode)
            states = rng.uniform(-1, 1, size=(n, d_enc))
            ours = run_gcn(Tape(), states, adjacency, params, cfg)
            theirs = naive_gcn(states, adjacency, params)
            assert np.max(np.abs(ours.data - theirs)) <= 1e-12

    def test_identity_layer_on_isolated_nodes(self):
        params, cfg = identity_params(3)
        states = np.array([[0.5, -0.5, 2.0], [1.0, 1.0, -1.0]])
        out = run_gcn(Tape(), states, np.eye(2), params, cfg)
        assert np.array_equal(out.data, np.maximum(states, 0.0))

    def test_shape_errors(self):
        params, cfg = identity_params(3)
        with pytest.raises(ShapeError):
            run_gcn(Tape(), np.zeros(3), np.eye(1), params, cfg)
        with pytest.raises(ShapeError):
            run_gcn(Tape(), np.zeros((2, 3)), np.eye(3), params, cfg)
        # d_enc mismatch with no projection configured
        with pytest.raises(ShapeError):
            run_gcn(Tape(), np.zeros((2, 4)), np.eye(2), params, cfg)


class TestPooling:
    def test_pinned_three_rows(self):
        g = Tensor([[1.0, 5.0], [3.0, 2.0], [0.0, 9.0]])
        pooled = pool_features(Tape(), g, (0, 1), (2, 2))
        assert np.array_equal(pooled.h_sentence.data, [3.0, 9.0])
        assert np.array_equal(pooled.h_s.data, [3.0, 5.0])
        assert np.array_equal(pooled.h_o.data, [0.0, 9.0])

    def test_span_pool_never_exceeds_sentence_pool(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            g = Tensor(rng.standard_normal((n, 5)))
            s_lo = int(rng.integers(0, n))
            s_hi = int(rng.integers(s_lo, n))
            pooled = pool_features(Tape(), g, (s_lo, s_hi), (0, n - 1))
            assert np.all(pooled.h_s.data <= pooled.h_sentence.data + 1e-15)
            assert np.array_equal(pooled.h_o.data, pooled.h_sentence.data)


class TestFinalRep:
    def test_zero_head_gives_raw_sentence_vector_plus_zeros(self):
        params, _ = identity_params(2, d_ff=3)
        params.head_weight.data[:] = 0.0
        params.head_bias.data[:] = 0.0
        pooled = pool_features(Tape(), Tensor([[1.0, 2.0]]), (0, 0), (0, 0))
        h0 = np.array([7.0, -7.0])
        tape = Tape()
        rep = final_rep(tape, h0, pooled, params)
        assert np.array_equal(rep.h_final.data[:2], h0)
        assert np.array_equal(rep.h_final.data[2:], np.zeros(3))

    def test_pinned_affine_projection(self):
        params, _ = identity_params(1, d_ff=1)
        params.head_weight.data[:] = np.array([[1.0, 2.0, 3.0]])
        params.head_bias.data[:] = np.array([0.5])
        g = Tensor([[2.0], [1.0]])
        tape = Tape()
        pooled = pool_features(tape, g, (0, 0), (1, 1))
        # pooled = (2, 2, 1) -> 1*2 + 2*2 + 3*1 + 0.5
        rep = final_rep(tape, np.array([0.0]), pooled, params)
        assert rep.h_final.data[1] == pytest.approx(9.5, abs=1e-15)


class TestClassify:
    def test_zero_classifier_is_uniform(self):
        params, _ = identity_params(2, d_ff=2, n_relations=4)
        params.classifier_weight.data[:] = 0.0
        tape = Tape()
        pooled = pool_features(tape, Tensor([[1.0, 2.0]]), (0, 0), (0, 0))
        rep = final_rep(tape, np.zeros(2), pooled, params)
        out = classify(tape, rep, params, gold=2)
        assert np.allclose(out.probabilities, 0.25, atol=1e-15)
        assert float(out.loss.data) == pytest.approx(np.log(4.0), abs=1e-12)

    def test_probabilities_sum_to_one_and_predicted_is_argmax(self):
        rng = np.random.default_rng(9)
        cfg = ModelConfig(gcn_layers=1, d_gcn=4, d_ff=4)
        params = init_params(cfg, d_enc=4, n_relations=5)
        tape = Tape()
        pooled = pool_features(tape, Tensor(rng.standard_normal((3, 4))), (0, 0), (1, 2))
        rep = final_rep(tape, rng.standard_normal(4), pooled, params)
        out = classify(tape, rep, params)
        assert out.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.predicted == int(np.argmax(out.logits.data))
        assert out.loss is None


def random_encoded(rng, n, d_enc):
    return EncodedSentence(
        cls=rng.uniform(-1, 1, size=d_enc),
        word_states=rng.uniform(-1, 1, size=(n, d_enc)),
        provenance=Provenance("hashed", 0),
    )


def random_spans(rng, n):
    if n == 1:
        return (0, 0), (0, 0)
    split = int(rng.integers(1, n))
    s_hi = int(rng.integers(0, split))
    s_lo = int(rng.integers(0, s_hi + 1))
    o_lo = int(rng.integers(split, n))
    o_hi = int(rng.integers(o_lo, n))
    return (s_lo, s_hi), (o_lo, o_hi)


class TestForwardExample:
    def test_matches_numpy_composition(self):
        rng = np.random.default_rng(31)
        cfg = ModelConfig(gcn_layers=2, d_gcn=5, d_ff=6, adjacency_normalization="degree")
        params = init_params(cfg, d_enc=7, n_relations=4)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            enc = random_encoded(rng, n, 7)
            graph = build_graph(random_tree_heads(rng, n))
            subj, obj = random_spans(rng, n)
            gold = int(rng.integers(4))
            out = forward_example(Tape(), enc, graph, subj, obj, params, cfg, gold=gold)

            adjacency = normalize_adjacency(graph, "degree")
            h = naive_gcn(enc.word_states, adjacency, params)
            h_sent = naive_max_pool(h)
            h_s = naive_max_pool(h[subj[0] : subj[1] + 1])
            h_o = naive_max_pool(h[obj[0] : obj[1] + 1])
            z = np.concatenate([h_sent, h_s, h_o])
            suffix = params.head_weight.data @ z + params.head_bias.data
            h_final = np.concatenate([enc.cls, suffix])
            logits = params.classifier_weight.data @ h_final + params.classifier_bias.data
            m = logits.max()
            loss = m + np.log(np.exp(logits - m).sum()) - logits[gold]

            assert np.max(np.abs(out.logits.data - logits)) <= 1e-12
            assert float(out.loss.data) == pytest.approx(loss, abs=1e-12)

    def test_predict_agrees_with_forward(self):
        rng = np.random.default_rng(8)
        cfg = ModelConfig(gcn_layers=1, d_gcn=4, d_ff=4)
        params = init_params(cfg, d_enc=4, n_relations=6)
        enc = random_encoded(rng, 5, 4)
        graph = build_graph(random_tree_heads(rng, 5))
        out = forward_example(Tape(), enc, graph, (0, 1), (3, 4), params, cfg)
        assert predict(enc, graph, (0, 1), (3, 4), params, cfg) == out.predicted

    def test_loss_invariant_under_consistent_permutation(self):
        rng = np.random.default_rng(77)
        cfg = ModelConfig(gcn_layers=2, d_gcn=5, d_ff=5)
        params = init_params(cfg, d_enc=6, n_relations=4)
        for _ in range(10):
            n = int(rng.integers(3, 10))
            enc = random_encoded(rng, n, 6)
            graph = build_graph(random_tree_heads(rng, n))
            subj, obj = random_spans(rng, n)
            gold = int(rng.integers(4))
            base = forward_example(Tape(), enc, graph, subj, obj, params, cfg, gold=gold)

            perm, new_subj, new_obj = segment_permutation(n, subj, obj, rng)
            p_enc = EncodedSentence(
                cls=enc.cls,
                word_states=enc.word_states[perm],
                provenance=enc.provenance,
            )
            p_adj = graph.adjacency[np.ix_(perm, perm)]
            p_graph = dataclasses.replace(graph, adjacency=p_adj)
            moved = forward_example(Tape(), p_enc, p_graph, new_subj, new_obj, params, cfg, gold=gold)
            assert abs(float(base.loss.data) - float(moved.loss.data)) <= 1e-10


class TestGradcheckHarness:
    def test_small_instances_pass(self):
        for seed in (0, 1, 2):
            inst = build_instance(seed, n_tokens=4, d_enc=5, n_relations=3,
                                  config=ModelConfig(gcn_layers=2, d_gcn=4, d_ff=4, seed=seed))
            assert run_gradcheck(inst) < 1e-4

    def test_instances_respect_margin(self):
        inst = build_instance(3, n_tokens=4, d_enc=5, n_relations=3,
                              config=ModelConfig(gcn_layers=1, d_gcn=4, d_ff=4, seed=3))
        adjacency = normalize_adjacency(inst.graph, inst.config.adjacency_normalization)
        margin = instance_margin(inst.params, inst.encoded, adjacency, (inst.subj_span, inst.obj_span))
        assert margin >= 1e-3

    def test_injected_backward_bug_is_detected(self):
        inst = build_instance(5, n_tokens=4, d_enc=5, n_relations=3,
                              config=ModelConfig(gcn_layers=1, d_gcn=4, d_ff=4, seed=5))
        clean = run_gradcheck(inst)
        broken = run_gradcheck(inst, bug_scale=1.5)
        assert clean < 1e-4
        assert broken > 1e-2


class TestCheckpoints:
    def _setup(self):
        cfg = ModelConfig(gcn_layers=2, d_gcn=5, d_ff=6, seed=3)
        params = init_params(cfg, d_enc=7, n_relations=4)
        meta = {"provider": {"kind": "hashed", "d_enc": 7, "seed": 3}, "best_f1": 0.5}
        return params, cfg, meta

    def test_round_trip_bitwise(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        loaded, loaded_cfg, loaded_meta = load_checkpoint(path)
        assert loaded_cfg == cfg
        assert loaded_meta == meta
        for (na, ta), (nb, tb) in zip(params.tensors().items(), loaded.tensors().items()):
            assert na == nb
            assert np.array_equal(ta.data, tb.data)

    def test_save_is_byte_deterministic(self, tmp_path):
        params, cfg, meta = self._setup()
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, params, cfg, meta)
        save_checkpoint(b, params, cfg, meta)
        assert a.read_bytes() == b.read_bytes()

    def test_no_projection_round_trip(self, tmp_path):
        cfg = ModelConfig(gcn_layers=1, d_gcn=5, d_ff=4)
        params = init_params(cfg, d_enc=5, n_relations=3)
        assert params.input_proj is None
        path = tmp_path / "flat.ckpt"
        save_checkpoint(path, params, cfg, {})
        loaded, _, _ = load_checkpoint(path)
        assert loaded.input_proj is None

    def test_bad_magic(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 32])
        with pytest.raises(CheckpointError, match="past end"):
            load_checkpoint(path)

    def test_missing_tensor(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        raw = bytearray(path.read_bytes())
        (blob_len,) = struct.unpack_from("<Q", raw, 8)
        count_at = 16 + blob_len
        (count,) = struct.unpack_from("<I", raw, count_at)
        struct.pack_into("<I", raw, count_at, count - 1)
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="missing tensor"):
            load_checkpoint(path)

    def test_unexpected_tensor(self, tmp_path):
        params, cfg, meta = self._setup()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, cfg, meta)
        raw = bytearray(path.read_bytes())
        (blob_len,) = struct.unpack_from("<Q", raw, 8)
        count_at = 16 + blob_len
        (count,) = struct.unpack_from("<I", raw, count_at)
        struct.pack_into("<I", raw, count_at, count + 1)
        extra = struct.pack("<I", 5) + b"rogue" + struct.pack("<I", 0) + struct.pack("<d", 1.0)
        path.write_bytes(bytes(raw) + extra)
        with pytest.raises(CheckpointError, match="rogue"):
            load_checkpoint(path)

    def test_non_checkpoint_file(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"definitely not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
