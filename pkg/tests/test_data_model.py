import dataclasses

import numpy as np
import pytest

from dgrx.data_model import (
    Example,
    LabelRegistry,
    ModelConfig,
    NerRegistry,
    NerType,
    Provenance,
    Registry,
    RelationLabel,
    EncodedSentence,
    validate_example,
    validate_heads,
)
from dgrx.errors import ConfigError, SchemaError
from dgrx.model import init_params


def _labels(*names, negative="no_relation"):
    out = [RelationLabel(negative, 0, True)]
    out += [RelationLabel(n, i + 1, False) for i, n in enumerate(names)]
    return out


def make_example(tokens, subj=(0, 0), obj=(1, 1), heads=None, relation=None):
    reg = Registry.from_names(["no_relation", "rel_a"], "no_relation", ["PERSON", "LOCATION"])
    return Example(
        id="x-1",
        tokens=tuple(tokens),
        subj_span=tuple(subj),
        obj_span=tuple(obj),
        subj_ner=reg.ner.by_name("PERSON"),
        obj_ner=reg.ner.by_name("LOCATION"),
        relation=relation or reg.relations.by_name("rel_a"),
        heads=tuple(heads) if heads is not None else None,
    )


class TestLabelRegistry:
    def test_lookup_by_name_and_index(self):
        reg = LabelRegistry(_labels("a", "b"))
        assert reg.by_name("a").index == 1
        assert reg[0].is_no_relation
        assert len(reg) == 3

    def test_unknown_name_raises(self):
        reg = LabelRegistry(_labels("a"))
        with pytest.raises(SchemaError, match="nope"):
            reg.by_name("nope")

    def test_indices_must_be_contiguous_bijection(self):
        bad = [RelationLabel("no_relation", 0, True), RelationLabel("a", 2, False)]
        with pytest.raises(SchemaError):
            LabelRegistry(bad)

    def test_duplicate_names_rejected(self):
        bad = _labels("a") + [RelationLabel("a", 2, False)]
        with pytest.raises(SchemaError):
            LabelRegistry(bad)

    def test_exactly_one_negative_label(self):
        with pytest.raises(SchemaError):
            LabelRegistry([RelationLabel("a", 0, False), RelationLabel("b", 1, False)])
        two = [RelationLabel("n1", 0, True), RelationLabel("n2", 1, True)]
        with pytest.raises(SchemaError):
            LabelRegistry(two)


class TestNerRegistry:
    def test_lookup(self):
        reg = NerRegistry([NerType("PERSON", 0), NerType("LOCATION", 1)])
        assert reg.by_name("LOCATION").index == 1
        with pytest.raises(SchemaError):
            reg.by_name("CITY")

    def test_duplicates_rejected(self):
        with pytest.raises(SchemaError):
            NerRegistry([NerType("PERSON", 0), NerType("PERSON", 1)])


class TestRegistry:
    def test_default_bundle_shape(self, default_registry):
        assert len(default_registry.relations) == 42
        assert len(default_registry.ner) == 17
        neg = default_registry.relations[0]
        assert neg.name == "no_relation" and neg.is_no_relation

    def test_round_trip_through_json(self, tmp_path, small_registry):
        p = tmp_path / "reg.json"
        small_registry.save(p)
        loaded = Registry.load(p)
        assert [l.name for l in loaded.relations] == [l.name for l in small_registry.relations]
        assert [t.name for t in loaded.ner] == [t.name for t in small_registry.ner]

    def test_from_names_marks_the_named_negative(self):
        reg = Registry.from_names(["b", "none_of_the_above", "a"], "none_of_the_above", ["X"])
        assert reg.relations[1].name == "none_of_the_above"
        assert reg.relations[1].is_no_relation
        assert not reg.relations.by_name("b").is_no_relation

    def test_from_names_requires_negative_in_list(self):
        with pytest.raises(SchemaError):
            Registry.from_names(["a", "b"], "no_relation", ["X"])


class TestValidateHeads:
    def test_valid_tree(self):
        assert validate_heads((2, 0, 2, 3, 3), 5) == []

    def test_no_root(self):
        assert validate_heads((2, 3, 2), 3) == ["heads: no root"]

    def test_multiple_roots(self):
        out = validate_heads((0, 0, 1), 3)
        assert out == ["heads: multiple roots (2)"]

    def test_out_of_range_parent(self):
        assert any("out of range" in v for v in validate_heads((0, 9), 2))
        assert any("out of range" in v for v in validate_heads((0, -1), 2))

    def test_cycle_detected(self):
        # node 3 and 4 point at each other while node 1 holds the root
        out = validate_heads((0, 4, 2, 3), 4)
        assert any("cycle" in v for v in out)

    def test_length_mismatch(self):
        out = validate_heads((0, 1), 3)
        assert "length 2" in out[0]


class TestValidateExample:
    def test_well_formed(self):
        ex = make_example(["a", "b", "c"], subj=(0, 0), obj=(2, 2), heads=(0, 1, 2))
        assert validate_example(ex) == []

    def test_overlapping_spans(self):
        ex = make_example(["a", "b", "c", "d", "e"], subj=(1, 3), obj=(3, 4), heads=(0, 1, 1, 2, 2))
        assert "spans: overlapping spans" in validate_example(ex)

    def test_empty_tokens_short_circuits(self):
        ex = make_example([], subj=(0, 0), obj=(1, 1))
        assert validate_example(ex) == ["tokens: empty"]

    def test_span_out_of_bounds(self):
        ex = make_example(["a", "b"], subj=(0, 0), obj=(1, 5), heads=(0, 1))
        assert any("obj_span: out of bounds" in v for v in validate_example(ex))

    def test_inverted_span(self):
        ex = make_example(["a", "b", "c"], subj=(2, 1), obj=(0, 0), heads=(0, 1, 1))
        assert any("empty span" in v for v in validate_example(ex))

    def test_missing_heads_reported(self):
        ex = make_example(["a", "b"], subj=(0, 0), obj=(1, 1), heads=None)
        assert validate_example(ex) == ["heads: missing"]


class TestEncodedSentence:
    def test_arrays_are_read_only_float64(self):
        enc = EncodedSentence(
            cls=[1.0, 2.0],
            word_states=[[0.0, 1.0], [2.0, 3.0]],
            provenance=Provenance("hashed", 13),
        )
        assert enc.d_enc == 2 and enc.n_words == 2
        assert enc.word_states.dtype == np.float64
        with pytest.raises(ValueError):
            enc.word_states[0, 0] = 9.0
        with pytest.raises(ValueError):
            enc.cls[0] = 9.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            EncodedSentence([1.0, 2.0], [[1.0], [2.0]], Provenance("hashed", 0))

    def test_non_finite_rejected(self):
        with pytest.raises(SchemaError):
            EncodedSentence([np.inf, 0.0], [[1.0, 2.0]], Provenance("hashed", 0))
        with pytest.raises(SchemaError):
            EncodedSentence([1.0, 0.0], [[np.nan, 2.0]], Provenance("hashed", 0))


class TestModelConfig:
    def test_defaults_are_valid(self):
        cfg = ModelConfig()
        assert cfg.gcn_layers == 2 and cfg.d_gcn == 400 and cfg.d_ff == 400

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gcn_layers": 0},
            {"d_gcn": 0},
            {"d_ff": -3},
            {"activation": "gelu"},
            {"adjacency_normalization": "symmetric"},
            {"lr_head": -0.1},
            {"lr_encoder": -1e-9},
        ],
    )
    def test_invalid_fields_raise(self, kwargs):
        with pytest.raises(ConfigError):
            ModelConfig(**kwargs)

    def test_zero_learning_rates_are_legal(self):
        cfg = ModelConfig(lr_encoder=0.0, lr_head=0.0)
        assert cfg.lr_head == 0.0


class TestModelParams:
    def test_tensor_names_and_order(self):
        cfg = ModelConfig(gcn_layers=2, d_gcn=6, d_ff=6)
        params = init_params(cfg, d_enc=8, n_relations=5)
        names = list(params.tensors())
        assert names == [
            "input_proj",
            "gcn.0.weight",
            "gcn.0.bias",
            "gcn.1.weight",
            "gcn.1.bias",
            "head.weight",
            "head.bias",
            "classifier.weight",
            "classifier.bias",
        ]

    def test_dimension_properties(self):
        cfg = ModelConfig(gcn_layers=3, d_gcn=5, d_ff=7)
        params = init_params(cfg, d_enc=4, n_relations=3)
        assert params.n_layers == 3
        assert params.d_gcn == 5
        assert params.d_ff == 7
        assert params.d_enc == 4
        assert params.n_relations == 3
        assert params.head_weight.shape == (7, 15)
        assert params.classifier_weight.shape == (3, 4 + 7)

    def test_validate_catches_inconsistent_shapes(self):
        cfg = ModelConfig(gcn_layers=1, d_gcn=4, d_ff=4)
        params = init_params(cfg, d_enc=4, n_relations=3)
        broken = dataclasses.replace(params, head_bias=params.gcn_weights[0])
        with pytest.raises(SchemaError):
            broken.validate()
