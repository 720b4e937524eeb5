"""Mini-batch training with adaptive moments, checkpointing, early stopping.

All trainable tensors belong to the "head" learning-rate group; the
"encoder" group is carried in configuration for fidelity to the two-group
scheme but has no parameters while the encoder is frozen.

Determinism contract: (seed, data, config) fully determine the checkpoint
bytes and the training log, so logs carry no timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import CorpusSplit
from .data_model import DependencyGraph, EncodedSentence, Example, ModelConfig, ModelParams, Registry
from .encoders import CacheProvider, HashedProvider, RemoteProvider
from .errors import ConfigError, DivergenceError
from .evaluation import score
from .graph import build_graph
from .model import forward_example, init_params, predict, save_checkpoint
from .numerics import Tape
from .preprocess import MaskRegistry


@dataclass(frozen=True)
class ProviderConfig:
    kind: str
    d_enc: int | None = None
    seed: int = 0
    path: str | None = None
    endpoint: str | None = None
    strategy: str = "random"

    def __post_init__(self) -> None:
        if self.kind == "hashed":
            if not self.d_enc or self.d_enc < 1:
                raise ConfigError("hashed provider needs d_enc >= 1")
        elif self.kind == "cache":
            if not self.path:
                raise ConfigError("cache provider needs a path")
        elif self.kind == "remote":
            if not self.endpoint:
                raise ConfigError("remote provider needs an endpoint")
        else:
            raise ConfigError(f"unknown provider kind: {self.kind!r}")

    def build(self):
        if self.kind == "hashed":
            return HashedProvider(self.d_enc, self.seed)
        if self.kind == "cache":
            return CacheProvider(self.path)
        return RemoteProvider(self.endpoint, self.seed, d_enc=self.d_enc, strategy=self.strategy)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "d_enc": self.d_enc,
            "seed": self.seed,
            "path": self.path,
            "endpoint": self.endpoint,
            "strategy": self.strategy,
        }


@dataclass(frozen=True)
class TrainingConfig:
    model: ModelConfig
    provider: ProviderConfig
    train_data: str
    dev_data: str
    out_dir: str
    registry_path: str | None = None
    mask_registry_path: str | None = None
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 5
    seed: int = 13
    resample_alignment_each_epoch: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")

    @classmethod
    def from_dict(cls, doc: dict) -> TrainingConfig:
        try:
            model = ModelConfig(**doc.get("model", {}))
            provider = ProviderConfig(**doc["provider"])
            return cls(
                model=model,
                provider=provider,
                train_data=doc["train_data"],
                dev_data=doc["dev_data"],
                out_dir=doc["out_dir"],
                registry_path=doc.get("registry"),
                mask_registry_path=doc.get("mask_registry"),
                batch_size=int(doc.get("batch_size", 32)),
                max_epochs=int(doc.get("max_epochs", 100)),
                patience=int(doc.get("patience", 5)),
                seed=int(doc.get("seed", 13)),
                resample_alignment_each_epoch=bool(doc.get("resample_alignment_each_epoch", False)),
            )
        except KeyError as exc:
            raise ConfigError(f"training config is missing the {exc.args[0]!r} field") from None
        except TypeError as exc:
            raise ConfigError(f"training config has an unknown or malformed field: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> TrainingConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def load_registry(self) -> Registry:
        return Registry.load(self.registry_path) if self.registry_path else Registry.default()

    def load_mask_registry(self, registry: Registry) -> MaskRegistry:
        if self.mask_registry_path:
            return MaskRegistry.load(self.mask_registry_path)
        return MaskRegistry.default_for(registry)


@dataclass(frozen=True)
class PreparedExample:
    example: Example
    encoded: EncodedSentence
    graph: DependencyGraph


def prepare_split(split: CorpusSplit, provider, masks: MaskRegistry) -> list[PreparedExample]:
    """Mask, encode, and build the graph for every example."""
    prepared = []
    for ex in split:
        prepared.append(
            PreparedExample(example=ex, encoded=provider.encode(ex, masks), graph=build_graph(ex.heads))
        )
    return prepared


def predict_split(prepared: list[PreparedExample], params: ModelParams, config: ModelConfig) -> list[int]:
    return [
        predict(p.encoded, p.graph, p.example.subj_span, p.example.obj_span, params, config)
        for p in prepared
    ]


class OptimizerState:
    """Adaptive moment estimation (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(
        self,
        params: ModelParams,
        lr_head: float,
        lr_encoder: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.group_lrs = {"encoder": lr_encoder, "head": lr_head}
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.tensors().items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.tensors().items()}

    def step(self, params: ModelParams) -> None:
        """One update from the gradients currently stored on the tensors."""
        self.step_count += 1
        t = self.step_count
        lr = self.group_lrs["head"]
        for name, tensor in params.tensors().items():
            g = tensor.grad
            if g is None:
                continue
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1**t)
            v_hat = self.v[name] / (1 - self.beta2**t)
            tensor.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _zero_grads(params: ModelParams) -> None:
    for tensor in params.tensors().values():
        tensor.zero_grad()


def example_loss(p: PreparedExample, params: ModelParams, config: ModelConfig) -> float:
    """Forward + backward for one example; gradients accumulate onto params."""
    tape = Tape()
    out = forward_example(
        tape, p.encoded, p.graph, p.example.subj_span, p.example.obj_span, params, config,
        gold=p.example.relation.index,
    )
    loss = float(out.loss.data)
    if not np.isfinite(loss):
        raise DivergenceError(f"example {p.example.id}: non-finite loss {loss}")
    tape.backward(out.loss)
    return loss


def train_epoch(
    prepared: list[PreparedExample],
    params: ModelParams,
    opt: OptimizerState,
    config: TrainingConfig,
    rng: np.random.Generator,
) -> float:
    """One seeded-shuffled pass; returns the mean per-example loss."""
    order = rng.permutation(len(prepared))
    total = 0.0
    for start in range(0, len(order), config.batch_size):
        batch = [prepared[i] for i in order[start : start + config.batch_size]]
        _zero_grads(params)
        for p in batch:
            total += example_loss(p, params, config.model)
        for tensor in params.tensors().values():
            if tensor.grad is not None:
                tensor.grad /= len(batch)
        opt.step(params)
    _zero_grads(params)
    return total / len(prepared)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class FitResult:
    checkpoint_path: Path
    log_path: Path
    history: tuple[EpochStats, ...]
    best_f1: float


def _dev_score(prepared, params, config, no_relation: int):
    preds = predict_split(prepared, params, config)
    golds = [p.example.relation.index for p in prepared]
    return score(golds, preds, no_relation)


def fit(train: CorpusSplit, dev: CorpusSplit, config: TrainingConfig, registry: Registry | None = None) -> FitResult:
    """Train up to max_epochs, keep the best-dev-F1 checkpoint, stop early on patience."""
    registry = registry or config.load_registry()
    masks = config.load_mask_registry(registry)
    provider = config.provider.build()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prepared_train = prepare_split(train, provider, masks)
    prepared_dev = prepare_split(dev, provider, masks)
    d_enc = prepared_train[0].encoded.d_enc if prepared_train else provider.d_enc
    if d_enc is None:
        raise ConfigError("cannot infer d_enc: empty training split and provider declares none")

    params = init_params(config.model, d_enc, len(registry.relations))
    opt = OptimizerState(params, lr_head=config.model.lr_head, lr_encoder=config.model.lr_encoder)
    rng = np.random.default_rng(config.seed)
    no_relation = registry.relations.no_relation.index

    meta = {
        "d_enc": d_enc,
        "n_relations": len(registry.relations),
        "registry": registry.to_dict(),
        "mask_registry": masks.to_list(),
        "provider": config.provider.to_dict(),
    }
    ckpt_path = out_dir / "model.ckpt"
    log_path = out_dir / "train_log.jsonl"
    save_checkpoint(ckpt_path, params, config.model, meta)

    history: list[EpochStats] = []
    best_f1 = float("-inf")
    bad_epochs = 0
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(1, config.max_epochs + 1):
            if config.resample_alignment_each_epoch and config.provider.kind == "remote":
                epoch_provider = replace(config.provider, seed=config.provider.seed + epoch).build()
                prepared_train = prepare_split(train, epoch_provider, masks)
            mean_loss = train_epoch(prepared_train, params, opt, config, rng)
            dev_stats = _dev_score(prepared_dev, params, config.model, no_relation)
            stats = EpochStats(epoch, mean_loss, dev_stats.precision, dev_stats.recall, dev_stats.f1)
            history.append(stats)
            log.write(
                json.dumps(
                    {
                        "epoch": epoch,
                        "mean_loss": mean_loss,
                        "dev_precision": dev_stats.precision,
                        "dev_recall": dev_stats.recall,
                        "dev_f1": dev_stats.f1,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            if dev_stats.f1 > best_f1:
                best_f1 = dev_stats.f1
                bad_epochs = 0
                save_checkpoint(ckpt_path, params, config.model, meta)
            else:
                bad_epochs += 1
                if bad_epochs >= config.patience:
                    break
    if best_f1 == float("-inf"):
        best_f1 = 0.0
    return FitResult(checkpoint_path=ckpt_path, log_path=log_path, history=tuple(history), best_f1=best_f1)
