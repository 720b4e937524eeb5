"""Command-line entry point: train, evaluate, gradcheck, embed, synth.

Exit codes: 0 success; 1 a check failed; 2 usage or configuration error;
3 data or format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .checks import build_instance, run_gradcheck
from .corpus import load_tacred_json, save_tacred_json
from .data_model import ModelConfig, Registry
from .encoders import HashedProvider, RemoteProvider, cache_write
from .errors import (
    AlignmentError,
    CacheFormatError,
    CacheLookupError,
    CheckpointError,
    ConfigError,
    ContractError,
    CorpusParseError,
    DivergenceError,
    GraphError,
    InputError,
    LabelError,
    PoolError,
    SchemaError,
    ShapeError,
    TransportError,
)
from .evaluation import (
    DEFAULT_BUCKETS,
    evaluate_predictions,
    parse_buckets,
    save_predictions,
    save_report_csv,
    save_report_json,
)
from .model import load_checkpoint
from .plots import render_bucket_figure, render_training_curves
from .preprocess import MaskRegistry
from .synthetic import make_corpus, synth_registry
from .training import ProviderConfig, TrainingConfig, fit, predict_split, prepare_split

_DATA_ERRORS = (
    SchemaError,
    CorpusParseError,
    CacheLookupError,
    CacheFormatError,
    CheckpointError,
    ContractError,
    GraphError,
    AlignmentError,
    TransportError,
    InputError,
    DivergenceError,
    ShapeError,
    PoolError,
    LabelError,
)

_EPILOG = "exit codes: 0 ok; 1 check failed; 2 usage/config error; 3 data/format error"


def resolve_seed(flag_value: int | None, default: int = 13) -> int:
    """--seed wins, then the DGRX_SEED environment variable, then the default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get("DGRX_SEED")
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"DGRX_SEED must be an integer, got {env!r}") from None
    return default


def cmd_train(args: argparse.Namespace) -> int:
    config = TrainingConfig.load(args.config)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.seed is not None or os.environ.get("DGRX_SEED"):
        config = replace(config, seed=resolve_seed(args.seed, config.seed))
    registry = config.load_registry()
    train = load_tacred_json(config.train_data, registry, "train")
    dev = load_tacred_json(config.dev_data, registry, "dev")
    result = fit(train, dev, config, registry)
    curve_path = Path(config.out_dir) / "training_curves.png"
    render_training_curves(result.log_path, curve_path)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    print(f"figure: {curve_path}")
    print(f"best dev F1: {result.best_f1:.4f} over {len(result.history)} epochs")
    return 0


def _evaluate_provider(args: argparse.Namespace, meta: dict):
    stored = meta.get("provider") or {}
    kind = args.provider or stored.get("kind") or "hashed"
    d_enc = int(meta["d_enc"])
    seed = resolve_seed(args.seed, int(stored.get("seed") or 0))
    if kind == "hashed":
        return HashedProvider(d_enc, seed)
    if kind == "cache":
        from .encoders import CacheProvider

        path = args.cache or stored.get("path")
        if not path:
            raise ConfigError("cache provider selected but no --cache path given or stored")
        provider = CacheProvider(path)
        if provider.d_enc != d_enc:
            raise ContractError(f"cache {path} has d_enc {provider.d_enc}, checkpoint expects {d_enc}")
        return provider
    if kind == "remote":
        endpoint = args.endpoint or stored.get("endpoint")
        if not endpoint:
            raise ConfigError("remote provider selected but no --endpoint given or stored")
        return RemoteProvider(endpoint, seed, d_enc=d_enc, strategy=stored.get("strategy") or "random")
    raise ConfigError(f"unknown provider kind: {kind!r}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    params, model_config, meta = load_checkpoint(args.checkpoint)
    if "registry" not in meta:
        raise CheckpointError(f"{args.checkpoint}: checkpoint carries no label registry")
    registry = Registry.from_dict(meta["registry"])
    masks = (
        MaskRegistry.from_list(meta["mask_registry"])
        if meta.get("mask_registry")
        else MaskRegistry.default_for(registry)
    )
    provider = _evaluate_provider(args, meta)
    split = load_tacred_json(args.data, registry, "test")
    prepared = prepare_split(split, provider, masks)
    preds = predict_split(prepared, params, model_config)
    buckets = parse_buckets(args.buckets) if args.buckets else DEFAULT_BUCKETS
    report = evaluate_predictions(
        split.examples, preds, registry.relations.no_relation.index, buckets, args.distance_metric
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_report_json(report, out_dir / "report.json")
    save_report_csv(report, out_dir / "report.csv")
    save_predictions(out_dir / "predictions.json", [ex.id for ex in split], preds, registry)
    render_bucket_figure(report, out_dir / "buckets.png")

    o = report.overall
    print(f"P={o.precision:.4f} R={o.recall:.4f} F1={o.f1:.4f} (n={o.n})")
    print(
        f"long_range_avg_f1={report.long_range_avg_f1:.4f} "
        f"long_range_pooled_f1={report.long_range_pooled_f1:.4f}"
    )
    print(f"report: {out_dir / 'report.json'}, {out_dir / 'report.csv'}")
    print(f"figure: {out_dir / 'buckets.png'}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    n_tokens, d_enc, n_relations = 5, 8, 5
    model = ModelConfig(gcn_layers=2, d_gcn=6, d_ff=6, seed=seed)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: not valid JSON: {exc}") from None
        n_tokens = int(doc.get("n_tokens", n_tokens))
        d_enc = int(doc.get("d_enc", d_enc))
        n_relations = int(doc.get("n_relations", n_relations))
        try:
            model = ModelConfig(
                gcn_layers=int(doc.get("gcn_layers", model.gcn_layers)),
                d_gcn=int(doc.get("d_gcn", model.d_gcn)),
                d_ff=int(doc.get("d_ff", model.d_ff)),
                adjacency_normalization=doc.get("adjacency_normalization", model.adjacency_normalization),
                seed=seed,
            )
        except TypeError as exc:
            raise ConfigError(f"{args.config}: bad model fields: {exc}") from None
    if args.eps <= 0:
        raise ConfigError(f"--eps must be > 0, got {args.eps}")
    instance = build_instance(seed, n_tokens, d_enc, n_relations, config=model)
    bug_scale = 1.5 if args.inject_bug else 1.0
    worst = run_gradcheck(instance, eps=args.eps, bug_scale=bug_scale)
    status = "ok" if worst < args.tolerance else "FAIL"
    print(f"max relative error: {worst:.3e} (tolerance {args.tolerance:.1e}) {status}")
    return 0 if worst < args.tolerance else 1


def cmd_embed(args: argparse.Namespace) -> int:
    registry = Registry.load(args.registry) if args.registry else Registry.default()
    masks = MaskRegistry.load(args.mask_registry) if args.mask_registry else MaskRegistry.default_for(registry)
    seed = resolve_seed(args.seed)
    if args.provider == "hashed":
        provider = HashedProvider(args.d_enc, seed)
    elif args.provider == "remote":
        if not args.endpoint:
            raise ConfigError("remote provider needs --endpoint")
        provider = RemoteProvider(args.endpoint, seed)
    else:
        raise ConfigError("embed sources vectors from a provider; choose hashed or remote")
    split = load_tacred_json(args.data, registry, "train", require_heads=False)
    sentences = [(ex.id, provider.encode(ex, masks)) for ex in split]
    cache_write(args.out, sentences, dtype=args.dtype)
    d_enc = sentences[0][1].d_enc if sentences else provider.d_enc
    print(f"wrote {len(sentences)} records (d_enc={d_enc}) to {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    registry = synth_registry()
    registry.save(out_dir / "registry.json")
    try:
        lo, hi = (int(p) for p in args.distance_range.split("-"))
    except ValueError:
        raise ConfigError(f"--distance-range must look like lo-hi, got {args.distance_range!r}") from None
    train = make_corpus(args.n_train, seed, "train", (lo, hi), registry)
    dev = make_corpus(args.n_dev, seed + 1, "dev", (lo, hi), registry)
    save_tacred_json(train, out_dir / "train.json")
    save_tacred_json(dev, out_dir / "dev.json")
    config = {
        "model": {
            "gcn_layers": 2,
            "d_gcn": 64,
            "d_ff": 64,
            "adjacency_normalization": "degree",
            "seed": seed,
        },
        "provider": {"kind": "hashed", "d_enc": 128, "seed": seed},
        "train_data": str(out_dir / "train.json"),
        "dev_data": str(out_dir / "dev.json"),
        "registry": str(out_dir / "registry.json"),
        "out_dir": str(out_dir / "run"),
        "batch_size": 8,
        "max_epochs": 50,
        "patience": 15,
        "seed": seed,
    }
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(train)} train / {len(dev)} dev examples under {out_dir}")
    print(f"config: {out_dir / 'config.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgrx",
        description="Relation extraction with a graph-convolution head over dependency parses.",
        epilog=_EPILOG,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a head and keep the best-dev-F1 checkpoint", epilog=_EPILOG)
    p_train.add_argument("--config", required=True, help="training config JSON")
    p_train.add_argument("--out", help="override the config's output directory")
    p_train.add_argument("--seed", type=int, help="override the config's shuffle seed")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a checkpoint on a data file", epilog=_EPILOG)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, help="corpus JSON to score")
    p_eval.add_argument("--out", required=True, help="directory for report.json/csv, predictions, figures")
    p_eval.add_argument("--provider", choices=["hashed", "cache", "remote"], help="default: provider stored in the checkpoint")
    p_eval.add_argument("--endpoint", help="embedding service URL for --provider remote")
    p_eval.add_argument("--cache", help="embedding cache path for --provider cache")
    p_eval.add_argument("--seed", type=int, help="alignment sampling seed override")
    p_eval.add_argument("--buckets", help='distance buckets, e.g. "0-7,8-10,11+"')
    p_eval.add_argument("--distance-metric", choices=["boundary", "start"], default="boundary")
    p_eval.set_defaults(func=cmd_evaluate)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of the backward pass", epilog=_EPILOG)
    p_grad.add_argument("--config", help="optional JSON with n_tokens/d_enc/n_relations and model dims")
    p_grad.add_argument("--seed", type=int)
    p_grad.add_argument("--eps", type=float, default=1e-5, help="central-difference step")
    p_grad.add_argument("--tolerance", type=float, default=1e-4)
    p_grad.add_argument("--inject-bug", action="store_true", help="corrupt one gradient to prove the check catches it")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_embed = sub.add_parser("embed", help="encode a corpus into a binary embedding cache", epilog=_EPILOG)
    p_embed.add_argument("--data", required=True)
    p_embed.add_argument("--out", required=True, help="cache file path")
    p_embed.add_argument("--provider", choices=["hashed", "cache", "remote"], default="hashed")
    p_embed.add_argument("--endpoint", help="embedding service URL for --provider remote")
    p_embed.add_argument("--d-enc", type=int, default=64, help="vector width for the hashed provider")
    p_embed.add_argument("--registry", help="label/NER registry JSON (default: bundled)")
    p_embed.add_argument("--mask-registry", help="mask registry JSON (default: derived from the registry)")
    p_embed.add_argument("--seed", type=int)
    p_embed.add_argument("--dtype", choices=["f64", "f32"], default="f64")
    p_embed.set_defaults(func=cmd_embed)

    p_synth = sub.add_parser("synth", help="write a planted-signal toy corpus and a ready config", epilog=_EPILOG)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--n-train", type=int, default=256)
    p_synth.add_argument("--n-dev", type=int, default=64)
    p_synth.add_argument("--distance-range", default="0-14", help="entity gap range lo-hi")
    p_synth.add_argument("--seed", type=int)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
