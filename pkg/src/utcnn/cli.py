"""Command-line entry point: ``utcnn <subcommand> [flags]``.

Settings are resolved as built-in defaults, then a JSON ``--config`` file,
then flags.  Every run that has an output directory writes the resolved
settings there as ``config.json``; passing that file back through
``--config`` repeats the run exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import MISSING, fields
from pathlib import Path

import numpy as np

from . import model as M
from . import synth as S
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Comment, Corpus, Post, make_splits, read_corpus, stratified_kfold, write_corpus
from .embeddings import load_word_embeddings, random_word_table, save_word_embeddings
from .exceptions import CheckpointError, DataFormatError, ModelInputError, NumericError, UTCNNError
from .lda import LdaConfig, assign_corpus_topics, topic_report
from .metrics import aggregate_cv, evaluate
from .tensor import gradcheck
from .training import (VARIANTS, TrainConfig, predict_posts, run_ablation_suite, run_variant, train,
                       write_history)

logger = logging.getLogger("utcnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ABLATION_FLAGS = {
    "user": {"use_user": False},
    "topic": {"use_topic": False},
    "comment": {"use_comment": False},
    "shared-user": {"shared_user_roles": True},
}
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_help()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file; flags override it")
    common.add_argument("--corpus", help="corpus JSONL file")
    common.add_argument("--embeddings", help="word embedding text file")
    common.add_argument("--checkpoint", help="model checkpoint JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for every random choice in the run")
    common.add_argument("--folds", type=int, help="number of cross-validation folds")
    common.add_argument("--ablation", action="append", choices=sorted(ABLATION_FLAGS),
                        help="disable an information source (repeatable)")
    common.add_argument("--topics-k", type=int, help="number of LDA topics")
    common.add_argument("--epochs", type=int, help="maximum training epochs")
    common.add_argument("--lr", type=float, help="AdaGrad learning rate")
    common.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    common.add_argument("--dev", help="dev corpus for early stopping (train)")
    common.add_argument("--per-topic", action="store_true", default=None,
                        help="cross-validate within each topic and average over topics")
    common.add_argument("--variants", help="comma-separated ablation variants (ablate)")
    common.add_argument("--n-posts", type=int, help="number of posts to generate (synth)")
    common.add_argument("--iterations", type=int, help="LDA Gibbs sweeps")
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = _Parser(prog="utcnn", description="User-topic-comment CNN for post stance classification")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("train", "train a model and write a checkpoint"),
        ("eval", "score a checkpoint, or cross-validate when no checkpoint is given"),
        ("predict", "write predictions for a corpus"),
        ("lda", "assign latent topics to the posts of a corpus"),
        ("synth", "generate a synthetic corpus"),
        ("gradcheck", "compare backward gradients with finite differences"),
        ("ablate", "train every ablation variant and tabulate the results"),
    ]:
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------


def _with_defaults(cls, values: dict, section: str) -> dict:
    """Field defaults overlaid with ``values``; derived fields stay None until built."""
    names = [f.name for f in fields(cls)]
    unknown = set(values) - set(names)
    if unknown:
        raise UsageError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    out = {f.name: f.default for f in fields(cls) if f.default is not MISSING}
    out.update(values)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and flags into one settings dict."""
    cfg = {"model": {}, "train": {}, "lda": {}, "synth": {}}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key in cfg and isinstance(value, dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    flat = {
        "corpus": args.corpus, "embeddings": args.embeddings, "checkpoint": args.checkpoint,
        "out": args.out, "seed": args.seed, "folds": args.folds, "dev": args.dev,
        "per_topic": args.per_topic, "variants": args.variants, "verbose": args.verbose,
    }
    for key, value in flat.items():
        if value is not None:
            cfg[key] = value
    if args.ablation:
        cfg["ablation"] = sorted(set(args.ablation))
    if args.epochs is not None:
        cfg["train"]["max_epochs"] = args.epochs
    if args.lr is not None:
        cfg["train"]["learning_rate"] = args.lr
    if args.patience is not None:
        cfg["train"]["patience"] = args.patience
    if args.topics_k is not None:
        cfg["lda"]["n_topics"] = args.topics_k
    if args.iterations is not None:
        cfg["lda"]["iterations"] = args.iterations
    if args.n_posts is not None:
        cfg["synth"]["n_posts"] = args.n_posts
    cfg.setdefault("seed", 0)
    cfg["command"] = args.command
    for name in cfg.get("ablation", []):
        if name not in ABLATION_FLAGS:
            raise UsageError(f"unknown ablation {name!r}")
    seed = cfg["seed"]
    for section in ("model", "train", "lda", "synth"):
        cfg[section]["seed"] = seed
    cfg["model"] = _with_defaults(M.ModelConfig, cfg["model"], "model")
    cfg["train"] = _with_defaults(TrainConfig, cfg["train"], "train")
    cfg["lda"] = _with_defaults(LdaConfig, cfg["lda"], "lda")
    cfg["synth"] = _with_defaults(S.SynthConfig, cfg["synth"], "synth")
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise UsageError(f"{cfg['command']} needs " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _build(cls, values, section):
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {section} settings: {exc}") from None


def _model_config(cfg, n_classes, word_dim=None) -> M.ModelConfig:
    values = dict(cfg["model"])
    for name in cfg.get("ablation", []):
        values.update(ABLATION_FLAGS[name])
    values["n_classes"] = n_classes
    if word_dim is not None:
        values["word_dim"] = word_dim
    return _build(M.ModelConfig, values, "model")


def _out_dir(cfg) -> Path | None:
    if not cfg.get("out"):
        return None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(cfg, out: Path | None) -> None:
    if out is not None:
        saved = {k: v for k, v in cfg.items() if k not in ("out", "command")}
        _write_json(out / "config.json", saved)


def _load_corpus(cfg, key="corpus") -> Corpus:
    corpus = read_corpus(cfg[key])
    if not corpus.label_names:
        raise DataFormatError("corpus has no labels", cfg[key])
    return corpus


def _load_words(cfg):
    dim = cfg["model"].get("word_dim", M.ModelConfig.word_dim)
    return load_word_embeddings(cfg["embeddings"], dim)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(cfg) -> int:
    _require(cfg, "corpus", "embeddings", "out")
    train_cfg = _build(TrainConfig, cfg["train"], "train")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    corpus = _load_corpus(cfg).labeled()
    words = _load_words(cfg)
    mcfg = _model_config(cfg, corpus.n_classes, words.dim)
    if cfg.get("dev"):
        dev = read_corpus(cfg["dev"], corpus.label_names).labeled().posts
        train_posts = corpus.posts
    else:
        keep, held = make_splits(corpus, ratios=(0.9, 0.1), seed=cfg["seed"])
        train_posts = [corpus.posts[i] for i in keep]
        dev = [corpus.posts[i] for i in held]
    params = M.ParameterSet(mcfg, words)
    best, history = train(train_posts, dev, params, train_cfg)
    # wall-clock timings stay in history.jsonl so the checkpoint is byte-reproducible
    timeless = [{k: v for k, v in rec.items() if k != "seconds"} for rec in history]
    save_checkpoint(out / "checkpoint.json", best, corpus.label_names, extra={"history": timeless})
    write_history(history, out / "history.jsonl")
    metrics = {"n_train": len(train_posts), "n_dev": len(dev), "epochs": len(history)}
    if dev:
        pred, _ = predict_posts(dev, best)
        metrics["dev"] = evaluate([p.label for p in dev], pred, mcfg.n_classes, corpus.label_names).to_dict()
    _write_json(out / "metrics.json", metrics)
    print(json.dumps({k: v for k, v in metrics.items() if k != "dev"}
                     | ({"dev_f1_snu": metrics["dev"]["f1_snu"], "dev_accuracy": metrics["dev"]["accuracy"]}
                        if dev else {})))
    return EXIT_OK


def _cross_validate(cfg, corpus, words, mcfg, train_cfg):
    k = cfg.get("folds") or 5
    if cfg.get("per_topic"):
        splits = make_splits(corpus, k=k, seed=cfg["seed"], by_topic=True)
        per_topic = {t: run_variant(corpus, s, mcfg, train_cfg, words) for t, s in sorted(splits.items())}
        summary = aggregate_cv({t: [f["metrics"] for f in r["folds"]] for t, r in per_topic.items()})
        return {"per_topic": per_topic, "summary": summary}
    result = run_variant(corpus, make_splits(corpus, k=k, seed=cfg["seed"]), mcfg, train_cfg, words)
    return {"folds": result["folds"], "summary": aggregate_cv([f["metrics"] for f in result["folds"]])}


def cmd_eval(cfg) -> int:
    _require(cfg, "corpus")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    if cfg.get("checkpoint"):
        params, doc = load_checkpoint(cfg["checkpoint"])
        names = doc.get("label_names")
        corpus = read_corpus(cfg["corpus"], names).labeled()
        C = params.config.n_classes
        pred, _ = predict_posts(corpus.posts, params)
        gold = corpus.labels
        result = {"overall": evaluate(gold, pred, C, corpus.label_names).to_dict()}
        if cfg.get("folds"):
            folds = stratified_kfold(gold, cfg["folds"], cfg["seed"])
            reports = [evaluate(gold[f], pred[f], C, corpus.label_names) for f in folds]
            result["folds"] = [r.to_dict() for r in reports]
            result["summary"] = aggregate_cv(reports)
    else:
        _require(cfg, "embeddings", "folds")
        train_cfg = _build(TrainConfig, cfg["train"], "train")
        corpus = _load_corpus(cfg).labeled()
        words = _load_words(cfg)
        result = _cross_validate(cfg, corpus, words, _model_config(cfg, corpus.n_classes, words.dim), train_cfg)
    if out is not None:
        _write_json(out / "metrics.json", result)
    summary = result.get("summary", result.get("overall"))
    print(json.dumps({k: summary[k] for k in summary if k in ("accuracy", "f1_snu", "AVG", "n_folds")}))
    return EXIT_OK


def cmd_predict(cfg) -> int:
    _require(cfg, "corpus", "checkpoint", "out")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    params, doc = load_checkpoint(cfg["checkpoint"])
    names = doc.get("label_names") or [str(i) for i in range(params.config.n_classes)]
    corpus = read_corpus(cfg["corpus"], names)
    pred, probs = predict_posts(corpus.posts, params)
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for post, k, p in zip(corpus.posts, pred, probs):
            fh.write(json.dumps({"id": post.id, "label": names[k], "index": int(k),
                                 "probs": [float(x) for x in p]}) + "\n")
    print(f"wrote {len(corpus)} predictions to {out / 'predictions.jsonl'}")
    return EXIT_OK


def cmd_lda(cfg) -> int:
    _require(cfg, "corpus", "out")
    lda_cfg = _build(LdaConfig, cfg["lda"], "lda")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    corpus = read_corpus(cfg["corpus"])
    topical, model = assign_corpus_topics(corpus, lda_cfg)
    write_corpus(topical, out / "corpus.jsonl")
    _write_json(out / "topics.json", topic_report(model))
    _write_json(out / "assignments.json", {p.id: p.topics for p in topical.posts})
    print(f"assigned {lda_cfg.top_m} of {lda_cfg.n_topics} topics to {len(corpus)} posts")
    return EXIT_OK


def cmd_synth(cfg) -> int:
    _require(cfg, "out")
    scfg = _build(S.SynthConfig, cfg["synth"], "synth")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    corpus = S.generate(scfg)
    write_corpus(corpus, out / "corpus.jsonl")
    stats = S.describe(corpus)
    _write_json(out / "stats.json", stats)
    save_word_embeddings(S.word_table(scfg, cfg["model"].get("word_dim", M.ModelConfig.word_dim)),
                         out / "embeddings.txt")
    print(json.dumps({"n_posts": stats["n_posts"], "class_counts": stats["class_counts"]}))
    return EXIT_OK


def gradcheck_tiny(seed: int = 0, eps: float = 1e-5) -> dict:
    """Finite-difference check of every parameter family on a tiny model."""
    rng = np.random.default_rng(seed)
    tokens = [f"w{i}" for i in range(12)]
    words = random_word_table(tokens, dim=6, seed=seed)
    cfg = M.ModelConfig(word_dim=6, user_dim=2, topic_dim=2, vector_dim=3, conv_len=4,
                        n_classes=3, seed=seed)
    params = M.ParameterSet(cfg, words)
    pick = lambda n: [tokens[i] for i in rng.integers(len(tokens), size=n)]
    post = Post("g", pick(5), "a", likers=["b", "c"],
                comments=[Comment("d", pick(3)), Comment("e", pick(2))],
                topics=["t1", "t2"], label=int(rng.integers(3)))
    params.register_corpus([post])
    families: dict[str, list] = {}
    for name, p in params.named_parameters():
        parts = name.split("/")
        if parts[0] == "user":
            family = f"user/{parts[1]}/{parts[3]}"
        elif parts[0] == "topic":
            family = f"topic/{parts[2]}"
        else:
            family = name
        families.setdefault(family, []).append(p)
    loss_fn = lambda: M.loss(post, params)[0]
    return {fam: gradcheck(loss_fn, ps, eps=eps) for fam, ps in families.items()}


def cmd_gradcheck(cfg) -> int:
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    errors = gradcheck_tiny(cfg["seed"])
    worst = max(errors.values())
    result = {"max_rel_error": worst, "tolerance": GRADCHECK_TOLERANCE, "families": errors}
    if out is not None:
        _write_json(out / "gradcheck.json", result)
    for fam, err in errors.items():
        print(f"{fam:32s} {err:.3e}")
    print(f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOLERANCE:g})")
    if worst > GRADCHECK_TOLERANCE:
        raise NumericError(f"gradient check failed: {worst:.3e} > {GRADCHECK_TOLERANCE:g}")
    return EXIT_OK


def cmd_ablate(cfg) -> int:
    _require(cfg, "corpus", "embeddings", "out")
    train_cfg = _build(TrainConfig, cfg["train"], "train")
    variants = cfg.get("variants")
    if isinstance(variants, str):
        variants = [v.strip() for v in variants.split(",") if v.strip()]
    for v in variants or []:
        if v not in VARIANTS:
            raise UsageError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    out = _out_dir(cfg)
    _echo_config(cfg, out)
    corpus = _load_corpus(cfg).labeled()
    words = _load_words(cfg)
    base = _model_config(cfg, corpus.n_classes, words.dim)
    if cfg.get("per_topic"):
        splits_by_topic = make_splits(corpus, k=cfg.get("folds") or 5, seed=cfg["seed"], by_topic=True)
        table = {"label_names": corpus.label_names, "layout": "per-topic", "topics": {}}
        for topic, splits in sorted(splits_by_topic.items()):
            table["topics"][topic] = run_ablation_suite(corpus, splits, base, train_cfg, words, variants)
        names = variants or list(VARIANTS)
        table["accuracy"] = {
            v: {t: r["variants"][v].get("accuracy") for t, r in table["topics"].items()} for v in names
        }
        for v in names:
            vals = [a for a in table["accuracy"][v].values() if a is not None]
            table["accuracy"][v]["AVG"] = float(np.mean(vals)) if vals else None
    elif cfg.get("folds"):
        table = run_ablation_suite(corpus, make_splits(corpus, k=cfg["folds"], seed=cfg["seed"]),
                                   base, train_cfg, words, variants)
    else:
        parts = make_splits(corpus, ratios=(0.8, 0.1, 0.1), seed=cfg["seed"])
        table = run_ablation_suite(corpus, tuple(parts), base, train_cfg, words, variants)
    _write_json(out / "ablation.json", table)
    if "variants" in table:
        for name, row in table["variants"].items():
            score = row.get("f1_snu")
            print(f"{row['title']:32s} " + (f"F1_SNU={score:.3f} acc={row['accuracy']:.3f}"
                                             if score is not None else row.get("error", "")))
    else:
        for name, row in table["accuracy"].items():
            print(f"{name:12s} " + " ".join(f"{t}={a:.3f}" for t, a in row.items() if a is not None))
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "lda": cmd_lda,
    "synth": cmd_synth,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        logging.basicConfig(level=logging.INFO if cfg.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, CheckpointError, ModelInputError, OSError, ValueError, UTCNNError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
