"""Command-line entry point: ``noisyre {train,eval,predict,synth,selfcheck,grad-check}``.

Exit codes: 0 success, 1 failed checks or runtime error, 2 bad input or
arguments, 3 checkpoint problems (none found, schema mismatch).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import converter, metrics, selfcheck
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, resolve
from .data import (CorpusError, RelationSchema, build_vocabulary, gold_triples, group_bags, load_corpus,
                   load_pretrained_embeddings, split_validation, write_corpus)
from .experiment import evaluate
from .model import RelationModel, SchemaMismatch
from .selector import SELECTORS, multi_label_predict
from .synth import synth_generate, synth_schema
from .trainer import TrainingDiverged, average_sentence_probs, ensemble_predict, train

log = logging.getLogger("noisyre")

RUN_DIR_ENV = "NOISYRE_RUN_DIR"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _run_dir(args, default: str) -> Path:
    if getattr(args, "run_dir", None):
        return Path(args.run_dir)
    return Path(os.environ.get(RUN_DIR_ENV, default))


def _existing(path, what: str) -> Path:
    if not path:
        raise CliError(f"missing required {what} path", 2)
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}", 2)
    return p


# flags shared by config-driven commands; dest names match RunConfig fields
_CONFIG_FLAGS = [
    ("--window", int), ("--filters", int), ("--word-dim", int), ("--position-dim", int),
    ("--max-len", int), ("--position-clip", int), ("--dropout-rate", float),
    ("--batch-size", int), ("--pretrain-epochs", int), ("--epochs", int),
    ("--checkpoint-interval", int), ("--init-ratio", float), ("--ensemble-size", int),
    ("--validation-fraction", float), ("--learning-rate", float), ("--weight-decay", float),
    ("--seed", int), ("--threads", int),
]


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file; flags override it")
    for flag, kind in _CONFIG_FLAGS:
        p.add_argument(flag, type=kind, default=None)
    p.add_argument("--reinit-transition", type=_bool, default=None,
                   help="re-initialize the transition column when fine-tuning starts (default true)")


def _overrides(args, keys) -> dict:
    return {k: getattr(args, k, None) for k in keys}


def _resolved(args, extra: dict | None = None) -> RunConfig:
    keys = [flag[2:].replace("-", "_") for flag, _ in _CONFIG_FLAGS] + ["reinit_transition"]
    over = _overrides(args, keys)
    over.update(extra or {})
    try:
        return resolve(getattr(args, "config", None), over)
    except (ConfigError, OSError) as exc:
        raise CliError(str(exc), 2) from None


# commands ------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _resolved(args, {"corpus": args.corpus, "schema": args.schema, "embeddings": args.embeddings})
    corpus = _existing(cfg.corpus, "corpus")
    schema_path = _existing(cfg.schema, "schema")
    run_dir = _run_dir(args, "run")
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(run_dir / "config.txt")
    schema = RelationSchema.load(schema_path)
    instances = load_corpus(corpus, schema)
    if not instances:
        raise CliError(f"corpus {corpus} is empty", 2)
    bags = group_bags(instances, "train")
    tr, va = split_validation(bags, cfg.validation_fraction, cfg.seed)
    vocab = build_vocabulary(instances, cfg.word_dim, cfg.seed)
    if cfg.embeddings:
        vocab = load_pretrained_embeddings(_existing(cfg.embeddings, "embeddings"), vocab, cfg.seed)
    model = RelationModel.create(schema, vocab, cfg.encoder(schema.K), cfg.seed)
    with threadpool_limits(cfg.threads):
        result = train(model, tr, va, cfg.training(), run_dir)
    (run_dir / "best.txt").write_text(result.best.path.relative_to(run_dir).as_posix() + "\n")
    converter.export_column_csv(result.model.transition, schema.labels, run_dir / "transition.csv")
    print(f"best checkpoint {result.best.path} (val accuracy {result.best.val_accuracy:.4f})")
    return 0


def _checkpoint_paths(args) -> list[Path]:
    if args.checkpoint:
        paths = [Path(p) for p in args.checkpoint]
        missing = [p for p in paths if not (p / "manifest.json").is_file()]
        if missing:
            raise CliError(f"no checkpoint at {missing[0]}", 3)
        return paths
    run_dir = _run_dir(args, "run")
    log_path = run_dir / "train_log.jsonl"
    if not log_path.is_file():
        raise CliError(f"no checkpoints found in {run_dir}", 3)
    records = [json.loads(line) for line in log_path.read_text().splitlines() if line.strip()]
    paths = [run_dir / r["path"] for r in records]
    if not paths:
        raise CliError(f"no checkpoints found in {run_dir}", 3)
    if args.ensemble_last:
        return paths[-args.ensemble_last:]
    best = run_dir / "best.txt"
    return [run_dir / best.read_text().strip()] if best.is_file() else [paths[-1]]


def _load_models(args, schema: RelationSchema) -> list[RelationModel]:
    try:
        return [RelationModel.load(p, schema) for p in _checkpoint_paths(args)]
    except (SchemaMismatch, CheckpointError) as exc:
        raise CliError(str(exc), 3) from None


def _read_gold(path) -> set:
    gold = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            head, tail, rel = line.split("\t")
            gold.add((head, tail, rel))
    return gold


def cmd_eval(args) -> int:
    schema = RelationSchema.load(_existing(args.schema, "schema"))
    instances = load_corpus(_existing(args.test_corpus, "test corpus"), schema)
    models = _load_models(args, schema)
    gold = _read_gold(_existing(args.gold, "gold")) if args.gold else gold_triples(instances)
    if not gold:
        raise CliError("gold set is empty", 2)
    ev = evaluate(models, instances, args.selector, gold)
    out = Path(args.out_dir) if args.out_dir else _run_dir(args, "run") / "eval"
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_pr_csv(metrics.pr_curve(ev.ranking, gold), out / "pr_curve.csv")
    summary = metrics.summary(ev.ranking, gold)
    summary["checkpoints"] = len(models)
    summary["selector"] = args.selector
    metrics.write_summary(summary, out / "metrics.json")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    schema = RelationSchema.load(_existing(args.schema, "schema"))
    instances = load_corpus(_existing(args.corpus, "corpus"), schema)
    models = _load_models(args, schema)
    prepared, outputs = ensemble_predict(models, group_bags(instances, "eval"), args.selector)
    probs = average_sentence_probs(models, prepared)
    out = Path(args.out) if args.out else _run_dir(args, "run") / "predictions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for pb, o, p in zip(prepared, outputs, probs):
            fh.write(json.dumps({
                "head": pb.bag.head_id, "tail": pb.bag.tail_id,
                "relation": schema.labels[o.prediction],
                "distribution": [float(x) for x in o.distribution],
                "sentence": o.sentence,
                "multi_label": sorted(schema.labels[k] for k in multi_label_predict(p, args.threshold)),
            }) + "\n")
    print(f"wrote {len(prepared)} bag predictions to {out}")
    return 0


def cmd_synth(args) -> int:
    cfg = _resolved(args, {"relations": args.relations, "vocab_size": args.vocab_size, "bags": args.bags,
                           "min_sentences": args.min_sentences, "max_sentences": args.max_sentences,
                           "rho": args.rho, "na_fraction": args.na_fraction,
                           "typed_entities": args.typed_entities})
    try:
        synth_cfg = cfg.synth()
    except ValueError as exc:
        raise CliError(str(exc), 2) from None
    instances = synth_generate(synth_cfg)
    Path(args.out_corpus).parent.mkdir(parents=True, exist_ok=True)
    write_corpus(instances, args.out_corpus)
    synth_schema(synth_cfg.K).save(args.out_schema)
    noisy = sum(i.true_relation != i.relation for i in instances)
    print(f"wrote {len(instances)} sentences ({noisy} noisy) to {args.out_corpus}")
    return 0


def cmd_selfcheck(args) -> int:
    results = selfcheck.run_all(args.trials, args.seed, gradients=not args.skip_gradients)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_grad_check(args) -> int:
    r = selfcheck.check_gradients(args.seed, args.tolerance)
    print(r.line())
    return 0 if r.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisyre", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a JSONL corpus")
    p.add_argument("--corpus")
    p.add_argument("--schema")
    p.add_argument("--embeddings", help="pre-trained word vectors, 'token v1 ... vd' per line")
    p.add_argument("--run-dir")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func in (("eval", cmd_eval), ("predict", cmd_predict)):
        p = sub.add_parser(name)
        p.add_argument("--schema", required=True)
        p.add_argument("--checkpoint", action="append", help="checkpoint directory (repeatable)")
        p.add_argument("--run-dir")
        p.add_argument("--ensemble-last", type=int, default=None, metavar="N",
                       help="average the last N checkpoints of the run")
        p.add_argument("--selector", choices=sorted(SELECTORS), default="cond_opt")
        p.set_defaults(func=func)
        if name == "eval":
            p.add_argument("--test-corpus", required=True)
            p.add_argument("--gold", help="tab-separated head, tail, relation triples")
            p.add_argument("--out-dir")
        else:
            p.add_argument("--corpus", required=True)
            p.add_argument("--out")
            p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted truth")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-schema", required=True)
    p.add_argument("--relations", "-K", type=int, default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--bags", type=int, default=None)
    p.add_argument("--min-sentences", type=int, default=None)
    p.add_argument("--max-sentences", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--na-fraction", type=float, default=None)
    p.add_argument("--typed-entities", type=_bool, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selfcheck", help="randomized algebra and gradient checks")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-gradients", action="store_true")
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("grad-check", help="finite-difference check of the tiny model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        if not args.verbose:
            warnings.simplefilter("ignore")
        try:
            return args.func(args)
        except CliError as exc:
            code, message = exc.code, str(exc)
        except (SchemaMismatch, CheckpointError) as exc:
            code, message = 3, str(exc)
        except (CorpusError, ValueError, KeyError) as exc:
            code, message = 2, str(exc)
        except (TrainingDiverged, RuntimeError, OSError) as exc:
            code, message = 1, str(exc)
    print(f"noisyre {args.command}: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
