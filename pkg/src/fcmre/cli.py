"""Command-line interface: train, predict, eval, gradcheck, ablate.

Exit codes: 0 success, 1 usage error (or a failed gradient check), 2 data
error. Options may also come from a JSON config file via ``--config``;
explicit flags win, and the effective configuration is echoed into the
output so runs are reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .ablation import format_ablation, run_ablation
from .archive import ArchiveFormatError, load_model, save_model
from .corpus import CorpusFormatError, load_corpus
from .embeddings import EmbeddingFormatError, load_word2vec_text
from .evaluation import format_report, score_ace, score_semeval_macro
from .features import FeatureConfig
from .gradcheck import run_fcm_gradcheck
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DATA_ERRORS = (CorpusFormatError, EmbeddingFormatError, ArchiveFormatError,
               FileNotFoundError, PermissionError, IsADirectoryError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="fcmre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_options(p):
        p.add_argument("--pairs", choices=["given", "all"], default="given",
                       help="instance generation: labeled pairs only, or all "
                            "ordered mention pairs padded with --nil")
        p.add_argument("--nil", default=None, metavar="LABEL",
                       help="no-relation label (required with --pairs all)")
        p.add_argument("--max-intervening", type=int, default=None, metavar="K",
                       help="with --pairs all, skip pairs separated by more "
                            "than K other mentions")

    def add_feature_options(p):
        p.add_argument("--templates", default="heademb,context,inbetween,onpath",
                       help="comma-separated template sets")
        p.add_argument("--entity-types", default="gold",
                       help="gold|ne|supersense|cluster<k>|none")
        p.add_argument("--path-inclusive", type=_parse_bool, default=True,
                       metavar="BOOL", help="include the two heads in the "
                       "dependency path (default true)")
        p.add_argument("--bias", action="store_true",
                       help="add an always-on per-word feature")

    def add_train_options(p):
        p.add_argument("--kind", choices=["fcm", "loglin", "hybrid"], default="fcm")
        p.add_argument("--fine-tune", action="store_true",
                       help="update word embeddings during training")
        p.add_argument("--lr", type=float, default=None,
                       help="learning rate (default 5e-3 fine-tuned, 5e-2 frozen)")
        p.add_argument("--embedding-lr", type=float, default=None)
        p.add_argument("--l2", type=float, default=1e-4)
        p.add_argument("--epochs", type=int, default=50)
        p.add_argument("--patience", type=int, default=5)
        p.add_argument("--seed", type=int, default=13)
        p.add_argument("--no-shuffle", action="store_true")
        p.add_argument("--optimizer", choices=["sgd", "adagrad"], default="sgd")
        p.add_argument("--metric", choices=["accuracy", "micro_f1", "macro_f1"],
                       default=None, help="early-stopping metric (default: by --eval)")
        p.add_argument("--eval", dest="protocol", choices=["ace", "semeval"],
                       default="ace")

    p_train = sub.add_parser("train", help="fit a model and save an archive")
    p_train.add_argument("--config", default=None, help="JSON file with defaults")
    p_train.add_argument("--train", required=True, dest="train_path")
    p_train.add_argument("--dev", default=None, dest="dev_path")
    p_train.add_argument("--embeddings", default=None)
    p_train.add_argument("--model", required=True, help="output archive path")
    p_train.add_argument("--log", default=None, help="training-log path (JSONL)")
    add_corpus_options(p_train)
    add_feature_options(p_train)
    add_train_options(p_train)

    p_pred = sub.add_parser("predict", help="label instances with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--test", required=True, dest="test_path")
    p_pred.add_argument("--embeddings", default=None,
                        help="needed when the archive has no embedded embeddings")
    p_pred.add_argument("--out", default=None, help="output JSONL (default stdout)")
    add_corpus_options(p_pred)

    p_eval = sub.add_parser("eval", help="score predictions against gold labels")
    p_eval.add_argument("--gold", required=True,
                        help="gold corpus JSONL or prediction JSONL")
    p_eval.add_argument("--pred", required=True, help="prediction JSONL")
    p_eval.add_argument("--eval", dest="protocol", choices=["ace", "semeval"],
                        default="ace")
    p_eval.add_argument("--other", default="Other")
    p_eval.add_argument("--json", dest="json_out", default=None,
                        help="also write the report as JSON")
    add_corpus_options(p_eval)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_grad.add_argument("--seed", type=int, default=7)
    p_grad.add_argument("--count", type=int, default=100)
    p_grad.add_argument("--n", type=int, default=5, help="sentence length")
    p_grad.add_argument("--dim", type=int, default=8, help="embedding dimension")
    p_grad.add_argument("--labels", type=int, default=4)
    p_grad.add_argument("--no-fine-tune", action="store_true",
                        help="skip the embedding-gradient check")
    p_grad.add_argument("--threshold", type=float, default=1e-4)

    p_abl = sub.add_parser("ablate", help="retrain with each template set removed")
    p_abl.add_argument("--train", required=True, dest="train_path")
    p_abl.add_argument("--dev", required=True, dest="dev_path")
    p_abl.add_argument("--embeddings", required=True)
    p_abl.add_argument("--json", dest="json_out", default=None)
    add_corpus_options(p_abl)
    add_feature_options(p_abl)
    add_train_options(p_abl)
    return parser


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill options from the JSON config file; explicit flags keep priority."""
    if getattr(args, "config", None) is None:
        return
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError(f"{args.config}: config file must hold a JSON object")
    explicit = {a.lstrip("-").replace("-", "_").split("=")[0]
                for a in argv if a.startswith("--")}
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"{args.config}: unknown option {key!r}")
        if attr not in explicit:
            setattr(args, attr, value)


def _load_corpus(path: str, args: argparse.Namespace):
    mode = "all_pairs" if args.pairs == "all" else "given"
    if mode == "all_pairs" and args.nil is None:
        raise UsageError("--pairs all requires --nil")
    return load_corpus(path, mode=mode, nil_label=args.nil,
                       max_intervening=args.max_intervening)


def _feature_config(args: argparse.Namespace) -> FeatureConfig:
    return FeatureConfig(templates=FeatureConfig.parse_templates(args.templates),
                         entity_types=args.entity_types,
                         path_inclusive=args.path_inclusive,
                         include_bias=args.bias)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    metric = args.metric
    if metric is None:
        metric = {"ace": "micro_f1", "semeval": "macro_f1"}[args.protocol]
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs, l2=args.l2,
                       fine_tune=args.fine_tune, seed=args.seed,
                       shuffle=not args.no_shuffle, early_stop_metric=metric,
                       patience=args.patience, optimizer=args.optimizer,
                       embedding_lr=args.embedding_lr)


def _effective_config(args: argparse.Namespace) -> dict:
    skip = {"command", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_train(args) -> int:
    train_corpus = _load_corpus(args.train_path, args)
    dev_corpus = _load_corpus(args.dev_path, args) if args.dev_path else None
    table = None
    if args.kind in ("fcm", "hybrid"):
        if args.embeddings is None:
            raise UsageError(f"--kind {args.kind} requires --embeddings")
        table = load_word2vec_text(args.embeddings)
    config = _train_config(args)
    result = train(args.kind, train_corpus.instances(),
                   dev_corpus.instances() if dev_corpus else None,
                   config=config, feature_config=_feature_config(args),
                   table=table, nil_label=args.nil)
    save_model(args.model, result.model, train_config=config)

    log_lines = [json.dumps({"epoch": rec.epoch, "train_loss": rec.train_loss,
                             "dev_metric": rec.dev_metric, "seconds": rec.seconds})
                 for rec in result.history]
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write("\n".join(log_lines) + "\n")
    else:
        for line in log_lines:
            print(line)
    print(json.dumps({"model": args.model, "best_epoch": result.best_epoch,
                      "config": _effective_config(args)}))
    return EXIT_OK


def cmd_predict(args) -> int:
    table = load_word2vec_text(args.embeddings) if args.embeddings else None
    model = load_model(args.model, table=table)
    corpus = _load_corpus(args.test_path, args)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for sentence, instances in corpus.items:
            for inst in instances:
                proba = model.proba(inst)
                label = model.labels.labels[int(np.argmax(proba))]
                out.write(json.dumps({"sentence": sentence.sid, "m1": inst.m1.mid,
                                      "m2": inst.m2.mid, "label": label,
                                      "proba": [float(p) for p in proba]}) + "\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _read_labels_keyed(path: str, args) -> dict[tuple[str, str, str], str]:
    """(sentence, m1, m2) -> label, from a corpus or prediction JSONL file."""
    with open(path, encoding="utf-8") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
    if first and "tokens" in json.loads(first):
        corpus = _load_corpus(path, args)
        return {(s.sid, i.m1.mid, i.m2.mid): i.label
                for s, insts in corpus.items for i in insts}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["sentence"], rec["m1"], rec["m2"])
                out[key] = rec["label"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise CorpusFormatError(
                    f"{path}: line {lineno}: not a prediction record") from None
    return out


def cmd_eval(args) -> int:
    gold_map = _read_labels_keyed(args.gold, args)
    pred_map = _read_labels_keyed(args.pred, args)
    missing = sorted(set(gold_map) - set(pred_map))
    extra = sorted(set(pred_map) - set(gold_map))
    if missing or extra:
        detail = []
        if missing:
            detail.append(f"{len(missing)} gold pairs missing from predictions")
        if extra:
            detail.append(f"{len(extra)} predicted pairs not in gold")
        raise CorpusFormatError("; ".join(detail))
    keys = sorted(gold_map)
    gold = [gold_map[k] for k in keys]
    pred = [pred_map[k] for k in keys]
    if args.protocol == "semeval":
        report = score_semeval_macro(gold, pred, other_label=args.other)
    else:
        report = score_ace(gold, pred, nil_label=args.nil)
    print(format_report(report))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst = run_fcm_gradcheck(seed=args.seed, count=args.count, n=args.n,
                              dim=args.dim, num_labels=args.labels,
                              fine_tune=not args.no_fine_tune)
    print(f"max relative gradient error: {worst:.3e} over {args.count} instances "
          f"(threshold {args.threshold:.1e})")
    if worst > args.threshold:
        print("gradient check FAILED", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_ablate(args) -> int:
    train_corpus = _load_corpus(args.train_path, args)
    dev_corpus = _load_corpus(args.dev_path, args)
    table = load_word2vec_text(args.embeddings)
    rows = run_ablation(train_corpus.instances(), dev_corpus.instances(), table,
                        base_config=_feature_config(args),
                        train_config=_train_config(args), kind=args.kind,
                        protocol=args.protocol, nil_label=args.nil)
    print(format_ablation(rows))
    if args.json_out:
        payload = [{"config": name, **report.to_json()} for name, report in rows]
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval,
            "gradcheck": cmd_gradcheck, "ablate": cmd_ablate}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
