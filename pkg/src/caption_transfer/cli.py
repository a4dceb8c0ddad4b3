"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus_io import CorpusError
from .filtering import ClassifierError, Variant
from .lexicon import LexiconError
from .loss import check_gradients
from .metrics import Smoothing
from .pipeline import (
    PipelineConfig,
    StageError,
    assemble_file,
    build_lexicon_file,
    eval_files,
    ingest,
    run_pipeline,
    sample_negative_file,
    score_file,
    stats_file,
    train_classifier_file,
)
from .records import Source
from .textnorm import ConfigError, default_config, load_config

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("caption_transfer")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
LOSS_TOLERANCE = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _norm(args):
    return load_config(args.normalization) if getattr(args, "normalization", None) else default_config()


def cmd_ingest(args):
    _require(args, "corpus", "source", "out")
    info = ingest(args.corpus, args.source, args.out)
    print(json.dumps(info, sort_keys=True, indent=1))
    if info["errors"]:
        logger.warning("%d malformed line(s) skipped", len(info["errors"]))


def cmd_lexicon(args):
    _require(args, "input", "out")
    sizes = build_lexicon_file(args.input, args.out, args.k, _norm(args), args.split, args.workers, args.legacy_out)
    print(json.dumps(sizes, sort_keys=True))


def cmd_train(args):
    _require(args, "positives", "negatives", "out")
    negatives = args.negatives
    if args.n is not None:
        sample_path = Path(args.out).with_suffix(".negatives.jsonl")
        sample_negative_file(negatives, args.n, args.seed, sample_path)
        negatives = sample_path
    print(json.dumps(train_classifier_file(args.positives, negatives, args.out, args.alpha), sort_keys=True))


def cmd_score(args):
    _require(args, "lexicon", "input", "classifier", "out")
    info = score_file(
        args.lexicon, args.input, args.classifier, args.out, _norm(args),
        variant=args.variant, top=args.top, top_fraction=args.top_fraction, threshold=args.threshold,
        workers=args.workers, per_attribute=args.per_attribute,
    )
    print(json.dumps(info, sort_keys=True))


def cmd_assemble(args):
    _require(args, "scored", "lexicon", "out")
    result = assemble_file(
        args.scored, args.lexicon, args.out, _norm(args), min_refs=args.min_refs, min_len=args.min_len,
        max_len=args.max_len, workers=args.workers, stats_out=args.stats, drops_out=args.drops,
    )
    print(json.dumps(result.report(), sort_keys=True, indent=1))


def cmd_stats(args):
    _require(args, "dataset", "out")
    print(stats_file(args.dataset, args.out, args.lexicon, _norm(args)), end="")


def cmd_eval(args):
    _require(args, "dataset", "pred")
    report = eval_files(args.dataset, args.pred, args.smoothing, corpus_bleu=not args.sentence_bleu,
                        method=args.method, cfg=_norm(args))
    print(report.render(), end="")
    if args.json:
        Path(args.json).write_text(report.dumps(), encoding="utf-8")


def cmd_loss_check(args):
    err = max(
        check_gradients(args.seed + i, args.n, args.m, args.dims, include_object=not args.no_object,
                        normalized=args.normalized)
        for i in range(args.batches)
    )
    ok = err < LOSS_TOLERANCE
    print(f"max relative error: {err:.3e} ({'PASS' if ok else 'FAIL'}, tolerance {LOSS_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_DATA


def cmd_pipeline(args):
    _require(args, "fully", "weak", "out_dir")
    cfg = PipelineConfig(
        fully_annotated=args.fully, weakly_annotated=args.weak, out_dir=args.out_dir,
        negative_corpus=args.negatives, lexicon=args.lexicon, classifier=args.classifier,
        normalization=args.normalization, split=args.split, k=args.k, variant=args.variant,
        top=args.top, top_fraction=args.top_fraction, per_attribute=args.per_attribute,
        threshold=args.threshold, alpha=args.alpha, negatives_n=args.negatives_n, min_refs=args.min_refs,
        min_len=args.min_len, max_len=args.max_len, seed=args.seed, workers=args.workers,
    )
    manifest = run_pipeline(cfg)
    print(json.dumps(manifest["stages"]["assemble"], sort_keys=True, indent=1))


def _add_common(p, workers=True):
    p.add_argument("--normalization", type=Path, help="normalization config file (default: bundled)")
    if workers:
        p.add_argument("--workers", type=int, default=1)


def _add_score_flags(p):
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.COUNT.value)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--top", type=int, default=100_000, help="comments kept by the rank screen")
    group.add_argument("--top-fraction", type=float, help="keep this fraction of comments instead of --top")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--per-attribute", action="store_true", help="experimental: rank cut within each attribute")


def _add_assemble_flags(p):
    p.add_argument("--min-refs", type=int, default=3)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=30)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caption-transfer",
                     description="Build attribute-labeled caption datasets by lexicon transfer and score captions.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", type=Path, help="TOML file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="canonicalize a corpus file")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--source", choices=[s.value for s in Source])
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("lexicon", help="build per-attribute keyword lexicons")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--split", type=Path, help="Light/Color partition file (default: bundled)")
    p.add_argument("--legacy-out", type=Path, help="also write the seven legacy lexicons here")
    p.add_argument("--out", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_lexicon)

    p = sub.add_parser("train-classifier", help="fit the aesthetic naive Bayes classifier")
    p.add_argument("--positives", type=Path)
    p.add_argument("--negatives", type=Path)
    p.add_argument("--n", type=int, help="sample this many negatives first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="BoW weight, rank cut and classifier screen")
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--classifier", type=Path, help="model file or .jsonl verdict sidecar")
    p.add_argument("--out", type=Path)
    _add_score_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("assemble", help="build caption sets from scored comments")
    p.add_argument("--scored", type=Path)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--stats", type=Path)
    p.add_argument("--drops", type=Path, help="write the drop report here")
    _add_assemble_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--lexicon", type=Path, help="enables the BoW surrogate column")
    p.add_argument("--out", type=Path)
    _add_common(p, workers=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="BLEU-4 and SPICE-lite of predictions against a dataset")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--pred", type=Path)
    p.add_argument("--smoothing", choices=[s.value for s in Smoothing], default=Smoothing.ADD_ONE.value)
    p.add_argument("--sentence-bleu", action="store_true", help="average sentence BLEU instead of corpus BLEU")
    p.add_argument("--method", default="prediction", help="label for the Method column")
    p.add_argument("--json", type=Path, help="also write the report as JSON")
    _add_common(p, workers=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss-check", help="finite-difference check of the loss gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--dims", type=int, default=4)
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--normalized", action="store_true", help="apply 1/2N to the object term")
    p.add_argument("--no-object", action="store_true")
    p.set_defaults(func=cmd_loss_check)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--fully", type=Path, help="fully-annotated corpus (positives, lexicon source)")
    p.add_argument("--weak", type=Path, help="weakly-annotated corpus to screen")
    p.add_argument("--negatives", type=Path, help="generic caption corpus for classifier negatives")
    p.add_argument("--negatives-n", type=int, help="negatives to sample (default: number of positives)")
    p.add_argument("--lexicon", type=Path, help="use this lexicon instead of building one")
    p.add_argument("--classifier", type=Path, help="use this model or sidecar instead of training")
    p.add_argument("--split", type=Path)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path)
    _add_score_flags(p)
    _add_assemble_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _config_defaults(path: Path, command: str) -> dict:
    """Top-level keys plus the ``[command]`` table, with dashes as underscores."""
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    out = {k: v for k, v in data.items() if not isinstance(v, dict)}
    out.update(data.get(command, {}))
    return {k.replace("-", "_"): v for k, v in out.items()}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.config is not None:
            defaults = _config_defaults(args.config, args.command)
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            known = {a.dest: a for a in subparser._actions}
            unknown = sorted(set(defaults) - set(known))
            if unknown:
                raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
            for dest, value in defaults.items():
                action = known[dest]
                if action.type is not None and value is not None and not isinstance(value, bool):
                    value = action.type(value)
                defaults[dest] = value
            subparser.set_defaults(**defaults)
            args = parser.parse_args(argv)
        result = args.func(args)
    except UsageError as exc:
        print(f"caption-transfer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"caption-transfer: stage '{exc.stage}' failed: {exc.cause}", file=sys.stderr)
        return EXIT_DATA
    except (CorpusError, LexiconError, ClassifierError, ConfigError, ValueError, OSError) as exc:
        print(f"caption-transfer: {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
