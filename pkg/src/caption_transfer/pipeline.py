"""Stage functions and the one-shot pipeline.

Stages talk to each other only through files in the output directory, so
any stage can be rerun on its own from the previous stage's artifacts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .assemble import (
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_LEN,
    DEFAULT_MIN_REFS,
    AssemblyResult,
    assemble,
    compute_stats,
    dumps_stats,
    render_stats,
)
from .corpus_io import (
    CorpusError,
    iter_jsonl,
    parse_corpus,
    read_dataset,
    read_scored,
    sha256_file,
    write_corpus,
    write_dataset,
    write_scored,
)
from .filtering import Variant, load_classifier, score_comments, train_classifier
from .lexicon import (
    build_lexicons,
    count_terms,
    load_split,
    merge_attributes,
    read_lexicons,
    union_frequencies,
    v2_lexicons,
    write_lexicons,
)
from .metrics import EvalPair, MetricReport, evaluate_corpus
from .records import AttributeV2, Source
from .sampling import PRNG_NAME, sample_negatives
from .textnorm import NormalizationConfig, default_config, load_config, tokenize

logger = logging.getLogger(__name__)


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


# --- individual stages ------------------------------------------------------


def ingest(path, source, out) -> dict:
    """Canonicalize one corpus file; returns its manifest plus line errors."""
    parsed = parse_corpus(path, source)
    manifest = write_corpus(parsed.comments, out, parsed.images)
    info = manifest.to_json()
    info["input_lines"] = parsed.n_lines
    info["errors"] = [{"line": e.line, "message": e.message} for e in parsed.errors]
    return info


def build_lexicon_file(pccd_path, out, k: int, cfg: NormalizationConfig, split_path=None,
                       workers: int = 1, legacy_out=None) -> dict:
    parsed = parse_corpus(pccd_path, Source.FULLY_ANNOTATED)
    tables = count_terms(parsed.comments, cfg, workers)
    legacy = build_lexicons(tables, k)
    merged = merge_attributes(legacy, load_split(split_path), k)
    write_lexicons(merged, out)
    if legacy_out is not None:
        write_lexicons(legacy, legacy_out)
    return {a.value: len(lex) for a, lex in merged.items()}


def sample_negative_file(corpus_path, n: int, seed: int, out) -> int:
    parsed = parse_corpus(corpus_path, Source.NEGATIVE_CORPUS)
    sample = sample_negatives(parsed.comments, n, seed)
    write_corpus(sample, out)
    return len(sample)


def train_classifier_file(positives_path, negatives_path, out, alpha: float = 1.0) -> dict:
    pos = parse_corpus(positives_path, Source.FULLY_ANNOTATED).comments
    neg = parse_corpus(negatives_path, Source.NEGATIVE_CORPUS).comments
    model = train_classifier(pos, neg, alpha)
    model.save(out)
    return {"positives": len(pos), "negatives": len(neg), "vocabulary": len(model.vocabulary)}


def _load_v2_lexicons(path):
    if not Path(path).exists():
        raise StageError("lexicon", f"lexicon file not found: {path}")
    return v2_lexicons(read_lexicons(path))


def score_file(lexicon_path, comments_path, classifier_path, out, cfg: NormalizationConfig, *,
               variant=Variant.COUNT, top: Optional[int] = 100_000, top_fraction: Optional[float] = None,
               threshold: float = 0.5, workers: int = 1, per_attribute: bool = False) -> dict:
    lexicons = _load_v2_lexicons(lexicon_path)
    classifier = load_classifier(classifier_path)
    comments = parse_corpus(comments_path, Source.WEAKLY_ANNOTATED).comments
    scored = score_comments(
        comments, union_frequencies(lexicons.values()), classifier, cfg,
        variant=variant, top=top, top_fraction=top_fraction, threshold=threshold, workers=workers,
        per_attribute_lexicons=lexicons if per_attribute else None,
    )
    write_scored(scored, out)
    return {
        "scored": len(scored),
        "passed_rank": sum(s.passed_rank for s in scored),
        "passed_classifier": sum(s.passed_classifier for s in scored),
        "passed_both": sum(s.survives for s in scored),
    }


def assemble_file(scored_path, lexicon_path, out, cfg: NormalizationConfig, *, min_refs=DEFAULT_MIN_REFS,
                  min_len=DEFAULT_MIN_LEN, max_len=DEFAULT_MAX_LEN, workers: int = 1,
                  stats_out=None, drops_out=None) -> AssemblyResult:
    lexicons = _load_v2_lexicons(lexicon_path)
    scored = read_scored(scored_path)
    result = assemble(scored, lexicons, cfg, min_refs=min_refs, min_len=min_len, max_len=max_len, workers=workers)
    write_dataset(result.sets, out)
    if drops_out is not None:
        report = result.report()
        report["drop_ids"] = result.drops
        report["dropped_group_detail"] = [list(g) for g in result.dropped_groups]
        Path(drops_out).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    if stats_out is not None:
        write_stats(result.sets, stats_out, lexicons, cfg)
    return result


def write_stats(sets, stats_out, lexicons=None, cfg=None, name: str = "dataset") -> str:
    stats = compute_stats(sets, lexicons, cfg)
    stats_out = Path(stats_out)
    stats_out.parent.mkdir(parents=True, exist_ok=True)
    stats_out.write_text(dumps_stats(stats), encoding="utf-8")
    table = render_stats(stats, name)
    stats_out.with_suffix(".txt").write_text(table, encoding="utf-8")
    return table


def stats_file(dataset_path, stats_out, lexicon_path=None, cfg=None) -> str:
    sets = read_dataset(dataset_path)
    lexicons = _load_v2_lexicons(lexicon_path) if lexicon_path else None
    return write_stats(sets, stats_out, lexicons, cfg or default_config(), Path(dataset_path).stem)


def load_eval_pairs(dataset_path, pred_path) -> list[EvalPair]:
    """Join predictions ``{image_id, attribute, caption}`` to caption sets.

    Every caption of the matching set (ground truth and references) serves
    as a reference.
    """
    sets = {(cs.image_id, cs.attribute): cs for cs in read_dataset(dataset_path)}
    pairs = []
    for lineno, obj in iter_jsonl(pred_path):
        try:
            key = (str(obj["image_id"]), AttributeV2.parse(obj["attribute"]))
            caption = obj["caption"]
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusError(f"{pred_path}:{lineno}: bad prediction: {exc}") from exc
        if key not in sets:
            raise CorpusError(f"{pred_path}:{lineno}: no caption set for {key[0]}/{key[1].value}")
        refs = tuple(tokenize(c) for c in sets[key].captions)
        pairs.append(EvalPair(tokenize(caption), refs, key[1]))
    return pairs


def eval_files(dataset_path, pred_path, smoothing="add_one", *, corpus_bleu: bool = True,
               method: str = "prediction", cfg: NormalizationConfig | None = None) -> MetricReport:
    pairs = load_eval_pairs(dataset_path, pred_path)
    return evaluate_corpus(pairs, smoothing, cfg, corpus_bleu=corpus_bleu, method=method)


# --- one-shot pipeline ------------------------------------------------------


@dataclass
class PipelineConfig:
    fully_annotated: Path
    weakly_annotated: Path
    out_dir: Path
    negative_corpus: Optional[Path] = None
    lexicon: Optional[Path] = None
    classifier: Optional[Path] = None
    normalization: Optional[Path] = None
    split: Optional[Path] = None
    k: int = 1000
    variant: str = Variant.COUNT.value
    top: Optional[int] = 100_000
    top_fraction: Optional[float] = None
    per_attribute: bool = False
    threshold: float = 0.5
    alpha: float = 1.0
    negatives_n: Optional[int] = None
    min_refs: int = DEFAULT_MIN_REFS
    min_len: int = DEFAULT_MIN_LEN
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("fully_annotated", "weakly_annotated", "out_dir", "negative_corpus", "lexicon",
                     "classifier", "normalization", "split"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))

    def flags(self) -> dict:
        """Every setting that can change output bytes; worker count excluded."""
        out = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(self).items()}
        out.pop("workers")
        out.pop("out_dir")
        return out

    def validate(self) -> None:
        checks = [("ingest", self.fully_annotated), ("ingest", self.weakly_annotated)]
        if self.classifier is None:
            if self.negative_corpus is None:
                raise StageError("classifier", "either a classifier or a negative corpus is required")
            checks.append(("ingest", self.negative_corpus))
        else:
            checks.append(("classifier", self.classifier))
        if self.lexicon is not None:
            checks.append(("lexicon", self.lexicon))
        if self.normalization is not None:
            checks.append(("normalization", self.normalization))
        if self.split is not None:
            checks.append(("lexicon", self.split))
        for stage, path in checks:
            if not path.exists():
                raise StageError(stage, f"input not found: {path}")


ARTIFACTS = {
    "fully": "corpus/fully_annotated.jsonl",
    "weak": "corpus/weakly_annotated.jsonl",
    "negative": "corpus/negative_corpus.jsonl",
    "lexicon": "lexicon.csv",
    "lexicon_legacy": "lexicon_legacy.csv",
    "negatives_sample": "negatives_sample.jsonl",
    "classifier": "classifier.json",
    "scored": "scored.jsonl",
    "dataset": "dataset.jsonl",
    "drops": "drops.json",
    "stats": "stats.json",
    "stats_table": "stats.txt",
}


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage in order and write ``manifest.json``.

    A failing stage raises ``StageError``; the manifest is still written,
    marked failed, with every artifact produced so far listed as stale.
    """
    out = cfg.out_dir
    path = {k: out / v for k, v in ARTIFACTS.items()}
    manifest: dict = {
        "version": __version__,
        "prng": PRNG_NAME,
        "flags": cfg.flags(),
        "stages": {},
        "status": "running",
    }
    written: list[str] = []
    stage = "config"

    def done(name: str, info, *keys: str):
        manifest["stages"][name] = info
        written.extend(keys)

    try:
        cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        stage = "normalization"
        norm = load_config(cfg.normalization) if cfg.normalization else default_config()
        manifest["normalization_version"] = norm.version

        stage = "ingest"
        ingested = {
            "fully_annotated": ingest(cfg.fully_annotated, Source.FULLY_ANNOTATED, path["fully"]),
            "weakly_annotated": ingest(cfg.weakly_annotated, Source.WEAKLY_ANNOTATED, path["weak"]),
        }
        keys = ["fully", "weak"]
        if cfg.classifier is None:
            ingested["negative_corpus"] = ingest(cfg.negative_corpus, Source.NEGATIVE_CORPUS, path["negative"])
            keys.append("negative")
        done("ingest", ingested, *keys)

        stage = "lexicon"
        if cfg.lexicon is not None:
            lexicon_path = cfg.lexicon
            _load_v2_lexicons(lexicon_path)
            done("lexicon", {"source": str(cfg.lexicon)})
        else:
            lexicon_path = path["lexicon"]
            sizes = build_lexicon_file(path["fully"], lexicon_path, cfg.k, norm, cfg.split, cfg.workers,
                                       legacy_out=path["lexicon_legacy"])
            done("lexicon", {"sizes": sizes}, "lexicon", "lexicon_legacy")

        stage = "classifier"
        if cfg.classifier is not None:
            classifier_path = cfg.classifier
            done("classifier", {"source": str(cfg.classifier)})
        else:
            n_neg = cfg.negatives_n if cfg.negatives_n is not None else ingested["fully_annotated"]["counts"]["fully_annotated"]
            sampled = sample_negative_file(path["negative"], n_neg, cfg.seed, path["negatives_sample"])
            classifier_path = path["classifier"]
            info = train_classifier_file(path["fully"], path["negatives_sample"], classifier_path, cfg.alpha)
            info["sampled_negatives"] = sampled
            done("classifier", info, "negatives_sample", "classifier")

        stage = "score"
        info = score_file(
            lexicon_path, path["weak"], classifier_path, path["scored"], norm,
            variant=cfg.variant, top=cfg.top, top_fraction=cfg.top_fraction, threshold=cfg.threshold,
            workers=cfg.workers, per_attribute=cfg.per_attribute,
        )
        done("score", info, "scored")

        stage = "assemble"
        result = assemble_file(
            path["scored"], lexicon_path, path["dataset"], norm, min_refs=cfg.min_refs, min_len=cfg.min_len,
            max_len=cfg.max_len, workers=cfg.workers, drops_out=path["drops"],
        )
        if not result.reconciles():
            raise StageError("assemble", "comment accounting does not reconcile")
        done("assemble", result.report(), "dataset", "drops")

        stage = "stats"
        write_stats(result.sets, path["stats"], _load_v2_lexicons(lexicon_path), norm, "dataset")
        done("stats", {}, "stats", "stats_table")
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = exc.stage if isinstance(exc, StageError) else stage
        manifest["error"] = str(exc.cause if isinstance(exc, StageError) else exc)
        manifest["stale"] = [ARTIFACTS[k] for k in written]
        _write_manifest(out, manifest)
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc

    manifest["status"] = "ok"
    manifest["checksums"] = {ARTIFACTS[k]: sha256_file(path[k]) for k in written}
    _write_manifest(out, manifest)
    return manifest


def _write_manifest(out: Path, manifest: dict) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    except OSError:
        logger.exception("could not write manifest to %s", out)
