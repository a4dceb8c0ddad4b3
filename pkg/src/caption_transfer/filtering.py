"""Two screening passes over weakly-annotated comments.

A comment survives only if its bag-of-words weight ranks in the top N and
the aesthetic classifier accepts it.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .parallel import map_chunks
from .records import AttributeV2, RawComment, ScoredComment
from .textnorm import Mode, NormalizationConfig, TokenizedText, prepare, tokenize

MODEL_FORMAT = "caption-transfer/naive-bayes"
MODEL_VERSION = 1


class Variant(str, enum.Enum):
    COUNT = "count"
    FREQUENCY_WEIGHTED = "frequency_weighted"


class ClassifierError(ValueError):
    pass


def bow_weight(text: TokenizedText | Sequence[str], lexicon: Mapping[str, int], variant: Variant | str = Variant.COUNT):
    """Aesthetic weight of already-normalized tokens.

    ``count`` counts lexicon hits with multiplicity; ``frequency_weighted``
    sums the lexicon frequency of every hit.
    """
    tokens = text.tokens if isinstance(text, TokenizedText) else text
    if Variant(variant) is Variant.COUNT:
        return sum(1 for t in tokens if t in lexicon)
    return sum(lexicon[t] for t in tokens if t in lexicon)


def rank_key(s: ScoredComment):
    return (-s.bow_weight, s.comment.comment_id)


def rank_and_cut(scored: Iterable[ScoredComment], n: int) -> list[ScoredComment]:
    """Mark the ``n`` heaviest comments as passing the rank screen.

    Ties break on comment_id ascending. Output is in rank order whatever
    the input order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ranked = sorted(scored, key=rank_key)
    return [replace(s, passed_rank=i < n) for i, s in enumerate(ranked)]


def rank_and_cut_per_attribute(
    scored: Iterable[ScoredComment],
    n: int,
    lexicons: Mapping[AttributeV2, "object"],
    cfg: NormalizationConfig,
) -> list[ScoredComment]:
    """Experimental: a comment passes if it ranks in the top ``n`` of any
    attribute it would be assigned to."""
    ranked = sorted(scored, key=rank_key)
    passing: set[str] = set()
    for attr in sorted(lexicons, key=lambda a: a.value):
        lex = lexicons[attr]
        members = [s for s in ranked if any(t in lex for t in prepare(s.comment.text, cfg, Mode.BOW_SCORING).tokens)]
        passing.update(s.comment.comment_id for s in members[:n])
    return [replace(s, passed_rank=s.comment.comment_id in passing) for s in ranked]


def top_n_for(count: int, top: int | None = None, top_fraction: float | None = None) -> int:
    """Resolve the rank cut from an absolute ``top`` or a fraction of ``count``."""
    if top_fraction is not None:
        if not 0.0 < top_fraction <= 1.0:
            raise ValueError("top_fraction must be in (0, 1]")
        return max(1, math.ceil(top_fraction * count))
    if top is None:
        raise ValueError("one of top or top_fraction is required")
    return top


# --- classifier -------------------------------------------------------------


class Classifier(Protocol):
    def probability(self, comment: RawComment) -> float: ...


@dataclass(frozen=True)
class ClassifierModel:
    """Two-class multinomial naive Bayes over plain tokens.

    Out-of-vocabulary tokens are skipped, so a text made only of unseen
    tokens gets the positive prior back.
    """

    alpha: float
    log_prior_pos: float
    log_prior_neg: float
    log_lik_pos: Mapping[str, float]
    log_lik_neg: Mapping[str, float]

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.log_lik_pos)

    def posterior(self, tokens: Iterable[str]) -> float:
        score_pos = self.log_prior_pos
        score_neg = self.log_prior_neg
        for t in tokens:
            if t in self.log_lik_pos:
                score_pos += self.log_lik_pos[t]
                score_neg += self.log_lik_neg[t]
        # logistic of the log-odds, written to avoid overflow either way
        diff = score_neg - score_pos
        if diff > 0:
            e = math.exp(-diff)
            return e / (1.0 + e)
        return 1.0 / (1.0 + math.exp(diff))

    def probability(self, comment: RawComment) -> float:
        return self.posterior(tokenize(comment.text).tokens)

    def to_json(self) -> dict:
        vocab = sorted(self.log_lik_pos)
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "alpha": self.alpha,
            "log_prior": [self.log_prior_pos, self.log_prior_neg],
            "vocabulary": vocab,
            "log_likelihood": [[self.log_lik_pos[t] for t in vocab], [self.log_lik_neg[t] for t in vocab]],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClassifierModel":
        if obj.get("format") != MODEL_FORMAT:
            raise ClassifierError(f"not a {MODEL_FORMAT} file")
        if obj.get("version") != MODEL_VERSION:
            raise ClassifierError(f"unsupported model version {obj.get('version')}")
        vocab = obj["vocabulary"]
        pos, neg = obj["log_likelihood"]
        return cls(
            alpha=obj["alpha"],
            log_prior_pos=obj["log_prior"][0],
            log_prior_neg=obj["log_prior"][1],
            log_lik_pos=dict(zip(vocab, pos)),
            log_lik_neg=dict(zip(vocab, neg)),
        )

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ClassifierError(f"cannot load classifier {path}: {exc}") from exc
        return cls.from_json(obj)


def train_classifier(
    positives: Iterable[RawComment | Sequence[str]],
    negatives: Iterable[RawComment | Sequence[str]],
    alpha: float = 1.0,
) -> ClassifierModel:
    """Fit Laplace-smoothed multinomial naive Bayes.

    Documents are comments (tokenized here) or ready token sequences.
    """
    if alpha <= 0:
        raise ClassifierError("alpha must be > 0")

    def counts(docs):
        c, n = Counter(), 0
        for d in docs:
            c.update(tokenize(d.text).tokens if isinstance(d, RawComment) else d)
            n += 1
        return c, n

    pos, n_pos = counts(positives)
    neg, n_neg = counts(negatives)
    if n_pos == 0 or n_neg == 0:
        raise ClassifierError("both classes need at least one document")
    vocab = sorted(set(pos) | set(neg))
    denom_pos = sum(pos.values()) + alpha * len(vocab)
    denom_neg = sum(neg.values()) + alpha * len(vocab)
    n = n_pos + n_neg
    return ClassifierModel(
        alpha=alpha,
        log_prior_pos=math.log(n_pos / n),
        log_prior_neg=math.log(n_neg / n),
        log_lik_pos={t: math.log((pos[t] + alpha) / denom_pos) for t in vocab},
        log_lik_neg={t: math.log((neg[t] + alpha) / denom_neg) for t in vocab},
    )


def classify(model: ClassifierModel, text: TokenizedText | Sequence[str], threshold: float = 0.5) -> tuple[float, bool]:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    tokens = text.tokens if isinstance(text, TokenizedText) else text
    prob = model.posterior(tokens)
    return prob, prob >= threshold


class SidecarClassifier:
    """Externally computed verdicts, read from JSONL ``{comment_id, prob}``."""

    def __init__(self, probs: Mapping[str, float]):
        self.probs = dict(probs)

    @classmethod
    def load(cls, path) -> "SidecarClassifier":
        probs = {}
        try:
            f = open(path, encoding="utf-8")
        except OSError as exc:
            raise ClassifierError(f"cannot read sidecar {path}: {exc}") from exc
        with f:
            for lineno, line in enumerate(f, 1):
                try:
                    obj = json.loads(line)
                    prob = float(obj["prob"])
                    cid = str(obj["comment_id"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise ClassifierError(f"{path}:{lineno}: bad sidecar line: {exc}") from exc
                if not 0.0 <= prob <= 1.0:
                    raise ClassifierError(f"{path}:{lineno}: prob {prob} outside [0, 1]")
                probs[cid] = prob
        return cls(probs)

    def probability(self, comment: RawComment) -> float:
        try:
            return self.probs[comment.comment_id]
        except KeyError:
            raise ClassifierError(f"sidecar has no verdict for {comment.comment_id}") from None


def load_classifier(path) -> Classifier:
    """A saved model file or a ``.jsonl`` verdict sidecar."""
    if str(path).endswith(".jsonl"):
        return SidecarClassifier.load(path)
    return ClassifierModel.load(path)


# --- scoring ----------------------------------------------------------------


def _score_chunk(
    comments: Sequence[RawComment],
    lexicon: Mapping[str, int],
    variant: Variant,
    classifier: Classifier,
    threshold: float,
    cfg: NormalizationConfig,
) -> list[ScoredComment]:
    out = []
    for c in comments:
        weight = bow_weight(prepare(c.text, cfg, Mode.BOW_SCORING), lexicon, variant)
        prob = classifier.probability(c)
        out.append(ScoredComment(c, weight, prob, passed_classifier=prob >= threshold))
    return out


def score_comments(
    comments: Sequence[RawComment],
    lexicon: Mapping[str, int],
    classifier: Classifier,
    cfg: NormalizationConfig,
    *,
    variant: Variant | str = Variant.COUNT,
    top: int | None = 100_000,
    top_fraction: float | None = None,
    threshold: float = 0.5,
    workers: int = 1,
    per_attribute_lexicons: Mapping[AttributeV2, object] | None = None,
) -> list[ScoredComment]:
    """Weight, classify and rank-cut a corpus of comments.

    Per-comment work fans out over ``workers``; the rank cut is global
    unless ``per_attribute_lexicons`` is given.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    comments = list(comments)
    fn = functools.partial(
        _score_chunk, lexicon=lexicon, variant=Variant(variant), classifier=classifier, threshold=threshold, cfg=cfg
    )
    scored = [s for part in map_chunks(fn, comments, workers) for s in part]
    if not scored:
        return []
    n = top_n_for(len(scored), top, top_fraction)
    if per_attribute_lexicons is not None:
        return rank_and_cut_per_attribute(scored, n, per_attribute_lexicons, cfg)
    return rank_and_cut(scored, n)
