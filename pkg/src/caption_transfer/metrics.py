"""Multi-reference caption metrics: BLEU-4 and a proposition-F1 SPICE stand-in."""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .records import AttributeV2
from .textnorm import Mode, NormalizationConfig, TokenizedText, default_config, normalize

logger = logging.getLogger(__name__)

MAX_ORDER = 4


class Smoothing(str, enum.Enum):
    NONE = "none"
    ADD_ONE = "add_one"


@dataclass(frozen=True)
class EvalPair:
    candidate: TokenizedText
    references: tuple[TokenizedText, ...]
    attribute: AttributeV2

    def __post_init__(self):
        if not self.references:
            raise ValueError("an EvalPair needs at least one reference")


def _tokens(t) -> tuple[str, ...]:
    return t.tokens if isinstance(t, TokenizedText) else tuple(t)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    """Sufficient statistics; summing them gives corpus-level BLEU."""

    matches: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    cand_len: int = 0
    ref_len: int = 0

    def __iadd__(self, other: "BleuStats"):
        for i in range(MAX_ORDER):
            self.matches[i] += other.matches[i]
            self.totals[i] += other.totals[i]
        self.cand_len += other.cand_len
        self.ref_len += other.ref_len
        return self


def bleu_stats(candidate, references) -> BleuStats:
    cand = _tokens(candidate)
    refs = [_tokens(r) for r in references]
    stats = BleuStats(cand_len=len(cand))
    # closest reference length, ties to the shorter one
    stats.ref_len = min((len(r) for r in refs), key=lambda n: (abs(n - len(cand)), n))
    for n in range(1, MAX_ORDER + 1):
        cand_ngrams = ngram_counts(cand, n)
        max_ref: Counter = Counter()
        for r in refs:
            max_ref |= ngram_counts(r, n)
        stats.matches[n - 1] = sum(min(c, max_ref[g]) for g, c in cand_ngrams.items())
        stats.totals[n - 1] = max(len(cand) - n + 1, 0)
    return stats


def bleu_from_stats(stats: BleuStats, smoothing: Smoothing | str = Smoothing.NONE) -> float:
    smoothing = Smoothing(smoothing)
    if stats.cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(MAX_ORDER):
        num, den = stats.matches[n], stats.totals[n]
        if num == 0:
            if smoothing is Smoothing.ADD_ONE and n >= 1:
                num, den = num + 1, den + 1
            else:
                return 0.0
        log_sum += math.log(num / den)
    log_bp = min(0.0, 1.0 - stats.ref_len / stats.cand_len)
    return math.exp(log_sum / MAX_ORDER + log_bp)


def bleu4(pair: EvalPair, smoothing: Smoothing | str = Smoothing.NONE) -> float:
    if not pair.candidate.tokens:
        logger.warning("empty candidate scored as BLEU 0")
        return 0.0
    return bleu_from_stats(bleu_stats(pair.candidate, pair.references), smoothing)


def propositions(tokens: TokenizedText | Sequence[str], cfg: NormalizationConfig | None = None) -> set:
    """Content unigrams plus adjacent content-word bigrams."""
    cfg = cfg or default_config()
    text = tokens if isinstance(tokens, TokenizedText) else TokenizedText(tuple(tokens))
    content = normalize(text, cfg, Mode.BOW_SCORING).tokens
    props: set = {(t,) for t in content}
    props.update(zip(content, content[1:]))
    return props


def f1_score(candidate_props: set, reference_props: set) -> float:
    """2PR / (P + R) over proposition sets, 0 when nothing matches."""
    if not candidate_props or not reference_props:
        return 0.0
    matched = len(candidate_props & reference_props)
    if matched == 0:
        return 0.0
    p = matched / len(candidate_props)
    r = matched / len(reference_props)
    return 2 * p * r / (p + r)


def spice_lite(pair: EvalPair, cfg: NormalizationConfig | None = None) -> float:
    cand = propositions(pair.candidate, cfg)
    if not cand:
        logger.warning("candidate has no content propositions; SPICE-lite 0")
        return 0.0
    refs: set = set()
    for r in pair.references:
        refs |= propositions(r, cfg)
    return f1_score(cand, refs)


@dataclass
class AttributeScores:
    bleu4: float
    spice: float
    pairs: int


@dataclass
class MetricReport:
    method: str
    scores: dict[str, AttributeScores]
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "units": {"bleu4": "fraction in [0,1]; table shows percent", "spice": "fraction in [0,1]"},
            "scores": {a: vars(s) for a, s in sorted(self.scores.items())},
            "notes": list(self.notes),
        }

    def render(self) -> str:
        rows = [("Method", "Attribute", "BLEU4 (%)", "SPICE (fraction)", "Pairs")]
        for a, s in sorted(self.scores.items()):
            rows.append((self.method, a, f"{100 * s.bleu4:.2f}", f"{s.spice:.3f}", str(s.pairs)))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        fmt = "  ".join("{:<%d}" % w for w in widths)
        lines = [fmt.format(*rows[0]).rstrip(), "  ".join("-" * w for w in widths)]
        lines += [fmt.format(*r).rstrip() for r in rows[1:]]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def evaluate_corpus(
    pairs: Iterable[EvalPair],
    smoothing: Smoothing | str = Smoothing.ADD_ONE,
    cfg: NormalizationConfig | None = None,
    *,
    corpus_bleu: bool = True,
    method: str = "prediction",
) -> MetricReport:
    """Per-attribute BLEU-4 and mean SPICE-lite.

    BLEU aggregates n-gram statistics over all pairs of an attribute unless
    ``corpus_bleu`` is False, in which case sentence scores are averaged.
    """
    grouped: dict[AttributeV2, list[EvalPair]] = {}
    for p in pairs:
        grouped.setdefault(p.attribute, []).append(p)
    report = MetricReport(method=method, scores={})
    for attr in AttributeV2:
        group = grouped.get(attr, [])
        if not group:
            report.notes.append(f"{attr.value}: no pairs, omitted")
            continue
        if corpus_bleu:
            total = BleuStats()
            for p in group:
                if p.candidate.tokens:
                    total += bleu_stats(p.candidate, p.references)
                else:
                    logger.warning("empty candidate skipped in corpus BLEU")
            bleu = bleu_from_stats(total, smoothing)
        else:
            bleu = sum(bleu4(p, smoothing) for p in group) / len(group)
        spice = sum(spice_lite(p, cfg) for p in group) / len(group)
        report.scores[attr.value] = AttributeScores(bleu, spice, len(group))
    return report
