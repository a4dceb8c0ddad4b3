"""Turn screened comments into per-(image, attribute) caption sets."""

from __future__ import annotations

import functools
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .lexicon import Lexicon, union_frequencies
from .parallel import map_chunks
from .records import MAX_CAPTIONS, AttributeCaptionSet, AttributeV2, ScoredComment
from .filtering import Variant, bow_weight
from .textnorm import Mode, NormalizationConfig, TokenizedText, prepare, tokenize

DEFAULT_MIN_REFS = 3
DEFAULT_MIN_LEN = 5
DEFAULT_MAX_LEN = 30


def assign_attributes(tokens: TokenizedText | Sequence[str], lexicons: Mapping[AttributeV2, Lexicon]) -> frozenset[AttributeV2]:
    """Every attribute whose lexicon contains at least one of the tokens."""
    toks = set(tokens.tokens if isinstance(tokens, TokenizedText) else tokens)
    return frozenset(a for a, lex in lexicons.items() if not toks.isdisjoint(lex.terms))


def length_filter(tokens: TokenizedText | Sequence[str], min_tokens: int, max_tokens: int) -> bool:
    return min_tokens <= len(tokens) <= max_tokens


@dataclass(frozen=True)
class Candidate:
    comment_id: str
    text: str
    weight: float


@dataclass
class GroupReport:
    dropped_groups: list[tuple[str, str, int]] = field(default_factory=list)
    overflow: list[tuple[str, str, str]] = field(default_factory=list)


def build_caption_sets(
    groups: Mapping[tuple[str, AttributeV2], Sequence[Candidate]],
    min_refs: int = DEFAULT_MIN_REFS,
) -> tuple[list[AttributeCaptionSet], GroupReport]:
    """Pick ground truth and references for every group.

    Within a group candidates sort by (weight desc, comment_id asc); the
    first is the ground truth and the next up to four are references.
    Groups with fewer than ``1 + min_refs`` candidates are dropped and
    reported. Output is ordered by (image_id, attribute).
    """
    report = GroupReport()
    sets = []
    for image_id, attr in sorted(groups, key=lambda k: (k[0], k[1].value)):
        cands = sorted(groups[(image_id, attr)], key=lambda c: (-c.weight, c.comment_id))
        if len(cands) < 1 + min_refs:
            report.dropped_groups.append((image_id, attr.value, len(cands)))
            continue
        kept = cands[:MAX_CAPTIONS]
        for extra in cands[MAX_CAPTIONS:]:
            report.overflow.append((image_id, attr.value, extra.comment_id))
        sets.append(
            AttributeCaptionSet(
                image_id=image_id,
                attribute=attr,
                ground_truth=kept[0].text,
                references=tuple(c.text for c in kept[1:]),
                weights=tuple(c.weight for c in kept),
                comment_ids=tuple(c.comment_id for c in kept),
            )
        )
    return sets, report


DROP_REASONS = ("failed_rank", "failed_classifier", "length", "no_attribute", "group_too_small", "over_cap")


@dataclass
class AssemblyResult:
    sets: list[AttributeCaptionSet]
    drops: dict[str, list[str]]
    dropped_groups: list[tuple[str, str, int]]
    dropped_images: list[str]
    n_input: int

    @property
    def survivors(self) -> list[str]:
        used = {cid for s in self.sets for cid in s.comment_ids}
        return sorted(used)

    def reconciles(self) -> bool:
        return self.n_input == len(self.survivors) + sum(len(v) for v in self.drops.values())

    def report(self) -> dict:
        return {
            "comments_in": self.n_input,
            "survivors": len(self.survivors),
            "drops": {k: len(v) for k, v in self.drops.items()},
            "dropped_groups": len(self.dropped_groups),
            "dropped_images": self.dropped_images,
        }


def _prepare_chunk(scored: Sequence[ScoredComment], lexicons, cfg, min_len, max_len):
    out = []
    for s in scored:
        if not s.passed_rank:
            out.append((s, "failed_rank", ()))
        elif not s.passed_classifier:
            out.append((s, "failed_classifier", ()))
        elif not length_filter(tokenize(s.comment.text), min_len, max_len):
            out.append((s, "length", ()))
        else:
            attrs = assign_attributes(prepare(s.comment.text, cfg, Mode.BOW_SCORING), lexicons)
            out.append((s, None if attrs else "no_attribute", tuple(sorted(attrs, key=lambda a: a.value))))
    return out


def assemble(
    scored: Sequence[ScoredComment],
    lexicons: Mapping[AttributeV2, Lexicon],
    cfg: NormalizationConfig,
    *,
    min_refs: int = DEFAULT_MIN_REFS,
    min_len: int = DEFAULT_MIN_LEN,
    max_len: int = DEFAULT_MAX_LEN,
    workers: int = 1,
) -> AssemblyResult:
    """Screen, assign, group and select.

    Every input comment ends up either in at least one emitted caption set
    or under exactly one drop reason.
    """
    if min_len > max_len:
        raise ValueError("min_len exceeds max_len")
    if not 0 <= min_refs <= MAX_CAPTIONS - 1:
        raise ValueError(f"min_refs must be within [0, {MAX_CAPTIONS - 1}]")
    scored = sorted(scored, key=lambda s: s.comment.comment_id)
    fn = functools.partial(_prepare_chunk, lexicons=lexicons, cfg=cfg, min_len=min_len, max_len=max_len)
    prepared = [row for part in map_chunks(fn, scored, workers) for row in part]

    drops: dict[str, list[str]] = {r: [] for r in DROP_REASONS}
    groups: dict[tuple[str, AttributeV2], list[Candidate]] = {}
    assigned: list[str] = []
    images = sorted({s.comment.image_id for s in scored})
    for s, reason, attrs in prepared:
        if reason is not None:
            drops[reason].append(s.comment.comment_id)
            continue
        assigned.append(s.comment.comment_id)
        cand = Candidate(s.comment.comment_id, s.comment.text, s.bow_weight)
        for attr in attrs:
            groups.setdefault((s.comment.image_id, attr), []).append(cand)

    sets, report = build_caption_sets(groups, min_refs)
    used = {cid for cs in sets for cid in cs.comment_ids}
    in_small = {cid for image_id, attr, _ in report.dropped_groups for cid in
                (c.comment_id for c in groups[(image_id, AttributeV2(attr))])}
    for cid in assigned:
        if cid in used:
            continue
        drops["group_too_small" if cid in in_small else "over_cap"].append(cid)
    emitted_images = {cs.image_id for cs in sets}
    return AssemblyResult(
        sets=sets,
        drops=drops,
        dropped_groups=report.dropped_groups,
        dropped_images=[i for i in images if i not in emitted_images],
        n_input=len(scored),
    )


# --- statistics -------------------------------------------------------------


@dataclass
class DatasetStats:
    images_per_attribute: dict[str, int]
    captions_per_attribute: dict[str, int]
    total_images: int
    total_captions: int
    unique_comments: int
    average_captions: float
    average_defined: bool
    average_per_attribute: dict[str, float]
    bow_bias_surrogate: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def compute_stats(
    dataset: Iterable[AttributeCaptionSet],
    lexicons: Mapping[AttributeV2, Lexicon] | None = None,
    cfg: NormalizationConfig | None = None,
) -> DatasetStats:
    """Counts per attribute plus the captions-per-image average.

    The average is total captions over distinct images. With ``lexicons``
    and ``cfg`` given, also reports the mean frequency-weighted BoW score
    per caption as a bias surrogate.
    """
    images: dict[str, set[str]] = {a.value: set() for a in AttributeV2}
    captions: Counter = Counter({a.value: 0 for a in AttributeV2})
    all_images: set[str] = set()
    comment_ids: set[str] = set()
    texts: list[str] = []
    for cs in dataset:
        images[cs.attribute.value].add(cs.image_id)
        captions[cs.attribute.value] += len(cs.captions)
        all_images.add(cs.image_id)
        comment_ids.update(cs.comment_ids)
        texts.extend(cs.captions)
    total = sum(captions.values())
    per_attr = {a: (captions[a] / len(images[a]) if images[a] else 0.0) for a in images}
    surrogate = None
    if lexicons is not None and cfg is not None and texts:
        freqs = union_frequencies(lexicons.values())
        surrogate = sum(bow_weight(prepare(t, cfg, Mode.BOW_SCORING), freqs, Variant.FREQUENCY_WEIGHTED) for t in texts) / len(texts)
    return DatasetStats(
        images_per_attribute={a: len(v) for a, v in images.items()},
        captions_per_attribute=dict(captions),
        total_images=len(all_images),
        total_captions=total,
        unique_comments=len(comment_ids),
        average_captions=total / len(all_images) if all_images else 0.0,
        average_defined=bool(all_images),
        average_per_attribute=per_attr,
        bow_bias_surrogate=surrogate,
    )


def render_stats(stats: DatasetStats, name: str = "dataset") -> str:
    """Human-readable table in the layout of the usual dataset comparison."""
    avg = f"{stats.average_captions:.2f}" if stats.average_defined else "n/a (no images)"
    bias = f"{stats.bow_bias_surrogate:.1f}" if stats.bow_bias_surrogate is not None else "-"
    rows = [
        ("Dataset", "Number of Images", "Number of Comments", "Average Captions", "With Attributes", "BoW weight per caption (surrogate)"),
        (name, f"{stats.total_images:,}", f"{stats.total_captions:,}", avg, "Yes", bias),
    ]
    lines = _table(rows)
    lines.append("")
    attr_rows = [("Attribute", "Images", "Captions", "Captions per image")]
    for a in sorted(stats.images_per_attribute):
        attr_rows.append((a, f"{stats.images_per_attribute[a]:,}", f"{stats.captions_per_attribute[a]:,}",
                          f"{stats.average_per_attribute[a]:.2f}"))
    lines.extend(_table(attr_rows))
    return "\n".join(lines) + "\n"


def _table(rows: list[tuple[str, ...]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    fmt = "  ".join("{:<%d}" % w for w in widths)
    out = [fmt.format(*rows[0]), "  ".join("-" * w for w in widths)]
    out.extend(fmt.format(*r) for r in rows[1:])
    return [line.rstrip() for line in out]


def dumps_stats(stats: DatasetStats) -> str:
    return json.dumps(stats.to_json(), sort_keys=True, indent=2) + "\n"
