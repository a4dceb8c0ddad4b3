"""Per-attribute keyword frequency tables and top-K lexicons."""

from __future__ import annotations

import csv
import functools
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .parallel import map_chunks
from .records import AttributeV2, LegacyAttribute, RawComment, parse_attribute
from .textnorm import Mode, NormalizationConfig, prepare

Attribute = Union[AttributeV2, LegacyAttribute]

DEFAULT_SPLIT_NAME = "light_color_split.cfg"
CSV_HEADER = ("attribute", "term", "frequency", "rank")


class LexiconError(ValueError):
    pass


def _rank_key(item: tuple[str, int]):
    term, freq = item
    return (-freq, term)


@dataclass(frozen=True)
class Lexicon:
    attribute: Attribute
    entries: tuple[tuple[str, int], ...]
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise LexiconError("k must be >= 1")
        if len(self.entries) > self.k:
            raise LexiconError(f"{len(self.entries)} entries exceed k={self.k}")
        terms = [t for t, _ in self.entries]
        if len(set(terms)) != len(terms):
            raise LexiconError(f"{self.attribute.value}: duplicate terms")
        if any(f < 1 for _, f in self.entries):
            raise LexiconError(f"{self.attribute.value}: frequencies must be >= 1")
        if list(self.entries) != sorted(self.entries, key=_rank_key):
            raise LexiconError(f"{self.attribute.value}: entries not in rank order")

    @functools.cached_property
    def terms(self) -> frozenset[str]:
        return frozenset(t for t, _ in self.entries)

    def frequencies(self) -> dict[str, int]:
        return dict(self.entries)

    def __contains__(self, term):
        return term in self.terms

    def __len__(self):
        return len(self.entries)


def _count_chunk(comments: Sequence[RawComment], cfg: NormalizationConfig) -> dict[LegacyAttribute, Counter]:
    tables: dict[LegacyAttribute, Counter] = {}
    for c in comments:
        tokens = prepare(c.text, cfg, Mode.KEYWORD_EXTRACTION).tokens
        tables.setdefault(c.attribute_hint, Counter()).update(tokens)
    return tables


def count_terms(comments: Iterable[RawComment], cfg: NormalizationConfig, workers: int = 1) -> dict[LegacyAttribute, Counter]:
    """Multiset term counts per hinted attribute, after keyword normalization.

    Shards are counted independently and summed, so the result does not
    depend on ``workers``.
    """
    comments = list(comments)
    for c in comments:
        if c.attribute_hint is None:
            raise LexiconError(f"comment {c.comment_id} has no attribute_hint")
    merged: dict[LegacyAttribute, Counter] = {}
    for part in map_chunks(functools.partial(_count_chunk, cfg=cfg), comments, workers):
        for attr, table in part.items():
            merged.setdefault(attr, Counter()).update(table)
    return merged


def top_k(table: Mapping[str, int], k: int, attribute: Attribute = AttributeV2.COMPOSITION) -> Lexicon:
    if k < 1:
        raise LexiconError("k must be >= 1")
    ranked = sorted(((t, int(f)) for t, f in table.items() if f > 0), key=_rank_key)
    return Lexicon(attribute, tuple(ranked[:k]), k)


def build_lexicons(tables: Mapping[LegacyAttribute, Mapping[str, int]], k: int) -> dict[LegacyAttribute, Lexicon]:
    """Top-k lexicon for every legacy attribute, empty where nothing was counted."""
    return {a: top_k(tables.get(a, {}), k, a) for a in LegacyAttribute}


def load_split(path=None) -> dict[str, frozenset[AttributeV2]]:
    """Read the Light/Color term partition (``term = Light|Color|both``)."""
    if path is None:
        text = resources.files(__package__).joinpath("data").joinpath(DEFAULT_SPLIT_NAME).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    both = frozenset({AttributeV2.LIGHT, AttributeV2.COLOR})
    split = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        term, sep, target = (p.strip() for p in line.partition("="))
        if not sep:
            raise LexiconError(f"split line {lineno}: expected term = Light|Color|both")
        if target.lower() == "both":
            split[term.lower()] = both
        else:
            attr = AttributeV2.parse(target)
            if attr not in both:
                raise LexiconError(f"split line {lineno}: {target!r} is neither Light nor Color")
            split[term.lower()] = frozenset({attr})
    return split


def merge_attributes(
    lexicons: Mapping[LegacyAttribute, Lexicon],
    split: Mapping[str, frozenset[AttributeV2]] | None = None,
    k: int | None = None,
) -> dict[AttributeV2, Lexicon]:
    """Fold the seven legacy lexicons into the four v2 attributes.

    Composition sums Composition, DepthOfField and Focus; ColorLighting is
    partitioned into Light and Color by ``split`` (unlisted terms go to
    both); SubjectOfPhoto becomes Subject; GeneralImpression and
    UseOfCamera are dropped.
    """
    missing = set(LegacyAttribute) - set(lexicons)
    if missing:
        raise LexiconError(f"missing legacy attributes: {sorted(a.value for a in missing)}")
    if split is None:
        split = load_split()
    if k is None:
        k = max(lex.k for lex in lexicons.values())
    both = frozenset({AttributeV2.LIGHT, AttributeV2.COLOR})

    composition: Counter = Counter()
    for legacy in (LegacyAttribute.COMPOSITION, LegacyAttribute.DEPTH_OF_FIELD, LegacyAttribute.FOCUS):
        composition.update(lexicons[legacy].frequencies())

    light: dict[str, int] = {}
    color: dict[str, int] = {}
    for term, freq in lexicons[LegacyAttribute.COLOR_LIGHTING].entries:
        targets = split.get(term, both)
        if AttributeV2.LIGHT in targets:
            light[term] = freq
        if AttributeV2.COLOR in targets:
            color[term] = freq

    return {
        AttributeV2.COMPOSITION: top_k(composition, k, AttributeV2.COMPOSITION),
        AttributeV2.LIGHT: top_k(light, k, AttributeV2.LIGHT),
        AttributeV2.COLOR: top_k(color, k, AttributeV2.COLOR),
        AttributeV2.SUBJECT: top_k(lexicons[LegacyAttribute.SUBJECT_OF_PHOTO].frequencies(), k, AttributeV2.SUBJECT),
    }


def union_frequencies(lexicons: Iterable[Lexicon]) -> dict[str, int]:
    """Term -> frequency summed over every lexicon the term appears in."""
    out: Counter = Counter()
    for lex in lexicons:
        out.update(lex.frequencies())
    return dict(out)


def write_lexicons(lexicons: Mapping[Attribute, Lexicon], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for attr in sorted(lexicons, key=lambda a: a.value):
            for rank, (term, freq) in enumerate(lexicons[attr].entries, 1):
                writer.writerow((attr.value, term, freq, rank))


def read_lexicons(path, k: int | None = None, legacy: bool = False) -> dict[Attribute, Lexicon]:
    """Load a lexicon CSV. ``k`` defaults to the largest rank present.

    ``Composition`` names both a legacy and a v2 attribute; pass
    ``legacy=True`` to read a file of legacy lexicons.
    """
    parse = LegacyAttribute.parse if legacy else parse_attribute
    try:
        f = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc
    rows: dict[Attribute, list[tuple[int, str, int]]] = {}
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise LexiconError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, 2):
            try:
                attr_name, term, freq, rank = row
                rows.setdefault(parse(attr_name), []).append((int(rank), term, int(freq)))
            except ValueError as exc:
                raise LexiconError(f"{path}:{lineno}: {exc}") from exc
    out = {}
    for attr, items in rows.items():
        items.sort()
        if [r for r, _, _ in items] != list(range(1, len(items) + 1)):
            raise LexiconError(f"{path}: ranks for {attr.value} are not 1..{len(items)}")
        cap = k if k is not None else max(len(v) for v in rows.values())
        out[attr] = Lexicon(attr, tuple((t, fr) for _, t, fr in items), cap)
    return out


def v2_lexicons(lexicons: Mapping[Attribute, Lexicon]) -> dict[AttributeV2, Lexicon]:
    out = {a: lex for a, lex in lexicons.items() if isinstance(a, AttributeV2)}
    if not out:
        raise LexiconError("lexicon has no v2 attribute rows")
    return out
