import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from caption_transfer.corpus_io import parse_corpus
from caption_transfer.lexicon import (
    Lexicon,
    LexiconError,
    build_lexicons,
    count_terms,
    load_split,
    merge_attributes,
    read_lexicons,
    top_k,
    union_frequencies,
    write_lexicons,
)
from caption_transfer.records import AttributeV2, LegacyAttribute, RawComment, Source
from caption_transfer.textnorm import Mode, TokenizedText, default_config, normalize

L = LegacyAttribute


def hinted(i, attr, text):
    return RawComment(f"c{i}", f"img{i}", Source.FULLY_ANNOTATED, text, attr)


def test_count_empty():
    assert count_terms([], default_config()) == {}


def test_count_multiset_hand_fixture():
    comments = [hinted(0, L.COMPOSITION, "nice lines"), hinted(1, L.COMPOSITION, "lines and lines")]
    assert count_terms(comments, default_config()) == {L.COMPOSITION: Counter({"lines": 3, "nice": 1})}


def test_count_rejects_unhinted():
    weak = RawComment("w", "i", Source.WEAKLY_ANNOTATED, "nice lines")
    with pytest.raises(LexiconError):
        count_terms([weak], default_config())


def test_count_ordering_color_terms():
    # color > black&white > blue, in the proportions the real corpus shows
    texts = ["color"] * 5 + ["colour"] + ["black&white"] * 4 + ["blue"] * 2
    comments = [hinted(i, L.COLOR_LIGHTING, t) for i, t in enumerate(texts)]
    lex = top_k(count_terms(comments, default_config())[L.COLOR_LIGHTING], 3)
    assert [t for t, _ in lex.entries] == ["color", "black&white", "blue"]


def test_top_k_tie_break():
    assert top_k({"a": 3, "b": 3, "c": 1}, 2).entries == (("a", 3), ("b", 3))


def test_top_k_larger_than_table():
    table = {"x": 1, "y": 5, "z": 2}
    assert top_k(table, 10).entries == (("y", 5), ("z", 2), ("x", 1))


def test_top_k_light_frequencies():
    table = {"light": 1708, "sky": 493, "shadows": 491}
    assert top_k(table, 2).entries == (("light", 1708), ("sky", 493))


def test_top_k_requires_positive_k():
    with pytest.raises(LexiconError):
        top_k({"a": 1}, 0)


def test_lexicon_invariants_enforced():
    with pytest.raises(LexiconError):
        Lexicon(AttributeV2.LIGHT, (("a", 1), ("b", 2)), 5)
    with pytest.raises(LexiconError):
        Lexicon(AttributeV2.LIGHT, (("a", 2), ("a", 1)), 5)
    with pytest.raises(LexiconError):
        Lexicon(AttributeV2.LIGHT, (("a", 2), ("b", 1)), 1)


def legacy(**tables):
    out = {a: top_k({}, 10, a) for a in LegacyAttribute}
    for name, table in tables.items():
        attr = LegacyAttribute.parse(name)
        out[attr] = top_k(table, 10, attr)
    return out


def test_merge_composition_is_additive():
    merged = merge_attributes(legacy(Composition={"field": 2}, DepthOfField={"field": 3}), split={})
    assert merged[AttributeV2.COMPOSITION].entries == (("field", 5),)


def test_merge_drops_camera_and_general():
    merged = merge_attributes(legacy(UseOfCamera={"shutter": 1113}, GeneralImpression={"general": 4357}), split={})
    assert set(merged) == set(AttributeV2)
    assert all("shutter" not in lex and "general" not in lex for lex in merged.values())


def test_merge_splits_color_lighting():
    split = {"light": frozenset({AttributeV2.LIGHT}), "blue": frozenset({AttributeV2.COLOR})}
    merged = merge_attributes(legacy(ColorLighting={"light": 1708, "blue": 1120}), split=split)
    assert merged[AttributeV2.LIGHT].entries == (("light", 1708),)
    assert merged[AttributeV2.COLOR].entries == (("blue", 1120),)


def test_merge_unlisted_term_goes_to_both():
    merged = merge_attributes(legacy(ColorLighting={"contrast": 7}), split={})
    assert "contrast" in merged[AttributeV2.LIGHT] and "contrast" in merged[AttributeV2.COLOR]


def test_merge_subject():
    merged = merge_attributes(legacy(SubjectOfPhoto={"interesting": 708, "light": 209}), split={})
    assert merged[AttributeV2.SUBJECT].entries == (("interesting", 708), ("light", 209))


def test_merge_requires_all_legacy_attributes():
    partial = legacy()
    del partial[L.FOCUS]
    with pytest.raises(LexiconError):
        merge_attributes(partial, split={})


def test_default_split_file():
    split = load_split()
    assert split["light"] == {AttributeV2.LIGHT}
    assert split["blue"] == {AttributeV2.COLOR}
    assert split["black&white"] == {AttributeV2.COLOR}


def test_csv_round_trip(tmp_path):
    merged = merge_attributes(
        legacy(Composition={"lines": 4, "left": 2}, ColorLighting={"light": 3, "red": 1}, SubjectOfPhoto={"story": 1})
    )
    write_lexicons(merged, tmp_path / "lex.csv")
    back = read_lexicons(tmp_path / "lex.csv", k=10)
    assert back == merged
    header = (tmp_path / "lex.csv").read_text().splitlines()[0]
    assert header == "attribute,term,frequency,rank"


def test_csv_legacy_round_trip(tmp_path):
    lex = legacy(Composition={"lines": 4}, Focus={"sharp": 2})
    write_lexicons(lex, tmp_path / "legacy.csv")
    back = read_lexicons(tmp_path / "legacy.csv", k=10, legacy=True)
    assert back[L.COMPOSITION] == lex[L.COMPOSITION]
    assert back[L.FOCUS] == lex[L.FOCUS]


def test_read_missing_file(tmp_path):
    with pytest.raises(LexiconError):
        read_lexicons(tmp_path / "nope.csv")


def test_union_sums_shared_terms():
    a = top_k({"light": 1708}, 5, AttributeV2.LIGHT)
    b = top_k({"light": 209, "story": 3}, 5, AttributeV2.SUBJECT)
    assert union_frequencies([a, b]) == {"light": 1917, "story": 3}


def test_fixture_lexicon_terms_survive_keyword_normalization(data_dir):
    cfg = default_config()
    comments = parse_corpus(data_dir / "pccd.jsonl", "fully_annotated").comments
    lexicons = build_lexicons(count_terms(comments, cfg), 1000)
    for lex in list(lexicons.values()) + list(merge_attributes(lexicons).values()):
        for term, _ in lex.entries:
            assert normalize(TokenizedText((term,)), cfg, Mode.KEYWORD_EXTRACTION).tokens == (term,)


def test_sharded_counting_matches_serial(data_dir):
    cfg = default_config()
    comments = parse_corpus(data_dir / "pccd.jsonl", "fully_annotated").comments
    serial = count_terms(comments, cfg, workers=1)
    assert count_terms(comments, cfg, workers=3) == serial
    shuffled = comments[:]
    random.Random(5).shuffle(shuffled)
    assert count_terms(shuffled, cfg) == serial


@settings(max_examples=100)
@given(st.dictionaries(st.text(alphabet="abcde", min_size=1, max_size=3), st.integers(1, 6), max_size=20),
       st.integers(1, 25), st.randoms())
def test_top_k_order_invariant(table, k, rnd):
    items = list(table.items())
    rnd.shuffle(items)
    assert top_k(dict(items), k) == top_k(table, k)
    lex = top_k(table, k)
    assert len(lex) == min(k, len(table))
    kept = {t for t, _ in lex.entries}
    # nothing left out outranks anything kept
    for t, f in table.items():
        if t not in kept and lex.entries:
            last_t, last_f = lex.entries[-1]
            assert f < last_f or (f == last_f and t > last_t)


@settings(max_examples=100)
@given(*[st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e"]), st.integers(1, 50)) for _ in range(3)])
def test_merged_composition_sum(comp, dof, focus):
    merged = merge_attributes(legacy(Composition=comp, DepthOfField=dof, Focus=focus), split={}, k=1000)
    total = sum(comp.values()) + sum(dof.values()) + sum(focus.values())
    assert sum(f for _, f in merged[AttributeV2.COMPOSITION].entries) == total
