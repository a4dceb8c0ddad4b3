import hashlib
import json

import pytest
from hypothesis import given, settings, strategies as st

from caption_transfer.corpus_io import (
    CorpusError,
    DuplicateIdError,
    parse_corpus,
    read_dataset,
    read_scored,
    write_corpus,
    write_dataset,
    write_scored,
)
from caption_transfer.records import (
    AttributeCaptionSet,
    AttributeV2,
    LegacyAttribute,
    RawComment,
    ScoredComment,
    Source,
)


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


def comment(i, image="img1", **extra):
    return {"comment_id": f"c{i}", "image_id": image, "text": f"comment number {i}", **extra}


def test_empty_file(tmp_path):
    parsed = parse_corpus(write_lines(tmp_path / "e.jsonl", []), "weakly_annotated")
    assert parsed.comments == [] and parsed.errors == [] and parsed.n_lines == 0


def test_ten_lines_in_order(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [comment(i) for i in range(10)])
    parsed = parse_corpus(path, Source.WEAKLY_ANNOTATED)
    assert [c.comment_id for c in parsed.comments] == [f"c{i}" for i in range(10)]
    assert all(c.source is Source.WEAKLY_ANNOTATED for c in parsed.comments)


def test_duplicate_id_is_fatal_and_names_both_lines(tmp_path):
    objs = [comment(0), comment(1), comment(2), comment(1)]
    with pytest.raises(DuplicateIdError) as info:
        parse_corpus(write_lines(tmp_path / "d.jsonl", objs), "weakly_annotated")
    assert info.value.lines == (2, 4)
    assert "c1" in str(info.value) and "2" in str(info.value) and "4" in str(info.value)


def test_malformed_lines_are_reported_with_line_numbers(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(
        json.dumps(comment(0)) + "\n"
        + "{not json\n"
        + json.dumps({"comment_id": "x", "image_id": "i", "text": "   "}) + "\n"
        + json.dumps({"image_id": "i"}) + "\n"
        + "\n"
        + json.dumps(comment(1)) + "\n",
        encoding="utf-8",
    )
    parsed = parse_corpus(path, "weakly_annotated")
    assert [c.comment_id for c in parsed.comments] == ["c0", "c1"]
    assert [e.line for e in parsed.errors] == [2, 3, 4, 5]
    assert len(parsed.comments) + len(parsed.errors) == parsed.n_lines


def test_unreadable_file_is_fatal(tmp_path):
    with pytest.raises(CorpusError):
        parse_corpus(tmp_path / "missing.jsonl", "weakly_annotated")


def test_hint_required_iff_fully_annotated(tmp_path):
    path = write_lines(tmp_path / "h.jsonl", [
        comment(0, attribute_hint="Focus"),
        comment(1),
    ])
    full = parse_corpus(path, "fully_annotated")
    assert [c.comment_id for c in full.comments] == ["c0"]
    assert full.comments[0].attribute_hint is LegacyAttribute.FOCUS
    weak = parse_corpus(path, "weakly_annotated")
    assert [c.comment_id for c in weak.comments] == ["c1"]


def test_source_mismatch_is_a_line_error(tmp_path):
    path = write_lines(tmp_path / "s.jsonl", [comment(0, source="negative_corpus")])
    parsed = parse_corpus(path, "weakly_annotated")
    assert parsed.comments == [] and len(parsed.errors) == 1


def test_missing_ids_are_synthesized_per_image(tmp_path):
    objs = [
        {"image_id": "a", "text": "one"},
        {"image_id": "b", "text": "two"},
        {"image_id": "a", "text": "three"},
    ]
    parsed = parse_corpus(write_lines(tmp_path / "n.jsonl", objs), "weakly_annotated")
    assert [c.comment_id for c in parsed.comments] == ["a#1", "b#1", "a#2"]


def test_image_records(tmp_path):
    objs = [comment(0), comment(1), {"image_id": "img1", "comment_ids": ["c0", "c1"], "scores": {"Focus": 6.5}}]
    parsed = parse_corpus(write_lines(tmp_path / "i.jsonl", objs), "weakly_annotated")
    assert len(parsed.images) == 1
    assert parsed.images[0].comment_ids == ("c0", "c1")
    assert parsed.images[0].scores == {LegacyAttribute.FOCUS: 6.5}


def test_image_record_with_duplicate_ids_is_malformed(tmp_path):
    objs = [{"image_id": "img1", "comment_ids": ["c0", "c0"]}]
    parsed = parse_corpus(write_lines(tmp_path / "i.jsonl", objs), "weakly_annotated")
    assert parsed.images == [] and len(parsed.errors) == 1


def test_manifest_counts_match(data_dir):
    parsed = parse_corpus(data_dir / "pccd.jsonl", "fully_annotated")
    m = parsed.manifest()
    assert m.counts["fully_annotated"] == len(parsed.comments) == 210
    assert m.counts["images"] == 30
    assert len(m.checksums["pccd.jsonl"]) == 64


def _sets(n):
    return [
        AttributeCaptionSet(
            image_id=f"img{i}",
            attribute=list(AttributeV2)[i % 4],
            ground_truth=f"great light {i}",
            references=("soft light", "warm tones ünïcode", "lines"),
            weights=(3, 2, 2, 1),
            comment_ids=(f"a{i}", f"b{i}", f"c{i}", f"d{i}"),
        )
        for i in range(n)
    ]


def test_write_empty_dataset(tmp_path):
    m = write_dataset([], tmp_path / "out.jsonl")
    assert (tmp_path / "out.jsonl").read_bytes() == b""
    assert m.counts["caption_sets"] == 0


def test_dataset_round_trip(tmp_path):
    sets = _sets(5)
    write_dataset(sets, tmp_path / "d.jsonl")
    assert read_dataset(tmp_path / "d.jsonl") == sets


def test_dataset_bytes_stable_across_runs(tmp_path):
    a = write_dataset(_sets(5), tmp_path / "a.jsonl")
    b = write_dataset(_sets(5), tmp_path / "b.jsonl")
    assert a.checksums["a.jsonl"] == b.checksums["b.jsonl"]
    assert hashlib.sha256((tmp_path / "a.jsonl").read_bytes()).hexdigest() == a.checksums["a.jsonl"]


def test_unwritable_path_is_fatal(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(CorpusError):
        write_dataset(_sets(1), blocker / "sub" / "d.jsonl")


def test_scored_round_trip(tmp_path):
    c = RawComment("x1", "img", Source.WEAKLY_ANNOTATED, "nice light")
    records = [ScoredComment(c, 2, 0.75, True, True), ScoredComment(c, 0, 0.1, False, False)]
    write_scored(records, tmp_path / "s.jsonl")
    assert read_scored(tmp_path / "s.jsonl") == records


texts = st.text(min_size=1, max_size=40).filter(lambda t: t.strip())
ids = st.text(alphabet="abcdefghij0123456789-#", min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(ids, ids, texts), max_size=15, unique_by=lambda t: t[0]))
def test_corpus_round_trip_property(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    comments = [RawComment(cid, img, Source.WEAKLY_ANNOTATED, text) for cid, img, text in rows]
    write_corpus(comments, path)
    parsed = parse_corpus(path, "weakly_annotated")
    assert parsed.comments == comments
    assert parsed.errors == []
    assert len(parsed.comments) + len(parsed.errors) == parsed.n_lines
