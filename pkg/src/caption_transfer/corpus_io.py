"""Parse, validate and persist corpus and dataset files as JSON Lines."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .records import (
    AttributeCaptionSet,
    ImageRecord,
    LegacyAttribute,
    RawComment,
    ScoredComment,
    Source,
)

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Fatal problem with a corpus or dataset file."""


class DuplicateIdError(CorpusError):
    def __init__(self, path, comment_id: str, first_line: int, second_line: int):
        self.comment_id = comment_id
        self.lines = (first_line, second_line)
        super().__init__(
            f"{path}: duplicate comment_id {comment_id!r} on lines {first_line} and {second_line}"
        )


@dataclass(frozen=True)
class LineError:
    line: int
    message: str


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    counts: dict[str, int]
    checksums: dict[str, str]

    def to_json(self) -> dict:
        return {"name": self.name, "counts": dict(self.counts), "checksums": dict(self.checksums)}


@dataclass
class ParsedCorpus:
    path: Path
    source: Source
    comments: list[RawComment] = field(default_factory=list)
    images: list[ImageRecord] = field(default_factory=list)
    errors: list[LineError] = field(default_factory=list)
    n_lines: int = 0

    def manifest(self) -> CorpusManifest:
        counts = {s.value: 0 for s in Source}
        for c in self.comments:
            counts[c.source.value] += 1
        counts["images"] = len(self.images)
        counts["errors"] = len(self.errors)
        return CorpusManifest(self.path.name, counts, {self.path.name: sha256_file(self.path)})


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def dumps(obj) -> str:
    """Canonical single-line JSON: sorted keys, no whitespace, raw UTF-8."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _comment_from_json(obj: dict, source: Source, comment_id: str) -> RawComment:
    declared = obj.get("source", source.value)
    if declared != source.value:
        raise ValueError(f"record source {declared!r} does not match declared source {source.value!r}")
    text = obj["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    hint = obj.get("attribute_hint")
    return RawComment(
        comment_id=comment_id,
        image_id=str(obj["image_id"]),
        source=source,
        text=text,
        attribute_hint=LegacyAttribute.parse(hint) if hint is not None else None,
    )


def _image_from_json(obj: dict) -> ImageRecord:
    ids = obj["comment_ids"]
    if not isinstance(ids, list):
        raise ValueError("comment_ids must be a list")
    scores = obj.get("scores")
    if scores is not None:
        scores = {LegacyAttribute.parse(k): float(v) for k, v in scores.items()}
    return ImageRecord(str(obj["image_id"]), tuple(str(i) for i in ids), scores)


def parse_corpus(path, source: Source | str) -> ParsedCorpus:
    """Parse one JSON Lines corpus file.

    Lines carrying ``comment_ids`` are image records; everything else is a
    comment record. Comments without an id get ``<image_id>#<ordinal>``,
    the ordinal counting that image's comments from 1 in file order.
    Malformed lines are collected in ``errors`` with their line numbers;
    a duplicate comment id aborts the parse.
    """
    path = Path(path)
    source = Source(source)
    out = ParsedCorpus(path=path, source=source)
    seen: dict[str, int] = {}
    ordinals: dict[str, int] = {}
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with f:
        for lineno, line in enumerate(f, 1):
            out.n_lines = lineno
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                if "comment_ids" in obj:
                    out.images.append(_image_from_json(obj))
                    continue
                image_id = str(obj["image_id"])
                ordinals[image_id] = ordinals.get(image_id, 0) + 1
                comment_id = obj.get("comment_id")
                if comment_id is None:
                    comment_id = f"{image_id}#{ordinals[image_id]}"
                comment = _comment_from_json(obj, source, str(comment_id))
            except (ValueError, KeyError, TypeError) as exc:
                msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                out.errors.append(LineError(lineno, msg))
                continue
            if comment.comment_id in seen:
                raise DuplicateIdError(path, comment.comment_id, seen[comment.comment_id], lineno)
            seen[comment.comment_id] = lineno
            out.comments.append(comment)
    if out.errors:
        logger.warning("%s: %d malformed line(s)", path, len(out.errors))
    return out


def images_from_comments(comments: Iterable[RawComment]) -> list[ImageRecord]:
    """Derive image records, ordered by first appearance."""
    grouped: dict[str, list[str]] = {}
    for c in comments:
        grouped.setdefault(c.image_id, []).append(c.comment_id)
    return [ImageRecord(k, tuple(v)) for k, v in grouped.items()]


def _write_lines(path, objs: Iterable[dict]) -> tuple[int, str]:
    path = Path(path)
    n = 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for obj in objs:
                f.write(dumps(obj))
                f.write("\n")
                n += 1
    except OSError as exc:
        raise CorpusError(f"cannot write {path}: {exc}") from exc
    return n, sha256_file(path)


def write_corpus(comments: Iterable[RawComment], path, images: Iterable[ImageRecord] = ()) -> CorpusManifest:
    comments = list(comments)
    images = list(images)
    objs = [c.to_json() for c in comments] + [i.to_json() for i in images]
    _, digest = _write_lines(path, objs)
    counts = {s.value: 0 for s in Source}
    for c in comments:
        counts[c.source.value] += 1
    counts["images"] = len(images)
    return CorpusManifest(Path(path).name, counts, {Path(path).name: digest})


def write_dataset(records: Iterable[AttributeCaptionSet], path) -> CorpusManifest:
    n, digest = _write_lines(path, (r.to_json() for r in records))
    return CorpusManifest(Path(path).name, {"caption_sets": n}, {Path(path).name: digest})


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with f:
        for lineno, line in enumerate(f, 1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            yield lineno, obj


def read_dataset(path) -> list[AttributeCaptionSet]:
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            out.append(AttributeCaptionSet.from_json(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad caption set: {exc}") from exc
    return out


def write_scored(records: Iterable[ScoredComment], path) -> CorpusManifest:
    n, digest = _write_lines(path, (r.to_json() for r in records))
    return CorpusManifest(Path(path).name, {"scored": n}, {Path(path).name: digest})


def read_scored(path) -> list[ScoredComment]:
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            out.append(ScoredComment.from_json(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad scored record: {exc}") from exc
    return out
