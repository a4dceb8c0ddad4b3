"""Record types shared by every stage of the pipeline.

All records are frozen dataclasses so they can be handed between workers
without defensive copies.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional


class Source(str, enum.Enum):
    FULLY_ANNOTATED = "fully_annotated"
    WEAKLY_ANNOTATED = "weakly_annotated"
    NEGATIVE_CORPUS = "negative_corpus"


def _squash(name: str) -> str:
    return re.sub(r"[^a-z]", "", name.lower())


class _ParseableEnum(str, enum.Enum):
    @classmethod
    def parse(cls, name):
        """Accept the enum value itself or any spacing/casing of its name.

        ``"Depth of Field"``, ``"depth_of_field"`` and ``"DepthOfField"`` all
        resolve to the same member.
        """
        if isinstance(name, cls):
            return name
        key = _squash(str(name))
        for member in cls:
            if _squash(member.value) == key:
                return member
        raise ValueError(f"unknown {cls.__name__}: {name!r}")


class LegacyAttribute(_ParseableEnum):
    COLOR_LIGHTING = "ColorLighting"
    COMPOSITION = "Composition"
    DEPTH_OF_FIELD = "DepthOfField"
    FOCUS = "Focus"
    GENERAL_IMPRESSION = "GeneralImpression"
    SUBJECT_OF_PHOTO = "SubjectOfPhoto"
    USE_OF_CAMERA = "UseOfCamera"


class AttributeV2(_ParseableEnum):
    COMPOSITION = "Composition"
    LIGHT = "Light"
    COLOR = "Color"
    SUBJECT = "Subject"


def parse_attribute(name) -> AttributeV2 | LegacyAttribute:
    """Resolve a name to a v2 attribute, falling back to the legacy set.

    ``Composition`` exists in both sets and resolves to the v2 member.
    """
    try:
        return AttributeV2.parse(name)
    except ValueError:
        return LegacyAttribute.parse(name)


@dataclass(frozen=True)
class RawComment:
    comment_id: str
    image_id: str
    source: Source
    text: str
    attribute_hint: Optional[LegacyAttribute] = None

    def __post_init__(self):
        if not self.comment_id:
            raise ValueError("comment_id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"comment {self.comment_id}: text is empty")
        hinted = self.attribute_hint is not None
        if hinted != (self.source is Source.FULLY_ANNOTATED):
            raise ValueError(
                f"comment {self.comment_id}: attribute_hint must be present "
                f"iff source is {Source.FULLY_ANNOTATED.value}"
            )

    def to_json(self) -> dict:
        out = {
            "comment_id": self.comment_id,
            "image_id": self.image_id,
            "source": self.source.value,
            "text": self.text,
        }
        if self.attribute_hint is not None:
            out["attribute_hint"] = self.attribute_hint.value
        return out


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    comment_ids: tuple[str, ...]
    scores: Optional[dict[LegacyAttribute, float]] = None

    def __post_init__(self):
        if not self.comment_ids:
            raise ValueError(f"image {self.image_id}: comment_ids is empty")
        if len(set(self.comment_ids)) != len(self.comment_ids):
            raise ValueError(f"image {self.image_id}: duplicate comment_ids")
        for attr, value in (self.scores or {}).items():
            if not 0.0 <= value <= 10.0:
                raise ValueError(f"image {self.image_id}: score {attr.value}={value} outside [0, 10]")

    def to_json(self) -> dict:
        out: dict = {"image_id": self.image_id, "comment_ids": list(self.comment_ids)}
        if self.scores is not None:
            out["scores"] = {a.value: v for a, v in self.scores.items()}
        return out


@dataclass(frozen=True)
class ScoredComment:
    comment: RawComment
    bow_weight: float
    classifier_prob: float
    passed_rank: bool = False
    passed_classifier: bool = False

    @property
    def survives(self) -> bool:
        return self.passed_rank and self.passed_classifier

    def to_json(self) -> dict:
        out = self.comment.to_json()
        out.update(
            bow_weight=self.bow_weight,
            classifier_prob=self.classifier_prob,
            passed_rank=self.passed_rank,
            passed_classifier=self.passed_classifier,
        )
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ScoredComment":
        hint = obj.get("attribute_hint")
        comment = RawComment(
            comment_id=obj["comment_id"],
            image_id=obj["image_id"],
            source=Source(obj["source"]),
            text=obj["text"],
            attribute_hint=LegacyAttribute.parse(hint) if hint is not None else None,
        )
        return cls(
            comment=comment,
            bow_weight=obj["bow_weight"],
            classifier_prob=obj["classifier_prob"],
            passed_rank=bool(obj["passed_rank"]),
            passed_classifier=bool(obj["passed_classifier"]),
        )


MAX_CAPTIONS = 5


@dataclass(frozen=True)
class AttributeCaptionSet:
    """One ground-truth caption plus up to four references for an (image, attribute).

    ``weights`` and ``comment_ids`` run parallel to ``[ground_truth, *references]``.
    """

    image_id: str
    attribute: AttributeV2
    ground_truth: str
    references: tuple[str, ...]
    weights: tuple[float, ...]
    comment_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = 1 + len(self.references)
        if n > MAX_CAPTIONS:
            raise ValueError(f"{self.image_id}/{self.attribute.value}: {n} captions exceeds {MAX_CAPTIONS}")
        if len(self.weights) != n:
            raise ValueError(f"{self.image_id}/{self.attribute.value}: weights length {len(self.weights)} != {n}")
        if self.comment_ids and len(self.comment_ids) != n:
            raise ValueError(f"{self.image_id}/{self.attribute.value}: comment_ids length mismatch")
        if any(w > self.weights[0] for w in self.weights[1:]):
            raise ValueError(f"{self.image_id}/{self.attribute.value}: ground truth is not the max weight")

    @property
    def captions(self) -> tuple[str, ...]:
        return (self.ground_truth, *self.references)

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "attribute": self.attribute.value,
            "ground_truth": self.ground_truth,
            "references": list(self.references),
            "weights": list(self.weights),
            "comment_ids": list(self.comment_ids),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AttributeCaptionSet":
        return cls(
            image_id=obj["image_id"],
            attribute=AttributeV2.parse(obj["attribute"]),
            ground_truth=obj["ground_truth"],
            references=tuple(obj["references"]),
            weights=tuple(obj["weights"]),
            comment_ids=tuple(obj.get("comment_ids", ())),
        )
