"""Shared domain types, box geometry, and prediction/ground-truth matching."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence


class DataType(enum.Enum):
    """The twelve personal-data categories, in canonical row order.

    The first six are basic personally identifiable information, the last
    six other personal information. Declaration order is the tie-break
    order used by keyword classification.
    """

    NAME = "Name"
    BIRTHDAY = "Birthday"
    ADDRESS = "Address"
    PHONE = "Phone"
    EMAIL = "Email"
    PROFILE = "Profile"
    CONTACTS = "Contacts"
    LOCATION = "Location"
    PHOTOS = "Photos"
    VOICES = "Voices"
    FINANCIAL_INFO = "FinancialInfo"
    SOCIAL_MEDIA = "SocialMedia"

    @classmethod
    def from_name(cls, name: str) -> "DataType":
        """Parse the exact serialized string; raises ValueError otherwise."""
        for dt in cls:
            if dt.value == name:
                return dt
        raise ValueError(f"unknown data type {name!r}")

    @property
    def row_order(self) -> int:
        return _ROW_ORDER[self]


_ROW_ORDER = {dt: i for i, dt in enumerate(DataType)}

BASIC_PII = tuple(DataType)[:6]
OTHER_PERSONAL = tuple(DataType)[6:]


class Kind(enum.Enum):
    TEXT = "Text"
    ICON = "Icon"

    @classmethod
    def from_name(cls, name: str) -> "Kind":
        for k in cls:
            if k.value == name:
                return k
        raise ValueError(f"unknown context kind {name!r}")


@dataclass(frozen=True)
class BBox:
    """Pixel rectangle, top-left origin, integer coordinates."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, int):
                raise ValueError(f"BBox.{name} must be an integer, got {v!r}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"BBox position must be non-negative: ({self.x}, {self.y})")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox size must be positive: {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def intersection_area(self, other: "BBox") -> int:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0
        return iw * ih

    def within(self, width: int, height: int) -> bool:
        return self.x2 <= width and self.y2 <= height

    def clip(self, width: int, height: int) -> Optional["BBox"]:
        """Clip to an image of the given size; None if nothing remains."""
        x = max(self.x, 0)
        y = max(self.y, 0)
        x2 = min(self.x2, width)
        y2 = min(self.y2, height)
        if x2 - x <= 0 or y2 - y <= 0:
            return None
        return BBox(x, y, x2 - x, y2 - y)

    def to_json(self) -> list:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_json(cls, data) -> "BBox":
        if not (isinstance(data, (list, tuple)) and len(data) == 4):
            raise ValueError(f"bbox must be a 4-array [x,y,w,h], got {data!r}")
        return cls(*(int(v) for v in data))


@dataclass(frozen=True)
class Context:
    """A privacy-related GUI region with its inferred data type."""

    screenshot_id: str
    bbox: BBox
    kind: Kind
    data_type: DataType
    evidence: str
    score: float = 1.0

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("Context.evidence must be non-empty")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Context.score must be in [0,1], got {self.score}")

    def to_json(self) -> dict:
        return {
            "screenshot": self.screenshot_id,
            "bbox": self.bbox.to_json(),
            "kind": self.kind.value,
            "data_type": self.data_type.value,
            "evidence": self.evidence,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Context":
        return cls(
            screenshot_id=str(data["screenshot"]),
            bbox=BBox.from_json(data["bbox"]),
            kind=Kind.from_name(data["kind"]),
            data_type=DataType.from_name(data["data_type"]),
            evidence=str(data["evidence"]),
            score=float(data.get("score", 1.0)),
        )


@dataclass(frozen=True)
class EvalConfig:
    """Matching thresholds for the evaluation harness."""

    iou_threshold: float = 0.5
    segment_threshold: float = 0.8

    def __post_init__(self):
        for name in ("iou_threshold", "segment_threshold"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"EvalConfig.{name} must be in (0,1], got {v}")


# Keyword phrases per data type for textual GUI elements. Phrases are stored
# lowercase; matching is case-insensitive. Bare "address" is deliberately
# absent (ambiguous between residential and email address).
_DEFAULT_KEYWORDS: dict[DataType, tuple[str, ...]] = {
    DataType.NAME: (
        "name", "first name", "last name", "full name", "real name",
        "surname", "family name", "given name",
    ),
    DataType.BIRTHDAY: (
        "birthday", "date of birth", "birth date", "dob", "birth year",
    ),
    DataType.ADDRESS: (
        "mailing address", "physical address", "postal address",
        "billing address", "shipping address", "residential address",
        "residence", "personal address",
    ),
    DataType.PHONE: (
        "phone", "phone number", "mobile phone", "mobile number",
        "telephone", "call", "telephone number",
    ),
    DataType.EMAIL: (
        "email", "e-mail", "email address", "e-mail address",
    ),
    DataType.PROFILE: (
        "profile", "account",
    ),
    DataType.CONTACTS: (
        "contacts", "phone-book", "phone book", "device's address book",
    ),
    DataType.LOCATION: (
        "location", "locate", "geography", "geo", "geo-location",
        "precision location",
    ),
    DataType.PHOTOS: (
        "camera", "photo", "scan", "album", "picture", "gallery",
        "photo library", "storage", "image", "video", "scanner",
        "photograph", "wallpaper",
    ),
    DataType.VOICES: (
        "microphone", "voice", "mic", "speech", "talk", "audio",
    ),
    DataType.FINANCIAL_INFO: (
        "credit card", "company", "companies", "organization", "commercial",
        "organizations", "pay", "payment", "financial", "bill", "wallet",
        "purchase",
    ),
    DataType.SOCIAL_MEDIA: (
        "social media", "facebook", "twitter", "socialmedia", "share",
    ),
}


@dataclass(frozen=True)
class KeywordResource:
    """Per-data-type keyword phrase lists (lowercase, non-empty)."""

    phrases: Mapping[DataType, tuple[str, ...]] = field(
        default_factory=lambda: dict(_DEFAULT_KEYWORDS)
    )

    def __post_init__(self):
        for dt in DataType:
            plist = self.phrases.get(dt)
            if not plist:
                raise ValueError(f"keyword list for {dt.value} must be non-empty")
            for p in plist:
                if not p.strip():
                    raise ValueError(f"empty keyword phrase under {dt.value}")
                if p != p.lower():
                    raise ValueError(f"keyword phrase {p!r} must be lowercase")

    def __getitem__(self, dt: DataType) -> tuple[str, ...]:
        return self.phrases[dt]

    @classmethod
    def default(cls) -> "KeywordResource":
        return cls()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Iterable[str]]) -> "KeywordResource":
        phrases = {}
        for key, plist in data.items():
            dt = DataType.from_name(key)
            phrases[dt] = tuple(p.strip().lower() for p in plist)
        return cls(phrases)


# RICO-style icon class -> data type. Classes absent here carry no data type
# and candidate icons classified into them are discarded.
_DEFAULT_ICON_CLASSES: dict[str, DataType] = {
    "Call": DataType.PHONE,
    "Email": DataType.EMAIL,
    "Avatar": DataType.PROFILE,
    "Group": DataType.CONTACTS,
    "Follow": DataType.CONTACTS,
    "Location": DataType.LOCATION,
    "LocationCrosshair": DataType.LOCATION,
    "Photo": DataType.PHOTOS,
    "Wallpaper": DataType.PHOTOS,
    "Videocam": DataType.PHOTOS,
    "Microphone": DataType.VOICES,
    "Cart": DataType.FINANCIAL_INFO,
    "Facebook": DataType.SOCIAL_MEDIA,
    "Twitter": DataType.SOCIAL_MEDIA,
}


@dataclass(frozen=True)
class IconClassMap:
    """Partial map from icon class name to data type."""

    classes: Mapping[str, DataType] = field(
        default_factory=lambda: dict(_DEFAULT_ICON_CLASSES)
    )

    def lookup(self, class_name: str) -> Optional[DataType]:
        return self.classes.get(class_name)

    @classmethod
    def default(cls) -> "IconClassMap":
        return cls()


def iou_exact(a: BBox, b: BBox) -> Fraction:
    """Intersection over union as an exact rational."""
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    return Fraction(inter, union)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]."""
    return float(iou_exact(a, b))


def match_boxes(
    preds: Sequence[Context],
    gts: Sequence[Context],
    cfg: EvalConfig = EvalConfig(),
) -> list[tuple[int, int]]:
    """Greedy one-to-one assignment of predictions to ground truth.

    Pairs are considered in descending IoU order (exact rational
    comparison; ties broken by lower pred index, then lower gt index) and
    matched only when IoU >= the threshold and both kind and data type
    agree. Returns (pred_idx, gt_idx) pairs sorted by pred index.
    """
    screenshot_ids = {c.screenshot_id for c in preds} | {c.screenshot_id for c in gts}
    if len(screenshot_ids) > 1:
        raise ValueError(
            f"match_boxes expects contexts from one screenshot, got {sorted(screenshot_ids)}"
        )
    beta = Fraction(cfg.iou_threshold).limit_denominator(10**9)
    candidates = []
    for pi, p in enumerate(preds):
        for gi, g in enumerate(gts):
            if p.kind is not g.kind or p.data_type is not g.data_type:
                continue
            overlap = iou_exact(p.bbox, g.bbox)
            if overlap >= beta:
                candidates.append((-overlap, pi, gi))
    candidates.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = []
    for _, pi, gi in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matches.append((pi, gi))
    matches.sort()
    return matches
