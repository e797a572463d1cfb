"""Privacy-context detection on screenshots: OCR-backed text classification
and rule-based icon localization with a kNN icon classifier."""

from __future__ import annotations

import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from . import adapters, kernels
from .adapters import AdapterError, AdapterSpec
from .model import BBox, Context, DataType, IconClassMap, Kind, KeywordResource

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TextRegion:
    bbox: BBox
    text: str
    confidence: float

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("TextRegion.text must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"TextRegion.confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class LocalizerParams:
    """Thresholds for the four icon-filtering rules plus binarization knobs.

    Rule (a) drops components larger than max_area_ratio of the screen,
    (b) drops those smaller than min_area_ratio, (c) drops elongated shapes
    below min_squareness, (d) drops components overlapping OCR text.
    """

    max_area_ratio: float = 0.10
    min_area_ratio: float = 0.0005
    min_squareness: float = 0.6
    ocr_overlap_ratio: float = 0.5
    binarize_block: int = 31
    binarize_offset: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.min_area_ratio < self.max_area_ratio < 1.0:
            raise ValueError(
                "area ratios must satisfy 0 < min_area_ratio < max_area_ratio < 1, got "
                f"{self.min_area_ratio} / {self.max_area_ratio}"
            )
        if not 0.0 < self.min_squareness <= 1.0:
            raise ValueError(f"min_squareness must be in (0,1], got {self.min_squareness}")
        if not 0.0 < self.ocr_overlap_ratio <= 1.0:
            raise ValueError(f"ocr_overlap_ratio must be in (0,1], got {self.ocr_overlap_ratio}")
        if self.binarize_block < 3 or self.binarize_block % 2 == 0:
            raise ValueError(f"binarize_block must be odd and >= 3, got {self.binarize_block}")


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG file to an RGB or grayscale uint8 array."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            return np.asarray(img)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from exc


def detect_text_regions(
    image_path: str | Path,
    adapter: AdapterSpec,
    *,
    image: Optional[np.ndarray] = None,
) -> list[TextRegion]:
    """Run the OCR adapter and validate its regions against the image.

    Regions reaching outside the image are clipped (and logged); regions
    with no visible text or entirely outside the bounds are dropped.
    """
    if image is None:
        image = load_image(image_path)
    height, width = image.shape[:2]
    raw_regions = adapters.ocr_image(adapter, image_path)
    regions: list[TextRegion] = []
    for raw in raw_regions:
        text = raw["text"].strip()
        if not text:
            logger.warning("dropping OCR region with empty text: %r", raw)
            continue
        bbox = BBox.from_json(raw["bbox"])
        clipped = bbox.clip(width, height)
        if clipped is None:
            logger.warning("dropping OCR region outside image bounds: %r", raw)
            continue
        if clipped != bbox:
            logger.warning("clipped OCR region %s to image bounds -> %s", bbox, clipped)
        regions.append(TextRegion(bbox=clipped, text=text, confidence=float(raw["confidence"])))
    return regions


def _normalize_tokens(text: str) -> list[str]:
    """Lowercase, map every non-alphanumeric character to a space, split."""
    return "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()


def classify_text(
    text: str,
    keywords: KeywordResource = KeywordResource.default(),
    adapter: Optional[AdapterSpec] = None,
) -> Optional[tuple[DataType, str]]:
    """Map a GUI text to a data type.

    Built-in path: keyword phrases matched as contiguous token subsequences
    after lowercasing and punctuation-to-space normalization; the longest
    phrase wins, ties broken by data-type row order. When an adapter is
    given its non-null answer overrides; a null answer or adapter failure
    falls back to the keyword path.
    """
    if not text.strip():
        raise ValueError("classify_text requires non-empty text")
    if adapter is not None:
        try:
            dt = adapters.classify_text_remote(adapter, text)
            if dt is not None:
                return dt, dt.value
        except AdapterError as exc:
            logger.warning("text classifier adapter failed, using keyword path: %s", exc)
    tokens = _normalize_tokens(text)
    best: Optional[tuple[int, int, int, DataType, str]] = None
    for dt in DataType:
        for list_idx, phrase in enumerate(keywords[dt]):
            ptoks = _normalize_tokens(phrase)
            if not ptoks or not _contains_subsequence(tokens, ptoks):
                continue
            key = (-len(ptoks), dt.row_order, list_idx)
            if best is None or key < best[:3]:
                best = (*key, dt, phrase)
    if best is None:
        return None
    return best[3], best[4]


def _contains_subsequence(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n = len(phrase)
    for i in range(len(tokens) - n + 1):
        if tokens[i : i + n] == list(phrase):
            return True
    return False


def localize_icons(
    image: np.ndarray,
    ocr_regions: Sequence[TextRegion] = (),
    params: LocalizerParams = LocalizerParams(),
) -> list[BBox]:
    """Candidate icon boxes: binarize, label 8-connected components, then
    apply the four filtering rules in order. Output sorted by (y, x)."""
    gray = kernels.to_gray(image)
    height, width = gray.shape
    mask = kernels.adaptive_mean_binarize(gray, params.binarize_block, params.binarize_offset)
    boxes = kernels.component_boxes(mask)
    screen_area = float(width * height)
    out: list[BBox] = []
    for x, y, w, h in boxes:
        area_ratio = (w * h) / screen_area
        if area_ratio > params.max_area_ratio:            # (a) banners, large images
            continue
        if area_ratio < params.min_area_ratio:            # (b) small noise
            continue
        if min(w, h) / max(w, h) < params.min_squareness:  # (c) bars, elongated shapes
            continue
        candidate = BBox(int(x), int(y), int(w), int(h))
        overlapped = False
        for region in ocr_regions:                        # (d) detected text
            inter = candidate.intersection_area(region.bbox)
            if inter > params.ocr_overlap_ratio * candidate.area:
                overlapped = True
                break
        if overlapped:
            continue
        out.append(candidate)
    return out


@dataclass(frozen=True)
class KnnModel:
    """Nearest-neighbour icon classifier over normalized grayscale pixels."""

    k: int
    side: int
    features: np.ndarray = field(repr=False)
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if len(self.labels) == 0:
            raise ValueError("KnnModel requires a non-empty training set")
        if self.features.shape != (len(self.labels), self.side * self.side):
            raise ValueError(
                f"feature matrix shape {self.features.shape} does not match "
                f"{len(self.labels)} samples of side {self.side}"
            )

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def predict(self, crop: np.ndarray) -> tuple[str, float]:
        """Majority vote among the k nearest neighbours by Euclidean
        distance; ties go to the nearest neighbour among the tied classes.
        Score is winner votes / k."""
        vec = icon_features(crop, self.side)
        dists = np.sqrt(((self.features - vec) ** 2).sum(axis=1))
        order = np.lexsort((np.arange(len(dists)), dists))
        top = order[: min(self.k, len(order))]
        votes: dict[str, int] = {}
        for idx in top:
            votes[self.labels[idx]] = votes.get(self.labels[idx], 0) + 1
        best_count = max(votes.values())
        tied = {cls for cls, n in votes.items() if n == best_count}
        if len(tied) == 1:
            winner = next(iter(tied))
        else:
            winner = next(self.labels[idx] for idx in top if self.labels[idx] in tied)
        return winner, votes[winner] / self.k


def icon_features(crop: np.ndarray, side: int) -> np.ndarray:
    """Grayscale, area-average to side x side, scale to [0, 1], flatten."""
    img = Image.fromarray(crop if crop.ndim == 2 else crop[:, :, :3])
    img = img.convert("L").resize((side, side), Image.BOX)
    return np.asarray(img, dtype=np.float64).reshape(-1) / 255.0


def train_knn(labeled_dir: str | Path, k: int = 5, side: int = 32) -> KnnModel:
    """Train from a directory of class-named subfolders of PNG icons."""
    root = Path(labeled_dir)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if len(class_dirs) < 2:
        raise ValueError(f"need at least 2 class folders under {root}, found {len(class_dirs)}")
    feats: list[np.ndarray] = []
    labels: list[str] = []
    for class_dir in class_dirs:
        count = 0
        for path in sorted(class_dir.glob("*.png")):
            try:
                arr = load_image(path)
            except ValueError as exc:
                logger.warning("skipping undecodable training image %s: %s", path, exc)
                continue
            feats.append(icon_features(arr, side))
            labels.append(class_dir.name)
            count += 1
        if count == 0:
            raise ValueError(f"icon class folder {class_dir} has no decodable .png images")
    return KnnModel(k=k, side=side, features=np.stack(feats), labels=tuple(labels))


def classify_icon(
    crop: np.ndarray,
    model: Optional[KnnModel] = None,
    class_map: IconClassMap = IconClassMap.default(),
    adapter: Optional[AdapterSpec] = None,
) -> Optional[tuple[str, DataType, float]]:
    """Classify an icon crop; None when the predicted class carries no data
    type. The adapter, when provided, replaces the kNN model."""
    if adapter is not None:
        with tempfile.NamedTemporaryFile(suffix=".png", delete=True) as tmp:
            Image.fromarray(crop).save(tmp.name)
            cls, score = adapters.classify_icon_remote(
                adapter, tmp.name, sorted(class_map.classes.keys())
            )
        if cls is None:
            return None
        dt = class_map.lookup(cls)
        if dt is None:
            return None
        return cls, dt, score
    if model is None:
        raise ValueError("classify_icon requires a trained model or an adapter")
    cls, score = model.predict(crop)
    dt = class_map.lookup(cls)
    if dt is None:
        return None
    return cls, dt, score


def detect_contexts(
    image_path: str | Path,
    *,
    screenshot_id: Optional[str] = None,
    ocr_adapter: Optional[AdapterSpec] = None,
    text_adapter: Optional[AdapterSpec] = None,
    icon_adapter: Optional[AdapterSpec] = None,
    keywords: KeywordResource = KeywordResource.default(),
    class_map: IconClassMap = IconClassMap.default(),
    model: Optional[KnnModel] = None,
    params: LocalizerParams = LocalizerParams(),
    image: Optional[np.ndarray] = None,
) -> list[Context]:
    """Full per-screenshot detection: classified text regions first, then
    classified icons, each sorted by (y, x)."""
    if image is None:
        image = load_image(image_path)
    sid = screenshot_id if screenshot_id is not None else Path(image_path).name
    regions: list[TextRegion] = []
    if ocr_adapter is not None:
        regions = detect_text_regions(image_path, ocr_adapter, image=image)
    text_contexts: list[Context] = []
    for region in sorted(regions, key=lambda r: (r.bbox.y, r.bbox.x)):
        hit = classify_text(region.text, keywords, text_adapter)
        if hit is None:
            continue
        dt, phrase = hit
        text_contexts.append(
            Context(
                screenshot_id=sid,
                bbox=region.bbox,
                kind=Kind.TEXT,
                data_type=dt,
                evidence=phrase,
                score=region.confidence,
            )
        )
    icon_contexts: list[Context] = []
    if model is not None or icon_adapter is not None:
        for box in localize_icons(image, regions, params):
            crop = image[box.y : box.y2, box.x : box.x2]
            hit = classify_icon(crop, model, class_map, icon_adapter)
            if hit is None:
                continue
            cls, dt, score = hit
            icon_contexts.append(
                Context(
                    screenshot_id=sid,
                    bbox=box,
                    kind=Kind.ICON,
                    data_type=dt,
                    evidence=cls,
                    score=score,
                )
            )
    else:
        logger.debug("no icon model or adapter; skipping icon classification for %s", sid)
    return text_contexts + icon_contexts
