"""Benchmark-directory loading and bundle serialization.

Dataset layout, one directory per app:

    <root>/<app_id>/policy.html | policy.txt
    <root>/<app_id>/screenshots/*.png|*.jpg
    <root>/<app_id>/annotations.json

annotations.json schema:

    {"contexts": [{"screenshot": str, "bbox": [x,y,w,h],
                   "kind": "Text"|"Icon", "data_type": str,
                   "evidence": str}],
     "segments": {<DataType>: [sentence, ...] | "FALLBACK"}}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from PIL import Image

from .model import Context, DataType
from .present import CppBundle, canonical_json

logger = logging.getLogger(__name__)

FALLBACK_MARKER = "FALLBACK"


class DatasetError(ValueError):
    """Invalid dataset content; message names the offending file."""


@dataclass(frozen=True)
class AppRecord:
    app_id: str
    policy_path: Path
    screenshots: tuple[Path, ...]
    gt_contexts: tuple[Context, ...]
    # None means the annotated segment is the explicit fallback
    gt_segments: Mapping[DataType, Optional[tuple[str, ...]]]

    def screenshot_ids(self) -> list[str]:
        return [p.name for p in self.screenshots]


def _reject_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen[key] = value
    return seen


def load_dataset(root: str | Path) -> list[AppRecord]:
    """Load every app directory under `root`, sorted by app id."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    records = []
    for app_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        records.append(load_app(app_dir))
    return records


def load_app(app_dir: Path) -> AppRecord:
    app_id = app_dir.name
    policy_path = None
    for name in ("policy.html", "policy.txt"):
        candidate = app_dir / name
        if candidate.is_file():
            policy_path = candidate
            break
    if policy_path is None:
        raise DatasetError(f"{app_dir}: missing policy.html or policy.txt")

    shots_dir = app_dir / "screenshots"
    screenshots = tuple(
        sorted(
            p
            for p in (shots_dir.iterdir() if shots_dir.is_dir() else [])
            if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
    )
    sizes: dict[str, tuple[int, int]] = {}
    for path in screenshots:
        try:
            with Image.open(path) as img:
                sizes[path.name] = img.size
        except Exception as exc:
            raise DatasetError(f"{path}: cannot decode screenshot: {exc}") from exc

    ann_path = app_dir / "annotations.json"
    if not ann_path.is_file():
        raise DatasetError(f"{app_dir}: missing annotations.json")
    try:
        data = json.loads(
            ann_path.read_text(encoding="utf-8"), object_pairs_hook=_reject_duplicate_keys
        )
    except ValueError as exc:
        raise DatasetError(f"{ann_path}: malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DatasetError(f"{ann_path}: annotations must be a JSON object")

    contexts = []
    for i, raw in enumerate(data.get("contexts", [])):
        try:
            ctx = Context.from_json(raw)
        except (KeyError, ValueError) as exc:
            raise DatasetError(f"{ann_path}: contexts[{i}]: {exc}") from exc
        if ctx.screenshot_id not in sizes:
            raise DatasetError(
                f"{ann_path}: contexts[{i}] references unknown screenshot "
                f"{ctx.screenshot_id!r}"
            )
        width, height = sizes[ctx.screenshot_id]
        if not ctx.bbox.within(width, height):
            raise DatasetError(
                f"{ann_path}: contexts[{i}] bbox {ctx.bbox.to_json()} exceeds "
                f"{ctx.screenshot_id} bounds {width}x{height}"
            )
        contexts.append(ctx)

    segments: dict[DataType, Optional[tuple[str, ...]]] = {}
    raw_segments = data.get("segments", {})
    if not isinstance(raw_segments, Mapping):
        raise DatasetError(f"{ann_path}: segments must be an object")
    for name, value in raw_segments.items():
        try:
            dt = DataType.from_name(name)
        except ValueError as exc:
            raise DatasetError(f"{ann_path}: segments: {exc}") from exc
        if dt in segments:
            raise DatasetError(f"{ann_path}: duplicate data type {name} in segments")
        if value == FALLBACK_MARKER:
            segments[dt] = None
        elif isinstance(value, list) and all(isinstance(s, str) for s in value):
            segments[dt] = tuple(value)
        else:
            raise DatasetError(
                f"{ann_path}: segments[{name}] must be a sentence list or \"{FALLBACK_MARKER}\""
            )

    return AppRecord(
        app_id=app_id,
        policy_path=policy_path,
        screenshots=screenshots,
        gt_contexts=tuple(contexts),
        gt_segments=segments,
    )


def write_bundle(bundle: CppBundle, out: str | Path) -> Path:
    """Serialize a bundle as canonical JSON; rewriting an unchanged bundle
    produces byte-identical output."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(canonical_json(bundle.to_json()).encode("utf-8"))
    return out


def read_bundle(path: str | Path) -> CppBundle:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DatasetError(f"{path}: malformed bundle JSON: {exc}") from exc
    try:
        return CppBundle.from_json(data)
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"{path}: invalid bundle: {exc}") from exc
