"""Bundle assembly and rendering: HTML report, annotated overlays, and the
lack-of-disclosure report."""

from __future__ import annotations

import html
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .model import Context, DataType, Kind
from .segments import (
    FALLBACK_MESSAGE,
    HighlightKind,
    HighlightSpan,
    SegmentGroup,
    SentenceSpan,
)

logger = logging.getLogger(__name__)

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"

# Fixed default palette, one color per data type (overridable via config).
DEFAULT_PALETTE: dict[DataType, tuple[int, int, int]] = {
    DataType.NAME: (230, 25, 75),
    DataType.BIRTHDAY: (60, 180, 75),
    DataType.ADDRESS: (255, 225, 25),
    DataType.PHONE: (0, 130, 200),
    DataType.EMAIL: (245, 130, 48),
    DataType.PROFILE: (145, 30, 180),
    DataType.CONTACTS: (70, 240, 240),
    DataType.LOCATION: (240, 50, 230),
    DataType.PHOTOS: (210, 245, 60),
    DataType.VOICES: (250, 190, 212),
    DataType.FINANCIAL_INFO: (0, 128, 128),
    DataType.SOCIAL_MEDIA: (220, 190, 255),
}


def canonical_json(obj) -> str:
    """Canonical serialization: sorted keys, two-space indent, UTF-8-ready,
    trailing newline. Array orders are fixed by construction."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


@dataclass(frozen=True)
class ScreenshotEntry:
    screenshot_id: str
    image_path: str
    contexts: tuple[Context, ...]


@dataclass(frozen=True)
class CppBundle:
    """The full generation output for one app."""

    app_id: str
    screenshots: tuple[ScreenshotEntry, ...]
    groups: Mapping[DataType, SegmentGroup]
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        ids = [s.screenshot_id for s in self.screenshots]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate screenshot ids in bundle: {ids}")
        for dt in DataType:
            if dt not in self.groups:
                raise ValueError(f"bundle groups missing data type {dt.value}")

    def all_contexts(self) -> list[Context]:
        return [c for entry in self.screenshots for c in entry.contexts]

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "app_id": self.app_id,
            "screenshots": [
                {
                    "screenshot_id": entry.screenshot_id,
                    "image": entry.image_path,
                    "contexts": [c.to_json() for c in entry.contexts],
                }
                for entry in self.screenshots
            ],
            "groups": {
                dt.value: group_to_json(self.groups[dt]) for dt in DataType
            },
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "CppBundle":
        screenshots = []
        for entry in data.get("screenshots", []):
            contexts = tuple(Context.from_json(c) for c in entry.get("contexts", []))
            screenshots.append(
                ScreenshotEntry(
                    screenshot_id=str(entry["screenshot_id"]),
                    image_path=str(entry.get("image", "")),
                    contexts=contexts,
                )
            )
        groups = {}
        for name, gdata in data.get("groups", {}).items():
            dt = DataType.from_name(name)
            groups[dt] = _group_from_json(dt, gdata)
        return cls(
            app_id=str(data["app_id"]),
            screenshots=tuple(screenshots),
            groups=groups,
            meta=dict(data.get("meta", {})),
        )


def group_to_json(group: SegmentGroup) -> dict:
    return {
        "fallback": group.fallback,
        "text": group.rendered_text(),
        "sentences": [
            {
                "section": s.section_idx,
                "paragraph": s.paragraph_idx,
                "start": s.char_start,
                "end": s.char_end,
                "text": s.text,
            }
            for s in group.sentences
        ],
        "highlights": [
            {
                "sentence": idx,
                "start": span.char_start,
                "end": span.char_end,
                "kind": span.kind.value,
            }
            for idx, span in group.highlights
        ],
    }


def _group_from_json(dt: DataType, data: Mapping) -> SegmentGroup:
    sentences = tuple(
        SentenceSpan(
            section_idx=int(s["section"]),
            paragraph_idx=int(s["paragraph"]),
            char_start=int(s["start"]),
            char_end=int(s["end"]),
            text=str(s["text"]),
        )
        for s in data.get("sentences", [])
    )
    highlights = tuple(
        (
            int(h["sentence"]),
            HighlightSpan(
                char_start=int(h["start"]),
                char_end=int(h["end"]),
                kind=HighlightKind(h["kind"]),
            ),
        )
        for h in data.get("highlights", [])
    )
    return SegmentGroup(
        data_type=dt,
        sentences=sentences,
        highlights=highlights,
        fallback=bool(data.get("fallback", not sentences)),
    )


def assemble_bundle(
    app_id: str,
    screenshots: Sequence[ScreenshotEntry],
    groups: Mapping[DataType, SegmentGroup],
    meta: Optional[Mapping] = None,
    *,
    reproducible: bool = False,
    timestamp: Optional[str] = None,
) -> CppBundle:
    """Canonicalize ordering: screenshots by id, contexts text-first then
    (y, x), groups in the fixed 12-type order (missing types filled with
    fallback groups)."""
    full_groups = {}
    for dt in DataType:
        full_groups[dt] = groups.get(dt, SegmentGroup(data_type=dt, fallback=True))
    entries = []
    for entry in sorted(screenshots, key=lambda e: e.screenshot_id):
        ordered = tuple(
            sorted(
                entry.contexts,
                key=lambda c: (0 if c.kind is Kind.TEXT else 1, c.bbox.y, c.bbox.x),
            )
        )
        entries.append(
            ScreenshotEntry(
                screenshot_id=entry.screenshot_id,
                image_path=entry.image_path,
                contexts=ordered,
            )
        )
    final_meta = dict(meta or {})
    if reproducible:
        final_meta["generated_at"] = EPOCH_TIMESTAMP
    elif timestamp is not None:
        final_meta["generated_at"] = timestamp
    elif "generated_at" not in final_meta:
        import datetime

        final_meta["generated_at"] = (
            datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        )
    return CppBundle(
        app_id=app_id, screenshots=tuple(entries), groups=full_groups, meta=final_meta
    )


# ---------------------------------------------------------------------------
# HTML report

_CSS = """
body { font-family: sans-serif; margin: 2em auto; max-width: 52em; color: #222; }
h1 { font-size: 1.4em; } h2 { font-size: 1.15em; margin-top: 1.6em; }
.contexts { color: #555; font-size: 0.9em; }
.segment { background: #f7f7f9; padding: 0.8em 1em; border-radius: 6px; }
.fallback { background: #fff3f3; padding: 0.8em 1em; border-radius: 6px; font-style: italic; }
strong { background: #ffef9e; }
.meta { color: #888; font-size: 0.8em; margin-top: 2.5em; }
"""


def render_html(bundle: CppBundle) -> str:
    """Self-contained HTML: one section per data type with contexts, policy
    sentences with highlights in bold, or the verbatim fallback message."""
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset=\"utf-8\">",
        f"<title>Contextual privacy policy: {html.escape(bundle.app_id)}</title>",
        f"<style>{_CSS}</style>",
        "</head><body>",
        f"<h1>Contextual privacy policy &mdash; {html.escape(bundle.app_id)}</h1>",
    ]
    by_type: dict[DataType, list[tuple[str, Context]]] = {dt: [] for dt in DataType}
    for entry in bundle.screenshots:
        for ctx in entry.contexts:
            by_type[ctx.data_type].append((entry.screenshot_id, ctx))
    if not any(by_type.values()):
        parts.append("<p class=\"empty\">No privacy-related contexts were detected.</p>")
    for dt in DataType:
        contexts = by_type[dt]
        if not contexts:
            continue
        group = bundle.groups[dt]
        parts.append(f"<section><h2>{html.escape(dt.value)}</h2>")
        parts.append("<ul class=\"contexts\">")
        for sid, ctx in contexts:
            box = ctx.bbox
            parts.append(
                "<li>{} &middot; {} at [{}, {}, {}, {}] ({})</li>".format(
                    html.escape(sid),
                    html.escape(ctx.kind.value),
                    box.x,
                    box.y,
                    box.w,
                    box.h,
                    html.escape(ctx.evidence),
                )
            )
        parts.append("</ul>")
        if group.fallback:
            parts.append(f"<p class=\"fallback\">{html.escape(FALLBACK_MESSAGE)}</p>")
        else:
            rendered = [
                _render_sentence(s, [h for i, h in group.highlights if i == idx])
                for idx, s in enumerate(group.sentences)
            ]
            parts.append(f"<p class=\"segment\">{' '.join(rendered)}</p>")
        parts.append("</section>")
    generated = bundle.meta.get("generated_at", "")
    version = bundle.meta.get("tool_version", "")
    parts.append(
        f"<p class=\"meta\">generated {html.escape(str(generated))} &middot; "
        f"cppgen {html.escape(str(version))}</p>"
    )
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def _render_sentence(sentence: SentenceSpan, highlights: Sequence[HighlightSpan]) -> str:
    """Escape the sentence and wrap highlight ranges in <strong> (merged
    when overlapping or adjacent)."""
    ranges = sorted((h.char_start, h.char_end) for h in highlights)
    merged: list[list[int]] = []
    for s, e in ranges:
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    out = []
    pos = 0
    text = sentence.text
    for s, e in merged:
        out.append(html.escape(text[pos:s]))
        out.append(f"<strong>{html.escape(text[s:e])}</strong>")
        pos = e
    out.append(html.escape(text[pos:]))
    return "".join(out)


# ---------------------------------------------------------------------------
# Overlay rendering


def render_overlay(
    image: np.ndarray,
    contexts: Sequence[Context],
    palette: Optional[Mapping[DataType, tuple[int, int, int]]] = None,
    draw_labels: bool = True,
) -> np.ndarray:
    """Draw each context as a 3-px rectangle (color keyed by data type) with
    the data-type name as label; all other pixels are left untouched.
    Out-of-bounds boxes are clipped with a warning."""
    colors = palette or DEFAULT_PALETTE
    if image.ndim == 2:
        canvas = np.stack([image] * 3, axis=-1)
    else:
        canvas = image[:, :, :3].copy()
    height, width = canvas.shape[:2]
    img = Image.fromarray(canvas)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    for ctx in contexts:
        box = ctx.bbox
        clipped = box.clip(width, height)
        if clipped is None:
            logger.warning("context bbox %s entirely outside image; skipped", box)
            continue
        if clipped != box:
            logger.warning("context bbox %s clipped to image bounds", box)
            box = clipped
        color = tuple(colors[ctx.data_type])
        draw.rectangle(
            [(box.x, box.y), (box.x2 - 1, box.y2 - 1)], outline=color, width=3
        )
        if draw_labels:
            draw.text((box.x + 4, box.y + 4), ctx.data_type.value, fill=color, font=font)
    return np.asarray(img)


# ---------------------------------------------------------------------------
# Lack-of-disclosure report


def lack_of_disclosure_report(bundle: CppBundle) -> dict:
    """Contexts whose data type has only the fallback segment: data
    practices visible on the GUI but absent from the policy."""
    lacking = []
    counts: dict[DataType, int] = {}
    for entry in bundle.screenshots:
        for ctx in entry.contexts:
            if bundle.groups[ctx.data_type].fallback:
                lacking.append(ctx)
                counts[ctx.data_type] = counts.get(ctx.data_type, 0) + 1
    return {
        "app_id": bundle.app_id,
        "total": len(lacking),
        "counts": {dt.value: counts[dt] for dt in DataType if dt in counts},
        "contexts": [c.to_json() for c in lacking],
    }
