"""Self-contained OCR engine for monospace DejaVu Sans Mono text.

Recognition pipeline: binarize, group rows into text lines, segment glyph
cells by blank columns (splitting cells that touch via antialiasing at the
weakest ink column), then match each glyph against rendered templates using
scale-normalized bitmaps plus baseline-anchored size features. Spaces are
reconstructed from the monospace advance lattice.

Intended for clean screenshots of DejaVu Sans Mono at sizes ~18-48 px, the
offline stand-in when no system OCR engine is installed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw, ImageFont

CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789.,:;!?()'-/&@"
# chars whose rise above baseline defines the scale reference (no
# brackets/parens: they overshoot and are rare in GUI text)
SCALE_REF = set("ABCDEFGHIJKLMNOPQRSTUVWXYZbdfhklt0123456789")
SEG_THRESHOLD = 160
BITMAP_COARSE = 24
BITMAP_FINE = 48
SIZE_WEIGHTS = (3.0, 3.0, 3.0, 0.3)
SHORTLIST = 4

FONT_CANDIDATES = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf",
    "/usr/local/share/fonts/DejaVuSansMono.ttf",
]


def find_font() -> Optional[str]:
    """Locate DejaVu Sans Mono (system dirs, then matplotlib's bundle)."""
    for candidate in FONT_CANDIDATES:
        if Path(candidate).is_file():
            return candidate
    try:
        import matplotlib

        path = Path(matplotlib.get_data_path()) / "fonts" / "ttf" / "DejaVuSansMono.ttf"
        if path.is_file():
            return str(path)
    except ImportError:
        pass
    return None


@dataclass(frozen=True)
class OcrLine:
    bbox: tuple[int, int, int, int]  # x, y, w, h
    text: str
    confidence: float


class TemplateOcr:
    def __init__(
        self,
        font_path: Optional[str] = None,
        template_size: int = 64,
        min_confidence: float = 0.2,
    ):
        path = font_path or find_font()
        if path is None:
            raise RuntimeError("DejaVu Sans Mono not found; template OCR unavailable")
        self.font_path = path
        # non-text marks (icons, glyph art) match templates so badly that
        # their confidence lands near 0; the floor suppresses them
        self.min_confidence = min_confidence
        self.templates = self._build_templates(template_size)

    # -- template construction

    def _build_templates(self, size: int):
        font = ImageFont.truetype(self.font_path, size)
        raw = {}
        for ch in CHARSET:
            img = Image.new("L", (size * 3, size * 3), 255)
            ImageDraw.Draw(img).text((size, size), ch, font=font, fill=0)
            gray = np.asarray(img)
            mask = gray < SEG_THRESHOLD
            if not mask.any():
                continue
            ys, xs = np.nonzero(mask)
            raw[ch] = (
                int(ys.min()),
                int(ys.max()) + 1,
                gray[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1],
            )
        baseline = raw["M"][1]
        scale = max(baseline - y0 for ch, (y0, _, _) in raw.items() if ch in SCALE_REF)
        templates = {}
        for ch, (y0, y1, crop) in raw.items():
            h, w = crop.shape
            templates[ch] = (
                _bitmap(crop, BITMAP_COARSE),
                _bitmap(crop, BITMAP_FINE),
                h / scale,
                (baseline - y0) / scale,
                (y1 - baseline) / scale,
                w / h,
            )
        return templates

    # -- recognition

    def recognize(self, image: Image.Image) -> list[OcrLine]:
        gray = np.asarray(image.convert("L"))
        fg = gray < SEG_THRESHOLD
        lines = []
        for y0, y1 in _bands(fg.any(axis=1)):
            line = self._read_line(gray, fg, y0, y1)
            if line is not None and line.confidence >= self.min_confidence:
                lines.append(line)
        return lines

    def _read_line(self, gray, fg, y0b, y1b) -> Optional[OcrLine]:
        band = fg[y0b:y1b]
        cells = _bands(band.any(axis=0))
        if not cells:
            return None
        widths = [e - s for s, e in cells]
        deltas = [cells[i + 1][0] - cells[i][0] for i in range(len(cells) - 1)]
        median_w = float(np.median(widths))
        if deltas:
            small = [d for d in deltas if d <= 1.5 * min(deltas)]
            advance = float(np.median(small))
            if advance > 1.6 * median_w:
                advance = median_w * 1.3
        else:
            advance = median_w * 1.3

        pieces = []
        for s, e in cells:
            parts = max(1, round((e - s) / advance + 0.22))
            if parts == 1:
                pieces.append((s, e, False))
            else:
                pieces.extend((a, b, True) for a, b in _split_cell(band, s, e, parts, advance))

        glyphs = []
        for x0, x1, was_split in pieces:
            if was_split:
                x0, x1 = _trim_weak_edges(band, x0, x1)
            sub = band[:, x0:x1]
            ys = np.nonzero(sub.any(axis=1))[0]
            if ys.size == 0:
                continue
            xs = np.nonzero(sub.any(axis=0))[0]
            gx0, gx1 = x0 + int(xs.min()), x0 + int(xs.max()) + 1
            gy0, gy1 = y0b + int(ys.min()), y0b + int(ys.max()) + 1
            glyphs.append((gx0, gx1, gy0, gy1, gray[gy0:gy1, gx0:gx1]))
        if not glyphs:
            return None

        bottoms = [g[3] for g in glyphs]
        values, counts = np.unique(bottoms, return_counts=True)
        baseline = int(values[np.argmax(counts)])
        scale = max(baseline - g[2] for g in glyphs)
        if scale <= 0:
            scale = max(g[3] - g[2] for g in glyphs)

        decoded = []
        total_score = 0.0
        for gx0, gx1, gy0, gy1, crop in glyphs:
            h, w = crop.shape
            sizes = (h / scale, (baseline - gy0) / scale, (gy1 - baseline) / scale, w / h)
            ch, score = self._classify(crop, sizes)
            decoded.append((ch, gx0))
            total_score += score

        text = decoded[0][0]
        for i in range(len(decoded) - 1):
            gap = decoded[i + 1][1] - decoded[i][1]
            text += " " * max(0, round(gap / advance) - 1) + decoded[i + 1][0]

        x0 = min(g[0] for g in glyphs)
        x1 = max(g[1] for g in glyphs)
        gy0 = min(g[2] for g in glyphs)
        gy1 = max(g[3] for g in glyphs)
        mean_score = total_score / len(glyphs)
        confidence = float(np.clip(1.0 - 4.0 * mean_score, 0.0, 1.0))
        return OcrLine(
            bbox=(int(x0), int(gy0), int(x1 - x0), int(gy1 - gy0)),
            text=text,
            confidence=round(confidence, 4),
        )

    def _classify(self, crop, sizes) -> tuple[str, float]:
        coarse = _bitmap(crop, BITMAP_COARSE)
        scored = []
        for ch, t in self.templates.items():
            score = float(((coarse - t[0]) ** 2).mean())
            for k in range(4):
                score += SIZE_WEIGHTS[k] * (sizes[k] - t[2 + k]) ** 2
            scored.append((score, ch))
        scored.sort()
        fine = _bitmap(crop, BITMAP_FINE)
        best, best_score = scored[0][1], float("inf")
        for _, ch in scored[:SHORTLIST]:
            t = self.templates[ch]
            score = float(((fine - t[1]) ** 2).mean())
            for k in range(4):
                score += 1.5 * (sizes[k] - t[2 + k]) ** 2
            if score < best_score:
                best, best_score = ch, score
        return best, best_score


def _bitmap(gray_crop: np.ndarray, n: int) -> np.ndarray:
    img = Image.fromarray(gray_crop).resize((n, n), Image.BILINEAR)
    return 1.0 - np.asarray(img, dtype=np.float64) / 255.0


def _bands(flags: np.ndarray) -> list[tuple[int, int]]:
    """Runs of consecutive True values as [start, end) pairs."""
    bands = []
    start = None
    for i, value in enumerate(list(flags) + [False]):
        if value and start is None:
            start = i
        elif not value and start is not None:
            bands.append((start, i))
            start = None
    return bands


def _split_cell(band, x0, x1, parts, advance):
    """Cut a merged glyph cell at the weakest ink columns."""
    profile = band[:, x0:x1].sum(axis=0)
    width = x1 - x0
    window = max(2, int(advance * 0.35))
    cuts = [0]
    for j in range(1, parts):
        target = round(j * width / parts)
        lo = max(cuts[-1] + 1, target - window)
        hi = min(width - 1, target + window)
        if lo >= hi:
            cuts.append(target)
            continue
        cuts.append(lo + int(np.argmin(profile[lo:hi])))
    cuts.append(width)
    return [(x0 + a, x0 + b) for a, b in zip(cuts, cuts[1:]) if b > a]


def _trim_weak_edges(band, x0, x1, max_trim: int = 2):
    """Drop bridge pixels left at piece edges by antialiased joins."""
    profile = band[:, x0:x1].sum(axis=0)
    left, right = 0, len(profile)
    while left < right - 1 and left < max_trim and profile[left] <= 1:
        left += 1
    while right > left + 1 and len(profile) - right < max_trim and profile[right - 1] <= 1:
        right -= 1
    return x0 + left, x0 + right
