"""OCR adapter: role "ocr".

Backends: `tesseract` uses pytesseract when installed; `template` is the
built-in DejaVu Sans Mono matcher (no external dependencies); `auto`
prefers tesseract and falls back to the template engine.
"""

from __future__ import annotations

import argparse
import sys

from . import protocol
from .protocol import BackendUnavailable, ImageError


def _load_image(path: str):
    from PIL import Image

    try:
        with Image.open(path) as img:
            return img.convert("L")
    except FileNotFoundError as exc:
        raise ImageError(f"image not found: {path}") from exc
    except Exception as exc:
        raise ImageError(f"cannot decode image {path}: {exc}") from exc


def _run_tesseract(image) -> list[dict]:
    try:
        import pytesseract
        from pytesseract import Output
    except ImportError as exc:
        raise BackendUnavailable("pytesseract is not installed") from exc
    try:
        data = pytesseract.image_to_data(image, output_type=Output.DICT)
    except Exception as exc:  # missing binary, bad install
        raise BackendUnavailable(f"tesseract failed: {exc}") from exc
    regions = []
    lines: dict[tuple, list[int]] = {}
    for i in range(len(data["text"])):
        if not data["text"][i].strip():
            continue
        key = (data["block_num"][i], data["par_num"][i], data["line_num"][i])
        lines.setdefault(key, []).append(i)
    for indices in lines.values():
        xs = [data["left"][i] for i in indices]
        ys = [data["top"][i] for i in indices]
        x2s = [data["left"][i] + data["width"][i] for i in indices]
        y2s = [data["top"][i] + data["height"][i] for i in indices]
        words = [data["text"][i].strip() for i in indices]
        confs = [max(0, int(data["conf"][i])) for i in indices]
        regions.append(
            {
                "bbox": [min(xs), min(ys), max(x2s) - min(xs), max(y2s) - min(ys)],
                "text": " ".join(words),
                "confidence": round(sum(confs) / (100.0 * len(confs)), 4),
            }
        )
    return regions


def _run_template(image, min_confidence: float) -> list[dict]:
    try:
        engine = _template_engine(min_confidence)
    except RuntimeError as exc:
        raise BackendUnavailable(str(exc)) from exc
    return [
        {"bbox": list(line.bbox), "text": line.text, "confidence": line.confidence}
        for line in engine.recognize(image)
    ]


_ENGINE = None


def _template_engine(min_confidence: float):
    global _ENGINE
    if _ENGINE is None or _ENGINE.min_confidence != min_confidence:
        from .template_ocr import TemplateOcr

        _ENGINE = TemplateOcr(min_confidence=min_confidence)
    return _ENGINE


def handle(payload: dict, backend: str, min_confidence: float) -> dict:
    path = payload.get("image_path")
    if not isinstance(path, str):
        raise protocol.ProtocolError("ocr payload requires 'image_path'")
    image = _load_image(path)
    if backend == "tesseract":
        regions = _run_tesseract(image)
    elif backend == "template":
        regions = _run_template(image, min_confidence)
    else:  # auto
        try:
            regions = _run_tesseract(image)
        except BackendUnavailable:
            regions = _run_template(image, min_confidence)
    return {"regions": [r for r in regions if r["confidence"] >= min_confidence]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpp-ocr-adapter", description=__doc__)
    parser.add_argument("--backend", choices=("auto", "tesseract", "template"), default="auto")
    parser.add_argument(
        "--min-confidence", type=float, default=0.2,
        help="drop recognized lines below this confidence",
    )
    parser.add_argument("--record", default=None, help="append request/response to a transcript")
    parser.add_argument("--replay", default=None, help="answer from a recorded transcript")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return protocol.serve(
        "ocr", lambda payload: handle(payload, args.backend, args.min_confidence), args
    )


if __name__ == "__main__":
    sys.exit(main())
