"""Client side of the external-adapter subprocess protocol.

Adapters are standalone executables that receive one JSON request on stdin
and answer with one JSON response on stdout (wire version 1). They host the
heavyweight third-party models (OCR engines, LLM text classifiers, neural
icon classifiers) behind a stable contract, so the pipeline itself stays
free of those dependencies.
"""

from __future__ import annotations

import enum
import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .model import DataType

WIRE_VERSION = 1


class AdapterRole(enum.Enum):
    OCR = "ocr"
    TEXT_CLASSIFIER = "text_classifier"
    ICON_CLASSIFIER = "icon_classifier"


class AdapterError(RuntimeError):
    """Adapter invocation failure; carries the offending payload for triage."""

    def __init__(self, message: str, payload=None):
        if payload is not None:
            message = f"{message}; payload: {payload!r}"
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class AdapterSpec:
    """An adapter executable plus its static arguments."""

    executable: str
    args: tuple[str, ...] = ()
    role: AdapterRole = AdapterRole.OCR

    @classmethod
    def from_command(cls, command: str, role: AdapterRole) -> "AdapterSpec":
        """Parse a shell-style command string ("prog --flag value")."""
        parts = shlex.split(command)
        if not parts:
            raise ValueError("adapter command must not be empty")
        return cls(executable=parts[0], args=tuple(parts[1:]), role=role)

    def describe(self) -> str:
        return " ".join([f"{self.role.value}:{self.executable}", *self.args]).strip()


def run_adapter(spec: AdapterSpec, payload: dict, timeout: float = 120.0) -> dict:
    """Invoke the adapter once and return its parsed JSON response."""
    request = {"role": spec.role.value, "version": WIRE_VERSION, "payload": payload}
    argv = [spec.executable, *spec.args]
    try:
        proc = subprocess.run(
            argv,
            input=json.dumps(request).encode("utf-8"),
            capture_output=True,
            timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise AdapterError(f"adapter launch failed: {argv[0]!r} not found") from exc
    except subprocess.TimeoutExpired as exc:
        raise AdapterError(f"adapter timed out after {timeout}s: {argv}") from exc
    if proc.returncode != 0:
        raise AdapterError(
            f"adapter {argv[0]!r} exited with code {proc.returncode}",
            payload=proc.stdout.decode("utf-8", "replace") or proc.stderr.decode("utf-8", "replace"),
        )
    raw = proc.stdout.decode("utf-8", "replace")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise AdapterError(f"adapter {argv[0]!r} returned malformed JSON", payload=raw) from exc
    if not isinstance(data, dict):
        raise AdapterError(f"adapter {argv[0]!r} response must be a JSON object", payload=raw)
    return data


def parse_ocr_response(data: dict) -> list[dict]:
    """Validate an OCR response; returns the raw region dicts."""
    regions = data.get("regions")
    if not isinstance(regions, list):
        raise AdapterError("ocr response must contain a 'regions' array", payload=data)
    for region in regions:
        if not isinstance(region, dict):
            raise AdapterError("ocr region must be an object", payload=region)
        bbox = region.get("bbox")
        if not (
            isinstance(bbox, list)
            and len(bbox) == 4
            and all(isinstance(v, int) and v >= 0 for v in bbox)
            and bbox[2] > 0
            and bbox[3] > 0
        ):
            raise AdapterError("ocr region bbox must be [x,y,w,h] non-negative ints", payload=region)
        if not isinstance(region.get("text"), str):
            raise AdapterError("ocr region text must be a string", payload=region)
        conf = region.get("confidence")
        if not (isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0):
            raise AdapterError("ocr region confidence must be in [0,1]", payload=region)
    return regions


def parse_text_response(data: dict) -> Optional[DataType]:
    if "data_type" not in data:
        raise AdapterError("text classifier response must contain 'data_type'", payload=data)
    name = data["data_type"]
    if name is None:
        return None
    if not isinstance(name, str):
        raise AdapterError("data_type must be a string or null", payload=data)
    try:
        return DataType.from_name(name)
    except ValueError as exc:
        raise AdapterError(str(exc), payload=data) from exc


def parse_icon_response(data: dict) -> tuple[Optional[str], float]:
    if "class" not in data:
        raise AdapterError("icon classifier response must contain 'class'", payload=data)
    cls = data["class"]
    if cls is not None and not isinstance(cls, str):
        raise AdapterError("icon class must be a string or null", payload=data)
    score = data.get("score", 0.0)
    if not (isinstance(score, (int, float)) and 0.0 <= score <= 1.0):
        raise AdapterError("icon score must be in [0,1]", payload=data)
    return cls, float(score)


def ocr_image(spec: AdapterSpec, image_path: str | Path, timeout: float = 120.0) -> list[dict]:
    if spec.role is not AdapterRole.OCR:
        raise ValueError(f"expected an OCR adapter, got role {spec.role.value}")
    data = run_adapter(spec, {"image_path": str(image_path)}, timeout=timeout)
    return parse_ocr_response(data)


def classify_text_remote(spec: AdapterSpec, text: str, timeout: float = 120.0) -> Optional[DataType]:
    if spec.role is not AdapterRole.TEXT_CLASSIFIER:
        raise ValueError(f"expected a text classifier adapter, got role {spec.role.value}")
    payload = {"text": text, "data_types": [dt.value for dt in DataType]}
    return parse_text_response(run_adapter(spec, payload, timeout=timeout))


def classify_icon_remote(
    spec: AdapterSpec, image_path: str | Path, classes: list[str], timeout: float = 120.0
) -> tuple[Optional[str], float]:
    if spec.role is not AdapterRole.ICON_CLASSIFIER:
        raise ValueError(f"expected an icon classifier adapter, got role {spec.role.value}")
    payload = {"image_path": str(image_path), "classes": list(classes)}
    return parse_icon_response(run_adapter(spec, payload, timeout=timeout))
