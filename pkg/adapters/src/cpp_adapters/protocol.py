"""Wire protocol shared by the reference adapters.

One JSON request on stdin, one JSON response on stdout, diagnostics on
stderr only. Exit codes: 0 success, 3 protocol error (unknown role,
malformed request), 4 unreadable image, 5 backend unavailable.

Transcripts: `--record FILE` appends {request, response, exit} entries
after serving; `--replay FILE` answers a matching recorded request
byte-for-byte without touching any backend.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Callable, Optional

WIRE_VERSION = 1

EXIT_OK = 0
EXIT_PROTOCOL = 3
EXIT_UNREADABLE_IMAGE = 4
EXIT_BACKEND_UNAVAILABLE = 5

DATA_TYPES = [
    "Name", "Birthday", "Address", "Phone", "Email", "Profile",
    "Contacts", "Location", "Photos", "Voices", "FinancialInfo",
    "SocialMedia",
]


class ProtocolError(Exception):
    pass


class ImageError(Exception):
    pass


class BackendUnavailable(Exception):
    pass


def read_request(role: str, stdin=None) -> dict:
    raw = (stdin or sys.stdin).read()
    try:
        request = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"request is not valid JSON: {exc}") from exc
    if not isinstance(request, dict):
        raise ProtocolError("request must be a JSON object")
    if request.get("version") != WIRE_VERSION:
        raise ProtocolError(f"unsupported wire version {request.get('version')!r}")
    if request.get("role") != role:
        raise ProtocolError(f"unknown role {request.get('role')!r} (this adapter serves {role})")
    payload = request.get("payload")
    if not isinstance(payload, dict):
        raise ProtocolError("request payload must be an object")
    return request


def write_response(data: dict) -> str:
    text = json.dumps(data, ensure_ascii=False)
    sys.stdout.write(text)
    sys.stdout.flush()
    return text


def record_entry(path: str | Path, request: dict, response_text: str, exit_code: int):
    path = Path(path)
    entries = []
    if path.is_file():
        entries = json.loads(path.read_text(encoding="utf-8"))
    entries.append({"request": request, "response": response_text, "exit": exit_code})
    path.write_text(json.dumps(entries, indent=2, ensure_ascii=False), encoding="utf-8")


def replay(path: str | Path, request: dict) -> Optional[tuple[str, int]]:
    """The recorded (response text, exit code) for `request`, if any."""
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    for entry in entries:
        if entry["request"] == request:
            return entry["response"], int(entry.get("exit", 0))
    return None


def serve(role: str, handler: Callable[[dict], dict], args) -> int:
    """Run one request/response cycle with record/replay support.

    `handler` receives the payload and returns the response object;
    it may raise ImageError or BackendUnavailable.
    """
    raw_request: Optional[dict] = None
    try:
        raw_request = read_request(role)
    except ProtocolError as exc:
        write_response({"error": str(exc)})
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL

    if getattr(args, "replay", None):
        recorded = replay(args.replay, raw_request)
        if recorded is None:
            write_response({"error": "no transcript entry for request"})
            print("replay: no matching transcript entry", file=sys.stderr)
            return EXIT_PROTOCOL
        sys.stdout.write(recorded[0])
        sys.stdout.flush()
        return recorded[1]

    try:
        response = handler(raw_request["payload"])
        text = write_response(response)
        code = EXIT_OK
    except ImageError as exc:
        text = write_response({"error": str(exc)})
        print(f"image error: {exc}", file=sys.stderr)
        code = EXIT_UNREADABLE_IMAGE
    except BackendUnavailable as exc:
        text = write_response({"error": str(exc)})
        print(f"backend unavailable: {exc}", file=sys.stderr)
        code = EXIT_BACKEND_UNAVAILABLE
    except ProtocolError as exc:
        text = write_response({"error": str(exc)})
        print(f"protocol error: {exc}", file=sys.stderr)
        code = EXIT_PROTOCOL

    if getattr(args, "record", None):
        record_entry(args.record, raw_request, text, code)
    return code
