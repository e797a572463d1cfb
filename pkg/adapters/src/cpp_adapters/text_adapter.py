"""Text classifier adapter: role "text_classifier".

Backends: `llm` asks an OpenAI-compatible chat endpoint to name the data
type (requires OPENAI_API_KEY; endpoint/model via OPENAI_BASE_URL and
CPP_TEXT_MODEL); `keywords` is the offline fallback; `auto` uses the LLM
when a key is configured, keywords otherwise.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import protocol
from .protocol import DATA_TYPES, BackendUnavailable

# Keyword phrases per data type for GUI texts, lowercase; matched on token
# boundaries after punctuation-to-space normalization, longest phrase first.
KEYWORDS: dict[str, tuple[str, ...]] = {
    "Name": (
        "name", "first name", "last name", "full name", "real name",
        "surname", "family name", "given name",
    ),
    "Birthday": ("birthday", "date of birth", "birth date", "dob", "birth year"),
    "Address": (
        "mailing address", "physical address", "postal address", "billing address",
        "shipping address", "residential address", "residence", "personal address",
    ),
    "Phone": (
        "phone", "phone number", "mobile phone", "mobile number", "telephone",
        "call", "telephone number",
    ),
    "Email": ("email", "e-mail", "email address", "e-mail address"),
    "Profile": ("profile", "account"),
    "Contacts": ("contacts", "phone-book", "phone book", "device's address book"),
    "Location": ("location", "locate", "geography", "geo", "geo-location", "precision location"),
    "Photos": (
        "camera", "photo", "scan", "album", "picture", "gallery", "photo library",
        "storage", "image", "video", "scanner", "photograph", "wallpaper",
    ),
    "Voices": ("microphone", "voice", "mic", "speech", "talk", "audio"),
    "FinancialInfo": (
        "credit card", "company", "companies", "organization", "commercial",
        "organizations", "pay", "payment", "financial", "bill", "wallet", "purchase",
    ),
    "SocialMedia": ("social media", "facebook", "twitter", "socialmedia", "share"),
}


def _tokens(text: str) -> list[str]:
    return "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()


def classify_keywords(text: str, allowed: list[str]) -> str | None:
    tokens = _tokens(text)
    best = None
    for row, data_type in enumerate(DATA_TYPES):
        if data_type not in allowed:
            continue
        for phrase in KEYWORDS[data_type]:
            ptoks = _tokens(phrase)
            n = len(ptoks)
            if n == 0 or not any(
                tokens[i : i + n] == ptoks for i in range(len(tokens) - n + 1)
            ):
                continue
            key = (-n, row)
            if best is None or key < best[0]:
                best = (key, data_type)
    return best[1] if best else None


_LLM_PROMPT = (
    "You label short mobile-app GUI texts with the personal data type they "
    "refer to. Answer with exactly one of: {types}. Answer 'None' when no "
    "data type applies.\nText: {text}"
)


def classify_llm(text: str, allowed: list[str]) -> str | None:
    api_key = os.environ.get("OPENAI_API_KEY")
    if not api_key:
        raise BackendUnavailable("OPENAI_API_KEY is not set")
    import requests

    base = os.environ.get("OPENAI_BASE_URL", "https://api.openai.com/v1")
    model = os.environ.get("CPP_TEXT_MODEL", "gpt-3.5-turbo")
    try:
        resp = requests.post(
            f"{base}/chat/completions",
            headers={"Authorization": f"Bearer {api_key}"},
            json={
                "model": model,
                "messages": [
                    {
                        "role": "user",
                        "content": _LLM_PROMPT.format(types=", ".join(allowed), text=text),
                    }
                ],
                "temperature": 0,
            },
            timeout=60,
        )
        resp.raise_for_status()
        answer = resp.json()["choices"][0]["message"]["content"]
    except Exception as exc:
        raise BackendUnavailable(f"LLM request failed: {exc}") from exc
    for data_type in allowed:
        if data_type.lower() in answer.lower():
            return data_type
    return None


def handle(payload: dict, backend: str) -> dict:
    text = payload.get("text")
    if not isinstance(text, str) or not text.strip():
        raise protocol.ProtocolError("text_classifier payload requires non-empty 'text'")
    allowed = payload.get("data_types") or DATA_TYPES
    allowed = [t for t in allowed if t in DATA_TYPES]
    if backend == "llm":
        result = classify_llm(text, allowed)
    elif backend == "keywords":
        result = classify_keywords(text, allowed)
    else:  # auto
        if os.environ.get("OPENAI_API_KEY"):
            try:
                result = classify_llm(text, allowed)
            except BackendUnavailable:
                result = classify_keywords(text, allowed)
        else:
            result = classify_keywords(text, allowed)
    return {"data_type": result}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpp-text-adapter", description=__doc__)
    parser.add_argument("--backend", choices=("auto", "llm", "keywords"), default="auto")
    parser.add_argument("--record", default=None, help="append request/response to a transcript")
    parser.add_argument("--replay", default=None, help="answer from a recorded transcript")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return protocol.serve("text_classifier", lambda payload: handle(payload, args.backend), args)


if __name__ == "__main__":
    sys.exit(main())
