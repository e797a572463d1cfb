"""Privacy-policy acquisition and document structure parsing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Optional, Sequence
from urllib.parse import urlparse

import requests

from .model import DataType, KeywordResource

logger = logging.getLogger(__name__)


class FetchError(Exception):
    """Policy fetch failure; `reason` is one of file/network/status/timeout."""

    def __init__(self, message: str, reason: str, status: Optional[int] = None):
        super().__init__(message)
        self.reason = reason
        self.status = status


@dataclass(frozen=True)
class FetchResult:
    content: bytes
    final_url: str


def fetch_policy(source: str | Path, timeout: float = 30.0) -> FetchResult:
    """Fetch policy bytes from a local path or an http(s) URL.

    Follows up to 5 redirects and records the final URL. Network errors,
    non-2xx statuses, and timeouts raise FetchError with distinct reasons.
    """
    text = str(source)
    scheme = urlparse(text).scheme
    if scheme in ("http", "https"):
        session = requests.Session()
        session.max_redirects = 5
        try:
            resp = session.get(text, timeout=timeout, allow_redirects=True)
        except requests.Timeout as exc:
            raise FetchError(f"timeout fetching {text}", reason="timeout") from exc
        except requests.RequestException as exc:
            raise FetchError(f"network error fetching {text}: {exc}", reason="network") from exc
        if not 200 <= resp.status_code < 300:
            raise FetchError(
                f"HTTP {resp.status_code} fetching {text}", reason="status", status=resp.status_code
            )
        return FetchResult(content=resp.content, final_url=resp.url)
    path = Path(text)
    try:
        return FetchResult(content=path.read_bytes(), final_url=str(path))
    except OSError as exc:
        raise FetchError(f"cannot read policy file {path}: {exc}", reason="file") from exc


# Fixed 50-word English stopword list used by the language heuristic.
STOPWORDS = frozenset(
    """a about all an and are as at be but by can do for from has have he her
    his i if in is it its may my not of on or our she so that the their them
    they this to us we what which will with you your""".split()
)


_EDGE_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~“”‘’«»…–—"


def _english_score(block: str) -> Optional[float]:
    """Score in [0,1]; None for blocks under 3 tokens (kept unconditionally)."""
    tokens = block.split()
    if len(tokens) < 3:
        return None
    cleaned = [t.strip(_EDGE_PUNCT).lower() for t in tokens]
    ascii_alpha = sum(1 for t in cleaned if t and t.isascii() and t.isalpha())
    stop_hits = sum(1 for t in cleaned if t in STOPWORDS)
    n = len(tokens)
    return 0.5 * (ascii_alpha / n) + 0.5 * (stop_hits / n)


def is_english_block(block: str) -> bool:
    score = _english_score(block)
    return score is None or score >= 0.5


def filter_language(blocks: Sequence[str]) -> list[str]:
    """Keep blocks scoring >= 0.5 on the ASCII-fraction + stopword heuristic;
    blocks shorter than 3 tokens are kept unconditionally."""
    return [b for b in blocks if is_english_block(b)]


@dataclass(frozen=True)
class Section:
    heading: str
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class PolicyDocument:
    """Structured policy text: sections of whitespace-normalized paragraphs.

    `structured` is True when the HTML followed a heading/paragraph layout
    (at least two headings, at least 80% of paragraph candidates after the
    first heading); otherwise a single synthetic section with an empty
    heading holds every paragraph.
    """

    source: str
    raw_html: bytes
    sections: tuple[Section, ...]
    structured: bool

    def __post_init__(self):
        if self.structured:
            for sec in self.sections:
                if not sec.paragraphs:
                    raise ValueError("structured document must not contain empty sections")

    def paragraph(self, section_idx: int, paragraph_idx: int) -> str:
        return self.sections[section_idx].paragraphs[paragraph_idx]


class PolicyParseError(ValueError):
    pass


_VOID_TAGS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)
_HEADINGS = frozenset({"h1", "h2", "h3", "h4", "h5", "h6"})
_PRUNE_TAGS = frozenset({"script", "style", "nav"})
_BLOCKISH = frozenset({"div", "p", "li"}) | _HEADINGS


class _Node:
    __slots__ = ("tag", "children")

    def __init__(self, tag: str):
        self.tag = tag
        self.children: list = []


class _TreeBuilder(HTMLParser):
    """Minimal DOM builder tolerant of unclosed p/li tags."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("[root]")
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        if tag in _VOID_TAGS:
            self.stack[-1].children.append(_Node(tag))
            return
        # common implicit closes: p cannot nest or contain other blocks,
        # li cannot nest directly
        if tag in _BLOCKISH and self.stack[-1].tag == "p":
            self.stack.pop()
        if tag == "li" and self.stack[-1].tag == "li":
            self.stack.pop()
        node = _Node(tag)
        self.stack[-1].children.append(node)
        self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Node(tag.lower()))

    def handle_endtag(self, tag):
        tag = tag.lower()
        if tag in _VOID_TAGS:
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


def _visible_text(node: _Node) -> str:
    parts: list[str] = []

    def walk(n: _Node):
        for child in n.children:
            if isinstance(child, str):
                parts.append(child)
            else:
                walk(child)

    walk(node)
    return " ".join("".join(parts).split())


def _prune(node: _Node):
    node.children = [
        c for c in node.children if isinstance(c, str) or c.tag not in _PRUNE_TAGS
    ]
    for child in node.children:
        if isinstance(child, _Node):
            _prune(child)


def _has_block_descendant(node: _Node) -> bool:
    for child in node.children:
        if isinstance(child, _Node):
            if child.tag in _BLOCKISH or _has_block_descendant(child):
                return True
    return False


def parse_structure(raw_html: bytes, source: str = "") -> PolicyDocument:
    """Parse policy HTML into sections of visible-text paragraphs.

    Headings are h1..h6; paragraph candidates are p, li, and text-bearing
    leaf divs (outermost candidate wins when nested). Script, style, and
    nav content is removed.
    """
    builder = _TreeBuilder()
    builder.feed(raw_html.decode("utf-8", errors="replace"))
    builder.close()
    root = builder.root
    _prune(root)

    items: list[tuple[str, str]] = []  # ("heading" | "paragraph", text)

    def walk(node: _Node):
        for child in node.children:
            if isinstance(child, str):
                continue
            if child.tag in _HEADINGS:
                text = _visible_text(child)
                if text:
                    items.append(("heading", text))
                continue
            if child.tag in ("p", "li") or (
                child.tag == "div" and not _has_block_descendant(child)
            ):
                text = _visible_text(child)
                if text:
                    items.append(("paragraph", text))
                    continue
                if child.tag == "div":
                    continue
            walk(child)

    walk(root)

    headings = [i for i, (kind, _) in enumerate(items) if kind == "heading"]
    paragraphs = [i for i, (kind, _) in enumerate(items) if kind == "paragraph"]
    if not paragraphs:
        whole = _visible_text(root)
        if not whole:
            raise PolicyParseError("policy document has no visible text")
        return PolicyDocument(
            source=source,
            raw_html=raw_html,
            sections=(Section(heading="", paragraphs=(whole,)),),
            structured=False,
        )

    structured = False
    if len(headings) >= 2:
        first = headings[0]
        after = sum(1 for i in paragraphs if i > first)
        structured = after >= 0.8 * len(paragraphs)

    if not structured:
        paras = tuple(text for kind, text in items if kind == "paragraph")
        return PolicyDocument(
            source=source,
            raw_html=raw_html,
            sections=(Section(heading="", paragraphs=paras),),
            structured=False,
        )

    sections: list[Section] = []
    current_heading: Optional[str] = None
    current_paras: list[str] = []
    for kind, text in items:
        if kind == "heading":
            if current_heading is not None and current_paras:
                sections.append(Section(current_heading, tuple(current_paras)))
            current_heading = text
            current_paras = []
        elif current_heading is not None:
            current_paras.append(text)
    if current_heading is not None and current_paras:
        sections.append(Section(current_heading, tuple(current_paras)))
    return PolicyDocument(
        source=source, raw_html=raw_html, sections=tuple(sections), structured=True
    )


def parse_text_policy(raw: bytes, source: str = "") -> PolicyDocument:
    """Plain-text policies: blank-line-separated blocks, unstructured."""
    text = raw.decode("utf-8", errors="replace")
    paras = tuple(" ".join(block.split()) for block in text.split("\n\n") if block.strip())
    if not paras:
        raise PolicyParseError("policy document has no visible text")
    return PolicyDocument(
        source=source,
        raw_html=raw,
        sections=(Section(heading="", paragraphs=paras),),
        structured=False,
    )


DEFAULT_HEADING_RULES: dict[str, bool] = {
    "information we collect": True,
    "data we collect": True,
    "personal information": True,
    "personal data": True,
    "information you provide": True,
    "types of data": True,
    "what we collect": True,
}


def load_heading_rules(path: str | Path) -> dict[str, bool]:
    """One lowercase phrase per line; `#` comments and blanks ignored."""
    rules: dict[str, bool] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            rules[line.lower()] = True
    return rules


def classify_headings(
    doc: PolicyDocument,
    heading_rules: Optional[dict[str, bool]] = None,
    classifier: Optional[Callable[[str], bool]] = None,
) -> list[int]:
    """Indices of sections whose heading identifies collected-data content.

    A section is relevant when its lowercase heading contains a rule
    phrase whose flag is True (longest matching phrase decides). The
    optional `classifier` callable overrides the rule list per heading.
    """
    if not doc.structured:
        raise ValueError("classify_headings requires a structured document")
    rules = DEFAULT_HEADING_RULES if heading_rules is None else heading_rules
    relevant = []
    for idx, section in enumerate(doc.sections):
        if classifier is not None:
            if classifier(section.heading):
                relevant.append(idx)
            continue
        heading = section.heading.lower()
        matches = [p for p in rules if p in heading]
        if matches and rules[max(matches, key=len)]:
            relevant.append(idx)
    return relevant


def classify_paragraphs(
    paragraphs: Sequence[str],
    keywords: KeywordResource = KeywordResource.default(),
    classifier: Optional[Callable[[str], bool]] = None,
) -> list[int]:
    """Indices of paragraphs mentioning any data-type keyword (token-boundary
    match); the optional `classifier` callable overrides per paragraph."""
    from .segments import find_keyword_occurrences

    relevant = []
    for idx, para in enumerate(paragraphs):
        if classifier is not None:
            if classifier(para):
                relevant.append(idx)
            continue
        hit = False
        for dt in DataType:
            if find_keyword_occurrences(para, keywords[dt]):
                hit = True
                break
        if hit:
            relevant.append(idx)
    return relevant
