"""Sentence-level policy segment extraction per data type."""

from __future__ import annotations

import enum
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .model import DataType, KeywordResource
from .policy import (
    PolicyDocument,
    classify_headings,
    classify_paragraphs,
    is_english_block,
)
from .taxonomy import Taxonomy, path_similarity

logger = logging.getLogger(__name__)

FALLBACK_MESSAGE = "No relative information is found in the privacy policy."


@dataclass(frozen=True, order=True)
class SentenceSpan:
    """A sentence located by section/paragraph indices and character offsets."""

    section_idx: int
    paragraph_idx: int
    char_start: int
    char_end: int
    text: str

    def __post_init__(self):
        if not 0 <= self.char_start < self.char_end:
            raise ValueError(f"invalid sentence span [{self.char_start}, {self.char_end})")


class HighlightKind(enum.Enum):
    KEYWORD = "Keyword"
    NOUN_CHUNK = "NounChunk"


@dataclass(frozen=True)
class HighlightSpan:
    """A highlighted character range within a sentence."""

    char_start: int
    char_end: int
    kind: HighlightKind

    def __post_init__(self):
        if not 0 <= self.char_start < self.char_end:
            raise ValueError(f"invalid highlight span [{self.char_start}, {self.char_end})")


@dataclass(frozen=True)
class SegmentGroup:
    """Per-data-type retrieved sentences with highlight spans.

    A fallback group has no sentences and renders as the fixed
    no-information message.
    """

    data_type: DataType
    sentences: tuple[SentenceSpan, ...] = ()
    highlights: tuple[tuple[int, HighlightSpan], ...] = ()
    fallback: bool = True

    def __post_init__(self):
        if self.fallback and self.sentences:
            raise ValueError("fallback group must have no sentences")
        if not self.fallback and not self.sentences:
            raise ValueError("non-fallback group must have at least one sentence")
        for idx, span in self.highlights:
            if not 0 <= idx < len(self.sentences):
                raise ValueError(f"highlight references missing sentence {idx}")
            if span.char_end > len(self.sentences[idx].text):
                raise ValueError("highlight extends past its sentence")

    def rendered_text(self) -> str:
        if self.fallback:
            return FALLBACK_MESSAGE
        return " ".join(s.text for s in self.sentences)

    def sentence_texts(self) -> list[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class MatchConfig:
    phrase_sim_threshold: float = 0.8
    heading_rules: Optional[Mapping[str, bool]] = None
    use_relevance_stage: bool = True

    def __post_init__(self):
        if not 0.0 < self.phrase_sim_threshold <= 1.0:
            raise ValueError(
                f"phrase_sim_threshold must be in (0,1], got {self.phrase_sim_threshold}"
            )


# ---------------------------------------------------------------------------
# Sentence tokenization

# Abbreviations that never terminate a sentence (compared lowercase against
# the maximal non-space run ending at the period).
PROTECTED_ABBREVIATIONS = frozenset(
    ["e.g.", "i.e.", "etc.", "vs.", "mr.", "ms.", "dr.", "no.", "u.s.", "inc.", "ltd.", "co."]
)

_TERMINATORS = ".!?"


def split_sentences(
    paragraph: str, section_idx: int = 0, paragraph_idx: int = 0
) -> list[SentenceSpan]:
    """Split at ./!/? followed by whitespace + capital/digit (or end of
    text), never inside protected abbreviations. Spans exclude leading and
    trailing whitespace and index into the paragraph."""
    spans: list[SentenceSpan] = []
    n = len(paragraph)
    start = 0
    i = 0
    while i < n:
        ch = paragraph[i]
        if ch in _TERMINATORS and _is_sentence_break(paragraph, i):
            _append_span(spans, paragraph, start, i + 1, section_idx, paragraph_idx)
            start = i + 1
        i += 1
    _append_span(spans, paragraph, start, n, section_idx, paragraph_idx)
    return spans


def _is_sentence_break(text: str, i: int) -> bool:
    if text[i] == ".":
        j = i
        while j > 0 and not text[j - 1].isspace():
            j -= 1
        if text[j : i + 1].lower() in PROTECTED_ABBREVIATIONS:
            return False
    k = i + 1
    if k == len(text):
        return True
    if not text[k].isspace():
        return False
    while k < len(text) and text[k].isspace():
        k += 1
    if k == len(text):
        return True
    return text[k].isupper() or text[k].isdigit()


def _append_span(spans, paragraph, start, end, section_idx, paragraph_idx):
    while start < end and paragraph[start].isspace():
        start += 1
    while end > start and paragraph[end - 1].isspace():
        end -= 1
    if end > start:
        spans.append(
            SentenceSpan(
                section_idx=section_idx,
                paragraph_idx=paragraph_idx,
                char_start=start,
                char_end=end,
                text=paragraph[start:end],
            )
        )


# ---------------------------------------------------------------------------
# Keyword stage


def find_keyword_occurrences(text: str, phrases: Sequence[str]) -> list[tuple[int, int, str]]:
    """Token-boundary occurrences of any phrase, longest-match filtered.

    Matching is a case-insensitive literal search whose boundaries must not
    be alphanumeric, so the matched slice always lowercases to the phrase.
    Occurrences strictly contained in a longer occurrence are dropped.
    """
    lower = text.lower()
    occurrences: list[tuple[int, int, str]] = []
    for phrase in phrases:
        pos = lower.find(phrase)
        while pos != -1:
            end = pos + len(phrase)
            before_ok = pos == 0 or not lower[pos - 1].isalnum()
            after_ok = end == len(lower) or not lower[end].isalnum()
            if before_ok and after_ok:
                occurrences.append((pos, end, phrase))
            pos = lower.find(phrase, pos + 1)
    kept = []
    for s, e, p in occurrences:
        contained = any(
            (s2 <= s and e <= e2 and (e2 - s2) > (e - s)) for s2, e2, _ in occurrences
        )
        if not contained:
            kept.append((s, e, p))
    kept.sort()
    return kept


def keyword_stage(
    sentences: Sequence[SentenceSpan], keywords: KeywordResource
) -> dict[DataType, list[tuple[SentenceSpan, HighlightSpan]]]:
    """First extraction stage: keyword search with one highlight per
    occurrence; a sentence joins a data type at most once."""
    hits: dict[DataType, list[tuple[SentenceSpan, HighlightSpan]]] = {dt: [] for dt in DataType}
    for sentence in sentences:
        for dt in DataType:
            for s, e, _ in find_keyword_occurrences(sentence.text, keywords[dt]):
                hits[dt].append(
                    (sentence, HighlightSpan(char_start=s, char_end=e, kind=HighlightKind.KEYWORD))
                )
    return hits


# ---------------------------------------------------------------------------
# Bayesian relevance stage

_WORD_RE = re.compile(r"[a-z0-9']+")


def _nb_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


RELEVANT = "relevant"
IRRELEVANT = "irrelevant"


@dataclass(frozen=True)
class NbModel:
    """Multinomial naive Bayes over lowercase word tokens, Laplace smoothed.

    Tokens unseen in training enter the posterior with zero counts, so both
    classes pay the smoothing penalty symmetrically.
    """

    alpha: float
    vocabulary: frozenset[str]
    token_counts: Mapping[str, Mapping[str, int]]
    total_tokens: Mapping[str, int]
    doc_counts: Mapping[str, int]

    @classmethod
    def train(cls, samples: Sequence[tuple[str, str]], alpha: float = 1.0) -> "NbModel":
        """Train from (label, sentence) pairs; both classes must appear."""
        token_counts = {RELEVANT: {}, IRRELEVANT: {}}
        total_tokens = {RELEVANT: 0, IRRELEVANT: 0}
        doc_counts = {RELEVANT: 0, IRRELEVANT: 0}
        vocab = set()
        for label, sentence in samples:
            if label not in (RELEVANT, IRRELEVANT):
                raise ValueError(f"label must be relevant/irrelevant, got {label!r}")
            doc_counts[label] += 1
            for tok in _nb_tokens(sentence):
                token_counts[label][tok] = token_counts[label].get(tok, 0) + 1
                total_tokens[label] += 1
                vocab.add(tok)
        if doc_counts[RELEVANT] == 0 or doc_counts[IRRELEVANT] == 0:
            raise ValueError("training data must contain both relevant and irrelevant samples")
        return cls(
            alpha=alpha,
            vocabulary=frozenset(vocab),
            token_counts=token_counts,
            total_tokens=total_tokens,
            doc_counts=doc_counts,
        )

    @classmethod
    def from_training_file(cls, path: str | Path, alpha: float = 1.0) -> "NbModel":
        """Parse `relevant<TAB>sentence` / `irrelevant<TAB>sentence` lines."""
        samples = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                if "\t" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'label<TAB>sentence'")
                label, sentence = line.split("\t", 1)
                samples.append((label.strip(), sentence))
        return cls.train(samples, alpha=alpha)

    def _log_posterior(self, label: str, tokens: Sequence[str]) -> float:
        total_docs = self.doc_counts[RELEVANT] + self.doc_counts[IRRELEVANT]
        logp = math.log(self.doc_counts[label] / total_docs)
        denom = self.total_tokens[label] + self.alpha * len(self.vocabulary)
        counts = self.token_counts[label]
        for tok in tokens:
            logp += math.log((counts.get(tok, 0) + self.alpha) / denom)
        return logp

    def predict_relevant(self, sentence: str) -> bool:
        tokens = _nb_tokens(sentence)
        if not tokens:
            return False
        return self._log_posterior(RELEVANT, tokens) >= self._log_posterior(IRRELEVANT, tokens)


def relevance_stage(sentence: str, model: Optional[NbModel] = None) -> bool:
    """Whether a keywordless sentence proceeds to noun-chunk matching.

    With no model every non-empty sentence proceeds; empty sentences never
    do."""
    if not _nb_tokens(sentence):
        return False
    if model is None:
        return True
    return model.predict_relevant(sentence)


# ---------------------------------------------------------------------------
# Noun chunking

# Closed-class tokens that split noun chunks: articles, pronouns and
# possessives, prepositions, conjunctions, auxiliaries/modals, and the
# common verbs of collection policies.
CHUNK_SPLIT_TOKENS = frozenset(
    """
    a an the
    i you he she it we they me him her us them
    my your his its our their mine yours ours theirs
    this that these those who whom whose which what
    of in on at by for with from to about as into through during
    before after above below between under over without within upon
    and or but nor so yet because while when where than if
    is are was were be been being am
    do does did done have has had
    can could shall should will would may might must not no
    collect use share store process provide
    """.split()
)

_MAX_CHUNK_TOKENS = 4


def _chunk_spans(sentence: str) -> list[tuple[str, int, int]]:
    """Noun chunks as (lowercase text, char_start, char_end) triples.

    Tokens are lowercased with edge punctuation stripped; maximal runs
    between closed-class tokens become chunks, trimmed to their last four
    tokens (noun phrases are head-final)."""
    tokens: list[tuple[str, int, int]] = []
    for m in re.finditer(r"\S+", sentence):
        raw = m.group(0)
        start, end = m.start(), m.end()
        while start < end and not sentence[start].isalnum():
            start += 1
        while end > start and not sentence[end - 1].isalnum():
            end -= 1
        if end <= start:
            continue
        tokens.append((sentence[start:end].lower(), start, end))
    chunks: list[tuple[str, int, int]] = []
    run: list[tuple[str, int, int]] = []
    for tok in tokens + [("", -1, -1)]:
        if tok[0] and tok[0] not in CHUNK_SPLIT_TOKENS:
            run.append(tok)
            continue
        if run:
            run = run[-_MAX_CHUNK_TOKENS:]
            text = " ".join(t[0] for t in run)
            chunks.append((text, run[0][1], run[-1][2]))
            run = []
    return chunks


def chunk_nouns(
    sentence: str, chunker: Optional[Callable[[str], list[str]]] = None
) -> list[str]:
    """Noun-chunk phrases of a sentence; `chunker` overrides the built-in
    closed-class splitter when provided."""
    if chunker is not None:
        return list(chunker(sentence))
    return [text for text, _, _ in _chunk_spans(sentence)]


# ---------------------------------------------------------------------------
# Phrase similarity


def phrase_sim(p1: str, p2: str, tax: Taxonomy) -> float:
    """2 * path_similarity(head(p1), head(p2)) / (wc(p1) + wc(p2)).

    The head of a phrase is its last word."""
    w1 = p1.split()
    w2 = p2.split()
    if not w1 or not w2:
        raise ValueError("phrase_sim requires non-empty phrases")
    sim = path_similarity(w1[-1], w2[-1], tax)
    return 2.0 * sim / (len(w1) + len(w2))


# ---------------------------------------------------------------------------
# End-to-end extraction


def extract_segments(
    doc: PolicyDocument,
    keywords: KeywordResource = KeywordResource.default(),
    tax: Optional[Taxonomy] = None,
    nb: Optional[NbModel] = None,
    cfg: MatchConfig = MatchConfig(),
    *,
    heading_classifier: Optional[Callable[[str], bool]] = None,
    paragraph_classifier: Optional[Callable[[str], bool]] = None,
    chunker: Optional[Callable[[str], list[str]]] = None,
) -> dict[DataType, SegmentGroup]:
    """Produce exactly one SegmentGroup per data type.

    Pipeline: relevant sections (structured) or relevant paragraphs
    (unstructured) -> drop non-English paragraphs -> sentence split ->
    keyword stage; keywordless sentences passing the relevance stage attach
    to a data type when some noun chunk reaches the phrase-similarity
    threshold against one of its keywords. Data types with no sentences get
    the fallback group.
    """
    if tax is None:
        from .taxonomy import load_default_taxonomy

        tax = load_default_taxonomy()

    candidate_paragraphs: list[tuple[int, int, str]] = []
    if doc.structured:
        for si in classify_headings(doc, cfg.heading_rules, heading_classifier):
            for pi, para in enumerate(doc.sections[si].paragraphs):
                candidate_paragraphs.append((si, pi, para))
    elif doc.sections:
        paragraphs = doc.sections[0].paragraphs
        for pi in classify_paragraphs(paragraphs, keywords, paragraph_classifier):
            candidate_paragraphs.append((0, pi, paragraphs[pi]))

    sentences: list[SentenceSpan] = []
    for si, pi, para in candidate_paragraphs:
        if not is_english_block(para):
            continue
        sentences.extend(split_sentences(para, si, pi))

    hits = keyword_stage(sentences, keywords)
    keyworded = {
        (s.section_idx, s.paragraph_idx, s.char_start, s.char_end)
        for pairs in hits.values()
        for s, _ in pairs
    }

    if cfg.use_relevance_stage:
        for sentence in sentences:
            key = (
                sentence.section_idx,
                sentence.paragraph_idx,
                sentence.char_start,
                sentence.char_end,
            )
            if key in keyworded:
                continue
            if not relevance_stage(sentence.text, nb):
                continue
            if chunker is not None:
                chunks = [(c, None, None) for c in chunker(sentence.text)]
            else:
                chunks = _chunk_spans(sentence.text)
            if not chunks:
                continue
            for dt in DataType:
                best_score = 0.0
                best_chunk: Optional[tuple[str, Optional[int], Optional[int]]] = None
                for chunk in chunks:
                    for kw in keywords[dt]:
                        score = phrase_sim(chunk[0], kw, tax)
                        if score > best_score:
                            best_score = score
                            best_chunk = chunk
                if best_score >= cfg.phrase_sim_threshold and best_chunk is not None:
                    text, cs, ce = best_chunk
                    if cs is None:
                        located = _locate_phrase(sentence.text, text)
                        if located is None:
                            logger.warning(
                                "cannot locate chunk %r in sentence; skipping highlight", text
                            )
                            continue
                        cs, ce = located
                    hits[dt].append(
                        (
                            sentence,
                            HighlightSpan(
                                char_start=cs, char_end=ce, kind=HighlightKind.NOUN_CHUNK
                            ),
                        )
                    )

    groups: dict[DataType, SegmentGroup] = {}
    for dt in DataType:
        pairs = hits[dt]
        # collapse duplicate sentence spans, keep all highlights
        ordered: list[SentenceSpan] = []
        index: dict[tuple, int] = {}
        highlight_list: list[tuple[int, HighlightSpan]] = []
        for sentence, _ in sorted(
            pairs, key=lambda p: (p[0].section_idx, p[0].paragraph_idx, p[0].char_start)
        ):
            key = (
                sentence.section_idx,
                sentence.paragraph_idx,
                sentence.char_start,
                sentence.char_end,
            )
            if key not in index:
                index[key] = len(ordered)
                ordered.append(sentence)
        for sentence, span in pairs:
            key = (
                sentence.section_idx,
                sentence.paragraph_idx,
                sentence.char_start,
                sentence.char_end,
            )
            highlight_list.append((index[key], span))
        highlight_list = sorted(
            set(highlight_list),
            key=lambda h: (h[0], h[1].char_start, h[1].char_end, h[1].kind.value),
        )
        if ordered:
            groups[dt] = SegmentGroup(
                data_type=dt,
                sentences=tuple(ordered),
                highlights=tuple(highlight_list),
                fallback=False,
            )
        else:
            groups[dt] = SegmentGroup(data_type=dt, fallback=True)
    return groups


def _locate_phrase(sentence: str, phrase: str) -> Optional[tuple[int, int]]:
    """Best-effort case-insensitive location of an adapter-produced chunk."""
    pos = sentence.lower().find(phrase.lower())
    if pos == -1:
        return None
    return pos, pos + len(phrase)
