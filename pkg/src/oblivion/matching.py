"""Deterministic personal-information matching.

Finds spans of an article that correspond to a user's attributes: exact
value matches, synonym-table matches, an age heuristic for date-of-birth
attributes (compare "N years old" against the difference between birth date
and publication date), and byte-digest equality for pictures.

The candidate extractor is rule-based (capitalized-token runs, date and age
patterns, numeric tokens) rather than a statistical NER model, and the
affectedness decision is a transparent ratio score rather than a learned
entity disambiguator; both are deliberately deterministic and can be swapped
out via the keyword arguments of :func:`tag_article`.

Spans are byte offsets into the UTF-8 encoding of the article body, so
re-extracting ``body.encode()[start:end]`` reproduces the matched text.
"""

from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .credentials import (
    Attribute,
    AttributeKind,
    IDENTIFYING_ATTRIBUTES,
    format_dotted_date,
    parse_dotted_date,
)
from .encoding import pack_bytes, pack_int, pack_str


def normalize(text: str) -> str:
    """Unicode NFC, case folding, and whitespace collapsing; applied before
    every comparison (spans keep the original surface text)."""
    return " ".join(unicodedata.normalize("NFC", text).casefold().split())


def floor_age(born: date, on: date) -> int:
    """Whole years elapsed between two calendar dates."""
    return on.year - born.year - ((on.month, on.day) < (born.month, born.day))


# ---------------------------------------------------------------------------
# Articles
# ---------------------------------------------------------------------------

def compute_article_digest(body: str, images: Iterable[tuple[str, bytes]]) -> bytes:
    """Digest of body plus images; recomputable by any party holding them."""
    images = tuple(images)
    payload = pack_str(body) + pack_int(len(images))
    for image_id, data in images:
        payload += pack_str(image_id) + pack_bytes(data)
    return hashlib.sha256(payload).digest()


@dataclass(frozen=True)
class Article:
    """The data under claim: a URL, text body, optional date, and images."""

    url: str
    body: str
    publication_date: date | None = None
    images: tuple[tuple[str, bytes], ...] = ()
    content_digest: bytes = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "content_digest", compute_article_digest(self.body, self.images)
        )


def parse_article(text: str, images: Iterable[tuple[str, bytes]] = ()) -> Article:
    """Parse the article fixture format: ``url:`` / ``date:`` header lines,
    a blank line, then the body."""
    url = ""
    publication_date = None
    lines = text.splitlines()
    i = 0
    for i, line in enumerate(lines):
        if not line.strip():
            i += 1
            break
        key, _, value = line.partition(":")
        key = key.strip().lower()
        if key == "url":
            url = value.strip()
        elif key == "date":
            publication_date = parse_dotted_date(value.strip())
        else:
            raise ValueError(f"unknown article header line: {line!r}")
    body = "\n".join(lines[i:])
    return Article(url=url, body=body, publication_date=publication_date,
                   images=tuple(images))


def format_article(article: Article) -> str:
    header = [f"url: {article.url}"]
    if article.publication_date is not None:
        header.append(f"date: {format_dotted_date(article.publication_date)}")
    return "\n".join(header) + "\n\n" + article.body


def load_article(path: Path | str, images: Iterable[tuple[str, bytes]] = ()) -> Article:
    return parse_article(Path(path).read_text(encoding="utf-8"), images)


# ---------------------------------------------------------------------------
# Synonym table
# ---------------------------------------------------------------------------

class SynonymTable:
    """Groups of mutually equivalent surface phrases, keyed case-insensitively.

    Each entry relates a canonical attribute value to the phrases an article
    might use instead; every phrase in an entry is equivalent to every other,
    so lookups succeed from any member.
    """

    def __init__(self, entries: Mapping[str, Iterable[str]] | None = None):
        self._entries: dict[str, tuple[str, frozenset[str]]] = {}
        self._index: dict[str, frozenset[str]] = {}
        for canonical, phrases in (entries or {}).items():
            self.add(canonical, phrases)

    def add(self, canonical: str, phrases: Iterable[str]) -> None:
        group = frozenset({normalize(canonical), *(normalize(p) for p in phrases)})
        self._entries[normalize(canonical)] = (canonical, group)
        for member in group:
            self._index[member] = group

    def phrases_for(self, value: str) -> frozenset[str]:
        """All normalized phrases equivalent to ``value`` (empty if unknown)."""
        return self._index.get(normalize(value), frozenset())

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def parse(cls, text: str) -> "SynonymTable":
        """One entry per line: ``canonical<TAB>phrase1|phrase2|...``."""
        table = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            canonical, sep, rest = line.partition("\t")
            if not sep:
                raise ValueError(f"synonym line {lineno} has no tab separator")
            table.add(canonical.strip(), [p for p in rest.strip().split("|") if p])
        return table

    @classmethod
    def load(cls, path: Path | str) -> "SynonymTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Candidate extraction
# ---------------------------------------------------------------------------

class Category(str, Enum):
    PERSON = "person"
    LOCATION = "location"
    ORGANIZATION = "organization"
    DATE = "date"
    NUMBER = "number"
    OTHER = "other"


@dataclass(frozen=True)
class Candidate:
    """A surface span worth comparing against attributes; byte offsets."""

    start: int
    end: int
    text: str
    category: Category


_LOCATION_GAZETTEER = {normalize(n) for n in (
    "Germany", "France", "Italy", "Spain", "Austria", "Switzerland", "Poland",
    "Netherlands", "Belgium", "Luxembourg", "Denmark", "Sweden", "Norway",
    "Finland", "Ireland", "Portugal", "Greece", "Hungary", "Romania",
    "Bulgaria", "Croatia", "Slovakia", "Slovenia", "Estonia", "Latvia",
    "Lithuania", "Malta", "Cyprus", "Czechia", "England", "Scotland", "Wales",
    "United Kingdom", "United States", "Canada", "Mexico", "Brazil",
    "Argentina", "Japan", "China", "India", "Australia", "New Zealand",
    "Turkey", "Egypt", "Kenya", "Nigeria", "South Africa", "Russia",
    "Ukraine", "Berlin", "Hamburg", "Munich", "Cologne", "Frankfurt",
    "Stuttgart", "Leipzig", "Dresden", "Bremen", "Hanover", "Saarbruecken",
    "Paris", "London", "Madrid", "Rome", "Vienna", "Zurich", "Geneva",
    "Brussels", "Amsterdam", "Copenhagen", "Stockholm", "Oslo", "Helsinki",
    "Dublin", "Lisbon", "Athens", "Warsaw", "Prague", "Budapest", "Auckland",
)}

_ORG_KEYWORDS = {
    "inc", "ltd", "gmbh", "ag", "corp", "corporation", "company", "bank",
    "university", "institute", "agency", "ministry", "council", "committee",
    "association", "federation", "press", "times", "journal", "group",
}

# Common sentence openers never treated as single-token name candidates.
_SENTENCE_STOPWORDS = {
    "a", "an", "the", "this", "that", "these", "those", "he", "she", "it",
    "they", "we", "i", "you", "his", "her", "its", "their", "our", "in",
    "on", "at", "by", "for", "of", "to", "with", "from", "after", "before",
    "but", "and", "or", "as", "if", "when", "while", "however", "although",
    "meanwhile", "yesterday", "today", "tomorrow", "according", "officials",
    "police", "friends", "neighbours", "neighbors", "local", "there", "not",
    "no", "yes", "one", "two", "many", "some", "several", "last", "first",
    "new", "now", "then", "since", "during", "earlier", "later", "both",
}

_TOKEN_RE = re.compile(r"\S+")
_STRIP_CHARS = ".,;:!?()[]{}\"'“”‘’«»"
_DOTTED_DATE_RE = re.compile(r"(?<!\d)(\d{2}\.\d{2}\.\d{4})(?!\d)")
_AGE_RE = re.compile(r"(?<!\d)(\d{1,3})[ \t]+years?[ \t]+old\b", re.IGNORECASE)
_AFFILIATION_RE = re.compile(
    r"\b(?:citizen|national|native|resident)s?\s+of\s+"
    r"(?:[A-ZÀ-Þ][\w'-]*)(?:\s+[A-ZÀ-Þ][\w'-]*)*"
)
_NATIONALITY_RE = re.compile(
    r"\b[A-ZÀ-Þ][\w'-]*\s+(?:nationality|citizenship)\b"
)
_NUMBER_RE = re.compile(r"(?<![\w.])\d+(?:[.,]\d+)*(?![\w.])")


@dataclass(frozen=True)
class _Token:
    start: int  # char offsets into the body string
    end: int
    core: str
    sentence_initial: bool


def _tokenize(body: str) -> list[_Token]:
    tokens: list[_Token] = []
    sentence_initial = True
    last_end = 0
    for m in _TOKEN_RE.finditer(body):
        raw = m.group()
        core = raw.strip(_STRIP_CHARS)
        if "\n\n" in body[last_end:m.start()]:
            sentence_initial = True
        start = m.start() + raw.index(core) if core else m.start()
        tokens.append(_Token(start, start + len(core), core, sentence_initial))
        sentence_initial = raw.rstrip(_STRIP_CHARS) != raw and raw.rstrip()[-1:] in ".!?"
        last_end = m.end()
    return tokens


def _byte_offset_table(body: str) -> list[int]:
    table = [0]
    total = 0
    for ch in body:
        total += len(ch.encode("utf-8"))
        table.append(total)
    return table


def _drop_overlaps(candidates: list[Candidate]) -> list[Candidate]:
    """Within each category keep a non-overlapping set, longest span first."""
    kept: list[Candidate] = []
    by_category: dict[Category, list[tuple[int, int]]] = {}
    ordered = sorted(candidates, key=lambda c: (c.start, c.start - c.end, c.text))
    for cand in ordered:
        spans = by_category.setdefault(cand.category, [])
        if any(cand.start < e and s < cand.end for s, e in spans):
            continue
        spans.append((cand.start, cand.end))
        kept.append(cand)
    return sorted(kept, key=lambda c: (c.start, c.end, c.category.value))


def extract_candidates(article: Article) -> list[Candidate]:
    """Rule-based candidate spans: name-like capitalized runs, affiliation
    phrases, dotted dates, age phrases, and plain numbers.  Deterministic;
    spans within one category never overlap."""
    body = article.body
    if not body.strip():
        return []
    offsets = _byte_offset_table(body)
    tokens = _tokenize(body)
    lowercase_tokens = {t.core for t in tokens if t.core and t.core[0].islower()}

    raw: list[Candidate] = []

    # Capitalized-token runs -> person / location / organization candidates.
    runs: list[list[_Token]] = []
    current: list[_Token] = []
    for tok in tokens:
        capitalized = bool(tok.core) and tok.core[0].isalpha() and tok.core[0].isupper()
        if capitalized and (not current or not tok.sentence_initial):
            current.append(tok)
        else:
            if current:
                runs.append(current)
            current = [tok] if capitalized else []
    if current:
        runs.append(current)

    for run in runs:
        words = [t.core for t in run]
        if len(run) == 1 and run[0].sentence_initial:
            low = normalize(words[0])
            if low in _SENTENCE_STOPWORDS or words[0].lower() in lowercase_tokens:
                continue
        phrase = body[run[0].start:run[-1].end]
        keyword_hits = {normalize(w.rstrip(".")) for w in words}
        norm_phrase = normalize(phrase)
        if keyword_hits & _ORG_KEYWORDS:
            category = Category.ORGANIZATION
        elif norm_phrase in _LOCATION_GAZETTEER or normalize(words[-1]) in _LOCATION_GAZETTEER:
            category = Category.LOCATION
        elif len(run) >= 2:
            category = Category.PERSON
        else:
            category = Category.OTHER
        raw.append(Candidate(offsets[run[0].start], offsets[run[-1].end], phrase, category))

    for regex in (_AFFILIATION_RE, _NATIONALITY_RE):
        for m in regex.finditer(body):
            raw.append(Candidate(offsets[m.start()], offsets[m.end()], m.group(),
                                 Category.OTHER))

    for m in _DOTTED_DATE_RE.finditer(body):
        try:
            parse_dotted_date(m.group(1))
        except ValueError:
            continue
        raw.append(Candidate(offsets[m.start()], offsets[m.end()], m.group(),
                             Category.DATE))

    for m in _AGE_RE.finditer(body):
        raw.append(Candidate(offsets[m.start()], offsets[m.end()], m.group(),
                             Category.DATE))

    for m in _NUMBER_RE.finditer(body):
        raw.append(Candidate(offsets[m.start()], offsets[m.end()], m.group(),
                             Category.NUMBER))

    return _drop_overlaps(raw)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

class MatchKind(str, Enum):
    EXACT = "exact"
    SYNONYM = "synonym"
    AGE_DERIVED = "age-derived"
    IMAGE_DIGEST = "image-digest"


@dataclass(frozen=True)
class Match:
    """One attribute located in the article: a body span or an image id."""

    attribute_name: str
    kind: MatchKind
    start: int | None
    end: int | None
    image_id: str | None
    matched_text: str

    @classmethod
    def from_candidate(cls, name: str, kind: MatchKind, cand: Candidate) -> "Match":
        return cls(name, kind, cand.start, cand.end, None, cand.text)

    @classmethod
    def from_image(cls, name: str, image_id: str) -> "Match":
        return cls(name, MatchKind.IMAGE_DIGEST, None, None, image_id, image_id)


@dataclass(frozen=True)
class MatchReport:
    """Attributes located in an article, with provenance for each match."""

    article_digest: bytes
    claimed_attributes: tuple[str, ...]
    matches: tuple[Match, ...]
    warnings: tuple[str, ...] = ()

    def matched_names(self) -> frozenset[str]:
        return frozenset(m.attribute_name for m in self.matches)


@dataclass(frozen=True)
class PictureMatch:
    image_id: str
    confidence: float = 1.0


def match_picture(
    article_images: Iterable[tuple[str, bytes]],
    picture_attribute: Attribute,
) -> PictureMatch | None:
    """Byte-digest equality between the certified picture and article images.

    A re-encoded copy of the same photograph has different bytes and will not
    match; this stand-in trades recall for determinism.
    """
    if picture_attribute.kind is not AttributeKind.PICTURE:
        raise ValueError(f"{picture_attribute.name} is not a picture attribute")
    wanted = hashlib.sha256(picture_attribute.value).digest()
    for image_id, data in article_images:
        if hashlib.sha256(data).digest() == wanted:
            return PictureMatch(image_id=image_id, confidence=1.0)
    return None


def match_attributes(
    candidates: Iterable[Candidate],
    attributes: Iterable[Attribute],
    synonyms: SynonymTable | None = None,
    publication_date: date | None = None,
    *,
    article_digest: bytes = b"",
    age_tolerance: int = 0,
) -> MatchReport:
    """Match text and date attributes against extracted candidates.

    Per attribute, the first hit in the chain exact -> synonym -> age-derived
    is reported.  The age heuristic compares "N years old" candidates against
    the whole years between a date attribute and the publication date; with no
    publication date it is skipped and a warning is recorded.
    """
    synonyms = synonyms or SynonymTable()
    cands = list(candidates)
    attrs = list(attributes)
    if not attrs:
        raise ValueError("attribute set must be non-empty")
    matches: list[Match] = []
    warnings: list[str] = []

    for attr in attrs:
        if attr.kind is AttributeKind.PICTURE:
            continue
        value_text = attr.text()
        target = normalize(value_text)
        found = None
        for cand in cands:
            if normalize(cand.text) == target:
                found = Match.from_candidate(attr.name, MatchKind.EXACT, cand)
                break
        if found is None:
            equivalents = synonyms.phrases_for(value_text)
            if equivalents:
                for cand in cands:
                    if normalize(cand.text) in equivalents:
                        found = Match.from_candidate(attr.name, MatchKind.SYNONYM, cand)
                        break
        if found is None and attr.kind is AttributeKind.DATE:
            if publication_date is None:
                warnings.append(
                    f"age heuristic skipped for {attr.name!r}: "
                    "article has no publication date"
                )
            else:
                expected = floor_age(attr.date_value(), publication_date)
                for cand in cands:
                    age_match = _AGE_RE.match(cand.text)
                    if age_match is None:
                        continue
                    stated = int(age_match.group(1))
                    if abs(stated - expected) <= age_tolerance:
                        found = Match.from_candidate(
                            attr.name, MatchKind.AGE_DERIVED, cand
                        )
                        break
        if found is not None:
            matches.append(found)

    return MatchReport(
        article_digest=article_digest,
        claimed_attributes=tuple(a.name for a in attrs),
        matches=tuple(matches),
        warnings=tuple(warnings),
    )


def tag_article(
    article: Article,
    attributes: Iterable[Attribute],
    synonyms: SynonymTable | None = None,
    *,
    age_tolerance: int = 0,
    extractor: Callable[[Article], list[Candidate]] = extract_candidates,
    picture_matcher: Callable[
        [Iterable[tuple[str, bytes]], Attribute], PictureMatch | None
    ] = match_picture,
) -> MatchReport:
    """Full tagging pipeline: extract candidates, match text and date
    attributes, then match picture attributes by digest."""
    attrs = list(attributes)
    report = match_attributes(
        extractor(article),
        attrs,
        synonyms,
        article.publication_date,
        article_digest=article.content_digest,
        age_tolerance=age_tolerance,
    )
    picture_matches = []
    for attr in attrs:
        if attr.kind is AttributeKind.PICTURE:
            hit = picture_matcher(article.images, attr)
            if hit is not None:
                picture_matches.append(Match.from_image(attr.name, hit.image_id))
    if picture_matches:
        report = MatchReport(
            article_digest=report.article_digest,
            claimed_attributes=report.claimed_attributes,
            matches=report.matches + tuple(picture_matches),
            warnings=report.warnings,
        )
    return report


# ---------------------------------------------------------------------------
# Affectedness decision
# ---------------------------------------------------------------------------

DEFAULT_THRESHOLD = 0.5


def disambiguation_score(report: MatchReport) -> float:
    """Distinct matched attributes over attributes claimed."""
    claimed = set(report.claimed_attributes)
    if not claimed:
        return 0.0
    return len(report.matched_names() & claimed) / len(claimed)


def disambiguate(
    report: MatchReport,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    identifying: frozenset[str] = IDENTIFYING_ATTRIBUTES,
) -> bool:
    """Affected iff the match ratio meets the threshold and at least one
    identifying attribute (by default Full Name or ID Picture) matched."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if not report.matched_names() & identifying:
        return False
    return disambiguation_score(report) >= threshold


def span_text(article: Article, match: Match) -> str:
    """Re-extract the matched bytes from the article body."""
    if match.start is None or match.end is None:
        raise ValueError("match has no body span")
    return article.body.encode("utf-8")[match.start:match.end].decode("utf-8")
