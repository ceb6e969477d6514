"""Corpus ingestion and query preprocessing.

A corpus is a delimited file of call-centre rows (crop, query, answer).
Ingestion cleans fields, drops unusable rows, and deduplicates exact
triples. Preprocessing turns each record's query into two views:

* ``tokens_lexical``: lowercased, crop-stripped, stopword-free, stemmed
  tokens for set-overlap similarity.
* ``text_contextual``: the cleaned query with crop mentions removed but
  stopwords and casing kept, for embedding similarity.

Query cleaning replaces punctuation with spaces; answers only get their
whitespace collapsed so they can be returned to the user as logged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import ConfigurationError, IngestionError, QueryError, UnsupportedQueryError
from .textproc import (
    clean_answer_text,
    clean_query_text,
    default_realtime_keywords,
    default_stopwords,
    lexical_tokens,
    tokenize,
)

# A single lexicon entry never spans more than this many tokens; scans stop here.
MAX_CROP_NGRAM = 4


@dataclass(frozen=True)
class CorpusConfig:
    """Column names and filter lists used during ingestion/preprocessing."""

    crop_column: str = "crop"
    query_column: str = "query"
    answer_column: str = "answer"
    delimiter: str = ","
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    realtime_keywords: tuple[str, ...] = field(default_factory=default_realtime_keywords)


@dataclass(frozen=True)
class CallRecord:
    """One cleaned corpus row. ``index`` is its position after ingestion."""

    index: int
    crop: str
    query: str
    answer: str


@dataclass(frozen=True)
class PreprocessedQuery:
    """Both similarity views of one record's query."""

    record_index: int
    detected_crop: str | None
    tokens_lexical: tuple[str, ...]
    text_contextual: str


@dataclass
class IngestReport:
    records: list[CallRecord]
    rows_read: int = 0
    dropped_empty: int = 0
    dropped_duplicate: int = 0


@dataclass
class PreprocessReport:
    queries: list[PreprocessedQuery]
    dropped_realtime: list[int] = field(default_factory=list)
    dropped_empty: list[int] = field(default_factory=list)


class CropLexicon:
    """Known crop names, matched case-insensitively on token boundaries.

    Multi-word names are kept as token tuples so 'cotton kapas' matches as
    a bigram and never via the bare token 'cotton' (unless that is also an
    entry).
    """

    def __init__(self, names):
        cleaned = []
        seen = set()
        for name in names:
            toks = tuple(tokenize(name))
            if not toks:
                continue
            if len(toks) > MAX_CROP_NGRAM:
                raise ConfigurationError(
                    f"crop name {' '.join(toks)!r} exceeds {MAX_CROP_NGRAM} tokens"
                )
            if toks not in seen:
                seen.add(toks)
                cleaned.append(toks)
        if not cleaned:
            raise ConfigurationError("crop lexicon is empty")
        self._entries = frozenset(cleaned)
        self._names = tuple(" ".join(t) for t in cleaned)
        self.max_ngram = max(len(t) for t in cleaned)

    @classmethod
    def from_file(cls, path) -> "CropLexicon":
        with open(path, encoding="utf-8") as fh:
            names = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        return cls(names)

    def __contains__(self, name: str) -> bool:
        return tuple(tokenize(name)) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def match_at(self, tokens: list[str], start: int) -> tuple[str, ...] | None:
        """Longest lexicon entry starting at token position ``start``, if any."""
        limit = min(self.max_ngram, len(tokens) - start)
        for n in range(limit, 0, -1):
            gram = tuple(tokens[start : start + n])
            if gram in self._entries:
                return gram
        return None


def ingest(path, config: CorpusConfig | None = None) -> IngestReport:
    """Parse a delimited corpus file into cleaned, deduplicated records."""
    config = config or CorpusConfig()
    report = IngestReport(records=[])
    seen: set[tuple[str, str, str]] = set()
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open corpus file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter=config.delimiter)
        if reader.fieldnames is None:
            raise IngestionError(f"corpus file {path} has no header row")
        header = set(reader.fieldnames)
        for col in (config.crop_column, config.query_column, config.answer_column):
            if col not in header:
                raise ConfigurationError(
                    f"corpus file {path} has no column {col!r}; found {sorted(header)}"
                )
        for row in reader:
            report.rows_read += 1
            if None in row or any(v is None for v in row.values()):
                raise IngestionError(
                    f"malformed row {report.rows_read} in {path}: field count mismatch"
                )
            crop = clean_query_text(row[config.crop_column] or "")
            query = clean_query_text(row[config.query_column] or "")
            answer = clean_answer_text(row[config.answer_column] or "")
            if not query or not answer:
                report.dropped_empty += 1
                continue
            triple = (crop, query, answer)
            if triple in seen:
                report.dropped_duplicate += 1
                continue
            seen.add(triple)
            report.records.append(
                CallRecord(index=len(report.records), crop=crop, query=query, answer=answer)
            )
    return report


def load_corpus(path, config: CorpusConfig | None = None) -> list[CallRecord]:
    return ingest(path, config).records


def detect_and_strip_crop(text: str, lexicon: CropLexicon) -> tuple[str, str | None]:
    """Find the first lexicon mention and remove that crop from the text.

    The scan prefers longer n-grams at each position and proceeds left to
    right; every token belonging to the detected crop is removed wherever
    it occurs. Case of the remaining text is preserved.
    """
    original = text.split()
    lowered = [t.lower() for t in tokenize(text)]
    if len(lowered) != len(original):
        # punctuation inside tokens: fall back to a fully cleaned view
        original = clean_query_text(text).split()
        lowered = [t.lower() for t in original]
    detected: tuple[str, ...] | None = None
    for start in range(len(lowered)):
        gram = lexicon.match_at(lowered, start)
        if gram is not None:
            detected = gram
            break
    if detected is None:
        return text, None
    crop_tokens = set(detected)
    kept = [orig for orig, low in zip(original, lowered) if low not in crop_tokens]
    return " ".join(kept), " ".join(detected)


def is_realtime_query(text: str, keywords: tuple[str, ...]) -> bool:
    """True when any keyword phrase appears on token boundaries."""
    toks = tokenize(text)
    for phrase in keywords:
        ptoks = tuple(tokenize(phrase))
        if not ptoks:
            continue
        n = len(ptoks)
        if any(tuple(toks[i : i + n]) == ptoks for i in range(len(toks) - n + 1)):
            return True
    return False


def preprocess_query(
    record: CallRecord,
    lexicon: CropLexicon,
    config: CorpusConfig | None = None,
) -> PreprocessedQuery | None:
    """Build both query views, or None for realtime/empty queries.

    Crop stripping repeats until no lexicon mention remains, so a query
    naming several crops ends up crop-free in both views; the reported
    crop is the first one found.
    """
    config = config or CorpusConfig()
    text = clean_query_text(record.query)
    if is_realtime_query(text, config.realtime_keywords):
        return None
    first_crop: str | None = None
    while True:
        text, crop = detect_and_strip_crop(text, lexicon)
        if crop is None:
            break
        if first_crop is None:
            first_crop = crop
    tokens = tuple(lexical_tokens(text, config.stopwords))
    if not tokens:
        return None
    return PreprocessedQuery(
        record_index=record.index,
        detected_crop=first_crop,
        tokens_lexical=tokens,
        text_contextual=text,
    )


def preprocess_user_query(
    text: str,
    lexicon: CropLexicon,
    config: CorpusConfig | None = None,
) -> PreprocessedQuery:
    """Preprocess a live query, raising rather than returning None.

    Realtime queries raise UnsupportedQueryError; queries with nothing
    left after cleaning, crop stripping, and stopword removal raise
    QueryError.
    """
    config = config or CorpusConfig()
    cleaned = clean_query_text(text)
    if not cleaned:
        raise QueryError("query is empty after cleaning")
    if is_realtime_query(cleaned, config.realtime_keywords):
        raise UnsupportedQueryError(
            "realtime information (rates, weather) is not served by this engine"
        )
    record = CallRecord(index=-1, crop="", query=cleaned, answer="-")
    out = preprocess_query(record, lexicon, config)
    if out is None:
        raise QueryError("query has no usable tokens after preprocessing")
    return out


def preprocess_corpus(
    records: list[CallRecord],
    lexicon: CropLexicon,
    config: CorpusConfig | None = None,
) -> PreprocessReport:
    """Preprocess every record, attributing each drop to its reason."""
    config = config or CorpusConfig()
    report = PreprocessReport(queries=[])
    for rec in records:
        text = clean_query_text(rec.query)
        if is_realtime_query(text, config.realtime_keywords):
            report.dropped_realtime.append(rec.index)
            continue
        out = preprocess_query(rec, lexicon, config)
        if out is None:
            report.dropped_empty.append(rec.index)
        else:
            report.queries.append(out)
    return report
