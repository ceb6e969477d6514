"""Text normalization primitives: field cleaning, tokenization, stemming.

Queries get aggressive cleaning (punctuation to spaces) because they feed
token-level matching; answers keep their punctuation because they are
returned to the user verbatim. Both get whitespace collapsed.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_SPECIALS = re.compile(r"[^0-9A-Za-z ]+")
_WS = re.compile(r"\s+")
_TOKEN_BREAK = re.compile(r"[^0-9a-z]+")


def clean_query_text(text: str) -> str:
    """Replace special characters with spaces and collapse whitespace runs."""
    return _WS.sub(" ", _SPECIALS.sub(" ", text)).strip()


def clean_answer_text(text: str) -> str:
    """Collapse whitespace runs only; answers keep their punctuation."""
    return _WS.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any run of non-alphanumeric characters."""
    return _TOKEN_BREAK.sub(" ", text.lower()).split()


def load_wordlist(path) -> list[str]:
    """Read one lowercased entry per line; blank lines and # comments skipped."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip().lower()
            if line and not line.startswith("#"):
                entries.append(line)
    return entries


def _packaged_wordlist(name: str) -> list[str]:
    text = resources.files("agriqrs.data").joinpath(name).read_text("utf-8")
    return [ln.strip().lower() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return frozenset(_packaged_wordlist("stopwords.txt"))


@lru_cache(maxsize=None)
def default_realtime_keywords() -> tuple[str, ...]:
    return tuple(_packaged_wordlist("realtime_keywords.txt"))


@lru_cache(maxsize=None)
def default_crop_names() -> tuple[str, ...]:
    return tuple(_packaged_wordlist("crops_default.txt"))


# ---------------------------------------------------------------------------
# Porter stemmer
# ---------------------------------------------------------------------------

_VOWELS = frozenset("aeiou")


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a consonant at the start or after a vowel, a vowel otherwise
        return True if i == 0 else not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count VC sequences in the [C](VC)^m[V] decomposition of the stem."""
    n = len(stem)
    i = 0
    m = 0
    while i < n and _is_cons(stem, i):
        i += 1
    while True:
        while i < n and not _is_cons(stem, i):
            i += 1
        if i == n:
            return m
        m += 1
        while i < n and _is_cons(stem, i):
            i += 1


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    n = len(word)
    return (
        _is_cons(word, n - 3)
        and not _is_cons(word, n - 2)
        and _is_cons(word, n - 1)
        and word[-1] not in "wxy"
    )


# Suffix rules are tried longest-first within a step; once the longest
# matching suffix is found, no shorter one is considered even if the
# measure condition fails. That is the original algorithm's semantics.
_STEP2 = [
    ("ization", "ize"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("ational", "ate"),
    ("tional", "tion"),
    ("biliti", "ble"),
    ("ation", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("ousli", "ous"),
    ("entli", "ent"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("ator", "ate"),
    ("eli", "e"),
]

_STEP3 = [
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ness", ""),
    ("ful", ""),
]

_STEP4 = [
    "ement",
    "ance",
    "ence",
    "able",
    "ible",
    "ment",
    "ion",
    "ant",
    "ent",
    "ism",
    "ate",
    "iti",
    "ous",
    "ive",
    "ize",
    "al",
    "er",
    "ic",
    "ou",
]


def porter_stem(word: str) -> str:
    """Stem one lowercase token with the classic Porter algorithm."""
    if len(word) <= 2:
        return word
    w = word

    # step 1a: plurals
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b: -eed / -ed / -ing
    rewrote = False
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    elif w.endswith("ed") and _has_vowel(w[:-2]):
        w = w[:-2]
        rewrote = True
    elif w.endswith("ing") and _has_vowel(w[:-3]):
        w = w[:-3]
        rewrote = True
    if rewrote:
        if w.endswith(("at", "bl", "iz")):
            w += "e"
        elif _ends_double_cons(w) and w[-1] not in "lsz":
            w = w[:-1]
        elif _measure(w) == 1 and _ends_cvc(w):
            w += "e"

    # step 1c: terminal y
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 3
    for suffix, repl in _STEP3:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 4
    for suffix in _STEP4:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 1 and (suffix != "ion" or stem.endswith(("s", "t"))):
                w = stem
            break

    # step 5a: terminal e
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # step 5b: terminal double l
    if _measure(w) > 1 and _ends_double_cons(w) and w.endswith("l"):
        w = w[:-1]

    return w


def lexical_tokens(text: str, stopwords: frozenset[str]) -> list[str]:
    """Tokenize, drop stopwords, then stem. Order of survivors preserved."""
    return [porter_stem(tok) for tok in tokenize(text) if tok not in stopwords]
