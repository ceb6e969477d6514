"""Top-K answer retrieval inside one query cluster.

Given the records of the cluster a user query mapped to, retrieval
filters candidates by the query's crop, groups near-duplicate answers
with the same threshold clustering used for queries, ranks the groups by
size, and elects one representative answer per group.

Answer similarity averages two Jaccard overlaps: character sets (the
literal set of characters of each text, or bigrams when configured) and
token sets. This is cheap and catches both misspelling-level and
word-level duplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CallRecord
from .errors import ConfigurationError, DataError
from .simcluster import ClusterParams, jaccard_similarity, threshold_cluster
from .textproc import default_stopwords, tokenize


@dataclass(frozen=True)
class AnswerParams:
    thresh: float = 0.6
    min_size: int = 1
    char_unit: str = "unigram"

    def __post_init__(self):
        if not 0.0 < self.thresh <= 1.0:
            raise ConfigurationError(f"thresh must be in (0, 1], got {self.thresh}")
        if self.min_size < 1:
            raise ConfigurationError(f"min_size must be >= 1, got {self.min_size}")
        if self.char_unit not in ("unigram", "bigram"):
            raise ConfigurationError(
                f"char_unit must be 'unigram' or 'bigram', got {self.char_unit!r}"
            )

    def to_dict(self) -> dict:
        return {"thresh": self.thresh, "min_size": self.min_size, "char_unit": self.char_unit}

    @classmethod
    def from_dict(cls, data: dict) -> "AnswerParams":
        return cls(**{k: data[k] for k in ("thresh", "min_size", "char_unit") if k in data})


@dataclass(frozen=True)
class RankedAnswer:
    rank: int
    crop: str
    source_query: str
    answer: str
    cluster_size: int


@dataclass(frozen=True)
class RankedAnswers:
    query: str
    crop: str | None
    cluster_id: int
    fallback_unfiltered: bool
    answers: tuple[RankedAnswer, ...]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "crop": self.crop,
            "cluster_id": self.cluster_id,
            "fallback_unfiltered": self.fallback_unfiltered,
            "answers": [
                {
                    "rank": a.rank,
                    "crop": a.crop,
                    "source_query": a.source_query,
                    "answer": a.answer,
                    "cluster_size": a.cluster_size,
                }
                for a in self.answers
            ],
        }


def _contains_phrase(tokens: list[str], phrase: tuple[str, ...]) -> bool:
    n = len(phrase)
    return any(tuple(tokens[i : i + n]) == phrase for i in range(len(tokens) - n + 1))


def select_candidates(
    records: list[CallRecord],
    member_indices: list[int],
    crop: str | None,
) -> tuple[list[int], bool]:
    """Record indices whose answer text or crop field mentions the crop.

    With no crop there is nothing to filter on. When filtering leaves
    nothing, all members are returned and the fallback flag is set so
    callers can surface the degradation.
    """
    if not member_indices:
        raise DataError("query cluster has no members")
    if crop is None:
        return list(member_indices), False
    phrase = tuple(tokenize(crop))
    kept = []
    for idx in member_indices:
        rec = records[idx]
        if _contains_phrase(tokenize(rec.answer), phrase) or _contains_phrase(
            tokenize(rec.crop), phrase
        ):
            kept.append(idx)
    if kept:
        return kept, False
    return list(member_indices), True


def _char_set(text: str, unit: str) -> set[str]:
    if unit == "unigram":
        return set(text)
    return {text[i : i + 2] for i in range(len(text) - 1)} if len(text) > 1 else set(text)


def answer_similarity(a: str, b: str, char_unit: str = "unigram") -> float:
    """Mean of character-set and token-set Jaccard similarities."""
    char = jaccard_similarity(_char_set(a, char_unit), _char_set(b, char_unit))
    tok = jaccard_similarity(set(tokenize(a)), set(tokenize(b)))
    return (char + tok) / 2.0


def answer_similarity_matrix(answers: list[str], char_unit: str = "unigram") -> np.ndarray:
    n = len(answers)
    char_sets = [_char_set(a, char_unit) for a in answers]
    tok_sets = [set(tokenize(a)) for a in answers]
    out = np.ones((n, n), dtype=np.float32)
    for i in range(n):
        for j in range(i + 1, n):
            sim = (
                jaccard_similarity(char_sets[i], char_sets[j])
                + jaccard_similarity(tok_sets[i], tok_sets[j])
            ) / 2.0
            out[i, j] = out[j, i] = np.float32(sim)
    return out


def cluster_answers(answers: list[str], params: AnswerParams | None = None):
    """Group near-duplicate answers with the shared threshold algorithm."""
    params = params or AnswerParams()
    sim = answer_similarity_matrix(answers, params.char_unit)
    return threshold_cluster(
        sim, ClusterParams(lam=0.0, thresh=params.thresh, min_size=params.min_size)
    )


def elect_leader(answers: list[str], member_positions: list[int]) -> int:
    """Representative answer: most distinct non-stopword tokens, then
    longest text, then lowest position."""
    stop = default_stopwords()

    def key(pos: int):
        toks = {t for t in tokenize(answers[pos]) if t not in stop}
        return (-len(toks), -len(answers[pos]), pos)

    return min(member_positions, key=key)


def top_k_answers(
    records: list[CallRecord],
    member_indices: list[int],
    query_text: str,
    crop: str | None,
    cluster_id: int,
    k: int,
    params: AnswerParams | None = None,
) -> RankedAnswers:
    """Rank answer groups by size and return one leader per group.

    Fewer than k groups yields fewer than k answers. Group ties break
    toward the group containing the smallest candidate position, which
    is also its seed under the shared clustering pass.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    params = params or AnswerParams()
    candidates, fallback = select_candidates(records, member_indices, crop)
    answers = [records[idx].answer for idx in candidates]
    groups = cluster_answers(answers, params)
    order = sorted(
        range(len(groups.clusters)),
        key=lambda g: (-len(groups.clusters[g]), min(groups.clusters[g]), g),
    )
    ranked = []
    for rank, g in enumerate(order[:k], start=1):
        members = groups.clusters[g]
        leader_pos = elect_leader(answers, members)
        rec = records[candidates[leader_pos]]
        ranked.append(
            RankedAnswer(
                rank=rank,
                crop=rec.crop,
                source_query=rec.query,
                answer=rec.answer,
                cluster_size=len(members),
            )
        )
    return RankedAnswers(
        query=query_text,
        crop=crop,
        cluster_id=cluster_id,
        fallback_unfiltered=fallback,
        answers=tuple(ranked),
    )
