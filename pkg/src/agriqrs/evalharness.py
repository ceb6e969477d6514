"""Evaluation metrics for the mapper and the retrieval stage.

Classification metrics use exact rational arithmetic internally: all the
inputs are integer counts, and identities like weighted recall equaling
accuracy then hold exactly in the reported floats instead of drifting by
an ulp whenever a ratio is not representable.

Ranking metrics follow the graded-gain convention (2^rel - 1) with a
log2 position discount, 1-based positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataError, IngestionError, QueryError


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    per_class: list[ClassMetrics]
    confusion: np.ndarray
    n_examples: int


def classification_report(y_true, y_pred, labels=None) -> EvalReport:
    """Per-class precision/recall/F1 plus support-weighted averages.

    A class never predicted gets precision 0; a class absent from the
    truth gets recall 0 and weight 0 in the averages.
    """
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise DataError(f"shape mismatch: {yt.shape} vs {yp.shape}")
    if yt.shape[0] == 0:
        raise DataError("empty prediction set")
    if labels is None:
        labels = np.union1d(np.unique(yt), np.unique(yp))
    labels = np.asarray(labels, dtype=np.int64)
    index = {int(label): i for i, label in enumerate(labels)}
    k = len(labels)
    confusion = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(yt, yp):
        confusion[index[int(t)], index[int(p)]] += 1

    n = int(yt.shape[0])
    correct = int(np.trace(confusion))
    accuracy = Fraction(correct, n)

    per_class = []
    w_precision = Fraction(0)
    w_recall = Fraction(0)
    w_f1 = Fraction(0)
    for i, label in enumerate(labels):
        tp = int(confusion[i, i])
        support = int(confusion[i].sum())
        predicted = int(confusion[:, i].sum())
        precision = Fraction(tp, predicted) if predicted else Fraction(0)
        recall = Fraction(tp, support) if support else Fraction(0)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else Fraction(0)
        )
        per_class.append(
            ClassMetrics(
                label=int(label),
                precision=float(precision),
                recall=float(recall),
                f1=float(f1),
                support=support,
            )
        )
        w_precision += support * precision
        w_recall += support * recall
        w_f1 += support * f1

    return EvalReport(
        accuracy=float(accuracy),
        weighted_precision=float(w_precision / n),
        weighted_recall=float(w_recall / n),
        weighted_f1=float(w_f1 / n),
        per_class=per_class,
        confusion=confusion,
        n_examples=n,
    )


def average_precision(relevances) -> float:
    """Mean of precision@k over the relevant positions of one ranking.

    Binary relevance; a ranking with no relevant item scores 0.
    """
    rels = [int(bool(r)) for r in relevances]
    hits = 0
    acc = Fraction(0)
    for pos, rel in enumerate(rels, start=1):
        if rel:
            hits += 1
            acc += Fraction(hits, pos)
    if hits == 0:
        return 0.0
    return float(acc / hits)


def mean_average_precision(rankings) -> float:
    """Mean AP over queries; each ranking is a binary relevance sequence."""
    rankings = list(rankings)
    if not rankings:
        raise DataError("no rankings to average")
    total = Fraction(0)
    for rels in rankings:
        rels = [int(bool(r)) for r in rels]
        hits = 0
        acc = Fraction(0)
        for pos, rel in enumerate(rels, start=1):
            if rel:
                hits += 1
                acc += Fraction(hits, pos)
        total += acc / hits if hits else Fraction(0)
    return float(total / len(rankings))


def dcg(relevances) -> float:
    """Sum of (2^rel - 1) / log2(position + 1), positions starting at 1."""
    return float(
        sum((2.0 ** float(r) - 1.0) / math.log2(pos + 1) for pos, r in enumerate(relevances, 1))
    )


def ndcg(predicted_rels, ideal_rels) -> float:
    """DCG of the system order over DCG of the ideal order, clipped to
    [0, 1]. All-zero gains on both sides count as a perfect 1.0."""
    num = dcg(predicted_rels)
    den = dcg(ideal_rels)
    if den == 0.0:
        return 1.0
    return min(1.0, max(0.0, num / den))


# ---------------------------------------------------------------------------
# Scored-query evaluation of the full retrieval path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoredQuery:
    query: str
    scored_answers: tuple[tuple[str, float], ...]


@dataclass
class RetrievalEvalRow:
    k: int
    mean_ndcg: float
    queries_evaluated: int
    queries_skipped: int


def load_scored_queries(path) -> list[ScoredQuery]:
    """JSONL rows: {"query": ..., "scored_answers": [{"answer", "score"}]}.

    Scores are graded relevance on a 0..10 scale.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                query = row["query"]
                scored = tuple(
                    (str(sa["answer"]), float(sa["score"])) for sa in row["scored_answers"]
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IngestionError(f"bad scored query at {path}:{lineno}: {exc}") from exc
            for _, score in scored:
                if not 0.0 <= score <= 10.0:
                    raise IngestionError(
                        f"score out of [0, 10] at {path}:{lineno}: {score}"
                    )
            out.append(ScoredQuery(query=query, scored_answers=scored))
    if not out:
        raise IngestionError(f"no scored queries in {path}")
    return out


def evaluate_retrieval(answer_fn, scored_queries, ks) -> list[RetrievalEvalRow]:
    """NDCG@k of a retrieval callable against human-scored answers.

    ``answer_fn(text, k)`` returns the system's answer texts in rank
    order. Unknown answers score 0; the ideal ranking is the top-k of
    the human scores. Queries the engine refuses (realtime or empty)
    are skipped and counted.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise DataError(f"ks must be positive integers, got {ks}")
    rows = []
    for k in ks:
        scores = []
        skipped = 0
        for sq in scored_queries:
            try:
                answers = answer_fn(sq.query, k)
            except QueryError:
                skipped += 1
                continue
            table = {ans: score for ans, score in sq.scored_answers}
            predicted = [table.get(a, 0.0) for a in answers]
            ideal = sorted((s for _, s in sq.scored_answers), reverse=True)[:k]
            scores.append(ndcg(predicted, ideal))
        if not scores:
            raise DataError(f"no scored query survived evaluation at k={k}")
        rows.append(
            RetrievalEvalRow(
                k=k,
                mean_ndcg=float(np.mean(scores)),
                queries_evaluated=len(scores),
                queries_skipped=skipped,
            )
        )
    return rows
