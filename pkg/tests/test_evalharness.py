"""Classification and ranking metrics, plus the scored-query evaluator."""

import json
import math

import numpy as np
import pytest

from agriqrs.errors import DataError, IngestionError, QueryError
from agriqrs.evalharness import (
    average_precision,
    classification_report,
    dcg,
    evaluate_retrieval,
    load_scored_queries,
    mean_average_precision,
    ndcg,
)


class TestClassificationReport:
    def test_hand_case(self):
        rep = classification_report([0, 0, 1], [0, 1, 1])
        assert rep.accuracy == pytest.approx(2 / 3)
        assert rep.n_examples == 3
        np.testing.assert_array_equal(rep.confusion, [[1, 1], [0, 1]])
        c0, c1 = rep.per_class
        assert (c0.precision, c0.recall, c0.support) == (1.0, 0.5, 2)
        assert (c1.precision, c1.recall, c1.support) == (0.5, 1.0, 1)
        assert c0.f1 == pytest.approx(2 / 3)
        assert rep.weighted_precision == pytest.approx(5 / 6)
        assert rep.weighted_f1 == pytest.approx(2 / 3)

    def test_perfect_predictions(self):
        rep = classification_report([0, 1, 2], [0, 1, 2])
        assert rep.accuracy == 1.0
        assert rep.weighted_precision == 1.0
        assert rep.weighted_recall == 1.0
        assert rep.weighted_f1 == 1.0

    def test_weighted_recall_equals_accuracy_exactly(self):
        """The support-weighted mean of per-class recalls telescopes to
        accuracy; exact arithmetic keeps the float results identical."""
        rng = np.random.default_rng(42)
        for _ in range(300):
            n = int(rng.integers(1, 200))
            m = int(rng.integers(1, 8))
            y_true = rng.integers(0, m, n)
            y_pred = rng.integers(0, m, n)
            rep = classification_report(y_true, y_pred)
            assert rep.weighted_recall == rep.accuracy  # exact, not approx

    def test_awkward_supports_stay_exact(self):
        # 48/49 and 1/49 are not exactly representable; the identity must
        # survive anyway
        y_true = [0] * 49 + [1]
        y_pred = [0] * 48 + [1] + [1]
        rep = classification_report(y_true, y_pred)
        assert rep.weighted_recall == rep.accuracy == 49 / 50

    def test_unseen_label_conventions(self):
        """Never-predicted classes get precision 0; truth-absent classes
        get recall 0 and no weight."""
        rep = classification_report([0, 0], [0, 1], labels=[0, 1, 2])
        by_label = {c.label: c for c in rep.per_class}
        assert by_label[1].precision == 0.0  # predicted once, never right
        assert by_label[2].precision == 0.0
        assert by_label[2].recall == 0.0
        assert by_label[2].support == 0

    def test_rejects_bad_inputs(self):
        with pytest.raises(DataError):
            classification_report([0, 1], [0])
        with pytest.raises(DataError):
            classification_report([], [])


class TestAveragePrecision:
    def test_hand_cases(self):
        assert average_precision([1, 0, 1]) == pytest.approx(5 / 6)
        assert average_precision([0, 1]) == 0.5
        assert average_precision([1, 1, 1]) == 1.0
        assert average_precision([0, 0, 0]) == 0.0
        assert average_precision([]) == 0.0

    def test_graded_input_binarized(self):
        assert average_precision([2, 0, 3]) == average_precision([1, 0, 1])

    def test_map_is_mean_of_aps(self):
        rankings = [[1, 0], [0, 1], [1, 1]]
        expected = np.mean([average_precision(r) for r in rankings])
        assert mean_average_precision(rankings) == pytest.approx(expected)

    def test_map_rejects_empty(self):
        with pytest.raises(DataError):
            mean_average_precision([])

    def test_map_equals_weighted_precision_under_all_or_nothing(self):
        """When every query's ranking is uniformly right or wrong and the
        predicted counts match the supports, MAP, weighted precision,
        weighted recall, and accuracy all coincide exactly."""
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(10, 120))
            m = int(rng.integers(2, 6))
            y_true = rng.integers(0, m, n)
            y_pred = y_true.copy()
            # swap predictions between pairs of differing-class examples:
            # per-class predicted counts stay equal to the supports
            candidates = rng.permutation(n)
            for a, b in zip(candidates[::2], candidates[1::2]):
                if y_true[a] != y_true[b] and rng.random() < 0.5:
                    y_pred[a], y_pred[b] = y_pred[b], y_pred[a]
            rep = classification_report(y_true, y_pred)
            supports = np.bincount(y_true, minlength=m)
            predicted = np.bincount(y_pred, minlength=m)
            np.testing.assert_array_equal(supports, predicted)
            rankings = [[1 if p == t else 0] for p, t in zip(y_pred, y_true)]
            map_score = mean_average_precision(rankings)
            assert map_score == rep.accuracy == rep.weighted_precision == rep.weighted_recall


class TestNDCG:
    def test_dcg_hand_values(self):
        assert dcg([3, 2]) == pytest.approx(7.0 + 3.0 / math.log2(3), abs=1e-12)
        assert dcg([0]) == 0.0
        assert dcg([]) == 0.0

    def test_positions_discount(self):
        assert dcg([3, 0]) > dcg([0, 3])

    def test_swapped_pair_hand_case(self):
        """Ideal gains [3, 2] served as [2, 3]. The exact ratio is
        (3 + 7/log2 3) / (7 + 3/log2 3) = 0.83399123...; the rounded
        0.83383 sometimes quoted for this case mis-evaluates
        7/log2(3) and is outside 1e-4 of the true value."""
        oracle = (3.0 + 7.0 / math.log2(3)) / (7.0 + 3.0 / math.log2(3))
        value = ndcg([2, 3], [3, 2])
        assert value == pytest.approx(oracle, abs=1e-12)
        assert value == pytest.approx(0.8339912, abs=1e-6)

    def test_ideal_order_scores_one(self):
        assert ndcg([3, 2, 1], [3, 2, 1]) == 1.0

    def test_all_zero_gains_score_one(self):
        assert ndcg([0, 0], [0, 0]) == 1.0
        assert ndcg([], []) == 1.0

    def test_clipped_to_unit_interval(self):
        assert ndcg([3], [2]) == 1.0  # better than "ideal" clips down
        assert 0.0 <= ndcg([0, 1], [3, 2]) <= 1.0


class TestScoredQueries:
    def _write(self, path, rows):
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        return path

    def test_roundtrip(self, tmp_path):
        rows = [
            {
                "query": "fungal attack in wheat",
                "scored_answers": [
                    {"answer": "spray hexaconazole", "score": 9},
                    {"answer": "use urea", "score": 2.5},
                ],
            }
        ]
        out = load_scored_queries(self._write(tmp_path / "s.jsonl", rows))
        assert len(out) == 1
        assert out[0].query == "fungal attack in wheat"
        assert out[0].scored_answers == (("spray hexaconazole", 9.0), ("use urea", 2.5))

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "s.jsonl"
        row = json.dumps({"query": "q", "scored_answers": [{"answer": "a", "score": 1}]})
        path.write_text(f"\n{row}\n\n", encoding="utf-8")
        assert len(load_scored_queries(path)) == 1

    def test_score_range_enforced(self, tmp_path):
        rows = [{"query": "q", "scored_answers": [{"answer": "a", "score": 11}]}]
        with pytest.raises(IngestionError, match="0, 10"):
            load_scored_queries(self._write(tmp_path / "s.jsonl", rows))

    def test_missing_key(self, tmp_path):
        rows = [{"query": "q", "scored_answers": [{"answer": "a"}]}]
        with pytest.raises(IngestionError, match=":1"):
            load_scored_queries(self._write(tmp_path / "s.jsonl", rows))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(IngestionError, match="no scored queries"):
            load_scored_queries(path)


class TestEvaluateRetrieval:
    def _scored(self):
        from agriqrs.evalharness import ScoredQuery

        return [
            ScoredQuery("good", (("A", 10.0), ("B", 5.0))),
            ScoredQuery("refused", (("A", 1.0),)),
        ]

    @staticmethod
    def _answer_fn(text, k):
        if text == "refused":
            raise QueryError("realtime")
        return ["B", "A"][:k]

    def test_ndcg_and_skip_accounting(self):
        rows = evaluate_retrieval(self._answer_fn, self._scored(), ks=[1, 2])
        assert [r.k for r in rows] == [1, 2]
        r1, r2 = rows
        assert r1.queries_evaluated == 1 and r1.queries_skipped == 1
        # k=1: served B (gain 5) while ideal is A (gain 10)
        assert r1.mean_ndcg == pytest.approx(dcg([5]) / dcg([10]), abs=1e-12)
        assert r2.mean_ndcg == pytest.approx(dcg([5, 10]) / dcg([10, 5]), abs=1e-12)

    def test_unknown_answers_score_zero(self):
        rows = evaluate_retrieval(lambda t, k: ["zzz"], self._scored()[:1], ks=[1])
        assert rows[0].mean_ndcg == 0.0

    def test_ks_deduplicated_and_sorted(self):
        rows = evaluate_retrieval(self._answer_fn, self._scored(), ks=[2, 1, 2])
        assert [r.k for r in rows] == [1, 2]

    def test_rejects_bad_ks(self):
        with pytest.raises(DataError):
            evaluate_retrieval(self._answer_fn, self._scored(), ks=[])
        with pytest.raises(DataError):
            evaluate_retrieval(self._answer_fn, self._scored(), ks=[0])

    def test_all_skipped_is_an_error(self):
        def refuse(text, k):
            raise QueryError("nope")

        with pytest.raises(DataError, match="survived"):
            evaluate_retrieval(refuse, self._scored(), ks=[1])
