import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yearocr.corpus import YearLabel
from yearocr.errors import MetricsError
from yearocr.metrics import (
    EvalReport,
    NLDRecord,
    anld,
    evaluate,
    levenshtein,
    load_report,
    nld,
    save_report,
)


def brute_force_edit_distance(a: str, b: str) -> int:
    """Exponential edit-search over the full insert/delete/substitute lattice."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    same = 0 if a[0] == b[0] else 1
    return min(
        brute_force_edit_distance(a[1:], b[1:]) + same,
        brute_force_edit_distance(a[1:], b) + 1,
        brute_force_edit_distance(a, b[1:]) + 1,
    )


def all_strings(alphabet: str, max_len: int):
    for n in range(max_len + 1):
        for combo in itertools.product(alphabet, repeat=n):
            yield "".join(combo)


class TestLevenshtein:
    def test_identity(self):
        assert levenshtein("1890", "1890") == 0

    def test_two_substitutions(self):
        # Frozen from the brute-force oracle: 1895 -> 1985 swaps positions 2 and 3.
        assert brute_force_edit_distance("1895", "1985") == 2
        assert levenshtein("1895", "1985") == 2

    def test_single_deletion(self):
        assert brute_force_edit_distance("1890", "189") == 1
        assert levenshtein("1890", "189") == 1

    def test_oracle_equivalence_exhaustive(self):
        # Every pair over a 3-symbol alphabet, lengths <= 4.
        universe = list(all_strings("012", 4))
        for a in universe:
            for b in universe:
                assert levenshtein(a, b) == brute_force_edit_distance(a, b), (a, b)

    @given(
        st.text(alphabet="0123456789", max_size=8),
        st.text(alphabet="0123456789", max_size=8),
        st.text(alphabet="0123456789", max_size=8),
    )
    @settings(max_examples=500)
    def test_symmetry_and_triangle(self, a, b, c):
        assert levenshtein(a, b) == levenshtein(b, a)
        assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)

    @given(st.text(alphabet="0123456789", max_size=8),
           st.text(alphabet="0123456789", max_size=8))
    @settings(max_examples=300)
    def test_bounds(self, a, b):
        d = levenshtein(a, b)
        assert 0 <= d <= max(len(a), len(b))
        assert (d == 0) == (a == b)


class TestNld:
    def test_exact_match_is_zero(self):
        assert nld("1890", "1890") == 0.0

    def test_half(self):
        assert nld("1895", "1985") == 0.5

    def test_empty_prediction(self):
        assert nld("1890", "") == 1.0

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(MetricsError):
            nld("", "1890")

    @given(st.text(alphabet="0123456789", min_size=1, max_size=6),
           st.text(alphabet="0123456789", max_size=6))
    @settings(max_examples=300)
    def test_zero_iff_equal(self, t, p):
        assert (nld(t, p) == 0.0) == (t == p)

    @given(st.text(alphabet="0123456789", min_size=1, max_size=6))
    @settings(max_examples=200)
    def test_equal_length_bounded_by_hamming(self, t):
        rng = np.random.default_rng(abs(hash(t)) % 2**32)
        p = "".join(str(rng.integers(10)) if rng.random() < 0.5 else c for c in t)
        hamming = sum(1 for a, b in zip(t, p) if a != b)
        assert nld(t, p) <= hamming / len(t)


class TestAnld:
    def test_mean(self):
        records = [NLDRecord.from_pair("1890", "1890"), NLDRecord.from_pair("1895", "1985")]
        assert anld(records) == pytest.approx(0.25)

    def test_all_zero(self):
        records = [NLDRecord.from_pair("1900", "1900")] * 5
        assert anld(records) == 0.0

    def test_single(self):
        r = NLDRecord("1890", "2", 3, 0.75)
        assert anld([r]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            anld([])

    @given(st.lists(st.floats(min_value=0, max_value=2), min_size=1, max_size=30))
    @settings(max_examples=200)
    def test_permutation_invariance(self, values):
        records = [NLDRecord("1890", "x", 0, v) for v in values]
        rng = np.random.default_rng(0)
        shuffled = list(records)
        rng.shuffle(shuffled)
        assert anld(records) == pytest.approx(anld(shuffled))


class TestEvaluate:
    def test_perfect(self):
        labels = [YearLabel("1895"), YearLabel("1905"), YearLabel("1920")]
        report = evaluate([l.text for l in labels], labels)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0
        assert report.anld == 0.0
        assert report.T == 3

    def test_half_right(self):
        labels = [YearLabel("1895"), YearLabel("1895")]
        report = evaluate(["1895", "1985"], labels)
        assert report.accuracy == 0.5
        assert report.anld == pytest.approx(0.25)

    def test_length_mismatch_fatal(self):
        with pytest.raises(MetricsError):
            evaluate(["1895"], [YearLabel("1895"), YearLabel("1905")])

    def test_non_year_prediction_counts_against_truth_only(self):
        labels = [YearLabel("1895"), YearLabel("1905")]
        report = evaluate(["189", "1905"], labels)
        # '189' is no positive for any class: one FN for 1895, 1905 still perfect.
        assert report.accuracy == 0.5
        per_class = {c.label.text: (c.support, c.correct) for c in report.per_class}
        assert per_class == {"1895": (1, 0), "1905": (1, 1)}
        assert report.macro_f1 == pytest.approx(0.5)

    def test_supports_sum_to_T(self):
        labels = [YearLabel(t) for t in ["1895", "1895", "1905", "1910"]]
        report = evaluate(["1895", "1905", "1905", "1890"], labels)
        assert sum(c.support for c in report.per_class) == report.T

    def test_anld_is_mean_of_records(self):
        labels = [YearLabel(t) for t in ["1895", "1905", "1910"]]
        report = evaluate(["1895", "19", "1910"], labels)
        assert report.anld == pytest.approx(
            sum(r.nld for r in report.records) / len(report.records)
        )

    def test_f1_matches_sklearn(self):
        sklearn_metrics = pytest.importorskip("sklearn.metrics")
        rng = np.random.default_rng(42)
        years = [1895, 1900, 1905, 1910]
        truths = [YearLabel.from_year(int(y)) for y in rng.choice(years, size=200)]
        preds = [
            YearLabel.from_year(int(rng.choice(years))).text
            if rng.random() > 0.1 else "19"  # some malformed predictions
            for _ in truths
        ]
        report = evaluate(preds, truths)
        classes = sorted({t.text for t in truths} | {
            p for p in preds if len(p) == 4 and p.isdigit() and 1890 <= int(p) <= 1920
        })
        truth_texts = [t.text for t in truths]
        for average in ("macro", "micro", "weighted"):
            expected = sklearn_metrics.f1_score(
                truth_texts, preds, labels=classes, average=average, zero_division=0
            )
            assert report.f1_scores[average] == pytest.approx(expected), average

    def test_report_round_trip(self, tmp_path):
        labels = [YearLabel("1895"), YearLabel("1905")]
        report = evaluate(["1895", "1985"], labels)
        report.model_name = "demo"
        report.test_hash = "abc123"
        path = tmp_path / "report.json"
        save_report(report, path)
        loaded = load_report(path)
        assert loaded.accuracy == report.accuracy
        assert loaded.f1_scores == pytest.approx(report.f1_scores)
        assert [r.prediction for r in loaded.records] == [r.prediction for r in report.records]
        assert loaded.model_name == "demo"

    def test_summary_line_one_decimal(self):
        report = EvalReport(
            accuracy=0.932, macro_f1=0.908, anld=0.023,
            per_class=[], records=[], T=100,
        )
        assert report.summary_line() == "accuracy 93.2 / F1 90.8 / ANLD 2.3"
