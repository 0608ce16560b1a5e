"""Label transforms and dual-annotation agreement statistics."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banglasent import annotations as ann
from banglasent.annotations import Label
from banglasent.corpus import EncodedDataset

from conftest import PAIR_COUNTS, make_pair_corpus

_LABELS = st.sampled_from([Label.POSITIVE, Label.NEGATIVE, Label.AMBIGUOUS])


def _dataset_from_labels(labels1, labels2):
    n = len(labels1)
    return EncodedDataset(
        sequences=np.zeros((n, 2), dtype=np.int64),
        labels1=tuple(labels1),
        labels2=tuple(labels2),
        maxlen=2,
        vocab_size=3,
    )


class TestLabel:
    def test_parse_format_round_trip(self):
        for text in ("0", "1", "A"):
            assert Label.parse(text).format() == text

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown label"):
            Label.parse("2")

    def test_class_indices(self):
        assert Label.NEGATIVE.class_index == 0
        assert Label.POSITIVE.class_index == 1
        assert Label.AMBIGUOUS.class_index == 2


class TestApplyRa:
    def test_drops_ambiguous_and_maps_classes(self):
        ds = _dataset_from_labels(
            [Label.POSITIVE, Label.AMBIGUOUS, Label.NEGATIVE],
            [Label.POSITIVE, Label.POSITIVE, Label.POSITIVE],
        )
        kept, classes = ann.apply_ra(ds, "label1")
        assert len(kept) == 2
        assert classes.tolist() == [1, 0]
        # order preserved and the other column follows along
        assert kept.labels1 == (Label.POSITIVE, Label.NEGATIVE)

    def test_all_ambiguous_is_an_error(self):
        ds = _dataset_from_labels(
            [Label.AMBIGUOUS, Label.AMBIGUOUS], [Label.POSITIVE, Label.POSITIVE]
        )
        with pytest.raises(ValueError):
            ann.apply_ra(ds, "label1")

    def test_reference_margins(self, pair_corpus):
        # first-validation margins: 3747 positive, 4446 negative, 1144 ambiguous
        ds = _dataset_from_labels(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        kept, classes = ann.apply_ra(ds, "label1")
        assert len(kept) == 3747 + 4446 == 8193
        assert int((classes == 1).sum()) == 3747
        assert int((classes == 0).sum()) == 4446

    @given(st.lists(_LABELS, min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_kept_plus_ambiguous_is_total(self, labels):
        ds = _dataset_from_labels(labels, labels)
        ambiguous = sum(lab is Label.AMBIGUOUS for lab in labels)
        if ambiguous == len(labels):
            with pytest.raises(ValueError):
                ann.apply_ra(ds, "label1")
        else:
            kept, _ = ann.apply_ra(ds, "label1")
            assert len(kept) + ambiguous == len(labels)


class TestApplyAto2:
    def test_maps_ambiguous_to_two(self):
        ds = _dataset_from_labels(
            [Label.POSITIVE, Label.AMBIGUOUS, Label.NEGATIVE],
            [Label.POSITIVE, Label.POSITIVE, Label.POSITIVE],
        )
        kept, classes = ann.apply_ato2(ds, "label1")
        assert len(kept) == 3
        assert classes.tolist() == [1, 2, 0]

    def test_all_ambiguous_keeps_length(self):
        ds = _dataset_from_labels(
            [Label.AMBIGUOUS] * 4, [Label.POSITIVE] * 4
        )
        kept, classes = ann.apply_ato2(ds, "label1")
        assert len(kept) == 4
        assert classes.tolist() == [2, 2, 2, 2]

    def test_reference_class_two_count(self, pair_corpus):
        ds = _dataset_from_labels(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        kept, classes = ann.apply_ato2(ds, "label1")
        assert len(kept) == 9337
        assert int((classes == 2).sum()) == 1144

    @given(st.lists(_LABELS, min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_invertible_on_the_label_column(self, labels):
        classes = ann.ato2_classes(labels)
        back = [
            (Label.NEGATIVE, Label.POSITIVE, Label.AMBIGUOUS)[c] for c in classes
        ]
        assert back == list(labels)


class TestConfusionMatrix:
    def test_reference_matrix_is_exact(self, pair_corpus):
        report = ann.confusion_matrix(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        assert report.matrix == PAIR_COUNTS
        assert report.total == 9337
        assert report.trace == 7703
        assert report.agreement_rate == Fraction(7703, 9337)
        # the exact rate is ~0.825; quoted round-number agreement figures for
        # fixtures like this one can differ, the computed value is authoritative
        assert abs(float(report.agreement_rate) - 0.8250) < 5e-5

    def test_identical_arrays_are_diagonal(self):
        labels = [Label.POSITIVE, Label.NEGATIVE, Label.AMBIGUOUS] * 5
        report = ann.confusion_matrix(labels, list(labels))
        matrix = np.array(report.matrix)
        assert matrix.diagonal().sum() == report.total
        assert report.agreement_rate == 1

    def test_length_mismatch_is_an_error(self):
        with pytest.raises(ValueError, match="length"):
            ann.confusion_matrix([Label.POSITIVE], [])

    @given(st.lists(st.tuples(_LABELS, _LABELS), min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_sample_order_does_not_matter(self, pairs):
        l1 = [a for a, _ in pairs]
        l2 = [b for _, b in pairs]
        base = ann.confusion_matrix(l1, l2)
        rev = ann.confusion_matrix(l1[::-1], l2[::-1])
        assert base.matrix == rev.matrix

    @given(st.lists(st.tuples(_LABELS, _LABELS), min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_swapping_annotators_transposes(self, pairs):
        l1 = [a for a, _ in pairs]
        l2 = [b for _, b in pairs]
        forward = np.array(ann.confusion_matrix(l1, l2).matrix)
        backward = np.array(ann.confusion_matrix(l2, l1).matrix)
        assert np.array_equal(forward.T, backward)


class TestReportOutput:
    def test_json_payload(self, pair_corpus):
        report = ann.confusion_matrix(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        payload = json.loads(report.to_json())
        assert payload["matrix"] == [list(r) for r in PAIR_COUNTS]
        assert payload["trace"] == 7703
        assert payload["total"] == 9337
        assert "cohen_kappa" in payload["extensions"]

    def test_table_layout(self, pair_corpus):
        report = ann.confusion_matrix(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        table = report.to_table()
        lines = table.splitlines()
        assert "Positive" in lines[0] and "Ambiguous" in lines[0]
        assert "2817" in table and "3864" in table and "1022" in table
        assert "7703/9337" in table

    def test_kappa_perfect_agreement(self):
        matrix = ((5, 0, 0), (0, 5, 0), (0, 0, 5))
        assert ann.cohen_kappa(matrix) == 1.0

    def test_kappa_matches_direct_formula(self, pair_corpus):
        report = ann.confusion_matrix(
            [s.label1 for s in pair_corpus], [s.label2 for s in pair_corpus]
        )
        m = np.array(report.matrix, dtype=float)
        total = m.sum()
        p_o = np.trace(m) / total
        p_e = float((m.sum(axis=1) / total) @ (m.sum(axis=0) / total))
        expected = (p_o - p_e) / (1 - p_e)
        assert report.cohen_kappa() == pytest.approx(expected, rel=1e-12)
