import dataclasses
import math

import numpy as np
import pytest

from lltc import exceptions
from lltc.core import (
    CandidateSet,
    ClassDistribution,
    EntropyScore,
    LabeledSet,
    Modality,
    Sample,
    SelectionBatch,
    UnlabeledSet,
    check_same_classes,
    make_distribution,
    sample_size_bytes,
)

from .conftest import pseudo, sample


def test_make_distribution_symmetric():
    assert make_distribution([2, 2]).probs == (0.5, 0.5)


def test_make_distribution_already_normalized():
    assert make_distribution([1, 0, 0]).probs == (1.0, 0.0, 0.0)


def test_make_distribution_divides_by_sum():
    assert make_distribution([3, 1]).probs == (0.75, 0.25)


def test_make_distribution_negative_entry():
    with pytest.raises(exceptions.NegativeEntry) as e:
        make_distribution([-1, 2])
    assert str(e.value) == "Vector contains a negative entry."


def test_make_distribution_all_zero():
    with pytest.raises(exceptions.AllZero) as e:
        make_distribution([0, 0, 0])
    assert str(e.value) == "Vector has no positive entry."


def test_make_distribution_empty():
    with pytest.raises(exceptions.AllZero):
        make_distribution([])


def test_make_distribution_non_finite():
    with pytest.raises(exceptions.NonFinite):
        make_distribution([float("nan"), 1.0])
    with pytest.raises(exceptions.NonFinite):
        make_distribution([float("inf"), 1.0])


def test_distribution_errors_share_a_base():
    for cls in (exceptions.NegativeEntry, exceptions.AllZero, exceptions.NonFinite):
        assert issubclass(cls, exceptions.InvalidDistribution)
        assert issubclass(cls, exceptions.LLTCException)


def test_make_distribution_sums_to_one_and_keeps_argmax():
    rng = np.random.default_rng(11)
    for _ in range(500):
        c = int(rng.integers(2, 12))
        raw = rng.random(c) * 10 ** rng.uniform(-3, 3)
        d = make_distribution(raw)
        assert abs(math.fsum(d.probs) - 1.0) <= 1e-9
        assert d.argmax() == int(np.argmax(raw))


def test_argmax_tie_goes_to_lowest_index():
    assert make_distribution([1, 3, 3, 1]).argmax() == 1
    assert make_distribution([1, 1, 1]).argmax() == 0


def test_distribution_needs_two_classes():
    with pytest.raises(exceptions.InvalidDistribution):
        ClassDistribution((1.0,))


def test_distribution_must_sum_to_one():
    with pytest.raises(exceptions.InvalidDistribution):
        ClassDistribution((0.5, 0.6))


def test_check_same_classes():
    with pytest.raises(exceptions.ClassCountMismatch) as e:
        check_same_classes(make_distribution([1, 1]), make_distribution([1, 1, 1]))
    assert str(e.value) == "Distributions have 2 and 3 classes."


def test_sample_size_default_encoding():
    assert sample_size_bytes(8, 8) == 16 + 8 * 16
    assert Sample.create(0, [1.0, 2.0], [3.0]).size_bytes == 40


def test_sample_size_custom_encoding():
    s = Sample.create(0, [1.0, 2.0], [3.0], header_bytes=4, bytes_per_value=4)
    assert s.size_bytes == 16


def test_equal_dimensions_equal_sizes():
    a = Sample.create(0, [1.0, 2.0], [3.0, 4.0])
    b = Sample.create(1, [-5.0, 0.5], [9.0, 1e9], 3, True)
    assert a.size_bytes == b.size_bytes


def test_sample_negative_id():
    with pytest.raises(exceptions.InvalidSample) as e:
        Sample.create(-1, [1.0], [1.0])
    assert str(e.value) == "Sample id must be non-negative, got -1."


def test_sample_empty_features():
    with pytest.raises(exceptions.InvalidSample) as e:
        Sample.create(3, [], [1.0])
    assert str(e.value) == "Sample 3 has an empty feature vector."


def test_sample_is_immutable():
    s = sample(0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        s.id = 4


def test_labeled_set_label_out_of_range():
    with pytest.raises(exceptions.InvalidSample) as e:
        LabeledSet((sample(0),), (2,), 2)
    assert str(e.value) == "Label 2 of sample 0 outside [0, 2)."


def test_labeled_set_length_mismatch():
    with pytest.raises(exceptions.InvalidSample):
        LabeledSet((sample(0), sample(1)), (0,), 2)


def test_labeled_set_duplicate_ids():
    with pytest.raises(exceptions.InvalidSample) as e:
        LabeledSet((sample(0), sample(0)), (0, 1), 2)
    assert str(e.value) == "Duplicate sample id 0."


def test_labeled_set_dimension_mismatch():
    with pytest.raises(exceptions.InvalidSample):
        LabeledSet((sample(0), sample(1, f=(1.0, 2.0, 3.0))), (0, 1), 2)


def test_labeled_set_from_truth_requires_labels():
    with pytest.raises(exceptions.InvalidSample) as e:
        LabeledSet.from_truth([sample(0), sample(1, label=None)], 2)
    assert str(e.value) == "Sample 1 has no true label."


def test_labeled_set_views():
    ls = LabeledSet.from_truth(
        [sample(0, f=(1.0, 2.0), label=0), sample(1, s=(3.0, 4.0), label=2)], 3
    )
    assert len(ls) == 2
    assert ls.ids == frozenset({0, 1})
    assert ls.class_counts() == [1, 0, 1]
    assert ls.features_f().tolist() == [[1.0, 2.0], [0.0, 0.0]]
    assert ls.features_s().tolist() == [[0.0, 0.0], [3.0, 4.0]]
    assert ls.label_array().tolist() == [0, 2]


def test_feature_matrices_are_read_only():
    ls = LabeledSet.from_truth([sample(0)], 2)
    with pytest.raises(ValueError):
        ls.features_f()[0, 0] = 1.0


def test_labeled_set_extend():
    ls = LabeledSet.from_truth([sample(0)], 2)
    grown = ls.extend([sample(1, label=None)], [1])
    assert len(ls) == 1
    assert grown.labels == (0, 1)
    with pytest.raises(exceptions.InvalidSample):
        grown.extend([sample(1)], [0])


def test_unlabeled_set_take():
    pool = UnlabeledSet(tuple(sample(i) for i in range(5)))
    head, rest = pool.take(2)
    assert [s.id for s in head.samples] == [0, 1]
    assert [s.id for s in rest.samples] == [2, 3, 4]
    everything, nothing = pool.take(None)
    assert len(everything) == 5
    assert not nothing


def test_unlabeled_set_merge_remove_sorted():
    a = UnlabeledSet((sample(4), sample(1)))
    b = UnlabeledSet((sample(2),))
    merged = a.merge(b)
    assert [s.id for s in merged.sorted().samples] == [1, 2, 4]
    assert merged.remove([4, 9]).ids == frozenset({1, 2})
    with pytest.raises(exceptions.InvalidSample):
        a.merge(UnlabeledSet((sample(1),)))


def test_empty_unlabeled_set():
    pool = UnlabeledSet()
    assert len(pool) == 0
    assert not pool
    assert pool.features_f().shape == (0, 0)


def test_entropy_score_rejects_negative():
    with pytest.raises(exceptions.InvalidDistribution):
        EntropyScore(-0.1)


def test_entropy_scores_order():
    assert EntropyScore(0.1) < EntropyScore(0.2)


def test_pseudo_label_rank():
    p = pseudo(0, 0.2, 0.6)
    assert p.rank() == pytest.approx(0.4, abs=1e-12)
    assert p.rank(Modality.F) == 0.2
    assert p.rank(Modality.S) == 0.6


def test_candidate_set_enforces_threshold():
    with pytest.raises(exceptions.InvalidSample) as e:
        CandidateSet((pseudo(0, 0.1), pseudo(1, 0.6)), 0.5)
    assert str(e.value) == "Candidate 1 exceeds threshold 0.5."


def test_candidate_set_threshold_per_modality():
    z = CandidateSet((pseudo(0, 0.1, 0.9),), 0.2, Modality.F)
    assert len(z) == 1


def test_selection_batch_shortfall():
    batch = SelectionBatch((pseudo(0, 0.1, label=1), pseudo(1, 0.2, label=1)), 1, 5)
    assert len(batch) == 2
    assert batch.shortfall == 3
    assert batch.ids == (0, 1)
    assert batch.class_counts() == {1: 2}


def test_selection_batch_rejects_duplicates():
    with pytest.raises(exceptions.InvalidSample):
        SelectionBatch((pseudo(0, 0.1), pseudo(0, 0.2)), 1, 2)


def test_selection_batch_iteration_starts_at_one():
    with pytest.raises(exceptions.InvalidSample):
        SelectionBatch((), 0, 1)
