import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairadapt.errors import DomainError, ShapeError
from fairadapt.metrics import (
    UNDEFINED_TEXT,
    balanced_accuracy,
    delta_ao,
    delta_dp,
    delta_eo,
    evaluate,
    is_degenerate,
    write_reports_csv,
)
from oracles import counted_metrics

CELLS = list(itertools.product((0, 1), repeat=3))  # (y_hat, y, a)


def package_metrics(y_hat, y, a):
    return {
        "delta_dp": delta_dp(y_hat, a),
        "delta_eo": delta_eo(y_hat, y, a),
        "delta_ao": delta_ao(y_hat, y, a),
        "balanced_accuracy": balanced_accuracy(y_hat, y),
    }


def same(got, want):
    if want is None:
        return got is None
    return got is not None and abs(got - want) < 1e-12


def all_triples(length):
    for bits in itertools.product((0, 1), repeat=3 * length):
        yield bits[:length], bits[length:2 * length], bits[2 * length:]


def cell_multisets(length):
    """One ordering of every multiset of (y_hat, y, a) cells of the given size."""
    for combo in itertools.combinations_with_replacement(CELLS, length):
        yield tuple(zip(*combo))


def check_against_oracle(y_hat, y, a):
    got = package_metrics(np.array(y_hat), np.array(y), np.array(a))
    want = counted_metrics(y_hat, y, a)
    return all(same(got[k], want[k]) for k in want)


@pytest.mark.parametrize("length", [1, 2, 3, 4])
def test_every_short_triple_matches_counting(length):
    assert all(check_against_oracle(*t) for t in all_triples(length))


@pytest.mark.parametrize("length", [6, 8])
def test_every_cell_multiset_matches_counting(length):
    rng = np.random.default_rng(length)
    for y_hat, y, a in cell_multisets(length):
        order = rng.permutation(length)
        shuffled = [tuple(np.array(v)[order]) for v in (y_hat, y, a)]
        assert check_against_oracle(*shuffled)


def test_documented_examples():
    y_hat = np.array([1, 1, 0, 0])
    a = np.array([0, 0, 1, 1])
    assert delta_dp(y_hat, a) == 1.0
    assert delta_dp(np.zeros(6, int), np.array([0, 1] * 3)) == 0.0
    y = np.array([1, 0, 1, 0])
    assert balanced_accuracy(y, y) == 1.0
    assert balanced_accuracy(1 - y, y) == 0.0


def test_empty_group_is_undefined():
    assert delta_dp([1, 0], [1, 1]) is None
    assert delta_eo([1, 0, 1], [0, 0, 1], [0, 1, 1]) is None
    assert delta_ao([1, 0, 1], [0, 0, 1], [0, 1, 1]) is None


def test_single_class_falls_back_to_accuracy_and_is_flagged():
    rep = evaluate([1, 0, 1], [1, 1, 1], [0, 1, 0])
    assert rep.balanced_accuracy == pytest.approx(2 / 3)
    assert rep.single_class


def test_invalid_inputs():
    with pytest.raises(DomainError):
        delta_dp([0, 2], [0, 1])
    with pytest.raises(ShapeError):
        delta_dp([0, 1, 1], [0, 1])
    with pytest.raises(DomainError):
        balanced_accuracy([], [])


def test_degenerate_detection():
    assert is_degenerate([0, 0, 0])
    assert is_degenerate([1])
    assert not is_degenerate([0, 1])


def test_reports_csv_spells_out_undefined(tmp_path):
    rep = evaluate([1, 0], [1, 0], [1, 1])
    path = tmp_path / "r.csv"
    write_reports_csv(path, [("x", rep)])
    text = path.read_text()
    assert UNDEFINED_TEXT in text and text.startswith("label,balanced_accuracy")


binary_triples = st.integers(1, 40).flatmap(
    lambda n: st.tuples(*[st.lists(st.integers(0, 1), min_size=n, max_size=n)] * 3)
)


@settings(max_examples=200, deadline=None)
@given(binary_triples, st.randoms(use_true_random=False))
def test_metrics_are_permutation_invariant(triple, rnd):
    y_hat, y, a = (np.array(v) for v in triple)
    order = list(range(len(y)))
    rnd.shuffle(order)
    before = package_metrics(y_hat, y, a)
    after = package_metrics(y_hat[order], y[order], a[order])
    assert all(same(after[k], before[k]) for k in before)


@settings(max_examples=200, deadline=None)
@given(binary_triples)
def test_metric_ranges_and_group_swap_symmetry(triple):
    y_hat, y, a = (np.array(v) for v in triple)
    m = package_metrics(y_hat, y, a)
    swapped = package_metrics(y_hat, y, 1 - a)
    for k, v in m.items():
        if v is not None:
            assert 0.0 <= v <= 1.0
        assert same(swapped[k], v)
    if m["delta_ao"] is not None:
        assert m["delta_ao"] >= m["delta_eo"] / 2 - 1e-12
