import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from demzsl.hubness import (DegenerateDistribution, nk_distribution, read_nk_csv, skewness,
                            write_nk_csv)
from demzsl.neighbors import pairwise_distance, rank_targets


def skew_oracle(counts):
    x = np.asarray(counts, dtype=float)
    n = x.size
    mu = sum(x) / n
    m2 = sum((v - mu) ** 2 for v in x) / n
    m3 = sum((v - mu) ** 3 for v in x) / n
    return m3 / m2 ** 1.5


def brute_force_nk(test, protos, k):
    counts = np.zeros(protos.shape[1], dtype=int)
    for j in range(test.shape[1]):
        d = [(float(np.sum((test[:, j] - protos[:, i]) ** 2)), i) for i in range(protos.shape[1])]
        for _, i in sorted(d)[:k]:
            counts[i] += 1
    return counts


def test_worked_example():
    assert skewness([3, 1, 0, 0]) == pytest.approx(0.8165, abs=1e-4)


def test_symmetric_counts_have_zero_skew():
    assert skewness([1, 2, 3]) == pytest.approx(0.0, abs=1e-15)


def test_degenerate_counts():
    with pytest.raises(DegenerateDistribution):
        skewness([4, 4, 4])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=40))
def test_skewness_matches_direct_formula(counts):
    if len(set(counts)) == 1:
        return
    assert skewness(counts) == pytest.approx(skew_oracle(counts), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_nk_matches_brute_force(k):
    rng = np.random.default_rng(k)
    test = rng.standard_normal((4, 60))
    protos = rng.standard_normal((4, 7))
    dist = nk_distribution(test, protos, k)
    assert np.array_equal(dist.counts, brute_force_nk(test, protos, k))
    assert dist.counts.sum() == k * 60
    assert dist.num_prototypes == 7


def test_nk_ties_go_to_lower_index():
    protos = np.array([[1.0, -1.0]])
    assert list(nk_distribution(np.zeros((1, 3)), protos, 1).counts) == [3, 0]


def test_nk_errors():
    with pytest.raises(ValueError):
        nk_distribution(np.zeros((2, 3)), np.zeros((2, 2)), k=3)
    with pytest.raises(ValueError):
        nk_distribution(np.zeros((2, 3)), np.zeros((3, 2)), k=1)


def test_cosine_distance():
    q = np.array([[1.0, 0.0], [0.0, 0.0]])
    t = np.array([[1.0, 0.0], [1.0, 1.0]])
    d = pairwise_distance(q, t, "cosine")
    assert_allclose(d, [[1 - 1 / np.sqrt(2), 1.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        pairwise_distance(q, t, "manhattan")


def test_rank_targets_is_stable():
    assert list(rank_targets(np.array([[1.0, 0.5, 0.5]]))[0]) == [1, 2, 0]


def test_nk_csv_round_trip(tmp_path):
    dist = nk_distribution(np.random.default_rng(0).standard_normal((3, 20)),
                           np.random.default_rng(1).standard_normal((3, 4)))
    skew = skewness(dist)
    write_nk_csv(tmp_path / "nk.csv", dist, np.array([10, 11, 12, 13]), skew)
    ids, counts, s = read_nk_csv(tmp_path / "nk.csv")
    assert list(ids) == [10, 11, 12, 13]
    assert np.array_equal(counts, dist.counts) and s == skew
