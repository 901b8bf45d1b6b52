import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from emnet.matdist import (
    InvalidNormError,
    MaskMatrix,
    SampleDistribution,
    allocate_norms,
    generate_test_matrix,
    generate_training_set,
    norm_likelihood,
    sample_matrix_with_norm,
    training_set_size,
    write_likelihood_csv,
)

from oracles import brute_norm_counts, enumerate_binary_symmetric


# frozen from oracles.brute_norm_counts
N2_COUNTS = {0: 1, 1: 2, 2: 2, 3: 2, 4: 1}
N3_COUNTS = {0: 1, 1: 3, 2: 6, 3: 10, 4: 12, 5: 12, 6: 10, 7: 6, 8: 3, 9: 1}
N3_NODIAG_COUNTS = {0: 1, 2: 3, 4: 3, 6: 1}


def test_norm_likelihood_small_cases():
    lik = norm_likelihood(2, True)
    assert lik.counts == N2_COUNTS
    assert lik.total == 8
    assert norm_likelihood(1, True).counts == {0: 1, 1: 1}
    lik3 = norm_likelihood(3, True)
    assert lik3.total == 64 and sum(lik3.counts.values()) == 64
    assert lik3.counts == N3_COUNTS
    assert norm_likelihood(3, False).counts == N3_NODIAG_COUNTS


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("diag_free", [True, False])
def test_norm_likelihood_matches_enumeration(n, diag_free):
    assert norm_likelihood(n, diag_free).counts == brute_norm_counts(n, diag_free)


@given(n=st.integers(1, 40), diag_free=st.booleans())
@settings(max_examples=60, deadline=None)
def test_norm_likelihood_invariants(n, diag_free):
    lik = norm_likelihood(n, diag_free)
    x_max = n * (n - 1) + (n if diag_free else 0)
    assert lik.max_norm == x_max
    assert all(c > 0 for c in lik.counts.values())
    assert sum(lik.counts.values()) == lik.total
    for x, c in lik.counts.items():
        assert lik.counts[x_max - x] == c
    assert math.fsum(lik.probabilities().values()) == pytest.approx(1.0, abs=1e-12)


def test_likelihood_large_n_probabilities_sum_to_one():
    lik = norm_likelihood(100, True)
    assert math.fsum(lik.probabilities().values()) == pytest.approx(1.0, abs=1e-12)


def test_sample_extremes(rng):
    np.testing.assert_array_equal(sample_matrix_with_norm(2, 4, True, rng).entries, np.ones((2, 2)))
    np.testing.assert_array_equal(sample_matrix_with_norm(2, 0, True, rng).entries, np.zeros((2, 2)))


def test_sample_invalid_norm(rng):
    with pytest.raises(InvalidNormError):
        sample_matrix_with_norm(2, 5, True, rng)
    with pytest.raises(InvalidNormError):
        sample_matrix_with_norm(3, 1, False, rng)


def test_sample_split_frequencies(rng):
    # sum 2 at n=3: one off-diagonal pair (3 ways) or two diagonal bits (3 ways)
    draws = 100_000
    diag_two = 0
    for _ in range(draws):
        m = sample_matrix_with_norm(3, 2, True, rng).entries
        diag_two += int(np.trace(m) == 2)
    assert abs(diag_two / draws - 0.5) < 0.02


@given(n=st.integers(1, 7), data=st.data())
@settings(max_examples=80, deadline=None)
def test_sample_has_requested_norm(n, data):
    diag_free = data.draw(st.booleans())
    lik = norm_likelihood(n, diag_free)
    x = data.draw(st.sampled_from(sorted(lik.counts)))
    m = sample_matrix_with_norm(n, x, diag_free, np.random.default_rng(data.draw(st.integers(0, 2**32))))
    assert m.norm == x and m.binary and m.is_symmetric()
    if not diag_free:
        assert np.trace(m.entries) == 0


def test_sampler_uniform_within_norm(rng):
    # every one of the 64 n=3 matrices should appear equally often within its norm class
    keys = {m.tobytes(): m for m in (e.astype(float) for e in enumerate_binary_symmetric(3))}
    for x in (3, 4):
        members = [k for k, m in keys.items() if m.sum() == x]
        hist = dict.fromkeys(members, 0)
        for _ in range(12_000):
            hist[sample_matrix_with_norm(3, x, True, rng).entries.tobytes()] += 1
        assert stats.chisquare(list(hist.values())).pvalue > 0.001


def test_training_set_size_formula():
    assert training_set_size(5) == 292
    assert training_set_size(10) == 718
    assert training_set_size(20) == 1769


def test_training_set_allocation_n2(rng):
    dist = generate_training_set(2, 8, True, rng)
    assert len(dist) == 8
    assert dist.norm_histogram() == N2_COUNTS


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_target_one_picks_modal_norm(n, rng):
    lik = norm_likelihood(n, True)
    dist = generate_training_set(n, 1, True, rng)
    assert len(dist) == 1
    assert lik.p(int(dist[0].norm)) == max(lik.probabilities().values())


@given(n=st.integers(1, 12), size=st.integers(1, 3000), diag_free=st.booleans())
@settings(max_examples=100, deadline=None)
def test_allocation_hits_target_exactly(n, size, diag_free):
    alloc = allocate_norms(norm_likelihood(n, diag_free), size)
    assert sum(alloc.values()) == size
    assert all(c > 0 for c in alloc.values())


def test_training_set_chi_square_n3():
    dist = generate_training_set(3, 100_000, True, np.random.default_rng(3))
    lik = norm_likelihood(3, True)
    observed = [dist.norm_histogram().get(x, 0) for x in sorted(lik.counts)]
    expected = [lik.p(x) * 100_000 for x in sorted(lik.counts)]
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_training_set_matrices_are_binary_symmetric(rng):
    dist = generate_training_set(6, None, True, rng)
    assert len(dist) == training_set_size(6)
    for m in dist:
        assert m.binary and m.is_symmetric()
        assert set(np.unique(m.entries)) <= {0.0, 1.0}


def test_training_set_deterministic():
    a = generate_training_set(5, 292, True, seed=11)
    b = generate_training_set(5, 292, True, seed=11)
    assert all(np.array_equal(x.entries, y.entries) for x, y in zip(a, b))
    c = generate_training_set(5, 292, True, seed=12)
    assert not all(np.array_equal(x.entries, y.entries) for x, y in zip(a, c))


def test_test_matrix_extremes(rng):
    assert generate_test_matrix(6, 0.0, True, False, rng).entries.sum() == 0
    np.testing.assert_array_equal(generate_test_matrix(6, 1.0, False, False, rng).entries, np.ones((6, 6)))
    cont = generate_test_matrix(6, 1.0, True, False, rng).entries
    assert np.all((cont > 0) & (cont <= 1))
    with pytest.raises(ValueError):
        generate_test_matrix(6, 1.5, True, False, rng)


def test_test_matrix_density(rng):
    fracs = [np.count_nonzero(generate_test_matrix(40, 0.5, True, False, rng).entries) / 1600
             for _ in range(10_000)]
    assert 0.49 <= np.mean(fracs) <= 0.51


def test_test_matrix_symmetric_flag(rng):
    m = generate_test_matrix(7, 0.5, True, True, rng)
    assert m.is_symmetric()
    u = generate_test_matrix(7, 0.5, True, False, rng)
    assert not u.is_symmetric()


def test_mask_matrix_validation():
    with pytest.raises(ValueError):
        MaskMatrix(np.array([[0.5]]), binary=True)
    with pytest.raises(ValueError):
        MaskMatrix(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        MaskMatrix(np.zeros((2, 3)))


def test_distribution_json_roundtrip(tmp_path):
    dist = generate_training_set(4, 20, True, seed=5)
    path = tmp_path / "d.json"
    dist.to_json(path)
    payload = json.loads(path.read_text())
    assert set(payload) == {"n", "seed", "diag_free", "matrices"}
    assert payload["n"] == 4 and payload["seed"] == 5 and payload["diag_free"] is True
    assert all(len(m) == 16 and set(m) <= {0, 1} for m in payload["matrices"])
    back = SampleDistribution.from_json(path)
    assert all(np.array_equal(a.entries, b.entries) for a, b in zip(dist, back))


def test_likelihood_csv(tmp_path):
    path = tmp_path / "lik.csv"
    write_likelihood_csv(norm_likelihood(2), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "norm,count,probability"
    assert lines[1:] == ["0,1,0.125", "1,2,0.25", "2,2,0.25", "3,2,0.25", "4,1,0.125"]
