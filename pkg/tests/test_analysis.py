import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msgarch_bnp.analysis import (Partition, cluster_count_posterior, coclustering_from_allocations,
                                  coclustering_matrix, cross_tab, entropy, point_partition, spectral_reorder,
                                  summarize_parameters, variation_of_information)
from msgarch_bnp.gibbs import PosteriorDraws


def restricted_growth_strings(n):
    """Every set partition of n items as a canonical label vector."""
    out = []

    def rec(prefix, top):
        if len(prefix) == n:
            out.append(list(prefix))
            return
        for c in range(top + 2):
            rec(prefix + [c], max(top, c))
    rec([0], 0)
    return np.array(out)


def vi_matrix(parts):
    """Pairwise VI in bits for a stack of label vectors, from the conditional-entropy form."""
    S, n = parts.shape
    M = parts.max() + 1

    def h(p):
        p = p.reshape(p.shape[0], -1)
        logs = np.log2(np.where(p > 0, p, 1.0))
        return -np.sum(p * logs, axis=1)

    onehot = (parts[:, :, None] == np.arange(M)).astype(float)   # (S, n, M)
    marg = h(onehot.sum(axis=1) / n)
    out = np.zeros((S, S))
    for a in range(S):
        joint = np.einsum("im,sil->sml", onehot[a], onehot) / n
        out[a] = 2 * h(joint) - marg[a] - marg
    return out


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_vi_matches_conditional_entropy_form(n):
    parts = restricted_growth_strings(n)
    ref = vi_matrix(parts)
    ours = np.array([[variation_of_information(p, q)[0] for q in parts] for p in parts])
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def _all_pairs(parts):
    return np.array([[variation_of_information(p, q)[0] for q in parts] for p in parts])


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
def test_vi_metric_axioms_all_partitions(n):
    parts = restricted_growth_strings(n)
    D = _all_pairs(parts) if n <= 6 else vi_matrix(parts)
    off = ~np.eye(parts.shape[0], dtype=bool)
    assert np.all(np.abs(np.diag(D)) < 1e-12)
    assert np.all(D[off] > 1e-12)
    np.testing.assert_allclose(D, D.T, atol=1e-12)
    assert D.max() <= np.log2(n) + 1e-12
    for k in range(parts.shape[0]):
        assert np.all(D <= D[:, k][:, None] + D[k][None, :] + 1e-12)


def test_vi_metric_axioms_eight_items():
    parts = restricted_growth_strings(8)
    assert parts.shape[0] == 4140
    single = np.zeros(8, dtype=int)
    for p in parts:
        vi, norm = variation_of_information(p, p)
        assert vi == 0.0 and norm == 0.0
        assert variation_of_information(p, single)[0] >= 0
    rng = np.random.default_rng(0)
    for _ in range(3000):
        a, b, c = parts[rng.integers(0, parts.shape[0], 3)]
        ab = variation_of_information(a, b)[0]
        assert ab == pytest.approx(variation_of_information(b, a)[0], abs=1e-12)
        assert ab <= variation_of_information(a, c)[0] + variation_of_information(c, b)[0] + 1e-12
        if not np.array_equal(a, b):
            assert ab > 0


def test_vi_four_item_example():
    vi, norm = variation_of_information([0, 0, 1, 1], [0, 1, 0, 1])
    assert vi == pytest.approx(2.0, abs=1e-15)
    assert norm == 1.0


def test_vi_errors():
    with pytest.raises(ValueError):
        variation_of_information([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        variation_of_information([0], [0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=20), st.data())
def test_vi_invariant_to_relabelling(labels, data):
    other = data.draw(st.lists(st.integers(0, 4), min_size=len(labels), max_size=len(labels)))
    perm = data.draw(st.permutations(range(5)))
    relabelled = [perm[x] for x in labels]
    a = variation_of_information(labels, other)
    b = variation_of_information(relabelled, other)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    assert 0 <= a[1] <= 1 + 1e-12


def test_partition_canonical_labels():
    p = Partition(np.array([7, 7, 2, 9, 2]))
    np.testing.assert_array_equal(p.labels, [0, 0, 1, 2, 1])
    assert p.M == 3 and p.sizes.tolist() == [2, 2, 1]
    with pytest.raises(ValueError):
        Partition(np.array([]))


def test_entropy_bits():
    assert entropy([0.5, 0.5]) == pytest.approx(1.0)
    assert entropy([1.0, 0.0]) == 0.0


def make_draws(D, counts=None):
    D = np.asarray(D)
    S, N, K = D.shape
    counts = counts if counts is not None else np.array([[np.unique(D[s, :, k]).size for k in range(K)]
                                                         for s in range(S)])
    z = np.zeros((S, N, K))
    return PosteriorDraws(sweeps=np.arange(1, S + 1), mu=z, gamma=z, alpha=z, beta=z,
                          P=np.zeros((S, N, K, K)), D=D, cluster_counts=counts, cluster_count_trace=counts,
                          state_probs=np.zeros((N, 1, K)), acceptance={})


def test_coclustering_counts():
    D = np.array([[0, 0, 1, 1], [0, 1, 1, 1], [2, 2, 2, 0]])[:, :, None]
    C = coclustering_matrix(make_draws(D), 0)
    expected = np.array([
        [3, 2, 1, 0],
        [2, 3, 2, 1],
        [1, 2, 3, 2],
        [0, 1, 2, 3],
    ]) / 3
    np.testing.assert_allclose(C, expected)
    # restricted to sweeps with exactly two occupied components (all three here)
    np.testing.assert_allclose(coclustering_matrix(make_draws(D), 0, M=2), expected)
    with pytest.raises(ValueError, match="available counts"):
        coclustering_matrix(make_draws(D), 0, M=4)


def test_coclustering_restricted_to_count():
    D = np.array([[0, 0, 0], [0, 1, 2], [0, 0, 1]])[:, :, None]
    C = coclustering_matrix(make_draws(D), 0, M=2)
    np.testing.assert_allclose(C, coclustering_from_allocations(np.array([[0, 0, 1]])))


def test_cluster_count_posterior_and_ties():
    counts = np.array([[2], [3], [3], [2], [1]])
    post = cluster_count_posterior(make_draws(np.zeros((5, 4, 1), dtype=int), counts), 0)
    np.testing.assert_allclose(post.pmf, [0.2, 0.4, 0.4, 0.0])
    assert post.map == 2
    assert post.support.tolist() == [1, 2, 3, 4]


def block_similarity(labels, within=0.9, between=0.1):
    labels = np.asarray(labels)
    C = np.where(labels[:, None] == labels[None, :], within, between)
    np.fill_diagonal(C, 1.0)
    return C


def test_point_partition_recovers_blocks():
    labels = [0, 1, 0, 2, 1, 2, 0]
    p = point_partition(block_similarity(labels), 3)
    assert variation_of_information(p, labels)[0] == pytest.approx(0.0, abs=1e-12)
    assert point_partition(block_similarity(labels), 1).M == 1
    with pytest.raises(ValueError):
        point_partition(block_similarity(labels), 8)


def test_spectral_reorder_groups_blocks():
    labels = np.array([0, 1, 0, 1, 1, 0, 1, 0])
    order = spectral_reorder(block_similarity(labels))
    assert sorted(order.tolist()) == list(range(8))
    ordered = labels[order]
    assert np.count_nonzero(np.diff(ordered)) == 1


def test_spectral_reorder_degenerate_cases():
    np.testing.assert_array_equal(spectral_reorder(np.ones((5, 5))), np.arange(5))
    np.testing.assert_array_equal(spectral_reorder(np.eye(4)), np.arange(4))
    C = block_similarity([0, 1, 0, 1, 1, 0])
    np.testing.assert_array_equal(spectral_reorder(C), spectral_reorder(C.copy()))


def test_cross_tab_counts_ordered_by_size():
    a = [0, 0, 0, 1, 1, 2]
    b = [5, 5, 7, 7, 7, 7]
    T = cross_tab(a, b)
    # rows: sizes 3, 2, 1; columns: sizes 4 (label 7), 2 (label 5)
    np.testing.assert_array_equal(T, [[1, 2], [2, 0], [1, 0]])
    assert T.sum() == 6


def test_summarize_parameters_matches_numpy():
    rng = np.random.default_rng(0)
    d = make_draws(np.zeros((200, 3, 2), dtype=int))
    d.mu = rng.normal(size=(200, 3, 2))
    d.P = rng.dirichlet([1, 1], size=(200, 3, 2))
    s = summarize_parameters(d, level=0.8)
    np.testing.assert_allclose(s.mean["mu"], d.mu.mean(axis=0))
    np.testing.assert_allclose(s.lower["mu"], np.quantile(d.mu, 0.1, axis=0))
    np.testing.assert_allclose(s.upper["p_kk"], np.quantile(d.P[:, :, [0, 1], [0, 1]], 0.9, axis=0))
    rows = list(s.rows())
    assert len(rows) == 5 * 3 * 2
    with pytest.raises(ValueError):
        summarize_parameters(d, level=1.0)
