import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ssvep_xfer.numerics import pearson_corr
from ssvep_xfer.trca import (build_source_template, extract_trc, grand_average, trca_filter,
                             trca_matrices)


def _trials(seed, n_b=4, n_c=5, n_s=120, noise=0.5):
    rng = np.random.default_rng(seed)
    s = np.sin(2 * np.pi * 10 * np.arange(n_s) / 250)
    mix = rng.standard_normal(n_c)
    return np.stack([np.outer(mix, s) + noise * rng.standard_normal((n_c, n_s))
                     for _ in range(n_b)])


def _pairwise_oracle(x):
    """S and Q summed pair by pair with numpy covariance."""
    n_b, n_c = x.shape[:2]
    S = np.zeros((n_c, n_c))
    Q = np.zeros((n_c, n_c))
    for h1 in range(n_b):
        Q += np.cov(x[h1])
        for h2 in range(n_b):
            if h1 != h2:
                S += np.cov(np.vstack([x[h1], x[h2]]))[:n_c, n_c:]
    return S, Q


def test_trca_matrices_match_pairwise_sum():
    x = _trials(0)
    S, Q = trca_matrices(x)
    S_ref, Q_ref = _pairwise_oracle(x)
    np.testing.assert_allclose(S, S_ref, atol=1e-10)
    np.testing.assert_allclose(Q, Q_ref, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.permutations(range(4)))
def test_trca_matrices_block_permutation(seed, perm):
    x = _trials(seed)
    S, Q = trca_matrices(x)
    Sp, Qp = trca_matrices(x[list(perm)])
    np.testing.assert_allclose(S, Sp, atol=1e-10)
    np.testing.assert_allclose(Q, Qp, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100))
def test_scaling_trials(seed, alpha):
    x = _trials(seed)
    S, Q = trca_matrices(x)
    S2, Q2 = trca_matrices(alpha * x)
    np.testing.assert_allclose(S2, alpha ** 2 * S, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(Q2, alpha ** 2 * Q, rtol=1e-9, atol=1e-12)
    w1, w2 = trca_filter(x).weights, trca_filter(alpha * x).weights
    cos = abs(w1 @ w2) / np.linalg.norm(w1) / np.linalg.norm(w2)
    assert cos >= 1 - 1e-9


def test_trca_filter_is_top_generalized_eigenvector():
    x = _trials(1)
    S, Q = trca_matrices(x)
    f = trca_filter(x, stimulus_index=2)
    assert f.stimulus_index == 2
    assert f.eigenvalue == pytest.approx(scipy.linalg.eigh(S, Q, eigvals_only=True)[-1], rel=1e-8)


def test_specific_correlation_sign_invariant():
    x = _trials(2)
    w = trca_filter(x).weights
    tpl = grand_average(x)
    test = x[0]
    a = pearson_corr(w @ test, extract_trc(w, tpl))
    b = pearson_corr(-w @ test, extract_trc(-w, tpl))
    assert a == b


def test_trc_recovers_shared_signal():
    x = _trials(3, noise=0.3)
    trc = extract_trc(trca_filter(x), grand_average(x))
    s = np.sin(2 * np.pi * 10 * np.arange(120) / 250)
    assert abs(pearson_corr(trc, s)) > 0.99


def test_input_checks():
    with pytest.raises(ValueError):
        trca_matrices(np.zeros((1, 3, 50)))
    with pytest.raises(ValueError):
        extract_trc(np.ones(3), np.zeros((4, 10)))
    with pytest.raises(ValueError):
        build_source_template([np.zeros(5), np.zeros(6)])
    assert build_source_template([np.zeros(5), np.ones(5)]).shape == (2, 5)
