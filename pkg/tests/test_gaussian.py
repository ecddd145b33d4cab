import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from maskcond.errors import DegenerateConditioningError, ShapeError
from maskcond.gaussian import (
    Gaussian,
    conditional_entropy,
    conditional_moments,
    differential_entropy,
    entropy_of_covariance,
    log_density_conditional,
    log_density_joint,
    marginal,
    mse_lower_bound,
    mutual_information,
    reference_gaussian,
    rho_gaussian,
    sample_conditional,
    sample_joint,
)
from maskcond.masks import enumerate_mask_pairs, pair_from_bits


def test_reference_moments():
    g = reference_gaussian()
    assert np.array_equal(g.mu, [2.0, 4.0, 6.0])
    expected = np.array([
        [1.0, 0.5, 0.25],
        [0.5, 1.0, 0.0],
        [0.25, 0.0, 1.0],
    ])
    assert np.array_equal(g.sigma, expected)
    assert abs(np.linalg.det(g.sigma) - 0.6875) < 1e-14


def test_rho_structure():
    g = rho_gaussian(0.3)
    assert g.sigma[0, 1] == 0.3
    assert g.sigma[0, 2] == 0.09
    assert g.sigma[1, 2] == 0.0


def test_gaussian_validation():
    with pytest.raises(ShapeError):
        Gaussian(np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ShapeError):
        Gaussian(np.zeros(2), np.eye(3))
    with pytest.raises(Exception):
        Gaussian(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_conditional_hand_value_one_available():
    # Condition on x1 = 2 (its mean): mu unchanged, Schur complement
    # S_rr - S_ra S_aa^-1 S_ar with S_aa = 1.
    g = reference_gaussian()
    cm = conditional_moments(g, pair_from_bits("100", "011"), [2.0])
    assert np.allclose(cm.mu, [4.0, 6.0], atol=1e-12)
    expected = np.array([[0.75, -0.125], [-0.125, 0.9375]])
    assert np.allclose(cm.sigma, expected, atol=1e-12)
    assert list(cm.requested_idx) == [1, 2]
    assert list(cm.available_idx) == [0]


def test_conditional_hand_value_shifted():
    # Condition on x2 = 5: mu1 = 2 + 0.5 (5 - 4) = 2.5, mu3 unaffected.
    g = reference_gaussian()
    cm = conditional_moments(g, pair_from_bits("010", "101"), [5.0])
    assert np.allclose(cm.mu, [2.5, 6.0], atol=1e-12)
    expected = np.array([[0.75, 0.25], [0.25, 1.0]])
    assert np.allclose(cm.sigma, expected, atol=1e-12)


def test_conditional_two_available():
    # Cross-check the gain matrix against a direct inverse.
    g = reference_gaussian()
    cm = conditional_moments(g, pair_from_bits("011", "100"), [4.5, 5.0])
    s_aa = g.sigma[1:, 1:]
    s_ra = g.sigma[0:1, 1:]
    gain = s_ra @ np.linalg.inv(s_aa)
    mu_ref = g.mu[0] + gain @ (np.array([4.5, 5.0]) - g.mu[1:])
    sig_ref = g.sigma[0, 0] - gain @ s_ra.T
    assert abs(cm.mu[0] - mu_ref[0]) < 1e-12
    assert abs(cm.sigma[0, 0] - sig_ref[0, 0]) < 1e-12


def test_conditional_empty_request_and_empty_available():
    g = reference_gaussian()
    cm = conditional_moments(g, pair_from_bits("100", "000"), [2.0])
    assert cm.mu.size == 0 and cm.sigma.shape == (0, 0)
    cm2 = conditional_moments(g, pair_from_bits("000", "110"), [])
    assert np.allclose(cm2.mu, [2.0, 4.0])
    assert np.allclose(cm2.sigma, g.sigma[:2, :2])


def test_conditional_rejects_wrong_value_count():
    g = reference_gaussian()
    with pytest.raises(ShapeError):
        conditional_moments(g, pair_from_bits("110", "001"), [1.0])


def test_degenerate_conditioning_detected():
    # Requesting a near-perfectly correlated pair leaves a conditional
    # covariance whose smallest pivot sits far below working precision,
    # which the oracle must flag rather than silently factor.
    eps = 1e-12
    sigma = np.array([
        [1.0, 1.0 - eps, 0.0],
        [1.0 - eps, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    g = Gaussian(np.zeros(3), sigma)
    with pytest.raises(DegenerateConditioningError):
        conditional_moments(g, pair_from_bits("001", "110"), [0.0])
    # Conditioning on the correlated pair itself is numerically benign: the
    # requested coordinate is independent of it, so no flag is raised.
    cm = conditional_moments(g, pair_from_bits("110", "001"), [0.0, 0.0])
    assert np.allclose(cm.sigma, [[1.0]], atol=1e-9)


def test_entropy_hand_value():
    # h = 0.5 log((2 pi e)^3 det) with det = 0.6875.
    g = reference_gaussian()
    h = differential_entropy(g)
    ref = 0.5 * np.log(((2 * np.pi * np.e) ** 3) * 0.6875)
    assert abs(h - ref) < 1e-12
    assert abs(h - 4.069468874893313) < 1e-12


def test_entropy_matches_scipy():
    g = reference_gaussian()
    ref = scipy.stats.multivariate_normal(mean=g.mu, cov=g.sigma).entropy()
    assert abs(differential_entropy(g) - ref) < 1e-12


def test_entropy_chain_rule_all_splits():
    # h(X) = h(X_a) + h(X_r | X_a) for every complementary split.
    g = reference_gaussian()
    h_joint = differential_entropy(g)
    for pair in enumerate_mask_pairs(3, include_empty_available=False):
        if pair.a.sum() + pair.r.sum() != 3:
            continue
        idx_a = np.flatnonzero(pair.a)
        h_a = entropy_of_covariance(g.sigma[np.ix_(idx_a, idx_a)])
        h_r_given_a = conditional_entropy(g, pair)
        assert abs(h_joint - (h_a + h_r_given_a)) < 1e-12


def test_conditional_entropy_empty_request_warns():
    g = reference_gaussian()
    with pytest.warns(UserWarning):
        h = conditional_entropy(g, pair_from_bits("110", "000"))
    assert h == 0.0


def test_mutual_information_properties():
    g = reference_gaussian()
    for pair in enumerate_mask_pairs(3):
        assert mutual_information(g, pair) >= -1e-12
    # Coordinates 2 and 3 are uncorrelated, hence independent.
    assert abs(mutual_information(g, pair_from_bits("010", "001"))) < 1e-12
    # Coordinates 1 and 2 are correlated.
    assert mutual_information(g, pair_from_bits("100", "010")) > 0.1


def test_log_density_joint_matches_scipy():
    g = reference_gaussian()
    rng = np.random.default_rng(3)
    ref = scipy.stats.multivariate_normal(mean=g.mu, cov=g.sigma)
    for _ in range(10):
        x = rng.standard_normal(3) * 2 + g.mu
        assert abs(log_density_joint(g, x) - ref.logpdf(x)) < 1e-10


def test_log_density_conditional_matches_bayes():
    # log p(x_r | x_a) = log p(x_joint) - log p(x_a) for complementary splits.
    g = reference_gaussian()
    rng = np.random.default_rng(4)
    for bits_a, bits_r in (("100", "011"), ("110", "001"), ("010", "101")):
        pair = pair_from_bits(bits_a, bits_r)
        idx_a = np.flatnonzero(pair.a)
        idx_r = np.flatnonzero(pair.r)
        for _ in range(5):
            x = rng.standard_normal(3) + g.mu
            lhs = log_density_conditional(g, pair, x[idx_a], x[idx_r])
            marg = marginal(g, idx_a)
            rhs = log_density_joint(g, x) - log_density_joint(marg, x[idx_a])
            assert abs(lhs - rhs) < 1e-10


def test_sampling_deterministic_and_correct_moments():
    g = reference_gaussian()
    x1 = sample_joint(g, 1000, 5)
    x2 = sample_joint(g, 1000, 5)
    assert np.array_equal(x1, x2)
    x3 = sample_joint(g, 1000, 6)
    assert not np.array_equal(x1, x3)

    big = sample_joint(g, 200000, 7)
    assert np.allclose(big.mean(axis=0), g.mu, atol=0.02)
    assert np.allclose(np.cov(big.T), g.sigma, atol=0.02)


def test_conditional_sampling_moments():
    g = reference_gaussian()
    pair = pair_from_bits("100", "011")
    cm = conditional_moments(g, pair, [3.0])
    xs = sample_conditional(g, pair, [3.0], 200000, 11)
    assert xs.shape == (200000, 2)
    assert np.allclose(xs.mean(axis=0), cm.mu, atol=0.02)
    assert np.allclose(np.cov(xs.T), cm.sigma, atol=0.02)


def test_sample_conditional_empty_request():
    g = reference_gaussian()
    xs = sample_conditional(g, pair_from_bits("111", "000"), [2.0, 4.0, 6.0], 5, 0)
    assert xs.shape == (5, 0)


def test_sample_rejects_negative_count():
    g = reference_gaussian()
    with pytest.raises(ShapeError):
        sample_joint(g, -1, 0)


def test_rejection_sampling_agreement():
    # Independent construction of the conditional law: slice joint samples
    # near the conditioning value and compare moments.
    g = reference_gaussian()
    pair = pair_from_bits("100", "011")
    x0, width = 2.0, 0.05
    joint = sample_joint(g, 2000000, 13)
    keep = np.abs(joint[:, 0] - x0) < width
    sliced = joint[keep][:, 1:]
    cm = conditional_moments(g, pair, [x0])
    assert sliced.shape[0] > 10000
    assert np.allclose(sliced.mean(axis=0), cm.mu, atol=0.05)
    assert np.allclose(np.cov(sliced.T), cm.sigma, atol=0.1)


def test_mse_lower_bound_values():
    g = reference_gaussian()
    # trace of the (100, 011) conditional covariance: 0.75 + 0.9375.
    assert abs(mse_lower_bound(g, pair_from_bits("100", "011")) - 1.6875) < 1e-12
    assert mse_lower_bound(g, pair_from_bits("110", "000")) == 0.0


@settings(deadline=None, max_examples=30)
@given(st.floats(min_value=-0.7, max_value=0.7), st.integers(min_value=0, max_value=100))
def test_conditional_moments_reduce_entropy(rho, seed):
    # Conditioning never increases entropy; strict when correlated.
    g = rho_gaussian(rho)
    pair = pair_from_bits("100", "011")
    rng = np.random.default_rng(seed)
    cm = conditional_moments(g, pair, [float(rng.normal(2.0, 1.0))])
    h_cond = entropy_of_covariance(cm.sigma)
    h_marg = entropy_of_covariance(g.sigma[1:, 1:])
    assert h_cond <= h_marg + 1e-12
