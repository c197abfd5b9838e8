import math
import warnings

import numpy as np
import pytest
from scipy import stats

from conftest import K0, K1, K2, K2T, K3, brute_force_mgf, brute_force_paths, brute_force_pmf
from dthp.exact import (
    BudgetError,
    corner_coefficients,
    dp_distribution,
    dp_pmfs,
    dp_truncated,
    enumerate_distribution,
    enumerate_pmfs,
    exact_distribution,
    exact_mgf,
    exact_pmfs,
    log_mgf,
    path_probabilities,
    verify_recursion,
)
from dthp.kernel import Kernel, KernelError
from dthp.process import decompose


@pytest.mark.parametrize("kernel", [K0, K1, K2, K3])
@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_enumeration_matches_brute_force(kernel, n):
    np.testing.assert_allclose(enumerate_distribution(kernel, n).pmf, brute_force_pmf(kernel, n), atol=1e-15)


def test_path_probabilities_are_lexicographic():
    probs = path_probabilities(K3, 7)
    expected = [p for _, p in brute_force_paths(K3, 7)]
    np.testing.assert_allclose(probs, expected, atol=1e-16)


def test_small_pmf_examples():
    np.testing.assert_allclose(enumerate_distribution(K1, 2).pmf, [0.49, 0.36, 0.15], atol=1e-15)
    np.testing.assert_allclose(dp_distribution(K1, 2).pmf, [0.49, 0.36, 0.15], atol=1e-15)
    for k in (K0, K1, K2, K3):
        np.testing.assert_allclose(enumerate_distribution(k, 1).pmf, [1 - k.baseline, k.baseline], atol=1e-16)


@pytest.mark.parametrize("n", [5, 100])
def test_pure_bernoulli_is_binomial(n):
    expected = stats.binom(n, 0.4).pmf(np.arange(n + 1))
    np.testing.assert_allclose(dp_distribution(K0, n).pmf, expected, atol=1e-14)
    if n <= 22:
        np.testing.assert_allclose(enumerate_distribution(K0, n).pmf, expected, atol=1e-14)


@pytest.mark.parametrize("kernel", [K0, K1, K3, Kernel.finite(0.1, [0.3, 0.0, 0.2])])
def test_dp_matches_enumeration_for_every_prefix(kernel):
    for a, b in zip(enumerate_pmfs(kernel, 16), dp_pmfs(kernel, 16)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_dp_long_horizon():
    dist = dp_distribution(K1, 200)
    assert dist.pmf.sum() == pytest.approx(1.0, abs=1e-12)
    # E H_n = n mu - E zeta_n / (1-B) and zeta is bounded by 0.2
    assert abs(dist.mean() - 0.375 * 200) <= 0.2 / 0.8 + 1e-9
    assert np.all(dist.pmf >= 0)


def test_mean_equals_expected_compensator():
    for kernel in (K1, K3):
        n = 10
        expected = math.fsum(p * decompose(kernel, bits).compensator[-1] for bits, p in brute_force_paths(kernel, n))
        assert enumerate_distribution(kernel, n).mean() == pytest.approx(expected, abs=1e-12)


def test_truncated_dp_bounds():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = dp_truncated(K2, 50, 12)
    assert d.tv_error_bound == pytest.approx(50 * 0.2 * 0.5**12, rel=1e-12)
    assert d.tv_error_bound == pytest.approx(2.44e-3, abs=5e-6)
    assert not d.vacuous
    with pytest.warns(UserWarning, match="vacuous"):
        d = dp_truncated(K2, 50, 1)
    assert d.tv_error_bound == pytest.approx(5.0, rel=1e-12)
    assert d.vacuous


@pytest.mark.parametrize("m", [4, 8, 10])
def test_truncation_self_consistency(m):
    coarse = dp_truncated(K2, 50, m)
    fine = dp_truncated(K2, 50, m + 4)
    tv = 0.5 * np.abs(coarse.pmf - fine.pmf).sum()
    assert tv <= coarse.tv_error_bound
    assert np.abs(coarse.pmf - fine.pmf).max() < coarse.tv_error_bound


def test_truncated_dp_matches_enumeration_of_geometric():
    exact = enumerate_distribution(K2, 14).pmf
    approx = dp_truncated(K2, 14, 13)
    assert 0.5 * np.abs(exact - approx.pmf).sum() <= approx.tv_error_bound + 1e-15


def test_method_guards():
    with pytest.raises(BudgetError):
        enumerate_distribution(K1, 23)
    with pytest.raises(BudgetError):
        dp_distribution(Kernel.finite(0.1, [0.01] * 17), 10)
    with pytest.raises(BudgetError):
        dp_distribution(Kernel.finite(0.1, [0.01] * 16), 2000)
    with pytest.raises(KernelError):
        dp_distribution(K2, 10)
    with pytest.raises(KernelError):
        dp_truncated(K1, 10, 4)
    with pytest.raises(KernelError):
        enumerate_distribution(Kernel.finite(0.6, [0.5]), 3)


def test_exact_pmfs_picks_method():
    assert exact_pmfs(K1, 30)[1] == "dp"
    assert exact_pmfs(K2, 10)[1] == "enumerate"
    assert exact_distribution(K1, 3).method == "dp"


def test_mgf_examples():
    d = enumerate_distribution(K1, 2)
    # 0.49 + 0.36/e + 0.15/e^2
    assert exact_mgf(d, -1.0) == pytest.approx(0.6427368913, abs=1e-10)
    assert exact_mgf(d, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert exact_mgf(d, 1.0) == pytest.approx(0.49 + 0.36 * math.e + 0.15 * math.e**2, abs=1e-14)
    d5 = enumerate_distribution(K0, 5)
    assert exact_mgf(d5, 1.0) == pytest.approx((0.6 + 0.4 * math.e) ** 5, rel=1e-13)


@pytest.mark.xfail(strict=True, reason="0.49 + 0.36/e + 0.15/e^2 is 0.6427369, not 0.6427625")
def test_mgf_literal_decimal():
    assert exact_mgf(enumerate_distribution(K1, 2), -1.0) == pytest.approx(0.6427625, abs=1e-7)


@pytest.mark.parametrize("kernel", [K1, K3])
@pytest.mark.parametrize("t", [-2.0, -0.3, 0.7, 2.0])
def test_mgf_matches_brute_force(kernel, t):
    assert exact_mgf(enumerate_distribution(kernel, 8), t) == pytest.approx(brute_force_mgf(kernel, 8, t), rel=1e-13)


def test_log_mgf_survives_large_arguments():
    d = dp_distribution(K1, 400)
    assert math.isfinite(log_mgf(d, -50.0))
    assert log_mgf(d, -50.0) == pytest.approx(400 * math.log(0.7), rel=1e-9)
    assert log_mgf(d, 3.0) > 0
    with pytest.raises(OverflowError):
        exact_mgf(d, 3.0)


def test_recursion_examples():
    check = verify_recursion(K1, 2, 1.0)
    assert check.lhs == pytest.approx(0.49 + 0.36 * math.e + 0.15 * math.e**2, abs=1e-14)
    assert check.rhs == pytest.approx(check.lhs, abs=1e-14)
    for k in (K0, K1, K2, K3):
        c = verify_recursion(k, 5, 0.0)
        assert c.lhs == pytest.approx(1.0, abs=1e-15) and c.rhs == pytest.approx(1.0, abs=1e-15)
    assert verify_recursion(K2.truncated(10), 12, -0.5).error <= 1e-10


@pytest.mark.parametrize("kernel", [K0, K1, K2T, K3])
def test_recursion_holds_across_grid(kernel):
    for n in range(2, 15, 3):
        for t in (-2.0, -1.0, 0.5, 2.0):
            assert verify_recursion(kernel, n, t).ok


def test_recursion_rejects_n1():
    with pytest.raises(ValueError):
        verify_recursion(K1, 1, 1.0)


def test_corner_examples():
    assert corner_coefficients(K1, 2) == pytest.approx((0.49, 0.15), abs=1e-15)
    assert corner_coefficients(K0, 4) == pytest.approx((0.6**4, 0.4**4), rel=1e-14)
    assert corner_coefficients(K1, 3)[1] == pytest.approx(0.075, abs=1e-15)


@pytest.mark.parametrize("kernel", [K1, K2, K3])
@pytest.mark.parametrize("n", [1, 3, 7, 12])
def test_corners_match_enumeration(kernel, n):
    pmf = enumerate_distribution(kernel, n).pmf
    c0, cn = corner_coefficients(kernel, n)
    assert c0 == pytest.approx(pmf[0], rel=1e-12)
    assert cn == pytest.approx(pmf[-1], rel=1e-12)


def test_distribution_json():
    d = dp_truncated(K2, 5, 3).to_dict()
    assert d["method"] == "dp_truncated" and len(d["pmf"]) == 6
    assert enumerate_distribution(K1, 2).to_dict()["tv_error_bound"] is None
