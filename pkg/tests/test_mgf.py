import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import K0, K1, K2, K2T, K3, brute_force_mgf
from dthp.mgf import (
    HeavyTailWarning,
    build_report,
    check_bounds,
    check_monotone,
    estimate_limit,
    gamma_bounds,
    gamma_exact,
    gamma_exact_sequence,
    gamma_mc,
)

# from the n = 2 law [0.49, 0.36, 0.15]
GAMMA2_K1_NEG1 = 0.5 * math.log(0.49 + 0.36 * math.exp(-1) + 0.15 * math.exp(-2))
GAMMA2_K1_POS1 = 0.5 * math.log(0.49 + 0.36 * math.e + 0.15 * math.e**2)


def test_two_step_values():
    assert gamma_exact(K1, 2, -1.0) == pytest.approx(GAMMA2_K1_NEG1, abs=1e-14)
    assert gamma_exact(K1, 2, 1.0) == pytest.approx(GAMMA2_K1_POS1, abs=1e-14)
    assert GAMMA2_K1_NEG1 == pytest.approx(-0.2210099139, abs=1e-10)
    assert GAMMA2_K1_POS1 == pytest.approx(0.4733012996, abs=1e-10)


@pytest.mark.xfail(strict=True, reason="-0.221013 is 3.1e-6 away from the value implied by the n=2 law")
def test_two_step_literal_negative():
    assert gamma_exact(K1, 2, -1.0) == pytest.approx(-0.221013, abs=1e-6)


@pytest.mark.xfail(strict=True, reason="0.473305 is 3.9e-6 away from the value implied by the n=2 law")
def test_two_step_literal_positive():
    assert gamma_exact(K1, 2, 1.0) == pytest.approx(0.473305, abs=1e-6)


@pytest.mark.parametrize("t", [-2.0, -0.5, 0.5, 2.0])
def test_pure_bernoulli_gamma_constant_in_n(t):
    expected = math.log(0.6 + 0.4 * math.exp(t))
    (seq,), _ = gamma_exact_sequence(K0, [t], 30)
    np.testing.assert_allclose(seq, expected, rtol=1e-12)


@pytest.mark.parametrize("kernel", [K0, K1, K2, K3])
def test_gamma_at_zero(kernel):
    assert gamma_exact(kernel, 7, 0.0) == 0.0
    assert gamma_mc(kernel, 7, 0.0, 5, 1).estimate == 0.0


@pytest.mark.parametrize("kernel", [K1, K2, K3])
def test_gamma_matches_brute_force(kernel):
    for t in (-1.5, 0.8):
        assert gamma_exact(kernel, 9, t) == pytest.approx(math.log(brute_force_mgf(kernel, 9, t)) / 9, abs=1e-13)


def test_mc_pure_bernoulli():
    est = gamma_mc(K0, 100, -0.5, 10_000, 4)
    assert abs(est.estimate - math.log(0.6 + 0.4 * math.exp(-0.5))) <= 3 * est.stderr
    assert est.stderr > 0


def test_mc_against_exact():
    est = gamma_mc(K1, 18, -1.0, 100_000, 8)
    assert abs(est.estimate - gamma_exact(K1, 18, -1.0)) <= 3 * est.stderr


def test_mc_deep_negative_t_is_finite():
    est = gamma_mc(K1, 400, -200.0, 200, 3)
    assert math.isfinite(est.estimate)
    assert est.estimate < math.log(0.7) + 1.0


def test_mc_heavy_tail_warning():
    with pytest.warns(HeavyTailWarning):
        gamma_mc(K1, 200, 3.0, 300, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gamma_mc(K1, 200, -3.0, 300, 5)


def test_mc_is_reproducible():
    assert gamma_mc(K2, 60, -0.5, 500, 9) == gamma_mc(K2, 60, -0.5, 500, 9, workers=3)


def test_bounds_examples():
    c = check_bounds(K1, 2, -1.0)
    assert (c.lower, c.upper) == pytest.approx((-0.35667, -0.10514), abs=1e-5)
    assert c.value == pytest.approx(-0.22101, abs=1e-5)
    assert c.ok
    c = check_bounds(K1, 2, 1.0)
    assert (c.lower, c.upper) == pytest.approx((math.log(0.7 + 0.3 * math.e), 1.0), abs=1e-15)
    assert c.lower == pytest.approx(0.415735, abs=1e-6)
    assert c.value == pytest.approx(0.47330, abs=1e-5)
    assert c.ok
    c = check_bounds(K0, 10, 2.0)
    assert c.value == pytest.approx(c.lower, abs=1e-14)
    assert c.ok


def test_bounds_verdicts_for_estimates():
    lower, upper = gamma_bounds(K1, 30, -1.0)
    assert check_bounds(K1, 30, -1.0, value=lower - 0.1, stderr=1e-4).verdict == "fail"
    assert check_bounds(K1, 30, -1.0, value=lower - 0.1, stderr=upper - lower).verdict == "inconclusive"
    assert check_bounds(K1, 30, -1.0, value=0.5 * (lower + upper), stderr=1e-4).verdict == "pass"


@settings(max_examples=40, deadline=None)
@given(
    kernel=st.sampled_from([K0, K1, K2T, K3]),
    n=st.integers(1, 20),
    t=st.floats(-3.0, 3.0).filter(lambda t: abs(t) > 1e-3),
)
def test_sandwich_holds(kernel, n, t):
    assert check_bounds(kernel, n, t).ok


@settings(max_examples=30, deadline=None)
@given(kernel=st.sampled_from([K0, K1, K2T, K3]), n=st.integers(1, 20), t=st.floats(-3.0, 3.0))
def test_gamma_convex_in_t(kernel, n, t):
    h = 1e-2
    vals = [gamma_exact(kernel, n, t + k * h) for k in (-1, 0, 1)]
    assert vals[0] - 2 * vals[1] + vals[2] >= -1e-9


def test_monotone_examples():
    m = check_monotone(K1, -1.0, 20)
    assert m.sequence[0] == pytest.approx(math.log(0.7 + 0.3 * math.exp(-1)), abs=1e-14)
    assert m.sequence[0] > m.sequence[1]
    assert m.strictly_decreasing
    assert check_monotone(K2T, -0.5, 20).strictly_decreasing
    flat = check_monotone(K0, -1.0, 20)
    assert not flat.strictly_decreasing
    assert "constant" in flat.note


def test_monotone_argument_checks():
    with pytest.raises(ValueError):
        check_monotone(K1, 0.5, 10)
    with pytest.raises(ValueError):
        check_monotone(K1, -0.5, 1)


def test_limit_estimates():
    flat = estimate_limit(K0, -1.0, 10)
    assert flat.gamma_limit == pytest.approx(math.log(0.6 + 0.4 * math.exp(-1)), rel=1e-12)
    assert flat.last_decrement == pytest.approx(0.0, abs=1e-14)
    est = estimate_limit(K1, -1.0, 20)
    assert math.log(0.7) <= est.gamma_limit <= GAMMA2_K1_NEG1
    assert est.bracket == pytest.approx((math.log(0.7), est.gamma_limit), abs=1e-15)
    assert 0 < estimate_limit(K2T, -2.0, 18).last_decrement < 0.01


def test_report_exact_grid():
    r = build_report(K1)
    assert r.all_ok
    assert {m for row in r.method for m in row} == {"dp"}
    assert set(r.monotone_ok) == {-2.0, -1.0, -0.5, -0.1}
    d = json.loads(json.dumps(r.to_dict()))
    assert d["all_ok"] is True
    lines = r.to_csv(comments=("config: {}",)).splitlines()
    assert lines[1] == "n,t,gamma,method,lower,upper,ok"
    assert len(lines) == 2 + len(r.n_list) * len(r.t_grid)


def test_report_pure_bernoulli_is_ok_without_monotonicity():
    r = build_report(K0, t_grid=[-1.0, 1.0], n_list=[2, 5])
    assert not any(r.monotone_ok.values())
    assert r.all_ok


def test_report_falls_back_to_monte_carlo():
    r = build_report(K2, t_grid=[-1.0, 1.0], n_list=[4, 30], R=2000, seed=1)
    assert r.method[0] == ["enumerate", "enumerate"]
    assert r.method[1] == ["monte_carlo", "monte_carlo"]
    assert r.verdict[1][1] == "diagnostic"
    assert r.verdict[1][0] in ("pass", "inconclusive")
    assert r.stderr[1][0] > 0
