"""Exact law of H_n: path enumeration and a finite-memory dynamic program.

Paths are indexed lexicographically with xi_1 as the most significant bit,
so the prefix index ``k`` of length i-1 has xi_{i-l} in bit ``l-1``.  Given
that layout the lag sum of prefix ``k`` is ``sum_l beta_l * bit_{l-1}(k)``
regardless of its length, which lets one table serve every step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .kernel import Kernel, KernelError

__all__ = [
    "BudgetError",
    "ExactDistribution",
    "RecursionCheck",
    "enumerate_distribution",
    "enumerate_pmfs",
    "path_probabilities",
    "dp_distribution",
    "dp_pmfs",
    "dp_truncated",
    "exact_distribution",
    "exact_pmfs",
    "exact_mgf",
    "log_mgf",
    "verify_recursion",
    "corner_coefficients",
    "ENUMERATE_MAX_N",
    "DP_MAX_MEMORY",
]

ENUMERATE_MAX_N = 22
DP_MAX_MEMORY = 16
DP_BUDGET = 2_000_000_000


class BudgetError(ValueError):
    """Exact computation would exceed its work budget."""


@dataclass(frozen=True)
class ExactDistribution:
    n: int
    pmf: np.ndarray
    method: str
    tv_error_bound: float | None = None

    @property
    def vacuous(self) -> bool:
        """True when the truncation bound says nothing (>= 1)."""
        return self.tv_error_bound is not None and self.tv_error_bound >= 1.0

    def mean(self) -> float:
        return float(np.dot(np.arange(self.n + 1), self.pmf))

    def variance(self) -> float:
        r = np.arange(self.n + 1)
        m = np.dot(r, self.pmf)
        return float(np.dot((r - m) ** 2, self.pmf))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "pmf": [float(v) for v in self.pmf],
            "method": self.method,
            "tv_error_bound": self.tv_error_bound,
        }


def _lag_table(kernel: Kernel, length: int) -> np.ndarray:
    """Lag sum for every history index below 2**length."""
    table = np.zeros(1 << length)
    idx = np.arange(1 << length, dtype=np.int64)
    for lag in range(1, length + 1):
        b = kernel.beta(lag)
        if b:
            table += b * ((idx >> (lag - 1)) & 1)
    return table


def _check_enumerable(kernel: Kernel, n: int) -> None:
    kernel.require_stable()
    if not 1 <= n <= ENUMERATE_MAX_N:
        raise BudgetError(f"enumeration needs 1 <= n <= {ENUMERATE_MAX_N}, got {n}")


def _enumerate_steps(kernel: Kernel, n: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (probabilities of all 2**i prefixes, lag-sum table) for i = 1..n."""
    table = _lag_table(kernel, n - 1)
    probs = np.ones(1)
    for i in range(1, n + 1):
        lam = kernel.baseline + table[: probs.shape[0]]
        nxt = np.empty(2 * probs.shape[0])
        nxt[0::2] = probs * (1.0 - lam)
        nxt[1::2] = probs * lam
        probs = nxt
        yield probs, table


def _pmf_from_paths(probs: np.ndarray, n: int) -> np.ndarray:
    ones = np.bitwise_count(np.arange(probs.shape[0], dtype=np.uint64))
    # per-count sums keep lexicographic order and use numpy's pairwise summation
    return np.array([np.sum(probs[ones == r]) for r in range(n + 1)])


def path_probabilities(kernel: Kernel, n: int) -> np.ndarray:
    """Chain-rule probability of every length-n bit string, lexicographic order."""
    _check_enumerable(kernel, n)
    for probs, _ in _enumerate_steps(kernel, n):
        pass
    return probs


def enumerate_distribution(kernel: Kernel, n: int) -> ExactDistribution:
    """Law of H_n by summing all 2**n path probabilities."""
    probs = path_probabilities(kernel, n)
    return ExactDistribution(n, _pmf_from_paths(probs, n), "enumerate")


def enumerate_pmfs(kernel: Kernel, n: int) -> list[np.ndarray]:
    """Laws of H_1..H_n from one enumeration pass."""
    _check_enumerable(kernel, n)
    return [_pmf_from_paths(p, i) for i, (p, _) in enumerate(_enumerate_steps(kernel, n), start=1)]


def _dp_setup(kernel: Kernel, n: int):
    kernel.require_stable()
    if kernel.family != "finite":
        raise KernelError("dp_distribution needs a finite-memory kernel; use dp_truncated for geometric kernels")
    m = kernel.memory
    if m > DP_MAX_MEMORY:
        raise BudgetError(f"dp memory {m} exceeds the cap of {DP_MAX_MEMORY}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m_eff = max(m, 1)
    if n * n * (1 << m_eff) > DP_BUDGET:
        raise BudgetError(f"dp work n^2 * 2^m = {n * n * (1 << m_eff):.3g} exceeds the budget {DP_BUDGET:.3g}")
    weights = np.zeros(m_eff)
    weights[:m] = kernel.weights
    states = np.arange(1 << m_eff, dtype=np.int64)
    # state bit j-1 holds the event j steps back
    lam = np.full(states.shape[0], kernel.baseline)
    acc = np.zeros(states.shape[0])
    for j in range(1, m_eff + 1):
        acc += weights[j - 1] * ((states >> (j - 1)) & 1)
    lam += acc
    return m_eff, lam


def dp_pmfs(kernel: Kernel, n: int) -> Iterator[np.ndarray]:
    """Yield the law of H_i for i = 1..n via the (last m bits, count) chain."""
    m, lam = _dp_setup(kernel, n)
    size = 1 << m
    half = size >> 1
    stay_lo, stay_hi = (1.0 - lam[:half])[:, None], (1.0 - lam[half:])[:, None]
    jump_lo, jump_hi = lam[:half][:, None], lam[half:][:, None]
    prob = np.zeros((size, n + 1))
    prob[0, 0] = 1.0
    for i in range(1, n + 1):
        # only counts 0..i-1 are reachable before step i
        lo, hi = prob[:half, :i], prob[half:, :i]
        stay = lo * stay_lo + hi * stay_hi
        jump = lo * jump_lo + hi * jump_hi
        nxt = np.zeros((size, n + 1))
        nxt[0::2, :i] = stay
        nxt[1::2, 1 : i + 1] = jump
        prob = nxt
        yield prob[:, : i + 1].sum(axis=0)


def dp_distribution(kernel: Kernel, n: int) -> ExactDistribution:
    """Law of H_n for a finite-memory kernel, O(n^2 2^m) work."""
    for pmf in dp_pmfs(kernel, n):
        pass
    return ExactDistribution(n, pmf, "dp")


def dp_truncated(kernel: Kernel, n: int, m: int) -> ExactDistribution:
    """Law of H_n for a geometric kernel cut at lag m.

    Each step's conditional law moves by at most tail_sum(m+1) under the
    cut, so the total-variation error is at most n * tail_sum(m+1).
    """
    if kernel.family != "geometric":
        raise KernelError("dp_truncated is for geometric kernels; finite kernels use dp_distribution")
    if not 0 <= m <= DP_MAX_MEMORY:
        raise BudgetError(f"truncation memory must lie in [0, {DP_MAX_MEMORY}], got {m}")
    bound = n * kernel.tail_sum(m + 1)
    if bound >= 1.0:
        warnings.warn(f"truncation bound {bound:.3g} >= 1 is vacuous; increase the memory", stacklevel=2)
    dist = dp_distribution(kernel.truncated(m), n)
    return ExactDistribution(n, dist.pmf, "dp_truncated", bound)


def exact_pmfs(kernel: Kernel, n: int) -> tuple[list[np.ndarray], str]:
    """Laws of H_1..H_n with whichever exact method fits, plus the method tag."""
    if kernel.family == "finite" and kernel.memory <= DP_MAX_MEMORY:
        try:
            return list(dp_pmfs(kernel, n)), "dp"
        except BudgetError:
            if n > ENUMERATE_MAX_N:
                raise
    return enumerate_pmfs(kernel, n), "enumerate"


def exact_distribution(kernel: Kernel, n: int) -> ExactDistribution:
    pmfs, method = exact_pmfs(kernel, n)
    return ExactDistribution(n, pmfs[-1], method)


def log_mgf(dist: ExactDistribution, t: float) -> float:
    """log E exp(t H_n) by log-sum-exp over the support."""
    if t == 0.0:
        return 0.0
    mask = dist.pmf > 0
    logs = np.log(dist.pmf[mask]) + t * np.arange(dist.n + 1)[mask]
    top = logs.max()
    return float(top + math.log(np.sum(np.exp(logs - top))))


def exact_mgf(dist: ExactDistribution, t: float) -> float:
    if abs(t) * dist.n <= 500:
        return float(np.sum(dist.pmf * np.exp(t * np.arange(dist.n + 1))))
    lm = log_mgf(dist, t)
    if lm > 709.0:
        raise OverflowError(f"E exp(tH) = exp({lm:.1f}) overflows; use log_mgf")
    return math.exp(lm)


@dataclass(frozen=True)
class RecursionCheck:
    lhs: float
    rhs: float
    error: float

    @property
    def ok(self) -> bool:
        return self.error <= 1e-10 * max(1.0, abs(self.lhs))


def verify_recursion(kernel: Kernel, n: int, t: float) -> RecursionCheck:
    """Compare E e^{tH_n} with E e^{tH_{n-1}} + (e^t - 1) E[e^{tH_{n-1}} lambda_n]."""
    if n < 2:
        raise ValueError(f"recursion needs n >= 2, got {n}")
    _check_enumerable(kernel, n)
    steps = _enumerate_steps(kernel, n)
    for i, (probs, table) in enumerate(steps, start=1):
        if i == n - 1:
            prev = probs
        if i == n:
            last = probs
    ones_prev = np.bitwise_count(np.arange(prev.shape[0], dtype=np.uint64)).astype(np.float64)
    ones_last = np.bitwise_count(np.arange(last.shape[0], dtype=np.uint64)).astype(np.float64)
    lhs = float(np.sum(last * np.exp(t * ones_last)))
    weighted = prev * np.exp(t * ones_prev)
    lam_next = kernel.baseline + table[: prev.shape[0]]
    rhs = float(np.sum(weighted) + math.expm1(t) * np.sum(weighted * lam_next))
    return RecursionCheck(lhs, rhs, abs(lhs - rhs))


def corner_coefficients(kernel: Kernel, n: int) -> tuple[float, float]:
    """P(H_n = 0) and P(H_n = n) in closed form.

    The all-ones path at step k has seen k-1 events, so
    P(H_n = n) = prod_{k=1}^{n} (beta_0 + beta_1 + ... + beta_{k-1}).
    """
    kernel.require_stable()
    c0 = (1.0 - kernel.baseline) ** n
    cn = 1.0
    level = kernel.baseline
    for k in range(1, n + 1):
        if k > 1:
            level += kernel.beta(k - 1)
        cn *= level
    return c0, cn
