"""Scaled log-MGF Gamma_n(t) = log E exp(t H_n) / n: values, bounds, monotonicity.

Bounds checked for every cell:

    t > 0:  log(1 - b0 + b0 e^t)  <=  Gamma_n(t)  <=  t
    t < 0:  log(1 - b0)           <=  Gamma_n(t)  <=  log(1 - b0 + b0 e^t) / n
    t = 0:  Gamma_n(0) = 0
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exact import ENUMERATE_MAX_N, BudgetError, ExactDistribution, exact_pmfs, log_mgf
from .kernel import Kernel
from .process import replicate_terminals

__all__ = [
    "HeavyTailWarning",
    "MCEstimate",
    "BoundCheck",
    "MonotoneCheck",
    "LimitEstimate",
    "MgfReport",
    "gamma_exact",
    "gamma_exact_sequence",
    "gamma_mc",
    "gamma_bounds",
    "check_bounds",
    "check_monotone",
    "estimate_limit",
    "build_report",
    "DEFAULT_T_GRID",
    "DEFAULT_N_LIST",
]

DEFAULT_T_GRID = (-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0)
DEFAULT_N_LIST = (1, 2, 4, 8, 12, 16, 20)
EXACT_TOL = 1e-10
MONOTONE_TOL = 1e-12


class HeavyTailWarning(RuntimeWarning):
    """Monte Carlo MGF estimate dominated by a few replicates."""


def _gamma_from_pmf(pmf: np.ndarray, n: int, t: float) -> float:
    if t == 0.0:
        return 0.0
    return log_mgf(ExactDistribution(n, pmf, "exact"), t) / n


def gamma_exact(kernel: Kernel, n: int, t: float) -> float:
    """Gamma_n(t) from the exact law (DP for finite memory, else enumeration)."""
    (values,), _ = gamma_exact_sequence(kernel, [t], n)
    return values[-1]


def gamma_exact_sequence(kernel: Kernel, ts, n_max: int) -> tuple[list[list[float]], str]:
    """Gamma_1..Gamma_{n_max} for each t in ``ts`` from a single exact pass.

    Returns ``(values, method)`` with ``values[k][i-1] = Gamma_i(ts[k])``.
    """
    pmfs, method = exact_pmfs(kernel, n_max)
    values = [[_gamma_from_pmf(p, i, float(t)) for i, p in enumerate(pmfs, start=1)] for t in ts]
    return values, method


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float  # standard error of the estimate of Gamma_n(t) (delta method)
    cv: float  # sample coefficient of variation of exp(t H_n)
    R: int


def gamma_mc(kernel: Kernel, n: int, t: float, R: int, seed: int, workers: int = 1) -> MCEstimate:
    """Monte Carlo Gamma_n(t) = log(mean exp(t H_n)) / n from R replicates.

    The weights are shifted by their maximum log before averaging, so deep
    negative t never underflows to -inf.  For t > 0 a ``HeavyTailWarning``
    is raised when the weights' coefficient of variation exceeds 5.
    """
    if t == 0.0:
        return MCEstimate(0.0, 0.0, 0.0, R)
    if R < 2:
        raise ValueError(f"need R >= 2 replicates, got {R}")
    h = replicate_terminals(kernel, n, R, seed, workers).H.astype(np.float64)
    logs = t * h
    top = logs.max()
    w = np.exp(logs - top)
    mean_w = w.mean()
    sd_w = w.std(ddof=1)
    cv = sd_w / mean_w
    if t > 0 and cv > 5.0:
        warnings.warn(
            f"exp(tH) has coefficient of variation {cv:.3g} > 5 at t={t}, n={n}; the estimate is unreliable",
            HeavyTailWarning,
            stacklevel=2,
        )
    estimate = (top + math.log(mean_w)) / n
    stderr = cv / math.sqrt(R) / n
    return MCEstimate(float(estimate), float(stderr), float(cv), R)


def gamma_bounds(kernel: Kernel, n: int, t: float) -> tuple[float, float]:
    b0 = kernel.baseline
    if t > 0:
        return math.log1p(b0 * math.expm1(t)), t
    if t < 0:
        return math.log1p(-b0), math.log1p(b0 * math.expm1(t)) / n
    return 0.0, 0.0


@dataclass(frozen=True)
class BoundCheck:
    lower: float
    upper: float
    value: float
    verdict: str  # "pass" | "fail" | "inconclusive"

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


def check_bounds(kernel: Kernel, n: int, t: float, value: float | None = None, stderr: float = 0.0) -> BoundCheck:
    """Place Gamma_n(t) inside its sandwich.

    ``value`` defaults to the exact Gamma_n(t).  With a Monte Carlo value the
    tolerance is 3 standard errors; if that band is wider than the gap
    between the bounds the verdict is "inconclusive".
    """
    if value is None:
        value = gamma_exact(kernel, n, t)
        stderr = 0.0
    lower, upper = gamma_bounds(kernel, n, t)
    tol = max(EXACT_TOL, 3.0 * stderr)
    if stderr > 0 and 3.0 * stderr >= upper - lower:
        verdict = "inconclusive"
    elif lower - tol <= value <= upper + tol:
        verdict = "pass"
    else:
        verdict = "fail"
    return BoundCheck(lower, upper, float(value), verdict)


@dataclass(frozen=True)
class MonotoneCheck:
    t: float
    sequence: list[float]
    strictly_decreasing: bool
    min_decrement: float
    note: str = ""


def check_monotone(kernel: Kernel, t: float, n_max: int) -> MonotoneCheck:
    """Exact Gamma_1..Gamma_{n_max}(t), t < 0, and whether it strictly decreases from n = 2 on.

    A step counts as a decrease only if it exceeds 1e-12, so round-off in a
    constant sequence is not mistaken for one.
    """
    if not t < 0:
        raise ValueError(f"monotonicity is only claimed for t < 0, got t={t}")
    if n_max < 2:
        raise ValueError(f"need n_max >= 2, got {n_max}")
    (seq,), _ = gamma_exact_sequence(kernel, [t], n_max)
    decrements = [seq[i - 1] - seq[i] for i in range(1, n_max)]
    strict = all(d > MONOTONE_TOL for d in decrements)
    note = ""
    if kernel.branching_ratio() == 0.0:
        note = "no positive lag weight: Gamma_n(t) is constant in n, so strict decrease cannot hold"
    return MonotoneCheck(float(t), seq, strict, min(decrements), note)


@dataclass(frozen=True)
class LimitEstimate:
    t: float
    gamma_limit: float  # Gamma_{n_max}(t), an upper estimate of the limit
    floor: float  # log(1 - b0), a lower bound for every n
    last_decrement: float  # Gamma_{n_max - 1} - Gamma_{n_max}
    n_max: int

    @property
    def bracket(self) -> tuple[float, float]:
        return self.floor, self.gamma_limit


def estimate_limit(kernel: Kernel, t: float, n_max: int) -> LimitEstimate:
    """Bracket lim Gamma_n(t) for t < 0 between log(1 - b0) and Gamma_{n_max}(t).

    No extrapolation is attempted; the last decrement is returned as a
    convergence diagnostic.
    """
    mono = check_monotone(kernel, t, n_max)
    seq = mono.sequence
    return LimitEstimate(
        t=float(t),
        gamma_limit=seq[-1],
        floor=math.log1p(-kernel.baseline),
        last_decrement=seq[-2] - seq[-1],
        n_max=n_max,
    )


@dataclass
class MgfReport:
    t_grid: list[float]
    n_list: list[int]
    gamma: list[list[float]]  # rows follow n_list, columns t_grid
    method: list[list[str]]
    lower: list[list[float]]
    upper: list[list[float]]
    verdict: list[list[str]]
    stderr: list[list[float]]
    monotone_ok: dict[float, bool] = field(default_factory=dict)
    limit: dict[float, LimitEstimate] = field(default_factory=dict)
    # strict decrease is only expected with some positive lag weight
    expect_monotone: bool = True

    @property
    def all_ok(self) -> bool:
        cells_ok = all(v != "fail" for row in self.verdict for v in row)
        return cells_ok and (not self.expect_monotone or all(self.monotone_ok.values()))

    def to_dict(self) -> dict:
        return {
            "t_grid": self.t_grid,
            "n_list": self.n_list,
            "gamma": self.gamma,
            "method": self.method,
            "lower": self.lower,
            "upper": self.upper,
            "verdict": self.verdict,
            "stderr": self.stderr,
            "monotone_ok": {repr(t): ok for t, ok in self.monotone_ok.items()},
            "gamma_limit_estimate": {
                repr(t): {
                    "gamma_limit": est.gamma_limit,
                    "bracket": list(est.bracket),
                    "last_decrement": est.last_decrement,
                    "n_max": est.n_max,
                }
                for t, est in self.limit.items()
            },
            "all_ok": self.all_ok,
        }

    def to_csv(self, fh=None, comments: tuple[str, ...] = ()) -> str | None:
        out = io.StringIO() if fh is None else fh
        for line in comments:
            out.write(f"# {line}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["n", "t", "gamma", "method", "lower", "upper", "ok"])
        for i, n in enumerate(self.n_list):
            for j, t in enumerate(self.t_grid):
                writer.writerow(
                    [n, repr(t), repr(self.gamma[i][j]), self.method[i][j],
                     repr(self.lower[i][j]), repr(self.upper[i][j]), self.verdict[i][j]]
                )
        return out.getvalue() if fh is None else None


def build_report(
    kernel: Kernel,
    t_grid=DEFAULT_T_GRID,
    n_list=DEFAULT_N_LIST,
    R: int = 10_000,
    seed: int = 0,
    workers: int = 1,
) -> MgfReport:
    """Fill the (n, t) grid exactly where possible and by Monte Carlo beyond.

    Monte Carlo cells with t > 0 are diagnostics only (verdict
    "diagnostic"): the estimator cannot resolve the bounds there.
    """
    t_grid = [float(t) for t in t_grid]
    n_list = sorted(int(n) for n in n_list)
    try:
        exact_max = n_list[-1]
        values, method = gamma_exact_sequence(kernel, t_grid, exact_max)
    except BudgetError:
        exact_ns = [n for n in n_list if n <= ENUMERATE_MAX_N]
        exact_max = exact_ns[-1] if exact_ns else 0
        values, method = gamma_exact_sequence(kernel, t_grid, exact_max) if exact_max else ([[] for _ in t_grid], "")

    rows: dict[str, list[list]] = {k: [] for k in ("gamma", "method", "lower", "upper", "verdict", "stderr")}
    for n in n_list:
        cells = {k: [] for k in rows}
        for j, t in enumerate(t_grid):
            lower, upper = gamma_bounds(kernel, n, t)
            if n <= exact_max:
                g, se, how = values[j][n - 1], 0.0, method
                verdict = check_bounds(kernel, n, t, g, 0.0).verdict
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", HeavyTailWarning)
                    est = gamma_mc(kernel, n, t, R, seed, workers)
                g, se, how = est.estimate, est.stderr, "monte_carlo"
                verdict = "diagnostic" if t > 0 else check_bounds(kernel, n, t, g, se).verdict
            for key, val in zip(("gamma", "method", "lower", "upper", "verdict", "stderr"), (g, how, lower, upper, verdict, se)):
                cells[key].append(val)
        for key in rows:
            rows[key].append(cells[key])

    report = MgfReport(t_grid, n_list, **rows, expect_monotone=kernel.branching_ratio() > 0.0)
    if exact_max >= 2:
        for j, t in enumerate(t_grid):
            if t < 0:
                seq = values[j][:exact_max]
                report.monotone_ok[t] = all(seq[i - 1] - seq[i] > MONOTONE_TOL for i in range(1, exact_max))
                report.limit[t] = LimitEstimate(t, seq[-1], math.log1p(-kernel.baseline), seq[-2] - seq[-1], exact_max)
    return report
