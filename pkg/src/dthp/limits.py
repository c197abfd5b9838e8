"""Monte Carlo checks of the limit laws for H_n and its compensator.

Gates (all recomputable from the stored numbers):

* LLN: |mean(X_n/n) - mu| <= 4 sd/sqrt(nR) + 1e-9, with sd = sigma for the
  count and B*sigma for the compensator; plus one long path whose running
  deviation max_{n/2 <= i <= n} |X_i/i - mu| stays below 8 sigma / sqrt(n/2).
* CLT: standardized z = (X_n - n mu)/sqrt(n) has sample variance within 10%
  of the theoretical one, |mean z| <= 4 sqrt(var/R) and a Kolmogorov-Smirnov
  distance to Normal(0, var) of at most 1.95/sqrt(R) + 0.01.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import Kernel, KernelError, check_assumptions, limit_constants
from .process import replicate_terminals, simulate
from .rng import derive_seed

__all__ = [
    "LimitReport",
    "ZetaReport",
    "MartingaleReport",
    "normal_cdf",
    "ks_statistic",
    "lln_experiment",
    "clt_experiment",
    "running_deviation",
    "zeta_bound_check",
    "martingale_check",
    "TARGETS",
]

TARGETS = ("process", "compensator")
FLOAT_SLACK = 1e-9
VAR_REL_TOL = 0.10
KS_SCALE = 1.95
KS_ALLOWANCE = 0.01
MIN_CLT_REPLICATES = 100

_erfc = np.frompyfunc(math.erfc, 1, 1)


def normal_cdf(x, var: float = 1.0) -> np.ndarray:
    """Normal(0, var) distribution function via the libm erfc (relative error ~1e-16)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * _erfc(-x / math.sqrt(2.0 * var)).astype(np.float64)


def ks_statistic(sample, var: float = 1.0) -> float:
    """sup_x |F_R(x) - Phi(x / sqrt(var))| for the empirical CDF F_R of ``sample``."""
    z = np.sort(np.asarray(sample, dtype=np.float64))
    r = z.shape[0]
    cdf = normal_cdf(z, var)
    above = np.arange(1, r + 1) / r - cdf
    below = cdf - np.arange(r) / r
    return float(max(above.max(), below.max()))


@dataclass
class LimitReport:
    kind: str  # "lln" | "clt"
    target: str
    n: int
    R: int
    seed: int
    empirical_mean: float
    theoretical_mean: float
    empirical_var: float
    theoretical_var: float
    ks_statistic: float
    checks: dict[str, bool]
    diagnostics: dict[str, float] = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "n": self.n,
            "R": self.R,
            "seed": self.seed,
            "empirical_mean": self.empirical_mean,
            "theoretical_mean": self.theoretical_mean,
            "empirical_var": self.empirical_var,
            "theoretical_var": self.theoretical_var,
            "ks_statistic": self.ks_statistic,
            "checks": dict(self.checks),
            "diagnostics": dict(self.diagnostics),
        }

    def samples_csv(self, comments: tuple[str, ...] = ()) -> str:
        """Standardized samples, one column ``z``."""
        out = io.StringIO()
        for line in comments:
            out.write(f"# {line}\n")
        out.write("z\n")
        for v in self.samples:
            out.write(f"{v:.17g}\n")
        return out.getvalue()


def _prepare(kernel: Kernel, target: str):
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")
    report = check_assumptions(kernel)
    if not report.all_pass:
        raise KernelError("kernel fails the summability assumptions required by the limit laws")
    return limit_constants(kernel)


def _terminal_values(kernel: Kernel, n: int, R: int, seed: int, target: str, workers: int) -> np.ndarray:
    stats = replicate_terminals(kernel, n, R, seed, workers)
    return stats.H.astype(np.float64) if target == "process" else stats.Lambda


def running_deviation(kernel: Kernel, n: int, seed: int, target: str = "process") -> float:
    """max over i in [n/2, n] of |X_i / i - mu| along one path."""
    mu = limit_constants(kernel).mu
    path = simulate(kernel, n, seed)
    series = path.counts if target == "process" else path.compensator
    lo = max(n // 2, 1)
    i = np.arange(lo, n + 1)
    return float(np.max(np.abs(series[lo - 1 :] / i - mu)))


def lln_experiment(
    kernel: Kernel, n: int, R: int, seed: int, target: str = "process", workers: int = 1
) -> LimitReport:
    """Law of large numbers for H_n/n or Lambda_n/n over R replicates plus one long path."""
    const = _prepare(kernel, target)
    if n < 2 or R < 1:
        raise ValueError(f"need n >= 2 and R >= 1, got n={n}, R={R}")
    sd = math.sqrt(const.sigma2) * (1.0 if target == "process" else const.branching)
    x = _terminal_values(kernel, n, R, seed, target, workers)
    ratio = x / n
    z = (x - n * const.mu) / math.sqrt(n)
    emp_mean = float(ratio.mean())
    mean_tol = 4.0 * sd / math.sqrt(n * R) + FLOAT_SLACK
    # the trajectory path uses the stream right after the R replicates
    traj_seed = derive_seed(seed, R)
    traj = running_deviation(kernel, n, traj_seed, target)
    traj_tol = 8.0 * sd / math.sqrt(n / 2) + FLOAT_SLACK
    return LimitReport(
        kind="lln",
        target=target,
        n=n,
        R=R,
        seed=seed,
        empirical_mean=emp_mean,
        theoretical_mean=const.mu,
        empirical_var=float(z.var(ddof=1)) if R > 1 else 0.0,
        theoretical_var=sd * sd,
        ks_statistic=ks_statistic(z, sd * sd) if sd > 0 else 0.0,
        checks={
            "mean": abs(emp_mean - const.mu) <= mean_tol,
            "trajectory": traj <= traj_tol,
        },
        diagnostics={
            "mean_tolerance": mean_tol,
            "mean_abs_deviation": float(np.mean(np.abs(ratio - const.mu))),
            "fraction_within_3sd": float(np.mean(np.abs(ratio - const.mu) <= 3.0 * sd / math.sqrt(n) + FLOAT_SLACK)),
            "trajectory_deviation": traj,
            "trajectory_tolerance": traj_tol,
            "trajectory_seed": traj_seed,
        },
        samples=z,
    )


def clt_experiment(
    kernel: Kernel, n: int, R: int, seed: int, target: str = "process", workers: int = 1
) -> LimitReport:
    """Central limit theorem for (X_n - n mu)/sqrt(n), X = H or Lambda."""
    const = _prepare(kernel, target)
    if R < MIN_CLT_REPLICATES:
        raise ValueError(f"need R >= {MIN_CLT_REPLICATES} for a meaningful KS threshold, got {R}")
    var = const.sigma2 if target == "process" else const.compensator_sigma2
    if var == 0.0:
        raise ValueError("limit variance is zero (no lag weights): the compensator is deterministic")
    x = _terminal_values(kernel, n, R, seed, target, workers)
    z = (x - n * const.mu) / math.sqrt(n)
    emp_mean = float(z.mean())
    emp_var = float(z.var(ddof=1))
    ks = ks_statistic(z, var)
    mean_tol = 4.0 * math.sqrt(var / R)
    ks_tol = KS_SCALE / math.sqrt(R) + KS_ALLOWANCE
    return LimitReport(
        kind="clt",
        target=target,
        n=n,
        R=R,
        seed=seed,
        empirical_mean=emp_mean,
        theoretical_mean=0.0,
        empirical_var=emp_var,
        theoretical_var=var,
        ks_statistic=ks,
        checks={
            "variance": abs(emp_var - var) <= VAR_REL_TOL * var,
            "mean": abs(emp_mean) <= mean_tol,
            "ks": ks <= ks_tol,
        },
        diagnostics={
            "mu": const.mu,
            "mean_tolerance": mean_tol,
            "ks_tolerance": ks_tol,
            "variance_relative_error": (emp_var - var) / var,
        },
        samples=z,
    )


@dataclass
class ZetaReport:
    n: int
    R: int
    seed: int
    min_zeta: float
    max_zeta: float
    bound: float
    violations: int
    mean_terminal_over_sqrt_n: float
    distinct_values: list[float] | None  # small value sets only (<= 16 values)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "R": self.R,
            "seed": self.seed,
            "min_zeta": self.min_zeta,
            "max_zeta": self.max_zeta,
            "bound": self.bound,
            "violations": self.violations,
            "mean_terminal_zeta_over_sqrt_n": self.mean_terminal_over_sqrt_n,
            "distinct_values": self.distinct_values,
            "checks": {"zeta_bound": self.passed},
        }


def zeta_bound_check(kernel: Kernel, n: int, R: int, seed: int) -> ZetaReport:
    """Count steps with zeta_i outside [0, sum_j j*beta_j] over R full paths."""
    const = _prepare(kernel, "process")
    bound = const.first_moment
    lo, hi, violations = math.inf, -math.inf, 0
    terminal = np.empty(R)
    values: set[float] | None = set()
    for r in range(R):
        zeta = simulate(kernel, n, derive_seed(seed, r)).zeta
        violations += int(np.count_nonzero((zeta < 0.0) | (zeta > bound)))
        lo, hi = min(lo, float(zeta.min())), max(hi, float(zeta.max()))
        terminal[r] = zeta[-1]
        if values is not None:
            values.update(np.unique(zeta).tolist())
            if len(values) > 16:
                values = None
    return ZetaReport(
        n=n,
        R=R,
        seed=seed,
        min_zeta=lo,
        max_zeta=hi,
        bound=bound,
        violations=violations,
        mean_terminal_over_sqrt_n=float(terminal.mean() / math.sqrt(n)),
        distinct_values=sorted(values) if values is not None else None,
    )


@dataclass
class MartingaleReport:
    n: int
    R: int
    seed: int
    mean_Mn: float
    bound: float
    max_abs_Mn_over_n: float
    max_doob_residual: float

    @property
    def passed(self) -> bool:
        return abs(self.mean_Mn) <= self.bound and self.max_doob_residual == 0.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "R": self.R,
            "seed": self.seed,
            "mean_Mn": self.mean_Mn,
            "bound": self.bound,
            "max_abs_Mn_over_n": self.max_abs_Mn_over_n,
            "max_doob_residual": self.max_doob_residual,
            "checks": {"mean_zero": abs(self.mean_Mn) <= self.bound, "doob_identity": self.max_doob_residual == 0.0},
        }


def martingale_check(kernel: Kernel, n: int, R: int, seed: int, workers: int = 1) -> MartingaleReport:
    """E M_n = 0: increments are bounded by 1, so var(M_n) <= n and the gate is 4 sqrt(n/R)."""
    _prepare(kernel, "process")
    stats = replicate_terminals(kernel, n, R, seed, workers)
    residual = stats.M + stats.Lambda - stats.H
    return MartingaleReport(
        n=n,
        R=R,
        seed=seed,
        mean_Mn=float(stats.M.mean()),
        bound=4.0 * math.sqrt(n / R),
        max_abs_Mn_over_n=float(np.max(np.abs(stats.M)) / n),
        max_doob_residual=float(np.max(np.abs(residual))),
    )
