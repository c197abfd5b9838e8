"""Exciting sequences (beta_i) and their limit constants.

Two families are supported, both with exact tail sums:

* ``finite``:    beta_j = weights[j-1] for 1 <= j <= m, zero beyond lag m;
* ``geometric``: beta_j = scale * ratio**(j-1) for j >= 1.

``beta(0)`` is always the baseline (immigration) probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Kernel",
    "KernelError",
    "AssumptionReport",
    "LimitConstants",
    "check_assumptions",
    "limit_constants",
    "load_kernel",
]

FAMILIES = ("finite", "geometric")


class KernelError(ValueError):
    """Malformed kernel, or a kernel used outside its valid regime."""


@dataclass(frozen=True)
class Kernel:
    baseline: float
    family: str = "finite"
    weights: tuple[float, ...] = ()
    scale: float | None = None
    ratio: float | None = None
    # tails[k-1] = sum_{j>=k} beta_j for finite kernels
    _tails: tuple[float, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        b0 = self.baseline
        if not isinstance(b0, (int, float)) or not 0.0 < b0 < 1.0:
            raise KernelError(f"baseline must lie in (0, 1), got {b0!r}")
        object.__setattr__(self, "baseline", float(b0))
        if self.family == "finite":
            if self.scale is not None or self.ratio is not None:
                raise KernelError("finite kernel takes weights only")
            w = tuple(float(v) for v in self.weights)
            if any(not math.isfinite(v) or v < 0.0 for v in w):
                raise KernelError(f"lag weights must be finite and >= 0, got {list(w)}")
            object.__setattr__(self, "weights", w)
            tails = tuple(math.fsum(w[k:]) for k in range(len(w)))
            object.__setattr__(self, "_tails", tails)
        elif self.family == "geometric":
            if self.weights:
                raise KernelError("geometric kernel takes scale and ratio, not weights")
            if self.scale is None or not self.scale > 0.0 or not math.isfinite(self.scale):
                raise KernelError(f"geometric scale must be > 0, got {self.scale!r}")
            if self.ratio is None or not 0.0 < self.ratio < 1.0:
                raise KernelError(f"geometric ratio must lie in (0, 1), got {self.ratio!r}")
            object.__setattr__(self, "scale", float(self.scale))
            object.__setattr__(self, "ratio", float(self.ratio))
        else:
            raise KernelError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")

    @classmethod
    def finite(cls, baseline: float, weights=()) -> Kernel:
        return cls(baseline, "finite", tuple(weights))

    @classmethod
    def geometric(cls, baseline: float, scale: float, ratio: float) -> Kernel:
        return cls(baseline, "geometric", scale=scale, ratio=ratio)

    @property
    def memory(self) -> int | None:
        """Largest lag with a (possibly) nonzero weight; None for infinite memory."""
        return len(self.weights) if self.family == "finite" else None

    def beta(self, i: int) -> float:
        if i < 0:
            raise ValueError(f"lag must be >= 0, got {i}")
        if i == 0:
            return self.baseline
        if self.family == "finite":
            return self.weights[i - 1] if i <= len(self.weights) else 0.0
        return self.scale * self.ratio ** (i - 1)

    def tail_sum(self, n: int) -> float:
        """sum_{i >= n} beta_i, for n >= 1."""
        if n < 1:
            raise ValueError(f"tail_sum needs n >= 1, got {n}")
        if self.family == "finite":
            return self._tails[n - 1] if n <= len(self._tails) else 0.0
        return self.scale * self.ratio ** (n - 1) / (1.0 - self.ratio)

    def tail_sums(self) -> np.ndarray:
        """Array of tail_sum(1..m) for a finite kernel."""
        if self.family != "finite":
            raise KernelError("tail_sums() is only defined for finite kernels")
        return np.array(self._tails, dtype=np.float64)

    def branching_ratio(self) -> float:
        if self.family == "finite":
            return self._tails[0] if self._tails else 0.0
        return self.scale / (1.0 - self.ratio)

    def first_moment(self) -> float:
        """sum_{j>=1} j * beta_j."""
        if self.family == "finite":
            # sequential sum of tails: ties the zeta bound to the simulated zeta bit for bit
            acc = 0.0
            for t in self._tails:
                acc += t
            return acc
        return self.scale / (1.0 - self.ratio) / (1.0 - self.ratio)

    def lag_weights(self, m: int) -> np.ndarray:
        """beta_1..beta_m as an array (zero padded past the support)."""
        return np.array([self.beta(j) for j in range(1, m + 1)], dtype=np.float64)

    def truncated(self, m: int) -> Kernel:
        """Finite kernel keeping lags 1..m."""
        if m < 0:
            raise ValueError(f"truncation memory must be >= 0, got {m}")
        return Kernel.finite(self.baseline, self.lag_weights(m).tolist())

    def is_stable(self) -> bool:
        return self.baseline + self.branching_ratio() < 1.0

    def require_stable(self) -> None:
        if not self.is_stable():
            raise KernelError(
                f"kernel violates beta_0 + sum beta_i < 1 "
                f"(got {self.baseline + self.branching_ratio():.6g}); intensities could exceed 1"
            )

    def to_dict(self) -> dict:
        fin = self.family == "finite"
        return {
            "beta0": self.baseline,
            "family": self.family,
            "weights": list(self.weights) if fin else None,
            "scale": None if fin else self.scale,
            "ratio": None if fin else self.ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Kernel:
        if not isinstance(d, dict):
            raise KernelError("kernel must be a JSON object")
        unknown = set(d) - {"beta0", "family", "weights", "scale", "ratio"}
        if unknown:
            raise KernelError(f"unknown kernel keys: {sorted(unknown)}")
        if "beta0" not in d or "family" not in d:
            raise KernelError("kernel JSON needs 'beta0' and 'family'")
        family = d["family"]
        if family == "finite":
            weights = d.get("weights")
            if weights is None:
                weights = []
            if not isinstance(weights, list) or d.get("scale") is not None or d.get("ratio") is not None:
                raise KernelError("finite kernel needs a 'weights' list and null scale/ratio")
            return cls.finite(d["beta0"], weights)
        if family == "geometric":
            if d.get("weights") is not None:
                raise KernelError("geometric kernel must have null 'weights'")
            return cls.geometric(d["beta0"], d.get("scale"), d.get("ratio"))
        raise KernelError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")


def load_kernel(path: str | Path) -> Kernel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise KernelError(f"{path}: malformed kernel JSON ({exc.msg} at line {exc.lineno})") from None
    return Kernel.from_dict(data)


@dataclass(frozen=True)
class AssumptionReport:
    stability: bool  # beta_0 + B < 1
    sqrt_tail_vanishes: bool  # sqrt(n) * sum_{i>=n} beta_i -> 0
    scaled_moment_vanishes: bool  # n^{-1/2} sum_{i<=n} i beta_i -> 0
    finite_first_moment: bool  # sum i beta_i < inf
    total: float
    branching: float
    first_moment: float
    max_sqrt_tail: float
    grid: tuple[int, ...]

    @property
    def all_pass(self) -> bool:
        return self.stability and self.sqrt_tail_vanishes and self.scaled_moment_vanishes and self.finite_first_moment

    def to_dict(self) -> dict:
        return {
            "assumptions": {
                "1_stability": self.stability,
                "2_sqrt_tail_vanishes": self.sqrt_tail_vanishes,
                "3_scaled_moment_vanishes": self.scaled_moment_vanishes,
                "4_finite_first_moment": self.finite_first_moment,
            },
            "all_pass": self.all_pass,
            "total_mass": self.total,
            "branching": self.branching,
            "first_moment": self.first_moment,
            "max_sqrt_n_tail": self.max_sqrt_tail,
            "diagnostic_grid": list(self.grid),
        }


_DIAGNOSTIC_GRID = tuple(2**k for k in range(21))


def check_assumptions(kernel: Kernel) -> AssumptionReport:
    """Decide the four summability assumptions for ``kernel``.

    Assumptions 2-4 hold for both families analytically (finite support, or
    exponentially decaying tails); only stability can fail.  The scaled
    tail ``sqrt(n) * tail_sum(n)`` is reported on a dyadic grid as a
    diagnostic.
    """
    b = kernel.branching_ratio()
    s = kernel.first_moment()
    max_tail = max(math.sqrt(n) * kernel.tail_sum(n) for n in _DIAGNOSTIC_GRID)
    tails_ok = math.isfinite(s)
    return AssumptionReport(
        stability=kernel.baseline + b < 1.0,
        sqrt_tail_vanishes=tails_ok,
        scaled_moment_vanishes=tails_ok,
        finite_first_moment=tails_ok,
        total=kernel.baseline + b,
        branching=b,
        first_moment=s,
        max_sqrt_tail=max_tail,
        grid=_DIAGNOSTIC_GRID,
    )


@dataclass(frozen=True)
class LimitConstants:
    mu: float
    sigma2: float
    compensator_sigma2: float
    branching: float
    first_moment: float


def limit_constants(kernel: Kernel) -> LimitConstants:
    """Mean rate mu = b0/(1-B), CLT variance mu(1-mu)/(1-B)^2, compensator variance B^2 sigma^2."""
    kernel.require_stable()
    b = kernel.branching_ratio()
    mu = kernel.baseline / (1.0 - b)
    sigma2 = mu * (1.0 - mu) / (1.0 - b) ** 2
    return LimitConstants(
        mu=mu,
        sigma2=sigma2,
        compensator_sigma2=b * b * sigma2,
        branching=b,
        first_moment=kernel.first_moment(),
    )
