"""Maximum-likelihood fitting of a kernel to one observed 0/1 sequence."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .kernel import Kernel
from .process import _as_bits, _path_core, decompose

__all__ = [
    "FitResult",
    "ParamSpace",
    "loglik",
    "fit",
    "residual_diagnostic",
    "load_sequence",
    "EPS",
]

EPS = 1e-6
FD_STEP = 1e-6
CURV_STEP = 1e-4
GRAD_TOL = 1e-6
IMPROVE_TOL = 1e-10


def _intensity(beta0, weights, tails, geo, scale, ratio, xi: np.ndarray) -> np.ndarray:
    n = xi.shape[0]
    lam, comp, mart, zeta = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    _path_core(beta0, weights, tails, geo, scale, ratio, xi, False, np.uint64(0), lam, comp, counts, mart, zeta)
    return lam


def _loglik_from_intensity(lam: np.ndarray, xi: np.ndarray) -> float:
    if np.any(lam <= 0.0) or np.any(lam >= 1.0):
        return -math.inf
    hit = xi.astype(bool)
    return float(np.sum(np.log(lam[hit])) + np.sum(np.log1p(-lam[~hit])))


def loglik(kernel: Kernel, xi) -> float:
    """sum_i xi_i log(lambda_i) + (1 - xi_i) log(1 - lambda_i)."""
    return _loglik_from_intensity(decompose(kernel, xi).intensity, _as_bits(xi))


class ParamSpace:
    """Parameter vector <-> kernel for one family, with the feasible box.

    finite(m):  theta = (beta0, w_1, ..., w_m)
    geometric:  theta = (beta0, scale, ratio)

    Feasible: beta0 >= eps, lag weights >= 0 (scale >= eps, eps <= ratio <= 1 - eps)
    and beta0 + B <= 1 - eps.
    """

    def __init__(self, family: str, memory: int = 1):
        if family not in ("finite", "geometric"):
            raise ValueError(f"unknown family {family!r}")
        if family == "finite" and memory < 0:
            raise ValueError(f"memory must be >= 0, got {memory}")
        self.family = family
        self.memory = memory if family == "finite" else None
        self.dim = 1 + memory if family == "finite" else 3

    def to_kernel(self, theta) -> Kernel:
        if self.family == "finite":
            return Kernel.finite(float(theta[0]), [float(v) for v in theta[1:]])
        return Kernel.geometric(float(theta[0]), float(theta[1]), float(theta[2]))

    def from_kernel(self, kernel: Kernel) -> np.ndarray:
        if kernel.family != self.family:
            raise ValueError(f"init kernel is {kernel.family}, fit family is {self.family}")
        if self.family == "finite":
            if kernel.memory != self.memory:
                raise ValueError(f"init kernel memory {kernel.memory} != fit memory {self.memory}")
            return np.array([kernel.baseline, *kernel.weights])
        return np.array([kernel.baseline, kernel.scale, kernel.ratio])

    def default(self, xi: np.ndarray) -> np.ndarray:
        b0 = min(max(EPS, 0.5 * float(xi.mean())), 0.5)
        mass = 0.25 * (1.0 - b0)
        if self.family == "finite":
            return np.array([b0] + [mass / self.memory] * self.memory) if self.memory else np.array([b0])
        return np.array([b0, 0.5 * mass, 0.5])

    def lag_mass(self, theta) -> float:
        if self.family == "finite":
            return float(np.sum(theta[1:]))
        return theta[1] / (1.0 - theta[2])

    def feasible(self, theta) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,) or not np.all(np.isfinite(theta)) or theta[0] < EPS:
            return False
        if self.family == "finite":
            if np.any(theta[1:] < 0.0):
                return False
        elif theta[1] < EPS or not EPS <= theta[2] <= 1.0 - EPS:
            return False
        return theta[0] + self.lag_mass(theta) <= 1.0 - EPS

    def interval(self, theta, k: int) -> tuple[float, float]:
        """Feasible range of coordinate k with the others held fixed."""
        cap = 1.0 - EPS
        if self.family == "finite":
            if k == 0:
                return EPS, cap - float(np.sum(theta[1:]))
            others = float(np.sum(theta[1:])) - theta[k]
            return 0.0, cap - theta[0] - others
        b0, c, rho = theta
        if k == 0:
            return EPS, cap - c / (1.0 - rho)
        if k == 1:
            return EPS, (cap - b0) * (1.0 - rho)
        return EPS, min(1.0 - EPS, 1.0 - c / (cap - b0))

    def project(self, theta) -> np.ndarray:
        """Nearest-by-construction feasible point; identity on feasible input."""
        theta = np.array(theta, dtype=np.float64)
        if self.feasible(theta):
            return theta
        cap = 1.0 - EPS
        # shrink by a hair so the rescaled mass cannot overshoot the cap by an ulp
        shrink = 1.0 - 1e-12
        if self.family == "finite":
            theta[0] = min(max(theta[0], EPS), cap - EPS)
            theta[1:] = np.maximum(theta[1:], 0.0)
            mass = float(np.sum(theta[1:]))
            room = cap - theta[0]
            if mass > room:
                theta[1:] *= shrink * room / mass
            return theta
        # geometric needs room for a scale of at least EPS
        theta[0] = min(max(theta[0], EPS), cap - 4.0 * EPS)
        room = cap - theta[0]
        theta[2] = min(max(theta[2], EPS), 1.0 - 2.0 * EPS / room)
        theta[1] = min(max(theta[1], EPS), shrink * room * (1.0 - theta[2]))
        return theta

    def loglik(self, theta, xi: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        if self.family == "finite":
            w = np.ascontiguousarray(theta[1:])
            tails = np.cumsum(w[::-1])[::-1].copy() if w.size else w
            lam = _intensity(theta[0], w, tails, False, 0.0, 0.0, xi)
        else:
            if not 0.0 < theta[2] < 1.0:
                return -math.inf
            empty = np.zeros(0)
            lam = _intensity(theta[0], empty, empty, True, theta[1], theta[2], xi)
        return _loglik_from_intensity(lam, xi)


@dataclass(frozen=True)
class FitResult:
    family: str
    params: dict  # kernel JSON object
    loglik: float
    iterations: int
    converged: bool
    residual_stat: float

    @property
    def kernel(self) -> Kernel:
        return Kernel.from_dict(self.params)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_stat": self.residual_stat,
        }


def _partial(f, theta: np.ndarray, k: int, value: float, lo: float, hi: float, h: float) -> float:
    """Central difference in coordinate k, one-sided against an active bound."""
    up, down = theta.copy(), theta.copy()
    up[k] += h
    down[k] -= h
    if theta[k] - h >= lo and theta[k] + h <= hi:
        fu, fd = f(up), f(down)
        if math.isfinite(fu) and math.isfinite(fd):
            return (fu - fd) / (2.0 * h)
    if theta[k] + h <= hi:
        return (f(up) - value) / h
    return (value - f(down)) / h


def _curvature(f, theta: np.ndarray, k: int, value: float, lo: float, hi: float) -> float:
    h = min(CURV_STEP, 0.25 * (hi - lo)) if hi > lo else CURV_STEP
    pts = theta.copy()
    if theta[k] - h >= lo and theta[k] + h <= hi:
        pts[k] = theta[k] + h
        fu = f(pts)
        pts[k] = theta[k] - h
        return (fu - 2.0 * value + f(pts)) / (h * h)
    sign = 1.0 if theta[k] + 2 * h <= hi else -1.0
    pts[k] = theta[k] + sign * h
    f1 = f(pts)
    pts[k] = theta[k] + 2 * sign * h
    return (value - 2.0 * f1 + f(pts)) / (h * h)


def fit(
    xi,
    family: str = "finite",
    memory: int = 1,
    init: Kernel | None = None,
    budget: int = 500,
) -> FitResult:
    """Projected coordinate ascent on the log-likelihood.

    Each coordinate takes a Newton step from finite-difference derivatives
    (a plain gradient step where the curvature is not negative), clipped to
    its feasible interval and halved until the likelihood improves.  Stops
    when the projected gradient norm is <= 1e-6 or a full sweep gains
    <= 1e-10; otherwise returns the best iterate with ``converged=False``.
    """
    bits = _as_bits(xi)
    space = ParamSpace(family, memory)
    theta = space.from_kernel(init) if init is not None else space.default(bits)
    if not space.feasible(theta):
        raise ValueError(f"initial parameters {theta.tolist()} are outside the feasible set")

    def f(th):
        return space.loglik(th, bits)

    value = f(theta)
    converged = False
    iterations = 0
    for iterations in range(1, budget + 1):
        start = value
        grad = np.zeros(space.dim)
        for k in range(space.dim):
            lo, hi = space.interval(theta, k)
            g = _partial(f, theta, k, value, lo, hi, FD_STEP)
            at_lo = theta[k] <= lo and g < 0
            at_hi = theta[k] >= hi and g > 0
            grad[k] = 0.0 if at_lo or at_hi else g
            if grad[k] == 0.0:
                continue
            curv = _curvature(f, theta, k, value, lo, hi)
            step = -g / curv if curv < 0 else math.copysign(0.1 * (hi - lo), g)
            for _ in range(60):
                cand = theta.copy()
                cand[k] = min(max(theta[k] + step, lo), hi)
                cand_value = f(cand)
                if cand_value > value:
                    theta, value = cand, cand_value
                    break
                step *= 0.5
        if np.linalg.norm(grad) <= GRAD_TOL or value - start <= IMPROVE_TOL:
            converged = True
            break

    kernel = space.to_kernel(theta)
    return FitResult(
        family=family,
        params=kernel.to_dict(),
        loglik=value,
        iterations=iterations,
        converged=converged,
        residual_stat=residual_diagnostic(kernel, bits),
    )


def residual_diagnostic(kernel: Kernel, xi) -> float:
    """M_n / sqrt(sum lambda_i (1 - lambda_i)); roughly N(0, 1) under a correct model."""
    path = decompose(kernel, xi)
    scale = math.sqrt(float(np.sum(path.intensity * (1.0 - path.intensity))))
    return float(path.martingale[-1] / scale)


def load_sequence(source: str | FsPath) -> np.ndarray:
    """Read bits from a newline-separated 0/1 file or a path CSV (column ``xi``).

    Lines starting with ``#`` are skipped in both formats.
    """
    lines = [ln for ln in FsPath(source).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{source}: no data")
    if "xi" in lines[0].split(","):
        rows = csv.DictReader(io.StringIO("\n".join(lines)))
        values = [row["xi"].strip() for row in rows]
    else:
        values = [ln.strip() for ln in lines]
    bad = [v for v in values if v not in ("0", "1")]
    if bad:
        raise ValueError(f"{source}: expected 0/1 values, found {bad[0]!r}")
    return np.array([int(v) for v in values], dtype=np.uint8)
