"""Simulation and Doob decomposition of the discrete-time Hawkes process.

For a bit sequence xi_1..xi_n the per-step quantities are

    lambda_i = beta_0 + sum_{j=1}^{i-1} beta_{i-j} xi_j     (intensity)
    H_i      = xi_1 + ... + xi_i                            (count)
    Lambda_i = lambda_1 + ... + lambda_i                    (compensator)
    M_i      = H_i - Lambda_i                               (martingale part)
    zeta_i   = sum_{k=1}^{i} tail_sum(k) * xi_{i-k+1}        (remainder)

``zeta`` equals ``B*H_i + beta_0*i - Lambda_i`` algebraically; it is
accumulated from the tail weights instead so that it stays exactly within
``[0, sum_j j*beta_j]`` in floating point.  For geometric kernels
``zeta_i = S_{i+1} / (1 - ratio)`` where ``S`` is the lag-sum recursion
``S_{i+1} = ratio*S_i + scale*xi_i``.

Simulation and decomposition run through the same compiled loop, so
``decompose(k, simulate(k, n, s).xi)`` reproduces every array bit for bit.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from .kernel import Kernel
from .rng import check_seed, derive_seeds, next_uniform, seed_state

__all__ = [
    "Path",
    "TerminalStat",
    "TerminalStats",
    "simulate",
    "decompose",
    "intensity_at",
    "replicate_terminals",
    "PATH_CSV_HEADER",
]

PATH_CSV_HEADER = "i,xi,H,lambda,Lambda,M,zeta"

_EMPTY = np.zeros(0, dtype=np.float64)


def kernel_params(kernel: Kernel):
    """Flatten a kernel into the positional arguments of the compiled loops."""
    if kernel.family == "geometric":
        return kernel.baseline, _EMPTY, _EMPTY, True, kernel.scale, kernel.ratio
    return (
        kernel.baseline,
        np.asarray(kernel.weights, dtype=np.float64),
        kernel.tail_sums(),
        False,
        0.0,
        0.0,
    )


@nb.njit(cache=True, nogil=True)
def _path_core(beta0, weights, tails, geo, scale, ratio, xi, draw, seed, lam, comp, counts, mart, zeta):
    n = xi.shape[0]
    m = weights.shape[0]
    state = seed_state(seed)
    lagsum = 0.0
    total = 0.0
    h = 0
    for i in range(n):
        if geo:
            lam_i = beta0 + lagsum
        else:
            acc = 0.0
            for j in range(1, min(m, i) + 1):
                if xi[i - j]:
                    acc += weights[j - 1]
            lam_i = beta0 + acc
        if draw:
            x = 1 if next_uniform(state) < lam_i else 0
            xi[i] = x
        else:
            x = xi[i]
        h += x
        total += lam_i
        if geo:
            lagsum = ratio * lagsum + scale * x
            z = lagsum / (1.0 - ratio)
        else:
            z = 0.0
            for k in range(1, min(m, i + 1) + 1):
                if xi[i - k + 1]:
                    z += tails[k - 1]
        lam[i] = lam_i
        comp[i] = total
        counts[i] = h
        mart[i] = h - total
        zeta[i] = z


@nb.njit(cache=True, nogil=True)
def _terminal_core(beta0, weights, tails, geo, scale, ratio, n, seed):
    # same arithmetic order as _path_core, with an m-slot ring buffer for the history
    m = weights.shape[0]
    ring = np.zeros(max(m, 1), dtype=np.uint8)
    state = seed_state(seed)
    lagsum = 0.0
    total = 0.0
    h = 0
    for i in range(n):
        if geo:
            lam_i = beta0 + lagsum
        else:
            acc = 0.0
            for j in range(1, min(m, i) + 1):
                if ring[(i - j) % m]:
                    acc += weights[j - 1]
            lam_i = beta0 + acc
        x = 1 if next_uniform(state) < lam_i else 0
        h += x
        total += lam_i
        if geo:
            lagsum = ratio * lagsum + scale * x
        elif m > 0:
            ring[i % m] = x
    if geo:
        z = lagsum / (1.0 - ratio)
    else:
        z = 0.0
        i = n - 1
        for k in range(1, min(m, i + 1) + 1):
            if ring[(i - k + 1) % m]:
                z += tails[k - 1]
    return h, total, h - total, z


@nb.njit(cache=True, nogil=True)
def _terminal_batch(beta0, weights, tails, geo, scale, ratio, n, seeds, out_h, out_comp, out_mart, out_zeta):
    for r in range(seeds.shape[0]):
        h, c, mt, z = _terminal_core(beta0, weights, tails, geo, scale, ratio, n, seeds[r])
        out_h[r] = h
        out_comp[r] = c
        out_mart[r] = mt
        out_zeta[r] = z


@dataclass(frozen=True)
class Path:
    n: int
    xi: np.ndarray
    counts: np.ndarray
    intensity: np.ndarray
    compensator: np.ndarray
    martingale: np.ndarray
    zeta: np.ndarray
    seed: int | None = None

    def to_csv(self, fh=None, comments: tuple[str, ...] = ()) -> str | None:
        """Write one row per step with 17 significant digits; return text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        for line in comments:
            out.write(f"# {line}\n")
        out.write(PATH_CSV_HEADER + "\n")
        for i in range(self.n):
            out.write(
                f"{i + 1},{int(self.xi[i])},{int(self.counts[i])},{self.intensity[i]:.17g},"
                f"{self.compensator[i]:.17g},{self.martingale[i]:.17g},{self.zeta[i]:.17g}\n"
            )
        return out.getvalue() if fh is None else None


def _run_path(kernel: Kernel, xi: np.ndarray, draw: bool, seed: int) -> Path:
    n = xi.shape[0]
    lam = np.empty(n)
    comp = np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    mart = np.empty(n)
    zeta = np.empty(n)
    _path_core(*kernel_params(kernel), xi, draw, np.uint64(seed), lam, comp, counts, mart, zeta)
    return Path(n, xi, counts, lam, comp, mart, zeta, seed if draw else None)


def _as_bits(xi) -> np.ndarray:
    arr = np.asarray(xi)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("xi must be a non-empty 1-d bit sequence")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("xi must contain only 0/1 values")
    return arr.astype(np.uint8)


def simulate(kernel: Kernel, n: int, seed: int, debug: bool = False) -> Path:
    """Draw one path of length ``n``.

    With ``debug=True`` the intensities are recomputed by direct convolution
    (O(n^2)) and compared with the running recursion to 1e-12.
    """
    kernel.require_stable()
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    seed = check_seed(seed)
    path = _run_path(kernel, np.zeros(n, dtype=np.uint8), True, seed)
    if debug:
        direct = _convolved_intensity(kernel, path.xi)
        err = np.max(np.abs(direct - path.intensity))
        if err > 1e-12:
            raise AssertionError(f"intensity recursion drifted from convolution by {err:.3g}")
    return path


def _convolved_intensity(kernel: Kernel, xi: np.ndarray) -> np.ndarray:
    n = xi.shape[0]
    lags = kernel.lag_weights(n - 1)
    excitation = np.convolve(xi.astype(np.float64), lags)[: n - 1]
    return kernel.baseline + np.concatenate(([0.0], excitation))


def decompose(kernel: Kernel, xi) -> Path:
    """Intensity, compensator, martingale and zeta for an observed bit sequence."""
    kernel.require_stable()
    return _run_path(kernel, _as_bits(xi).copy(), False, 0)


def intensity_at(kernel: Kernel, history, i: int) -> float:
    """lambda_i = beta_0 + sum_{j=1}^{i-1} beta_{i-j} * history[j], 1-based."""
    if i < 1:
        raise ValueError(f"step index must be >= 1, got {i}")
    if len(history) < i - 1:
        raise ValueError(f"history of length {len(history)} is too short for step {i}")
    lam = kernel.baseline
    for j in range(1, i):
        if history[j - 1]:
            lam += kernel.beta(i - j)
    return lam


class TerminalStat(NamedTuple):
    H: int
    Lambda: float
    M: float
    zeta: float


@dataclass(frozen=True)
class TerminalStats:
    """Terminal values of R replicates, in replicate order."""

    n: int
    seeds: np.ndarray
    H: np.ndarray
    Lambda: np.ndarray
    M: np.ndarray
    zeta: np.ndarray

    def __len__(self) -> int:
        return self.H.shape[0]

    def __getitem__(self, r: int) -> TerminalStat:
        return TerminalStat(int(self.H[r]), float(self.Lambda[r]), float(self.M[r]), float(self.zeta[r]))


def replicate_terminals(kernel: Kernel, n: int, R: int, master_seed: int, workers: int = 1) -> TerminalStats:
    """Run R independent paths and keep only (H_n, Lambda_n, M_n, zeta_n).

    Replicate r uses seed ``derive_seed(master_seed, r)`` and so equals
    ``simulate(kernel, n, derive_seed(master_seed, r))`` at step n.  Work is
    split into contiguous chunks written by index, so ``workers`` never
    changes the result.
    """
    kernel.require_stable()
    if n < 1 or R < 1:
        raise ValueError(f"need n >= 1 and R >= 1, got n={n}, R={R}")
    seeds = derive_seeds(master_seed, R)
    out_h = np.empty(R, dtype=np.int64)
    out_c = np.empty(R)
    out_m = np.empty(R)
    out_z = np.empty(R)
    params = kernel_params(kernel)

    def run(lo: int, hi: int) -> None:
        _terminal_batch(*params, n, seeds[lo:hi], out_h[lo:hi], out_c[lo:hi], out_m[lo:hi], out_z[lo:hi])

    for_chunks(run, R, workers)
    return TerminalStats(n, seeds, out_h, out_c, out_m, out_z)


def for_chunks(fn, total: int, workers: int) -> None:
    """Call ``fn(lo, hi)`` over contiguous chunks of range(total), possibly in threads."""
    workers = max(1, int(workers))
    if workers == 1 or total < 2:
        fn(0, total)
        return
    bounds = np.linspace(0, total, min(workers, total) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for f in futures:
            f.result()
