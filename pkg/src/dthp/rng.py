"""Counter-based seeding and the per-replicate bit generator.

Every random draw in the package comes from the two algorithms below, so
outputs are reproducible across platforms and numpy/numba versions:

* ``splitmix64`` (Steele, Lea & Flood 2014) mixes a 64-bit counter into a
  well-spread 64-bit value.  Replicate ``r`` of a run with master seed ``s``
  uses ``derive_seed(s, r) = splitmix64 output number r+1 from state s``,
  i.e. ``mix64(s + (r + 1) * 0x9E3779B97F4A7C15 mod 2**64)``.
* ``xoshiro256**`` (Blackman & Vigna 2018) generates the stream for one
  replicate.  Its 256-bit state is filled with the first four splitmix64
  outputs from the replicate seed.

Uniforms take the top 53 bits of a xoshiro output: ``u = (x >> 11) * 2**-53``,
so ``u`` lies in [0, 1).  A Bernoulli(p) draw is ``u < p``.

Pure-Python classes are kept alongside the numba kernels as a readable
reference; the tests check that the two agree.
"""

from __future__ import annotations

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
TWO_NEG53 = 2.0 ** -53

__all__ = [
    "SplitMix64",
    "Xoshiro256StarStar",
    "mix64",
    "derive_seed",
    "derive_seeds",
]


def mix64(z: int) -> int:
    """splitmix64 finalizer applied to a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of replicate ``index`` under ``master_seed``."""
    return mix64(master_seed + (index + 1) * GOLDEN_GAMMA)


def derive_seeds(master_seed: int, count: int) -> np.ndarray:
    """Vector of replicate seeds 0..count-1 as ``uint64``."""
    check_seed(master_seed)
    return np.array([derive_seed(master_seed, r) for r in range(count)], dtype=np.uint64)


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


class SplitMix64:
    def __init__(self, seed: int):
        self.state = check_seed(seed)

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    """Reference xoshiro256** generator seeded through splitmix64."""

    def __init__(self, seed: int | None = None, state: tuple[int, int, int, int] | None = None):
        if state is not None:
            self.s = [int(v) & MASK64 for v in state]
        else:
            sm = SplitMix64(0 if seed is None else seed)
            self.s = [sm.next() for _ in range(4)]

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next() >> 11) * TWO_NEG53


# numba versions: every constant is a uint64 so arithmetic never promotes to float

_U_GAMMA = np.uint64(GOLDEN_GAMMA)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)


@nb.njit(cache=True, nogil=True)
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, nogil=True)
def _rotl_nb(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True, nogil=True)
def seed_state(seed):
    """xoshiro256** state array seeded from a uint64 via splitmix64."""
    s = np.empty(4, dtype=np.uint64)
    z = np.uint64(seed)
    for k in range(4):
        z = z + _U_GAMMA
        s[k] = _mix64_nb(z)
    return s


@nb.njit(cache=True, nogil=True)
def next_u64(s):
    result = _rotl_nb(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl_nb(s[3], 45)
    return result


@nb.njit(cache=True, nogil=True)
def next_uniform(s):
    return np.float64(next_u64(s) >> np.uint64(11)) * TWO_NEG53
