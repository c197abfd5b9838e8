import itertools
import math

import numpy as np
import pytest

from dthp.kernel import Kernel
from dthp.process import intensity_at

K0 = Kernel.finite(0.4)
K1 = Kernel.finite(0.3, [0.2])
K2 = Kernel.geometric(0.2, 0.1, 0.5)
K3 = Kernel.finite(0.2, [0.15, 0.1, 0.05])
K2T = K2.truncated(12)

KERNELS = {"K0": K0, "K1": K1, "K2": K2, "K3": K3, "K2T": K2T}


@pytest.fixture(params=["K0", "K1", "K2", "K3"])
def any_kernel(request):
    return KERNELS[request.param]


def brute_force_paths(kernel, n):
    """(bits, chain-rule probability) for every bit string, straight from the definition."""
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        p = 1.0
        for i in range(1, n + 1):
            lam = intensity_at(kernel, bits, i)
            p *= lam if bits[i - 1] else 1.0 - lam
        out.append((bits, p))
    return out


def brute_force_pmf(kernel, n):
    pmf = np.zeros(n + 1)
    for bits, p in brute_force_paths(kernel, n):
        pmf[sum(bits)] += p
    return pmf


def brute_force_mgf(kernel, n, t):
    return math.fsum(p * math.exp(t * sum(bits)) for bits, p in brute_force_paths(kernel, n))


_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
