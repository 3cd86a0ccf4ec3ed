"""Shared data builders and the acceptance-summary hook."""

import numpy as np

from anisodenoise import GridSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def node_grid(n):
    """n x n interior nodes with unit spacing."""
    return GridSpec(n, n, 1.0, 1.0)


def square_grid(n):
    """n x n interior nodes on the unit square."""
    return GridSpec.from_extent(n, n, 1.0, 1.0)


def sp_data(n, rng, black=0.5, noise=0.1):
    """Salt-and-pepper datum and a noisy initial intensity, both in [0, 1]."""
    org = (rng.random((n, n)) >= black).astype(float)
    u0 = np.clip(org + noise * rng.standard_normal((n, n)), 0.0, 1.0)
    return u0, org


def bump_data(n, rng, amp=0.9, width=0.05, noise=0.15):
    """Gaussian bump datum and a noisy initial intensity, both in [0, 1]."""
    t = np.arange(1, n + 1) / (n + 1)
    x, y = t[:, None], t[None, :]
    clean = amp * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / width)
    u0 = np.clip(clean + noise * rng.standard_normal((n, n)), 0.0, 1.0)
    return u0, np.clip(clean, 0.0, 1.0)


def ramp_data(n, rng, noise=0.1):
    """Diagonal ramp datum and a noisy initial intensity, both in [0, 1]."""
    t = np.arange(1, n + 1) / (n + 1)
    clean = np.clip(t[:, None] + t[None, :] - 0.5, 0.0, 1.0)
    u0 = np.clip(clean + noise * rng.standard_normal((n, n)), 0.0, 1.0)
    return u0, clean
