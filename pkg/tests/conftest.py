from __future__ import annotations

import numpy as np
import pytest


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample KS statistic that tolerates infinite values."""
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a[np.isfinite(a)], b[np.isfinite(b)]])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb))) if grid.size else 0.0


def ks_one_sample(x: np.ndarray, cdf) -> float:
    """One-sample KS statistic for samples that may contain ``inf``."""
    x = np.sort(x)
    fin = x[np.isfinite(x)]
    n = x.size
    if fin.size == 0:
        return 0.0
    f = cdf(fin)
    i = np.arange(1, fin.size + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter) -> None:
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
