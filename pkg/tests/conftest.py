import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from sqglab.spectral import GridSpec, SpectralField  # noqa: E402

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        parts = ACCEPTANCE[crit]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64)


# ---------------------------------------------------------------------------
# brute-force oracles on full-plane coefficient dictionaries
# ---------------------------------------------------------------------------

def modes_of(field: SpectralField, kmax: int | None = None) -> dict:
    """Nonzero full-plane coefficients {(k1, k2): c} with |k_i| <= kmax."""
    K = field.grid.kmax if kmax is None else kmax
    out = {}
    for k1, k2 in itertools.product(range(-K, K + 1), repeat=2):
        c = field.coefficient(k1, k2)
        if c != 0:
            out[(k1, k2)] = c
    return out


def convolve(a: dict, b: dict) -> dict:
    out: dict = {}
    for (p1, p2), ca in a.items():
        for (q1, q2), cb in b.items():
            k = (p1 + q1, p2 + q2)
            out[k] = out.get(k, 0) + ca * cb
    return out


def to_field(grid: GridSpec, modes: dict) -> SpectralField:
    """Keep the half-plane entries with |k_i| <= kmax."""
    K = grid.kmax
    c = np.zeros(grid.spectral_shape, dtype=np.complex128)
    for (k1, k2), v in modes.items():
        if abs(k1) <= K and 0 <= k2 <= K:
            c[k1 % grid.n, k2] = v
    return SpectralField(grid, c)
