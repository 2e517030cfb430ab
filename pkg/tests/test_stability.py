import math

import numpy as np
import pytest

from sqglab.evolution import StepperConfig, linear_run
from sqglab.multipliers import (
    FractionalLaplacian,
    InverseFractionalLaplacian,
    LogSupercritical,
    symbol_on_grid,
)
from sqglab.spectral import SpectralField, l2_sq, random_field
from sqglab.stability import (
    ArnoldiConfig,
    LinearizedOperator,
    apply_linearized,
    beta_exponent,
    default_delta,
    dense_matrix,
    eigen_residual,
    rightmost_eigenpairs,
    semigroup_decay_probe,
)
from sqglab.steady import shear_state

GAMMA = FractionalLaplacian(0.5)
LOG = LogSupercritical(0.25)


@pytest.fixture(scope="module")
def shear_op():
    from sqglab.spectral import GridSpec
    return LinearizedOperator(shear_state(6.0, 3, GridSpec(32)), GAMMA)


@pytest.fixture(scope="module")
def shear_pair(shear_op):
    return rightmost_eigenpairs(shear_op, count=1)[0]


# operator action ------------------------------------------------------------

@pytest.mark.parametrize("m", [GAMMA, LOG])
def test_zero_background_is_diagonal(grid32, rng, m):
    phi = random_field(grid32, rng)
    out = apply_linearized(LinearizedOperator(SpectralField.zeros(grid32), m), phi)
    expect = -symbol_on_grid(m, grid32) * phi.coeffs
    assert np.max(np.abs(out.coeffs - expect)) < 1e-15


def test_action_on_shear_itself(grid32):
    th = shear_state(2.0, 3, grid32)
    out = apply_linearized(LinearizedOperator(th, GAMMA), th)
    assert np.max(np.abs(out.coeffs + 3 ** 0.5 * th.coeffs)) < 1e-14


def test_linearity_and_mean(grid32, rng):
    op = LinearizedOperator(shear_state(3.0, 2, grid32) + random_field(grid32, rng), LOG, shift=0.2)
    p, q = random_field(grid32, rng), random_field(grid32, rng)
    lhs = apply_linearized(op, 2.5 * p - 0.7 * q)
    rhs = 2.5 * apply_linearized(op, p) - 0.7 * apply_linearized(op, q)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * np.max(np.abs(lhs.coeffs))
    assert lhs.mean == 0


def test_grid_mismatch(grid16, grid32):
    with pytest.raises(ValueError):
        apply_linearized(LinearizedOperator(SpectralField.zeros(grid32), GAMMA), SpectralField.zeros(grid16))


# spectrum -------------------------------------------------------------------

@pytest.mark.parametrize("m", [GAMMA, LOG])
def test_dense_spectrum_equals_symbol(grid16, m):
    A = dense_matrix(LinearizedOperator(SpectralField.zeros(grid16), m))
    ev = np.sort(np.linalg.eigvals(A).real)
    K = grid16.kmax
    mags = [math.hypot(a, b) for a in range(-K, K + 1) for b in range(-K, K + 1) if (a, b) != (0, 0)]
    expect = np.sort(-m.symbol(np.array(mags)))
    assert ev.shape == expect.shape
    assert np.max(np.abs(ev - expect)) < 1e-9


@pytest.mark.parametrize("m,top", [(GAMMA, -1.0), (LOG, -1 / math.log(math.e + 1) ** 0.25)])
def test_arnoldi_zero_background(grid32, m, top):
    pairs = rightmost_eigenpairs(LinearizedOperator(SpectralField.zeros(grid32), m), count=4)
    for p in pairs:
        assert p.mu.real == pytest.approx(top, abs=1e-8)
        assert abs(p.mu.imag) < 1e-8
        assert p.residual < 1e-7


def test_arnoldi_matches_dense(grid16):
    op = LinearizedOperator(shear_state(4.0, 2, grid16), GAMMA)
    ev = np.linalg.eigvals(dense_matrix(op))
    top = ev[np.argmax(ev.real)]
    got = rightmost_eigenpairs(op, count=1)[0].mu
    assert got.real == pytest.approx(top.real, abs=1e-8)


def test_direct_mode_config():
    with pytest.raises(ValueError):
        ArnoldiConfig(mode="shift-invert")
    with pytest.raises(ValueError):
        ArnoldiConfig(t_prop=0)


def test_shear_pair_invariants(shear_op, shear_pair):
    assert shear_pair.growth_rate == pytest.approx(0.609367, abs=5e-6)
    assert shear_pair.residual < 1e-7
    assert eigen_residual(shear_op, shear_pair) < 1e-7
    grid = shear_op.grid
    total = l2_sq(grid, shear_pair.phi_re.coeffs) + l2_sq(grid, shear_pair.phi_im.coeffs)
    assert total == pytest.approx(1.0, rel=1e-12)
    assert shear_pair.phi_re.mean == 0 and shear_pair.phi_im.mean == 0
    assert math.sqrt(l2_sq(grid, shear_pair.phi.coeffs)) == pytest.approx(1.0, rel=1e-12)


def test_shift_translates_spectrum(shear_op, shear_pair):
    shifted = rightmost_eigenpairs(shear_op.with_shift(0.37), count=1)[0]
    assert shifted.mu.real == pytest.approx(shear_pair.mu.real - 0.37, abs=1e-9)


def test_linear_run_growth_matches_eigenvalue(shear_op, shear_pair, rng):
    phi = random_field(shear_op.grid, rng, decay=2.0)
    rec = linear_run(phi, shear_op.theta0, GAMMA, 0.0, StepperConfig(dt=5e-3, t_end=20.0, cadence=0.5))
    t, l2 = rec.t, rec.array("L2")
    late = t >= 10.0
    slope = np.polyfit(t[late], np.log(l2[late]), 1)[0]
    assert slope == pytest.approx(shear_pair.growth_rate, rel=0.02)


# semigroup probe ------------------------------------------------------------

def test_probe_sigma_zero_bounded(grid16, rng):
    op = LinearizedOperator(SpectralField.zeros(grid16), GAMMA, shift=0.1)
    phi = random_field(grid16, rng)
    r = semigroup_decay_probe(op, phi, InverseFractionalLaplacian(0.5), 0.0, np.geomspace(0.01, 10, 30))
    assert r.c_emp <= 1.0 + 1e-12
    assert not r.diverging


@pytest.mark.parametrize("method", ["propagate", "spectral"])
def test_probe_single_mode_oracle(grid16, method):
    shift = 0.25
    op = LinearizedOperator(SpectralField.zeros(grid16), GAMMA, shift=shift)
    phi = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    t_star = 1 / (1 + shift)
    tg = np.concatenate([np.geomspace(0.05, 5, 20), [t_star]])
    r = semigroup_decay_probe(op, phi, InverseFractionalLaplacian(0.5), 1.0, tg, dt=1e-3, method=method)
    # sup_t t e^{-(1+s)t} = 1/((1+s) e)
    assert r.c_emp == pytest.approx(1 / ((1 + shift) * math.e), rel=1e-10)


def test_probe_routes_agree(grid16, rng):
    op = LinearizedOperator(shear_state(4.0, 2, grid16), GAMMA)
    lam = rightmost_eigenpairs(op, count=1)[0].growth_rate
    ops = op.with_shift(lam + 0.1)
    phi = random_field(grid16, rng)
    tg = np.geomspace(0.01, 5, 9)
    a = semigroup_decay_probe(ops, phi, InverseFractionalLaplacian(0.5), 0.75, tg, dt=1e-3)
    b = semigroup_decay_probe(ops, phi, InverseFractionalLaplacian(0.5), 0.75, tg, method="spectral")
    assert np.max(np.abs(a.ratios / b.ratios - 1)) < 1e-6


def test_probe_flags_growth(grid16, rng):
    # shift below the rightmost eigenvalue: the ratio keeps growing
    op = LinearizedOperator(shear_state(6.0, 3, grid16), GAMMA)
    lam = rightmost_eigenpairs(op, count=1)[0].growth_rate
    assert lam == pytest.approx(0.8142888, abs=1e-6)
    r = semigroup_decay_probe(op, random_field(grid16, rng), InverseFractionalLaplacian(0.5), 0.75,
                              np.geomspace(0.1, 30, 15), method="spectral")
    assert r.diverging


def test_probe_validation(grid16):
    op = LinearizedOperator(SpectralField.zeros(grid16), GAMMA)
    phi = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    w = InverseFractionalLaplacian(0.5)
    with pytest.raises(ValueError):
        semigroup_decay_probe(op, phi, w, 1.5, [1.0])
    with pytest.raises(ValueError):
        semigroup_decay_probe(op, phi, w, 0.5, [0.0, 1.0])
    with pytest.raises(ValueError):
        semigroup_decay_probe(op, phi + SpectralField.from_modes(grid16, {(0, 0): 1.0}), w, 0.5, [1.0])
    with pytest.raises(ValueError):
        semigroup_decay_probe(op, phi, w, 0.5, [1.0], method="exact")


# exponents ------------------------------------------------------------------

def test_beta_and_delta():
    assert beta_exponent(FractionalLaplacian(0.5)) == pytest.approx(0.5 / 20)
    assert beta_exponent(FractionalLaplacian(1.0)) == pytest.approx(1 / 16)
    assert beta_exponent(LOG) == 0.375
    lam = 0.8
    for m in (GAMMA, LOG):
        d = default_delta(lam, m)
        assert 0 < d < lam * beta_exponent(m) / 2
    assert default_delta(lam, LOG) == pytest.approx(min(0.2, 0.9 * 0.8 * 0.375 / 2))
    with pytest.raises(ValueError):
        default_delta(-0.1, GAMMA)
    with pytest.raises(ValueError):
        beta_exponent(InverseFractionalLaplacian(0.5))
