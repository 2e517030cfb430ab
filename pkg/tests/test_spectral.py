import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import convolve, modes_of, to_field
from sqglab.multipliers import (
    FractionalLaplacian,
    Identity,
    InverseFractionalLaplacian,
    InverseLog,
    LogSupercritical,
    MeanZeroError,
)
from sqglab.spectral import (
    GridSpec,
    SpectralField,
    apply_multiplier,
    band_mask,
    commutator,
    dealiased_product,
    l2_sq,
    lp_project,
    max_band,
    nonlinear_term,
    norm,
    product,
    random_field,
    riesz_perp,
)


# transforms -----------------------------------------------------------------

def test_constant_roundtrip(grid16):
    th = SpectralField.from_physical(grid16, np.full(grid16.shape, 2.5))
    assert th.coefficient(0, 0) == pytest.approx(2.5, abs=1e-15)
    assert np.max(np.abs(th.coeffs[1:])) < 1e-15 and np.max(np.abs(th.coeffs[0, 1:])) < 1e-15
    assert np.allclose(th.to_physical(), 2.5, atol=1e-14)


def test_cos_x1_coefficients(grid16):
    x1, _ = grid16.coords
    th = SpectralField.from_physical(grid16, np.cos(x1))
    assert th.coefficient(1, 0) == pytest.approx(0.5, abs=1e-15)
    assert th.coefficient(-1, 0) == pytest.approx(0.5, abs=1e-15)
    c = th.coeffs.copy()
    c[1, 0] = c[-1, 0] = 0
    assert np.max(np.abs(c)) < 1e-15


def test_random_roundtrip(grid64, rng):
    x = rng.standard_normal(grid64.shape)
    back = SpectralField.from_physical(grid64, x).to_physical()
    assert np.max(np.abs(back - x)) < 1e-12


@pytest.mark.parametrize("n", [7, 15, 6, 0, -8])
def test_bad_grid_rejected(n):
    with pytest.raises(ValueError):
        GridSpec(n)


def test_complex_samples_rejected(grid16):
    with pytest.raises(ValueError):
        SpectralField.from_physical(grid16, np.ones(grid16.shape, dtype=complex))


def test_full_coeffs_conjugate_symmetric(grid16, rng):
    th = random_field(grid16, rng)
    full = th.full_coeffs()
    idx = (-np.arange(16)) % 16
    assert np.allclose(full[np.ix_(idx, idx)], np.conj(full), atol=1e-15)
    assert np.max(np.abs(np.fft.ifft2(full).imag)) < 1e-15


# multipliers ----------------------------------------------------------------

def test_fractional_on_unit_mode(grid16):
    th = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    out = apply_multiplier(FractionalLaplacian(0.5), th)
    assert np.allclose(out.coeffs, th.coeffs, atol=1e-15)


def test_log_multiplier_on_3_4(grid16):
    th = SpectralField.from_modes(grid16, {(3, 4): 1.0})
    out = apply_multiplier(LogSupercritical(0.25), th)
    with mpmath.workdps(30):
        exact = float(5 / mpmath.log(mpmath.e + 5) ** mpmath.mpf("0.25"))
    assert exact == pytest.approx(4.182, abs=5e-4)
    assert out.coefficient(3, 4).real == pytest.approx(exact, rel=1e-14)


@pytest.mark.parametrize("m", [FractionalLaplacian(0.5), FractionalLaplacian(2.0), LogSupercritical(0.25)])
def test_zero_mode_annihilated(grid16, m):
    th = SpectralField.from_modes(grid16, {(0, 0): 3.0, (1, 1): 1.0})
    assert apply_multiplier(m, th).coeffs[0, 0] == 0


def test_identity_keeps_mean(grid16):
    th = SpectralField.from_modes(grid16, {(0, 0): 3.0})
    assert apply_multiplier(Identity(), th).mean == 3.0


@pytest.mark.parametrize("inv,fwd", [(InverseFractionalLaplacian(0.7), FractionalLaplacian(0.7)),
                                     (InverseLog(0.25), LogSupercritical(0.25))])
def test_inverse_composition(grid32, rng, inv, fwd):
    th = random_field(grid32, rng)
    back = apply_multiplier(fwd, apply_multiplier(inv, th))
    assert np.max(np.abs(back.coeffs - th.coeffs)) <= 1e-12 * np.max(np.abs(th.coeffs))


def test_inverse_rejects_mean(grid16):
    th = SpectralField.from_modes(grid16, {(0, 0): 1.0, (1, 0): 1.0})
    with pytest.raises(MeanZeroError):
        apply_multiplier(InverseFractionalLaplacian(0.5), th)
    with pytest.raises(ValueError):
        apply_multiplier(InverseLog(0.25), th)


@given(seed=st.integers(0, 2 ** 31), gamma=st.floats(0.05, 2.0))
def test_inverse_composition_property(seed, gamma):
    grid = GridSpec(16)
    th = random_field(grid, np.random.default_rng(seed))
    back = apply_multiplier(InverseFractionalLaplacian(gamma), apply_multiplier(FractionalLaplacian(gamma), th))
    assert np.max(np.abs(back.coeffs - th.coeffs)) <= 1e-12 * np.max(np.abs(th.coeffs))


# Riesz transforms -----------------------------------------------------------

@pytest.mark.parametrize("m", [1, 2, 5])
def test_riesz_perp_of_shear(grid32, m):
    th = SpectralField.from_modes(grid32, {(0, m): 0.5})
    u1, u2 = riesz_perp(th).to_physical()
    _, x2 = grid32.coords
    assert np.max(np.abs(u1 + np.sin(m * x2))) < 1e-14
    assert np.max(np.abs(u2)) < 1e-14


def test_riesz_perp_constant(grid16):
    u = riesz_perp(SpectralField.from_modes(grid16, {(0, 0): 4.0}))
    assert u.sup() == 0.0


@given(seed=st.integers(0, 2 ** 31))
def test_riesz_divergence_free(seed):
    grid = GridSpec(32)
    th = random_field(grid, np.random.default_rng(seed), decay=1.0)
    assert riesz_perp(th).divergence_symbol_max() < 1e-14


# nonlinearity ---------------------------------------------------------------

def test_nonlinear_term_of_shear(grid32):
    th = SpectralField.from_modes(grid32, {(0, 3): 1.7})
    assert np.max(np.abs(nonlinear_term(th).coeffs)) < 1e-14


def test_nonlinear_term_zero(grid16):
    assert np.all(nonlinear_term(SpectralField.zeros(grid16)).coeffs == 0)


def test_nonlinear_term_skew_and_mean_free(grid64, rng):
    th = random_field(grid64, rng, decay=1.5)
    N = nonlinear_term(th)
    quad = float(np.sum(N.to_physical() * th.to_physical())) * grid64.dx ** 2
    assert abs(quad) < 1e-10
    assert N.mean == 0


def test_dealiased_product_matches_padded_grid(grid32, rng):
    f = random_field(grid32, rng)
    g = random_field(grid32, rng)
    # oracle: exact product on a 2n grid, truncated back to the retained box
    big = GridSpec(64)
    K = grid32.kmax
    pad = lambda c: to_field(big, {k: v for k, v in modes_of(c).items()})  # noqa: E731
    prod_big = SpectralField.from_physical(big, pad(f).to_physical() * pad(g).to_physical())
    expect = to_field(grid32, modes_of(prod_big, K))
    got = product(f, g)
    assert np.max(np.abs(got.coeffs - expect.coeffs)) < 1e-12 * np.max(np.abs(expect.coeffs))


def test_dealiased_product_matches_convolution(grid16, rng):
    f = random_field(grid16, rng)
    g = random_field(grid16, rng)
    expect = to_field(grid16, convolve(modes_of(f), modes_of(g)))
    got = SpectralField(grid16, dealiased_product(grid16, f.coeffs, g.coeffs))
    assert np.max(np.abs(got.coeffs - expect.coeffs)) < 1e-14


def test_parseval(grid64, rng):
    th = random_field(grid64, rng, decay=1.0) + SpectralField.from_modes(grid64, {(0, 0): 0.3})
    spectral = l2_sq(grid64, th.coeffs)
    physical = float(np.sum(th.to_physical() ** 2)) * grid64.dx ** 2
    assert spectral == pytest.approx(physical, rel=1e-11)


# Littlewood-Paley -----------------------------------------------------------

def test_lp_single_mode(grid32):
    th = SpectralField.from_modes(grid32, {(3, 4): 1.0})
    assert np.array_equal(lp_project(2, th).coeffs, th.coeffs)
    assert np.all(lp_project(0, th).coeffs == 0)
    assert np.array_equal(lp_project(1, th, smoothed=True).coeffs, th.coeffs)


def test_lp_partition_of_unity(grid64, rng):
    th = random_field(grid64, rng, decay=0.5) + SpectralField.from_modes(grid64, {(0, 0): 1.0})
    total = sum((lp_project(j, th).coeffs for j in range(-1, max_band(grid64) + 1)),
                np.zeros(grid64.spectral_shape, dtype=complex))
    assert np.max(np.abs(total - th.coeffs)) < 1e-13


def test_bands_are_disjoint(grid32):
    masks = [band_mask(grid32, j) for j in range(-1, max_band(grid32) + 1)]
    assert np.array_equal(np.sum(masks, axis=0), np.ones(grid32.spectral_shape))
    with pytest.raises(ValueError):
        band_mask(grid32, -2)


def test_commutator_trivial_cases(grid32, rng):
    g = random_field(grid32, rng)
    const = SpectralField.from_modes(grid32, {(0, 0): 2.0})
    assert np.max(np.abs(commutator(const, 2, g).coeffs)) < 1e-14
    assert np.all(commutator(g, 2, SpectralField.zeros(grid32)).coeffs == 0)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_commutator_matches_convolution(grid16, rng, j):
    f = random_field(grid16, rng)
    g = random_field(grid16, rng)
    gj = modes_of(lp_project(j, g))
    fg = to_field(grid16, convolve(modes_of(f), modes_of(g)))
    expect = to_field(grid16, convolve(modes_of(f), gj)).coeffs - lp_project(j, fg).coeffs
    got = commutator(f, j, g).coeffs
    assert np.max(np.abs(got - expect)) < 1e-11


# norms ----------------------------------------------------------------------

def test_norm_of_cos(grid16):
    th = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    assert norm(th) == pytest.approx(math.pi * math.sqrt(2), rel=1e-15)
    assert norm(th, "sup") == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("kind", ["L2", "sobolev", "hsobolev", "sup", "mean"])
def test_norm_of_zero(grid16, kind):
    assert norm(SpectralField.zeros(grid16), kind, 1.5) == 0.0


@pytest.mark.parametrize("s", [0.5, 1.0, 2.7])
def test_hdot_single_mode(grid16, s):
    th = SpectralField.from_modes(grid16, {(2, 0): 0.8})
    assert norm(th, "hsobolev", s) == pytest.approx(2 ** s * norm(th), rel=1e-14)
    assert norm(th, "sobolev", s) == pytest.approx(math.sqrt(1 + 4 ** s) * norm(th), rel=1e-14)


def test_unknown_norm(grid16):
    with pytest.raises(ValueError):
        norm(SpectralField.zeros(grid16), "H")


def test_mean_norm_and_fields_arithmetic(grid16):
    a = SpectralField.from_modes(grid16, {(0, 0): -2.0, (1, 2): 1 + 1j})
    assert norm(a, "mean") == 2.0
    b = 2 * a - a / 2
    assert np.allclose(b.coeffs, 1.5 * a.coeffs)
    with pytest.raises(ValueError):
        a + SpectralField.zeros(GridSpec(32))
