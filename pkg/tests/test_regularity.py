import math

import mpmath
import numpy as np
import pytest

from sqglab.multipliers import LogSupercritical
from sqglab.spectral import GridSpec, SpectralField, norm, random_field
from sqglab.steady import manufacture_forcing, shear_state
from sqglab import regularity as rg

KER = rg.KernelModel()


def trapezoid_profile(x, alpha, a, kappa=math.e, n=400_000):
    # s = x w^4 tames the log singularity at s = 0
    b = a * (2 - alpha) / (1 - alpha)
    w = np.linspace(0.0, 1.0, n + 1)[1:]
    f = 4 * x * w ** 3 * np.log(kappa + 1 / (4 * x * w ** 4)) ** b
    f = np.concatenate([[0.0], f])
    return float(np.sum(f[1:] + f[:-1]) * 0.5 / n)


def bisect(fn, lo, hi, target, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kernel_symbol_oracle(k, a=0.25, kappa=math.e):
    """2 pi int_0^inf r^-2 log^-a(kappa + 1/r) (1 - J0(k r)) dr."""
    with mpmath.workdps(20):
        ell = lambda r: mpmath.log(kappa + 1 / r) ** (-a)  # noqa: E731
        R = mpmath.mpf(50) / k
        head = mpmath.quad(lambda r: r ** -2 * ell(r) * (1 - mpmath.besselj(0, k * r)), [0, R / 1000, R / 10, R])
        tail = mpmath.quad(lambda r: r ** -2 * ell(r), [R, mpmath.inf])
        osc = mpmath.quadosc(lambda r: r ** -2 * ell(r) * mpmath.besselj(0, k * r), [R, mpmath.inf], omega=k)
        return float(2 * mpmath.pi * (head + tail - osc))


# schedule ---------------------------------------------------------------------

def test_schedule_a_zero_closed_form():
    s = rg.XiSchedule(0.05, 0.1, 0.0, c0=0.7)
    assert s.phi(0.03) == 0.03
    assert s.t_star == pytest.approx(4 * 0.1 * 0.05 / 0.7, rel=1e-15)
    for t in (0.0, 0.01, 0.02):
        assert s.xi_at(t) == pytest.approx(max(0.05 - 0.7 * t / 0.4, 0.0), abs=1e-16)
    assert s.xi_at(s.t_star) == 0.0


def test_profile_endpoints():
    assert rg.phi_profile(0.0, 0.1, 0.25) == 0.0
    s = rg.XiSchedule(0.05, 0.1, 0.25)
    assert s.xi_at(0.0) == 0.05
    assert s.xi_at(s.t_star) == 0.0 and s.xi_at(2 * s.t_star) == 0.0
    with pytest.raises(ValueError):
        rg.phi_profile(-1.0, 0.1, 0.25)


def test_profile_matches_trapezoid():
    val = rg.phi_profile(0.05, 0.1, 0.25)
    assert val == pytest.approx(trapezoid_profile(0.05, 0.1, 0.25), rel=1e-8)


def test_profile_monotone():
    xs = np.linspace(0.0, 0.5, 40)
    vals = [rg.phi_profile(x, 0.25, 0.25) for x in xs]
    assert np.all(np.diff(vals) > 0)


def test_xi_half_time():
    s = rg.XiSchedule(0.05, 0.1, 0.25)
    xi = s.xi_at(s.t_star / 2)
    assert s.phi(xi) == pytest.approx(s.phi_xi0 / 2, rel=1e-12)
    # independent route: bisection on the trapezoid profile
    half = trapezoid_profile(0.05, 0.1, 0.25) / 2
    oracle = bisect(lambda x: trapezoid_profile(x, 0.1, 0.25, n=100_000), 0.0, 0.05, half, iters=50)
    assert xi == pytest.approx(oracle, rel=1e-6)


def test_schedule_ode_equality():
    s = rg.XiSchedule(0.5, 0.25, 0.25, c0=0.8)
    ts = np.linspace(0.05, 0.9, 12) * s.t_star
    xis = [s.xi_at(t) for t in ts]
    assert np.all(np.diff(xis) < 0)
    h = 1e-5 * s.t_star
    for t, xi in zip(ts, xis):
        deriv = (s.xi_at(t + h) - s.xi_at(t - h)) / (2 * h)
        assert -deriv == pytest.approx(s.speed_bound(xi), rel=1e-6)


@pytest.mark.parametrize("kw", [dict(xi0=0.0), dict(alpha=0.5), dict(a=0.5), dict(kappa=2.0), dict(c0=0.0)])
def test_schedule_validation(kw):
    args = dict(xi0=0.5, alpha=0.25, a=0.25)
    args.update(kw)
    with pytest.raises(ValueError):
        rg.XiSchedule(**args)


# v-field and g ----------------------------------------------------------------

def test_v_field_cos_example(grid32):
    th = SpectralField.from_modes(grid32, {(1, 0): 0.5})
    v = rg.v_field(th, 0.0, 1.0, (math.pi, 0.0))
    x1, _ = grid32.coords
    assert np.max(np.abs(v.to_physical() + 2 * np.cos(x1) / math.pi)) < 1e-14
    gs = rg.g_sup(th, 0.0, 1.0, np.array([[math.pi, 0.0]]))
    assert math.sqrt(gs.g) == pytest.approx(2 / math.pi, rel=1e-14)
    assert gs.x0 == (0.0, 0.0)


def test_v_field_off_lattice_shift(grid32, rng):
    th = random_field(grid32, rng)
    h = (0.3, -1.1)
    v = rg.v_field(th, 0.2, 0.25, h)
    pts = np.array([[0.5, 1.0], [4.0, 2.2]])
    direct = rg.evaluate_at(th, pts + np.array(h)) - rg.evaluate_at(th, pts)
    scale = (0.04 + 0.3 ** 2 + 1.1 ** 2) ** (-0.125)
    assert np.allclose(rg.evaluate_at(v, pts), scale * direct, atol=1e-13)


def test_constant_has_zero_g(grid16):
    th = SpectralField.from_modes(grid16, {(0, 0): 4.0})
    assert rg.g_sup(th, 0.1, 0.25, rg.h_set(grid16, 4, 4)).g == 0.0


def test_xi_zero_h_zero_rejected(grid16):
    th = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    with pytest.raises(ValueError):
        rg.v_field(th, 0.0, 0.25, (0.0, 0.0))
    with pytest.raises(ValueError):
        rg.g_sup(th, 0.0, 0.25, np.array([[0.0, 0.0]]))


def test_g_sup_against_denser_h_set(grid32, rng):
    th = random_field(grid32, rng, decay=2.0)
    coarse = rg.g_sup(th, 0.05, 0.25, rg.h_set(grid32))
    dense = rg.g_sup(th, 0.05, 0.25, rg.h_set(grid32, refine=2))
    assert coarse.g == pytest.approx(dense.g, rel=0.02)


def test_h_set_layout(grid32):
    hs = rg.h_set(grid32, 5, 4)
    r = np.hypot(hs[:, 0], hs[:, 1])
    assert hs.shape == (20, 2)
    assert r.min() == pytest.approx(grid32.dx / 2) and r.max() == pytest.approx(math.pi)


# Hoelder seminorm -------------------------------------------------------------

def test_holder_of_zero(grid16):
    assert rg.holder_seminorm(SpectralField.zeros(grid16), 0.5, rg.h_set(grid16)) == 0.0


def test_holder_lipschitz_limit(grid64):
    th = SpectralField.from_modes(grid64, {(1, 0): 0.5})
    vals = [rg.holder_seminorm(th, 1.0, rg.h_set(grid64, r_min=r)) for r in (0.5, 0.1, 0.01)]
    assert vals[0] < vals[1] < vals[2] <= 1.0
    assert vals[2] == pytest.approx(1.0, abs=2e-3)


def test_holder_homogeneous(grid32, rng):
    th = random_field(grid32, rng)
    hs = rg.h_set(grid32, 8, 8)
    assert rg.holder_seminorm(-3 * th, 0.3, hs) == pytest.approx(3 * rg.holder_seminorm(th, 0.3, hs), rel=1e-13)
    with pytest.raises(ValueError):
        rg.holder_seminorm(th, 0.0, hs)


# kernel and D_h ---------------------------------------------------------------

def test_kernel_bounds():
    r = np.geomspace(1e-8, 3.0, 400)
    chk = KER.bounds_check(r)
    assert chk["upper"] and chk["lower"]
    assert 0 < KER.r0 < 1 and chk["n_near"] > 100


@pytest.mark.parametrize("k", [1.0, 3.0, 6.0])
def test_kernel_symbol(k):
    assert KER.symbol(np.array([k]))[0] == pytest.approx(kernel_symbol_oracle(k), rel=1e-8)
    assert KER.symbol(np.array([0.0]))[0] == 0.0


def test_kernel_validation():
    with pytest.raises(ValueError):
        rg.KernelModel(a=0.0)
    with pytest.raises(ValueError):
        rg.KernelModel(inner=2.0, outer=1.0)
    with pytest.raises(ValueError):
        rg.KernelModel(taylor_depth=-1)


def test_dissipation_constant_is_zero(grid32):
    v = SpectralField.from_modes(grid32, {(0, 0): 2.0})
    assert rg.dissipation_quadrature(v, KER, (0.3, 0.4)) == pytest.approx(0.0, abs=1e-14)
    assert rg.dissipation_spectral(v, KER, (0.3, 0.4)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 3])
def test_dissipation_single_mode_oracle(grid32, k):
    # v = cos(k x1):  D(0) = (2 sigma(k) - sigma(2k)/2) / (2 pi)
    v = SpectralField.from_modes(grid32, {(k, 0): 0.5})
    oracle = (2 * kernel_symbol_oracle(k) - kernel_symbol_oracle(2 * k) / 2) / (2 * math.pi)
    assert rg.dissipation_spectral(v, KER, (0.0, 0.0)) == pytest.approx(oracle, rel=1e-8)
    assert rg.dissipation_quadrature(v, KER, (0.0, 0.0)) == pytest.approx(oracle, rel=1e-5)


def test_dissipation_routes_and_refinement(grid32, rng):
    th = random_field(grid32, rng, decay=2.0)
    v = rg.v_field(th, 0.1, 0.25, (0.3, 0.2))
    for x0 in ((0.1, 0.2), (2.0, 5.0), (4.4, 0.7)):
        q = rg.dissipation_quadrature(v, KER, x0)
        assert q > 0
        assert rg.dissipation_quadrature(v, KER, x0, resolution=2) == pytest.approx(q, rel=0.01)
        assert rg.dissipation_spectral(v, KER, x0) == pytest.approx(q, rel=1e-5)
        # whole cutoff ball under the Taylor expansion: coarser but close
        flat = rg.dissipation_quadrature(v, rg.KernelModel(taylor_depth=0), x0)
        assert flat == pytest.approx(q, rel=0.02)


def test_dissipation_cutoff_checks(grid32):
    v = SpectralField.from_modes(grid32, {(1, 0): 0.5})
    with pytest.raises(ValueError):
        rg.dissipation_quadrature(v, rg.KernelModel(cutoff=grid32.dx / 2), (0.0, 0.0))
    with pytest.raises(ValueError):
        rg.dissipation_quadrature(v, rg.KernelModel(cutoff=1.5), (0.0, 0.0))


# tracked trajectory ------------------------------------------------------------

@pytest.fixture(scope="module")
def tracked():
    grid = GridSpec(32)
    m = LogSupercritical(0.25)
    f = manufacture_forcing(shear_state(1.0, 1, grid), m)
    th = random_field(grid, np.random.default_rng(3), decay=3.0, kcut=6)
    th = th * (3 / norm(th, "sup"))
    sch = rg.XiSchedule(0.5, 0.25, 0.25)
    return rg.tracked_run(th, f, m, sch, rg.h_set(grid, 16, 8), t_factor=3.0, c0_scan=(1.0, 0.5))


def test_tracker_report(tracked):
    rep = tracked.report
    M2 = tracked.bounds.M ** 2
    assert rep.flags == []
    assert rep.rows[0].g <= M2 / 4
    assert all(r.g < M2 for r in rep.rows)
    assert all(r.localized is not False for r in rep.rows)
    assert rep.scan == {1.0: True, 0.5: True} and rep.c0_threshold == 1.0
    assert rep.hk_plateau is True
    assert len(rep.rows) == len(tracked.record.snapshots) == 61
    assert rep.columns() == ["t", "g", "M2", "xi", "holder_alpha", "flags"]


def test_tracker_holder_after_tstar(tracked):
    sch = tracked.schedule
    hs = rg.h_set(GridSpec(32), 16, 8)
    after = [(r, th) for r, (_, th) in zip(tracked.report.rows, tracked.record.snapshots) if r.t >= sch.t_star]
    assert after
    for r, th in after[::10]:
        assert r.xi == 0.0
        assert r.holder_alpha == math.sqrt(r.g)
        assert r.holder_alpha == pytest.approx(rg.holder_seminorm(th, sch.alpha, hs), rel=1e-14)
    before = [r for r in tracked.report.rows if r.t < sch.t_star]
    assert all(math.isnan(r.holder_alpha) for r in before)


def test_tracker_flags_crossing(tracked):
    rep = rg.holder_tracker(tracked.record.snapshots[:3], tracked.schedule, 0.25, 1e-3,
                            rg.h_set(GridSpec(32), 8, 4))
    assert all(r.crossing for r in rep.rows) and len(rep.flags) >= 3


def test_lower_bound_check(tracked):
    sch = tracked.schedule
    grid = GridSpec(32)
    traj = tracked.record.snapshots[::10]
    base = rg.lower_bound_check(traj, sch, KER, 0.25, rg.h_set(grid))
    assert base.c1 > 0 and not base.violation
    scaled = rg.lower_bound_check([(t, 2.5 * th) for t, th in traj], sch, KER, 0.25, rg.h_set(grid))
    assert scaled.c1 == pytest.approx(base.c1, rel=1e-10)
    fine = rg.lower_bound_check(traj, sch, KER, 0.25, rg.h_set(grid, refine=2))
    assert fine.c1 == pytest.approx(base.c1, rel=0.2)


def test_lower_bound_single_mode(grid32):
    th = SpectralField.from_modes(grid32, {(2, 1): 0.5})
    sch = rg.XiSchedule(0.5, 0.25, 0.25)
    rep = rg.lower_bound_check([(0.0, th), (sch.t_star, th)], sch, KER, 0.25, rg.h_set(grid32, 12, 8))
    assert rep.c1 > 0
    with pytest.raises(ValueError):
        rg.lower_bound_check([(0.0, SpectralField.zeros(grid32))], sch, KER, 0.25, rg.h_set(grid32, 4, 4))


# almost monotone ---------------------------------------------------------------

def test_almost_monotone_gamma_one():
    grid = np.geomspace(1e-6, 1.0, 400)
    assert rg.almost_monotone_check([1.0], math.e, grid) <= 1.0


def test_almost_monotone_equal_arguments():
    assert rg.almost_monotone_check([0.3], math.e, np.array([0.2])) == pytest.approx(0.3)


def test_almost_monotone_grid_stable():
    gammas = np.linspace(0.1, 1.0, 10)
    a = rg.almost_monotone_check(gammas, math.e, np.geomspace(1e-6, 1.0, 2000))
    b = rg.almost_monotone_check(gammas, math.e, np.geomspace(1e-6, 1.0, 4000))
    assert math.isfinite(a)
    assert float(f"{a:.3g}") == float(f"{b:.3g}")
    with pytest.raises(ValueError):
        rg.almost_monotone_check(gammas, math.e, np.array([0.0, 1.0]))
