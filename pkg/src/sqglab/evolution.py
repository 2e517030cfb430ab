"""Integrating-factor RK4 time stepping for forced SQG and its linearization.

All right-hand sides are split as  d/dt th = -D th + R(th)  with D diagonal
in Fourier space (the dissipation symbol plus an optional scalar shift).
The diagonal part is integrated exactly through exp(-D dt); R is treated
with the classical four-stage Runge-Kutta weights (Lawson's scheme).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import cumulative_simpson

from .multipliers import Multiplier, symbol_on_grid
from .spectral import (
    GridSpec,
    SpectralField,
    TWO_PI,
    gradient_phys,
    l2_sq,
    transport_hat,
    velocity_phys,
)

log = logging.getLogger(__name__)

VELOCITY_FLOOR = 1e-8


class BlowUpError(RuntimeError):
    """Numerical blow-up: non-finite coefficients or runaway sup norm."""

    def __init__(self, t: float, max_coeff: float, reason: str = "non-finite coefficients"):
        super().__init__(f"blow-up at t={t:.6g}: {reason} (max |coeff| = {max_coeff:.3e})")
        self.t = t
        self.max_coeff = max_coeff
        self.reason = reason


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    adaptive: bool = False
    c_cfl: float = 0.5
    dt_max: float = 0.05
    cadence: float | None = None
    snapshot_every: float | None = None
    blowup_factor: float = 1e6

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.c_cfl <= 1:
            raise ValueError("c_cfl must lie in (0, 1]")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    @property
    def obs_cadence(self) -> float:
        return self.cadence if self.cadence is not None else self.dt


@dataclass(frozen=True)
class SimState:
    t: float
    theta: SpectralField


@dataclass
class RunRecord:
    times: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def columns(self):
        return ["t", *self.series.keys()]

    def rows(self):
        names = list(self.series)
        for i, t in enumerate(self.times):
            yield [t, *(self.series[k][i] for k in names)]

    @property
    def final(self) -> SpectralField | None:
        return self.meta.get("final")


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------

class IFRK4:
    """Lawson integrating-factor RK4 for  th' = -decay * th + rhs(th)."""

    def __init__(self, decay: np.ndarray, rhs: Callable[[np.ndarray], np.ndarray]):
        self.decay = np.asarray(decay, dtype=float)
        self.rhs = rhs
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def factors(self, dt: float):
        ef = self._cache.get(dt)
        if ef is None:
            ef = (np.exp(-self.decay * dt), np.exp(-self.decay * dt / 2))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[dt] = ef
        return ef

    def step(self, th: np.ndarray, dt: float) -> np.ndarray:
        e, eh = self.factors(dt)
        k1 = self.rhs(th)
        k2 = self.rhs(eh * (th + 0.5 * dt * k1))
        k3 = self.rhs(eh * th + 0.5 * dt * k2)
        k4 = self.rhs(e * th + dt * eh * k3)
        return e * th + (dt / 6.0) * (e * k1 + 2.0 * eh * (k2 + k3) + k4)


class Background:
    """Advection terms about a fixed state Theta0 (precomputed in physical space)."""

    def __init__(self, theta0: SpectralField):
        self.grid = theta0.grid
        self.theta0 = theta0
        self.u1, self.u2 = velocity_phys(self.grid, theta0.coeffs)
        self.g1, self.g2 = gradient_phys(self.grid, theta0.coeffs)
        self.trivial = not np.any(theta0.coeffs * self.grid.dealias)

    def linear(self, phi: np.ndarray) -> np.ndarray:
        """Dealiased -(R^perp Theta0).grad phi - (R^perp phi).grad Theta0."""
        grid = self.grid
        if self.trivial:
            return np.zeros_like(phi)
        v1, v2 = velocity_phys(grid, phi)
        d1, d2 = gradient_phys(grid, phi)
        out = -grid.forward(self.u1 * d1 + self.u2 * d2 + v1 * self.g1 + v2 * self.g2) * grid.dealias
        out[0, 0] = 0.0
        return out

    def perturbation(self, th: np.ndarray) -> np.ndarray:
        """Linear part plus N(th) = -(R^perp th).grad th, in one dealiased product."""
        grid = self.grid
        v1, v2 = velocity_phys(grid, th)
        d1, d2 = gradient_phys(grid, th)
        adv = (self.u1 + v1) * d1 + (self.u2 + v2) * d2 + v1 * self.g1 + v2 * self.g2
        out = -grid.forward(adv) * grid.dealias
        out[0, 0] = 0.0
        return out


def nonlinear_rhs(grid: GridSpec, f_hat: np.ndarray):
    def rhs(th):
        return f_hat - transport_hat(grid, th)
    return rhs


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def cfl_dt(theta: SpectralField, grid: GridSpec, c_cfl: float, dt_max: float | None = None) -> float:
    u1, u2 = velocity_phys(grid, theta.coeffs)
    umax = max(float(np.sqrt(np.max(u1 * u1 + u2 * u2))), VELOCITY_FLOOR)
    dt = c_cfl * grid.dx / umax
    return min(dt, dt_max) if dt_max is not None else dt


def _cfl_from_hat(grid, th, c_cfl, extra_u=None):
    u1, u2 = velocity_phys(grid, th)
    if extra_u is not None:
        u1 = u1 + extra_u[0]
        u2 = u2 + extra_u[1]
    umax = max(float(np.sqrt(np.max(u1 * u1 + u2 * u2))), VELOCITY_FLOOR)
    return c_cfl * grid.dx / umax


def step(state: SimState, f: SpectralField, m: Multiplier, cfg: StepperConfig) -> SimState:
    """Advance the forced equation by one step (CFL-limited dt when adaptive)."""
    grid = state.theta.grid
    integ = IFRK4(symbol_on_grid(m, grid), nonlinear_rhs(grid, f.coeffs))
    dt = cfg.dt
    if cfg.adaptive:
        dt = min(cfl_dt(state.theta, grid, cfg.c_cfl), cfg.dt_max)
    th = integ.step(state.theta.coeffs, dt)
    if not np.all(np.isfinite(th)):
        raise BlowUpError(state.t + dt, float(np.nanmax(np.abs(th))))
    return SimState(state.t + dt, SpectralField(grid, th))


Observer = Callable[[float, SpectralField], float]


def integrate(integ: IFRK4, grid: GridSpec, th0: np.ndarray, cfg: StepperConfig,
              observers: Mapping[str, Observer] | None = None, t0: float = 0.0,
              dt_policy: Callable[[np.ndarray], float] | None = None,
              sup_scale: float | None = None, meta: dict | None = None) -> RunRecord:
    """Drive ``integ`` from ``t0`` to ``cfg.t_end`` observing on a fixed cadence.

    ``dt_policy`` (if given) returns the stable step for the current state;
    steps are shortened to land exactly on observation times.
    """
    observers = dict(observers or {})
    rec = RunRecord(meta=dict(meta or {}))
    for name in observers:
        rec.series[name] = []
    cadence = cfg.obs_cadence
    snap_every = cfg.snapshot_every
    th = np.array(th0, dtype=np.complex128)
    t = t0
    n_obs = 0
    n_snap = 0
    limit = None if sup_scale is None else cfg.blowup_factor * max(sup_scale, 1e-300)

    def observe(t, th):
        nonlocal n_snap
        fld = SpectralField(grid, th)
        rec.times.append(t)
        for name, fn in observers.items():
            rec.series[name].append(float(fn(t, fld)))
        if limit is not None:
            sup = float(np.max(np.abs(grid.inverse(th))))
            if sup > limit:
                raise BlowUpError(t, float(np.max(np.abs(th))), f"sup norm {sup:.3e} exceeds {limit:.3e}")
        if snap_every is not None and t >= t0 + n_snap * snap_every - 1e-9 * max(snap_every, cadence):
            rec.snapshots.append((t, fld))
            n_snap += 1

    observe(t, th)
    n_obs = 1
    t_end = cfg.t_end
    nsteps = 0
    while t < t_end - 1e-12 * max(1.0, t_end):
        dt = cfg.dt if dt_policy is None else dt_policy(th)
        t_next = min(t0 + n_obs * cadence, t_end)
        hit = False
        if t + dt >= t_next - 1e-9 * dt:
            dt = t_next - t
            hit = True
        th = integ.step(th, dt)
        nsteps += 1
        if not np.all(np.isfinite(th)):
            raise BlowUpError(t + dt, float(np.nanmax(np.abs(np.nan_to_num(th, nan=0.0, posinf=np.inf)))))
        t = t_next if hit else t + dt
        if hit:
            n_obs += 1
            observe(t, th)
    rec.meta["final"] = SpectralField(grid, th)
    rec.meta["t_final"] = t
    rec.meta["steps"] = nsteps
    return rec


def default_observers(m: Multiplier, f: SpectralField | None = None) -> dict[str, Observer]:
    """Energy, its semi-discrete rate, L2 and mean."""
    obs: dict[str, Observer] = {}

    def energy(t, th):
        return 0.5 * l2_sq(th.grid, th.coeffs)

    def rate(t, th):
        grid = th.grid
        sym = symbol_on_grid(m, grid)
        diss = TWO_PI ** 2 * float(np.sum(grid.weights * sym * np.abs(th.coeffs) ** 2))
        work = 0.0
        if f is not None:
            work = TWO_PI ** 2 * float(np.sum(grid.weights * np.real(f.coeffs * np.conj(th.coeffs))))
        return -diss + work

    obs["energy"] = energy
    obs["energy_rate"] = rate
    obs["L2"] = lambda t, th: float(np.sqrt(l2_sq(th.grid, th.coeffs)))
    obs["mean"] = lambda t, th: th.mean
    return obs


def run(theta0: SpectralField, f: SpectralField | None, m: Multiplier, cfg: StepperConfig,
        observers: Mapping[str, Observer] | None = None) -> RunRecord:
    """Integrate the forced equation from ``theta0`` up to ``cfg.t_end``."""
    grid = theta0.grid
    if f is None:
        f = SpectralField.zeros(grid)
    if f.grid != grid:
        raise ValueError("theta0 and f must share a grid")
    if abs(f.mean) > 1e-13 * max(1.0, float(np.max(np.abs(f.coeffs)))):
        raise ValueError(f"forcing must be mean-zero (mean = {f.mean:.3e})")
    obs = default_observers(m, f) if observers is None else dict(observers)
    integ = IFRK4(symbol_on_grid(m, grid), nonlinear_rhs(grid, f.coeffs))
    policy = None
    if cfg.adaptive:
        def policy(th):
            return min(_cfl_from_hat(grid, th, cfg.c_cfl), cfg.dt_max)
    scale = max(float(np.max(np.abs(theta0.to_physical()))), float(np.max(np.abs(f.to_physical()))), 1e-12)
    return integrate(integ, grid, theta0.coeffs, cfg, obs, dt_policy=policy, sup_scale=scale,
                     meta={"kind": "nonlinear", "multiplier": m.describe()})


def linear_run(phi0: SpectralField, theta0: SpectralField, m: Multiplier, shift: float,
               cfg: StepperConfig, observers: Mapping[str, Observer] | None = None) -> RunRecord:
    """Integrate  phi' = L phi - shift * phi  about the steady state ``theta0``."""
    grid = phi0.grid
    if abs(phi0.mean) > 1e-12 * max(1.0, float(np.max(np.abs(phi0.coeffs)))):
        raise ValueError("phi0 must be mean-zero")
    bg = Background(theta0)
    integ = IFRK4(symbol_on_grid(m, grid) + shift, bg.linear)
    obs = {"L2": lambda t, th: float(np.sqrt(l2_sq(th.grid, th.coeffs)))} if observers is None else observers
    policy = None
    if cfg.adaptive:
        u0 = (bg.u1, bg.u2)
        dt_bg = min(_cfl_from_hat(grid, np.zeros_like(phi0.coeffs), cfg.c_cfl, u0), cfg.dt_max)

        def policy(th):
            return dt_bg
    return integrate(integ, grid, phi0.coeffs, cfg, obs, dt_policy=policy,
                     meta={"kind": "linear", "shift": shift, "multiplier": m.describe()})


def energy_balance_check(record: RunRecord) -> float:
    """Max over recorded times of |E(t) - E(0) - int_0^t rate|, divided by the run length.

    Needs the ``energy`` and ``energy_rate`` series of :func:`default_observers`.
    """
    t = record.t
    if len(t) < 2:
        return 0.0
    e = record.array("energy")
    r = record.array("energy_rate")
    if len(t) >= 3 and np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        integral = cumulative_simpson(r, x=t, initial=0.0)
    else:
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (r[1:] + r[:-1]) * np.diff(t))])
    resid = np.abs(e - e[0] - integral)
    return float(resid.max() / max(t[-1] - t[0], 1e-300))
