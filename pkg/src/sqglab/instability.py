"""Nonlinear instability protocol: eigenfunction perturbations of a steady state.

A ladder of amplitudes eps is run from  th~(0) = eps * phi  (phi the real part
of the dominant eigenfunction).  Each run yields a linear-window growth rate,
the first time ||th~||_L2 reaches an eps-independent level c0, and the
saturation level reached afterwards.  Escape times are regressed on
log(1/eps); the slope estimates 1/lambda.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .evolution import Background, IFRK4, RunRecord, StepperConfig, integrate, nonlinear_rhs, _cfl_from_hat
from .multipliers import FractionalLaplacian, Multiplier, symbol_on_grid
from .spectral import SpectralField, l2_sq, norm, transport_hat
from .stability import EigenPair, LinearizedOperator, beta_exponent, propagate
from .steady import SteadyState

log = logging.getLogger(__name__)


def sobolev_observer(s: float):
    """Inhomogeneous H^s norm, sqrt(||.||_L2^2 + ||.||_Hdot^s^2)."""
    def obs(t, th):
        return norm(th, "sobolev", s)
    return obs


def l2_observer(t, th):
    return math.sqrt(l2_sq(th.grid, th.coeffs))


def default_norms(m: Multiplier) -> dict[str, float]:
    norms = {"L2": 0.0}
    if isinstance(m, FractionalLaplacian):
        norms["H_2mg"] = 2.0 - m.gamma
        norms["H_2m2g3"] = 2.0 - 2.0 * m.gamma / 3.0
    else:
        norms["H1"] = 1.0
        norms["H2"] = 2.0
    return norms


@dataclass(frozen=True)
class InstabilityConfig:
    epsilons: tuple
    eigenpair: EigenPair
    steady: SteadyState
    rho_esc: float = 0.5
    norms: dict | None = None
    stepper: StepperConfig = StepperConfig(dt=2e-3, adaptive=True, c_cfl=0.4, dt_max=0.01, cadence=0.05)
    sat_window: float = 6.0
    trim: float = 0.05
    formulation: str = "perturbation"
    snapshot_every: float | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if any(e <= 0 for e in eps):
            raise ValueError("ladder amplitudes must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("ladder must be strictly decreasing")
        if not 0.0 < self.rho_esc < 1.0:
            raise ValueError("rho_esc must lie in (0, 1)")
        if self.formulation not in ("perturbation", "full"):
            raise ValueError(f"unknown formulation {self.formulation!r}")

    @property
    def lam(self) -> float:
        return self.eigenpair.growth_rate

    @property
    def phi(self) -> SpectralField:
        return self.eigenpair.phi

    @property
    def a_factor(self) -> float:
        """The bootstrap constant A = 3 ||phi|| / 2."""
        return 1.5 * math.sqrt(l2_sq(self.phi.grid, self.phi.coeffs))

    @property
    def norm_set(self) -> dict[str, float]:
        return dict(self.norms) if self.norms is not None else default_norms(self.steady.m)

    def observers(self):
        obs = {}
        for name, s in self.norm_set.items():
            obs[name] = l2_observer if s == 0 else sobolev_observer(s)
        return obs


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------

def run_perturbation(cfg: InstabilityConfig, eps: float, t_end: float | None = None,
                     formulation: str | None = None, stepper: StepperConfig | None = None) -> RunRecord:
    """Evolve th~ from eps*phi; the 'full' form evolves Th0 + th~ and subtracts Th0."""
    st = stepper or cfg.stepper
    if t_end is not None:
        st = replace(st, t_end=t_end)
    if cfg.snapshot_every is not None and st.snapshot_every is None:
        st = replace(st, snapshot_every=cfg.snapshot_every)
    rec = evolve_perturbation(cfg.steady, eps * cfg.phi, st, cfg.observers(), formulation or cfg.formulation)
    rec.meta.update(epsilon=eps, **{"lambda": cfg.lam})
    return rec


def evolve_perturbation(ss: SteadyState, pert0: SpectralField, st: StepperConfig, observers=None,
                        formulation: str = "perturbation") -> RunRecord:
    """Evolve the perturbation th~ of the steady state ``ss`` from ``pert0``.

    ``observers`` default to the L2 and Sobolev norms of ``default_norms``.
    """
    if formulation not in ("perturbation", "full"):
        raise ValueError(f"unknown formulation {formulation!r}")
    grid = ss.theta0.grid
    bg = Background(ss.theta0)
    sym = symbol_on_grid(ss.m, grid)
    if observers is None:
        observers = {name: (l2_observer if s == 0 else sobolev_observer(s))
                     for name, s in default_norms(ss.m).items()}
    obs = dict(observers)
    th0 = pert0.coeffs
    meta = {"formulation": formulation}

    policy = None
    if st.adaptive:
        u0 = (bg.u1, bg.u2)
        if formulation == "perturbation":
            def policy(th):
                return min(_cfl_from_hat(grid, th, st.c_cfl, u0), st.dt_max)
        else:
            def policy(th):
                return min(_cfl_from_hat(grid, th, st.c_cfl), st.dt_max)

    if formulation == "perturbation":
        integ = IFRK4(sym, bg.perturbation)
        return integrate(integ, grid, th0, st, obs, dt_policy=policy, meta=meta)

    base = ss.theta0.coeffs
    shifted = {name: (lambda fn: (lambda t, th: fn(t, SpectralField(grid, th.coeffs - base))))(fn)
               for name, fn in obs.items()}
    integ = IFRK4(sym, nonlinear_rhs(grid, ss.f.coeffs))
    rec = integrate(integ, grid, base + th0, st, shifted, dt_policy=policy, meta=meta)
    rec.snapshots = [(t, SpectralField(grid, f.coeffs - base)) for t, f in rec.snapshots]
    rec.meta["final"] = SpectralField(grid, rec.meta["final"].coeffs - base)
    return rec


def escape_time(record: RunRecord, level: float, series: str = "L2") -> float:
    """First crossing of ``level`` (log-linear interpolation); inf if never reached."""
    if level <= 0:
        raise ValueError("escape level must be positive")
    t = record.t
    y = record.array(series)
    above = np.nonzero(y >= level)[0]
    if above.size == 0:
        return math.inf
    i = int(above[0])
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    if y0 > 0 and y1 > 0:
        frac = (math.log(level) - math.log(y0)) / (math.log(y1) - math.log(y0))
    else:
        frac = (level - y0) / (y1 - y0)
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _linfit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = slope * x + icpt
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_growth(record: RunRecord, level: float, trim: float = 0.05, series: str = "L2"):
    """Fit log||th~|| = lam*t + c on the initial stretch where ||th~|| <= level.

    Returns (lam_fit, r2); nan if fewer than 5 samples qualify.
    """
    t = record.t
    y = record.array(series)
    over = np.nonzero(y > level)[0]
    stop = int(over[0]) if over.size else len(y)
    start = int(math.ceil(trim * stop))
    tt, yy = t[start:stop], y[start:stop]
    ok = yy > 0
    if ok.sum() < 5:
        return math.nan, math.nan
    slope, _, r2 = _linfit(tt[ok], np.log(yy[ok]))
    return slope, r2


def fit_escape_law(epsilons: Sequence[float], t_esc: Sequence[float]):
    """Least squares t_esc = slope*log(1/eps) + intercept -> (slope, intercept, r2)."""
    eps = np.asarray(epsilons, dtype=float)
    te = np.asarray(t_esc, dtype=float)
    ok = np.isfinite(te)
    if ok.sum() < 3:
        raise ValueError(f"escape-law fit needs >= 3 finite escape times, got {int(ok.sum())}")
    return _linfit(np.log(1.0 / eps[ok]), te[ok])


# ---------------------------------------------------------------------------
# ladder
# ---------------------------------------------------------------------------

@dataclass
class EpsilonResult:
    epsilon: float
    lambda_fit: float
    fit_r2: float
    t_esc: float
    sat_norm: float
    record: RunRecord | None = field(default=None, repr=False)


@dataclass
class InstabilityResult:
    runs: list
    c0: float
    lam: float
    slope: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def c2(self) -> float:
        """C2 in t_esc = lam^-1 log(C2/eps), from the fitted intercept."""
        return math.exp(self.intercept / self.slope) if self.slope > 0 else math.nan

    def sat_ratio(self) -> float:
        s = [r.sat_norm for r in self.runs if np.isfinite(r.sat_norm)]
        return max(s) / min(s) if s else math.nan

    def columns(self):
        return ["epsilon", "lambda_fit", "t_esc", "sat_norm"]

    def rows(self):
        for r in self.runs:
            yield [r.epsilon, r.lambda_fit, r.t_esc, r.sat_norm]


def _horizon(cfg: InstabilityConfig, eps: float, level: float) -> float:
    lam = cfg.lam
    nphi = math.sqrt(l2_sq(cfg.phi.grid, cfg.phi.coeffs))
    return max(math.log(level / (eps * nphi)), 0.0) / lam + cfg.sat_window / lam


def _ladder_member(args):
    cfg, eps, t_end, c0 = args
    rec = run_perturbation(cfg, eps, t_end=t_end)
    lam_fit, r2 = fit_growth(rec, c0 / 4.0, cfg.trim)
    te = escape_time(rec, c0)
    y = rec.array("L2")
    if math.isfinite(te):
        window = rec.t <= te + cfg.sat_window / cfg.lam
        sat = float(np.max(y[window]))
    else:
        sat = float(np.max(y))
    return EpsilonResult(eps, lam_fit, r2, te, sat, rec)


def calibrate_level(cfg: InstabilityConfig) -> tuple[float, RunRecord]:
    """c0 = rho_esc * (max ||th~|| of a long run at the largest eps)."""
    ss = cfg.steady
    scale = max(math.sqrt(l2_sq(ss.theta0.grid, ss.theta0.coeffs)), 1.0)
    t_end = _horizon(cfg, cfg.epsilons[0], scale)
    rec = run_perturbation(cfg, cfg.epsilons[0], t_end=t_end)
    return cfg.rho_esc * float(np.max(rec.array("L2"))), rec


def run_ladder(cfg: InstabilityConfig, c0: float | None = None, workers: int = 1,
               keep_records: bool = True) -> InstabilityResult:
    if cfg.lam <= 0:
        raise ValueError("the eigenpair is not unstable (lambda <= 0)")
    calib = None
    if c0 is None:
        c0, calib = calibrate_level(cfg)
    jobs = [(cfg, eps, _horizon(cfg, eps, c0), c0) for eps in cfg.epsilons]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(_ladder_member, jobs))
    else:
        runs = [_ladder_member(j) for j in jobs]
    if not keep_records:
        for r in runs:
            r.record = None
    res = InstabilityResult(runs, c0, cfg.lam, meta={
        "beta": beta_exponent(cfg.steady.m) if _has_beta(cfg.steady.m) else None,
        "A_factor": cfg.a_factor,
        "rho_esc": cfg.rho_esc,
        "calibration_max": None if calib is None else float(np.max(calib.array("L2"))),
    })
    finite = [r for r in runs if math.isfinite(r.t_esc)]
    if len(finite) >= 3:
        res.slope, res.intercept, res.r2 = fit_escape_law([r.epsilon for r in runs], [r.t_esc for r in runs])
    return res


def _has_beta(m):
    try:
        beta_exponent(m)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# smoothing monitor and Duhamel check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonitorResult:
    value: float | None
    hypothesis_met: bool | None
    sup_low: float
    status: str


def prop2_monitor(record: RunRecord, gamma: float, c0_candidate: float | None = None,
                  low: str = "H_2mg", high: str = "H_2m2g3") -> MonitorResult:
    """sup_t min(t,1)^{1/3} ||th~(t)||_{H^{2-2gamma/3}}, gated on the H^{2-gamma} smallness check.

    ``low``/``high`` name the recorded H^{2-gamma} and H^{2-2gamma/3} series.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    t = record.t
    sup_low = float(np.max(record.array(low)))
    met = None if c0_candidate is None else bool(sup_low <= c0_candidate)
    if met is False:
        return MonitorResult(None, False, sup_low, "hypothesis not met")
    vals = np.minimum(t, 1.0) ** (1.0 / 3.0) * record.array(high)
    return MonitorResult(float(np.max(vals)), met, sup_low, "ok")


def duhamel_consistency(record: RunRecord, op: LinearizedOperator, t_check: float,
                        shift: float = 0.0, dt: float = 1e-3, nonlinear: bool = True) -> float:
    """Relative L2 gap between th~(t) and its Duhamel representation.

    The semigroup is applied as  e^{tL} = e^{s t} e^{t(L - s)}  with s = ``shift``
    (for instance lambda + delta).  The time integral is the trapezoid rule over
    the stored snapshots; propagation uses IF-RK4 steps of at most ``dt``.
    """
    snaps = [(t, f) for t, f in record.snapshots if t <= t_check + 1e-9]
    if len(snaps) < 3 or abs(snaps[-1][0] - t_check) > 1e-9 * max(1.0, t_check) or snaps[0][0] != 0.0:
        raise ValueError("snapshots must start at 0, end at t_check and number at least 3")
    ts = np.array([t for t, _ in snaps])
    gaps = np.diff(ts)
    if not np.allclose(gaps, gaps[0], rtol=1e-8):
        raise ValueError("snapshots must be uniformly spaced")
    delta_t = float(gaps[0])
    grid = op.grid
    sop = op.with_shift(op.shift + shift)
    factor = math.exp(shift * delta_t)

    def hop(x):
        (_, y), = propagate(sop, x, [delta_t], min(dt, delta_t))
        return factor * y

    theta = [f.coeffs for _, f in snaps]
    lin = theta[0]
    for _ in range(len(theta) - 1):
        lin = hop(lin)
    total = lin
    if nonlinear:
        N = [-transport_hat(grid, th) for th in theta]
        w = np.full(len(N), delta_t)
        w[0] = w[-1] = 0.5 * delta_t
        acc = w[0] * N[0]
        for i in range(1, len(N)):
            acc = hop(acc) + w[i] * N[i]
        total = lin + acc
    ref = theta[-1]
    nrm = math.sqrt(l2_sq(grid, ref))
    return math.sqrt(l2_sq(grid, ref - total)) / max(nrm, 1e-300)
