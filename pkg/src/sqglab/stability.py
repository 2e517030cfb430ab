"""Linearized operators about a steady state, rightmost spectrum, semigroup probes.

Eigen-solves act on a packed real coordinate space: the real and imaginary
parts of the independent coefficients of a dealiased, mean-zero field
(``k2 > 0`` with all retained ``k1``, plus ``k2 = 0, k1 > 0``).  Every packed
coordinate carries the same multiplicity, so the Euclidean inner product is a
fixed multiple of the L2 inner product on the torus.

The default "propagator" mode runs ARPACK on a power of the classical RK4
stability polynomial P(dt L).  Since P(dt L) is a polynomial in L, its
eigenvectors are exactly those of L; Ritz values are mapped back through
log(nu)/T for ordering and then replaced by Rayleigh quotients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, gmres

from .evolution import Background, IFRK4
from .multipliers import FractionalLaplacian, LogSupercritical, Multiplier, symbol_on_grid
from .spectral import GridSpec, SpectralField, l2_sq, TWO_PI

log = logging.getLogger(__name__)


class EigenSolverError(RuntimeError):
    def __init__(self, msg: str, residuals: Sequence[float] = ()):
        super().__init__(f"{msg}; Ritz residuals: {[f'{r:.2e}' for r in residuals]}")
        self.residuals = list(residuals)


def beta_exponent(m: Multiplier) -> float:
    """Exponent beta of the instability bootstrap: gamma/(24-8 gamma), or 3/8 in the log case."""
    if isinstance(m, FractionalLaplacian):
        return m.gamma / (24.0 - 8.0 * m.gamma)
    if isinstance(m, LogSupercritical):
        return 3.0 / 8.0
    raise ValueError(f"no bootstrap exponent for {type(m).__name__}")


def default_delta(lam: float, m: Multiplier) -> float:
    """min(lam/4, 0.9 * lam * beta / 2), which respects 0 < delta < lam * beta / 2."""
    if lam <= 0:
        raise ValueError("default delta needs a positive growth rate")
    return min(lam / 4.0, 0.9 * lam * beta_exponent(m) / 2.0)


# ---------------------------------------------------------------------------
# packed coordinates
# ---------------------------------------------------------------------------

class Packing:
    """Map between half-plane coefficient arrays and packed real vectors."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        K = grid.kmax
        k1 = grid.k1[:, 0]
        upper = np.zeros(grid.spectral_shape, dtype=bool)
        upper[:, 1:K + 1] = (np.abs(k1) <= K)[:, None]
        upper[(k1 > 0) & (k1 <= K), 0] = True
        self.mask = upper
        self.idx = np.nonzero(upper.ravel())[0]
        self.size = 2 * self.idx.size
        pos = np.nonzero((k1 > 0) & (k1 <= K))[0]
        self.col0_pos = pos
        self.col0_neg = (grid.n - pos) % grid.n
        # L2 norm^2 = scale * |vec|^2
        self.scale = 2.0 * TWO_PI ** 2

    def pack(self, hat: np.ndarray) -> np.ndarray:
        c = hat.ravel()[self.idx]
        return np.concatenate([c.real, c.imag])

    def pack_complex(self, hat_re: np.ndarray, hat_im: np.ndarray) -> np.ndarray:
        return self.pack(hat_re) + 1j * self.pack(hat_im)

    def unpack(self, vec: np.ndarray) -> np.ndarray:
        """Real packed vector -> coefficients of a real field."""
        h = self.idx.size
        out = np.zeros(self.grid.spectral_shape, dtype=np.complex128)
        out.ravel()[self.idx] = vec[:h] + 1j * vec[h:]
        out[self.col0_neg, 0] = np.conj(out[self.col0_pos, 0])
        return out

    def apply_real(self, fn, z: np.ndarray) -> np.ndarray:
        """Extend a real-linear map on packed vectors to complex vectors."""
        if np.iscomplexobj(z):
            return fn(z.real) + 1j * fn(z.imag)
        return fn(z)

    def norm(self, z: np.ndarray) -> float:
        return float(np.sqrt(self.scale) * np.linalg.norm(z))


# ---------------------------------------------------------------------------
# operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """phi -> -(R^perp Th0).grad phi - (R^perp phi).grad Th0 - m phi - shift phi."""

    theta0: SpectralField
    m: Multiplier
    shift: float = 0.0

    @property
    def grid(self) -> GridSpec:
        return self.theta0.grid

    @cached_property
    def background(self) -> Background:
        return Background(self.theta0)

    @cached_property
    def decay(self) -> np.ndarray:
        return symbol_on_grid(self.m, self.grid) + self.shift

    @cached_property
    def packing(self) -> Packing:
        return Packing(self.grid)

    def with_shift(self, shift: float) -> "LinearizedOperator":
        return LinearizedOperator(self.theta0, self.m, shift)

    def apply_hat(self, phi: np.ndarray) -> np.ndarray:
        return self.background.linear(phi) - self.decay * phi

    def apply_packed(self, vec: np.ndarray) -> np.ndarray:
        pk = self.packing
        return pk.pack(self.apply_hat(pk.unpack(vec)))

    def spectral_radius_bound(self) -> float:
        """Crude upper bound on |mu| over the retained modes."""
        grid = self.grid
        bg = self.background
        umax = float(np.sqrt(np.max(bg.u1 ** 2 + bg.u2 ** 2)))
        gmax = float(np.sqrt(np.max(bg.g1 ** 2 + bg.g2 ** 2)))
        dmax = float(np.max(np.abs(self.decay * grid.dealias)))
        return dmax + umax * grid.kmax * math.sqrt(2.0) + gmax

    def integrator(self) -> IFRK4:
        return IFRK4(self.decay, self.background.linear)


def apply_linearized(op: LinearizedOperator, phi: SpectralField) -> SpectralField:
    if phi.grid != op.grid:
        raise ValueError("phi and the base state must share a grid")
    return SpectralField(op.grid, op.apply_hat(phi.coeffs))


def dense_matrix(op: LinearizedOperator) -> np.ndarray:
    """Packed-coordinate matrix of the operator (small grids only)."""
    size = op.packing.size
    if size > 6000:
        raise ValueError(f"dense assembly refused for {size} unknowns")
    eye = np.eye(size)
    return np.column_stack([op.apply_packed(eye[:, i]) for i in range(size)])


# ---------------------------------------------------------------------------
# eigen-solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArnoldiConfig:
    krylov_dim: int = 40
    restarts: int = 300
    mode: str = "propagator"
    t_prop: float = 1.0
    tol: float = 1e-13
    dt: float | None = None
    residual_target: float = 1e-7
    polish_steps: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("propagator", "direct"):
            raise ValueError(f"unknown Arnoldi mode {self.mode!r}")
        if self.t_prop <= 0:
            raise ValueError("t_prop must be positive")


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue mu with eigenfunction phi_re + i phi_im, ||phi_re||^2 + ||phi_im||^2 = 1.

    The phase is chosen to maximize ||phi_re||; for a real eigenvalue phi_im = 0.
    """

    mu: complex
    phi_re: SpectralField
    phi_im: SpectralField
    residual: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def growth_rate(self) -> float:
        return float(self.mu.real)

    @property
    def phi(self) -> SpectralField:
        """Real part of the eigenfunction scaled to unit L2 norm."""
        nrm = math.sqrt(l2_sq(self.phi_re.grid, self.phi_re.coeffs))
        return self.phi_re / nrm


def _rk4_poly(z: np.ndarray) -> np.ndarray:
    return 1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24


def _normalize(pk: Packing, z: np.ndarray) -> np.ndarray:
    # phase maximizing the real part norm: z*e^{ia} with a from the 2x2 Gram matrix
    a = z.real @ z.real
    b = z.imag @ z.imag
    c = z.real @ z.imag
    ang = 0.5 * math.atan2(-2 * c, a - b)
    z = z * np.exp(1j * ang)
    if z.real @ z.real < z.imag @ z.imag:
        z = z * 1j
    return z / pk.norm(z)


def _rayleigh(op, z):
    Lz = op.packing.apply_real(op.apply_packed, z)
    mu = np.vdot(z, Lz) / np.vdot(z, z)
    res = op.packing.norm(Lz - mu * z) / op.packing.norm(z)
    return complex(mu), float(res)


def _polish(op: LinearizedOperator, z: np.ndarray, mu: complex, steps: int, target: float):
    """Inverse iteration with Rayleigh-quotient updates; complex GMRES inner solves."""
    pk = op.packing
    n = pk.size
    mu, res = _rayleigh(op, z)
    for _ in range(steps):
        if res < 0.01 * target:
            break
        A = LinearOperator((n, n), dtype=np.complex128,
                           matvec=lambda v, s=mu: pk.apply_real(op.apply_packed, v) - s * v)
        y, _info = gmres(A, z, rtol=1e-10, restart=60, maxiter=20)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) == 0:
            break
        z_new = y / np.linalg.norm(y)
        mu_new, res_new = _rayleigh(op, z_new)
        if res_new >= res:
            break
        z, mu, res = z_new, mu_new, res_new
    return z, mu, res


def rightmost_eigenpairs(op: LinearizedOperator, cfg: ArnoldiConfig | None = None,
                         count: int = 1) -> list[EigenPair]:
    """Rightmost ``count`` eigenpairs of ``op`` sorted by descending Re mu."""
    cfg = cfg or ArnoldiConfig()
    if count < 1:
        raise ValueError("count must be >= 1")
    pk = op.packing
    n = pk.size
    # ask for a couple of extra Ritz pairs so conjugate partners are not split
    k = min(count + 2, n - 2)
    ncv = min(max(cfg.krylov_dim, 2 * k + 1), n)
    if ncv < 2 * count:
        raise ValueError("Krylov dimension must be at least twice the requested count")
    v0 = np.random.default_rng(cfg.seed).standard_normal(n)

    if cfg.mode == "propagator":
        rho = op.spectral_radius_bound()
        dt = cfg.dt if cfg.dt is not None else min(cfg.t_prop, 1.0 / max(rho, 1e-12))
        nsteps = max(1, int(math.ceil(cfg.t_prop / dt)))
        dt = cfg.t_prop / nsteps

        def matvec(v):
            for _ in range(nsteps):
                k1 = op.apply_packed(v)
                k2 = op.apply_packed(v + 0.5 * dt * k1)
                k3 = op.apply_packed(v + 0.5 * dt * k2)
                k4 = op.apply_packed(v + dt * k3)
                v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            return v

        A = LinearOperator((n, n), matvec=matvec, dtype=float)
        which = "LM"
    else:
        A = LinearOperator((n, n), matvec=op.apply_packed, dtype=float)
        which = "LR"
        nsteps, dt = 0, 0.0

    try:
        vals, vecs = eigs(A, k=k, which=which, ncv=ncv, maxiter=cfg.restarts, tol=cfg.tol, v0=v0)
    except ArpackNoConvergence as exc:
        res = [_rayleigh(op, exc.eigenvectors[:, i])[1] for i in range(exc.eigenvectors.shape[1])]
        raise EigenSolverError("Arnoldi did not converge", res) from exc

    if cfg.mode == "propagator":
        with np.errstate(divide="ignore", invalid="ignore"):
            approx = np.log(vals.astype(complex)) / cfg.t_prop
        keep = np.isfinite(approx)
        vals, vecs, approx = vals[keep], vecs[:, keep], approx[keep]
    else:
        approx = vals

    pairs = []
    for i in np.argsort(-approx.real, kind="stable"):
        z = vecs[:, i].astype(complex)
        z, mu, res = _polish(op, z, complex(approx[i]), cfg.polish_steps, cfg.residual_target)
        z = _normalize(pk, z)
        pairs.append((mu, z, res))
    pairs.sort(key=lambda p: (-p[0].real, -p[0].imag))
    pairs = pairs[:count]
    bad = [r for _, _, r in pairs if not r < cfg.residual_target]
    if bad:
        raise EigenSolverError(f"eigen-residual above {cfg.residual_target:g}", [r for *_, r in pairs])
    out = []
    for mu, z, res in pairs:
        phi_re = SpectralField(op.grid, pk.unpack(z.real))
        phi_im = SpectralField(op.grid, pk.unpack(z.imag))
        out.append(EigenPair(mu, phi_re, phi_im, res,
                             meta={"mode": cfg.mode, "t_prop": cfg.t_prop, "steps": nsteps, "dt": dt}))
    return out


def eigen_residual(op: LinearizedOperator, pair: EigenPair) -> float:
    """||L phi - mu phi|| for the complex eigenfunction, recomputed from the fields."""
    re = op.apply_hat(pair.phi_re.coeffs)
    im = op.apply_hat(pair.phi_im.coeffs)
    mu = pair.mu
    r_re = re - (mu.real * pair.phi_re.coeffs - mu.imag * pair.phi_im.coeffs)
    r_im = im - (mu.imag * pair.phi_re.coeffs + mu.real * pair.phi_im.coeffs)
    return math.sqrt(l2_sq(op.grid, r_re) + l2_sq(op.grid, r_im))


# ---------------------------------------------------------------------------
# semigroup probe
# ---------------------------------------------------------------------------

def propagate(op: LinearizedOperator, phi: np.ndarray, t_points: Sequence[float], dt: float):
    """Yield e^{t L} phi at the increasing times ``t_points`` (IF-RK4 steps of at most dt)."""
    integ = op.integrator()
    t = 0.0
    th = np.array(phi, dtype=np.complex128)
    for tp in t_points:
        if tp < t:
            raise ValueError("t_points must be increasing")
        while t < tp - 1e-14 * max(1.0, tp):
            h = min(dt, tp - t)
            if tp - (t + h) < 1e-9 * dt:
                h = tp - t
            th = integ.step(th, h)
            t = tp if h == tp - t else t + h
        if not np.all(np.isfinite(th)):
            raise FloatingPointError(f"non-finite state at t={t:g}")
        yield t, th


@dataclass(frozen=True)
class ProbeResult:
    c_emp: float
    t_grid: np.ndarray
    ratios: np.ndarray
    diverging: bool


def _eigen_propagator(op: LinearizedOperator, phi: np.ndarray):
    """t -> e^{tL} phi through a dense eigendecomposition (diagonalizable L, small grids)."""
    pk = op.packing
    A = dense_matrix(op)
    w, V = np.linalg.eig(A)
    cond = float(np.linalg.cond(V))
    if not cond < 1e8:
        raise EigenSolverError(f"eigenbasis too ill-conditioned for the spectral propagator (cond {cond:.2e})",
                               [cond])
    c = np.linalg.solve(V, pk.pack(phi))

    def at(t):
        return pk.unpack(np.real(V @ (np.exp(w * t) * c)))

    return at, cond


def semigroup_decay_probe(op_shifted: LinearizedOperator, phi0: SpectralField, weight: Multiplier,
                          sigma: float, t_grid: Sequence[float], dt: float = 2e-3,
                          method: str = "propagate") -> ProbeResult:
    """Empirical constant of ||e^{tL}phi|| <= C t^-sigma ||phi||^{1-sigma} ||W phi||^sigma.

    ``method="propagate"`` time-steps with IF-RK4; ``method="spectral"`` uses
    the dense eigendecomposition of L, exact in t and suited to long horizons
    on small grids.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if method not in ("propagate", "spectral"):
        raise ValueError(f"unknown probe method {method!r}")
    if abs(phi0.mean) > 1e-12 * max(1.0, float(np.max(np.abs(phi0.coeffs)))):
        raise ValueError("phi0 must be mean-zero")
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if t_grid[0] <= 0:
        raise ValueError("t_grid must be positive")
    grid = phi0.grid
    n0 = math.sqrt(l2_sq(grid, phi0.coeffs))
    nw = math.sqrt(l2_sq(grid, symbol_on_grid(weight, grid) * phi0.coeffs))
    denom = n0 ** (1 - sigma) * nw ** sigma
    if denom == 0:
        raise ValueError("phi0 has zero weighted norm")
    if method == "spectral":
        at, _ = _eigen_propagator(op_shifted, phi0.coeffs * grid.dealias)
        states = ((t, at(t)) for t in t_grid)
    else:
        states = propagate(op_shifted, phi0.coeffs, t_grid, dt)
    ratios = np.asarray([math.sqrt(l2_sq(grid, th)) * t ** sigma / denom for t, th in states])
    finite = bool(np.all(np.isfinite(ratios)))
    mid = len(ratios) // 2
    diverging = (not finite) or (int(np.argmax(ratios)) == len(ratios) - 1
                                 and ratios[-1] > 1.1 * ratios[mid] and len(ratios) > 2)
    c_emp = float(np.max(ratios)) if finite else math.inf
    return ProbeResult(c_emp, t_grid, ratios, bool(diverging))
