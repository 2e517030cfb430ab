"""Modulus-of-continuity apparatus for the log-supercritical equation.

Contents: the xi(t) schedule, the difference field
    v(x; h) = (xi^2 + |h|^2)^(-alpha/2) (theta(x + h) - theta(x)),
its supremum g, Hoelder seminorms, the kernel dissipation functional
    D_h[v](x) = (2 pi)^-1 int_{R^2} (v(x) - v(x + y))^2 K(y) dy
with K(y) = |y|^-3 log^-a(kappa + 1/|y|), and the empirical lower-bound check.

D_h is computed two ways.  ``dissipation_quadrature`` works on the kernel
side (Taylor near field, polar quadrature, periodized far field).
``dissipation_spectral`` uses the Fourier symbol of the same kernel through
2 v L v - L(v^2).  The two are independent and are compared in the tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from ._accel import nudft_real
from .spectral import GridSpec, SpectralField, TWO_PI, norm

log = logging.getLogger(__name__)


def _b_exponent(a: float, alpha: float) -> float:
    return a * (2.0 - alpha) / (1.0 - alpha)


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def phi_profile(x: float, alpha: float, a: float, kappa: float = math.e) -> float:
    """int_0^x log^b(kappa + 1/(4s)) ds with b = a(2-alpha)/(1-alpha)."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    b = _b_exponent(a, alpha)
    if b == 0:
        return float(x)
    # s = x e^{-u} removes the logarithmic endpoint behaviour
    lk, l4x = math.log(kappa), math.log(4.0 * x)

    def f(u):
        return x * math.exp(-u) * np.logaddexp(lk, u - l4x) ** b
    val, err = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    if not err <= 1e-9 * max(abs(val), 1e-300):
        raise ArithmeticError(f"profile quadrature did not converge: {val} +- {err}")
    return float(val)


@dataclass(frozen=True)
class XiSchedule:
    xi0: float
    alpha: float
    a: float
    kappa: float = math.e
    c0: float = 1.0

    def __post_init__(self):
        if self.xi0 <= 0:
            raise ValueError("xi0 must be positive")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not 0.0 <= self.a < 0.5:
            raise ValueError("a must lie in [0, 1/2)")
        if self.kappa < math.e:
            raise ValueError("kappa must be >= e")
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")

    @property
    def b(self) -> float:
        return _b_exponent(self.a, self.alpha)

    def phi(self, x: float) -> float:
        return phi_profile(x, self.alpha, self.a, self.kappa)

    @cached_property
    def phi_xi0(self) -> float:
        return self.phi(self.xi0)

    @cached_property
    def t_star(self) -> float:
        return 4.0 * self.alpha * self.phi_xi0 / self.c0

    def xi_at(self, t: float) -> float:
        if t < 0:
            raise ValueError("t must be non-negative")
        if t == 0:
            return self.xi0
        if t >= self.t_star:
            return 0.0
        target = self.phi_xi0 - self.c0 * t / (4.0 * self.alpha)
        if self.b == 0:
            return float(target)
        return float(optimize.brentq(lambda x: self.phi(x) - target, 0.0, self.xi0,
                                     xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))

    def speed_bound(self, xi: float) -> float:
        """c0 / (4 alpha log^b(kappa + 1/(4 xi))), the admissible |xi'|."""
        return self.c0 / (4.0 * self.alpha * math.log(self.kappa + 1.0 / (4.0 * xi)) ** self.b)

    def with_c0(self, c0: float) -> "XiSchedule":
        return XiSchedule(self.xi0, self.alpha, self.a, self.kappa, c0)


def xi_at(t: float, schedule: XiSchedule) -> float:
    return schedule.xi_at(t)


# ---------------------------------------------------------------------------
# v-field, g, Hoelder seminorm
# ---------------------------------------------------------------------------

def h_set(grid: GridSpec, n_radii: int = 24, n_angles: int = 16, refine: int = 1,
          r_min: float | None = None, r_max: float = math.pi) -> np.ndarray:
    """Shifts h with log-spaced radii in [dx/2, pi] and angles in [0, pi).

    Angles in [pi, 2 pi) are redundant: v(.; -h) is minus a translate of v(.; h).
    """
    r_min = grid.dx / 2 if r_min is None else r_min
    radii = np.geomspace(r_min, r_max, n_radii * refine)
    angles = np.arange(n_angles * refine) * (math.pi / (n_angles * refine))
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    return np.column_stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()])


def _below_nyquist(grid: GridSpec) -> np.ndarray:
    return (np.abs(grid.k1) < grid.n // 2) & (grid.k2 < grid.n // 2)


def _v_hat(theta: SpectralField, xi: float, alpha: float, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    r2 = xi * xi + float(h @ h)
    if r2 == 0:
        raise ValueError("v is undefined for xi = 0 and h = 0")
    grid = theta.grid
    phase = np.exp(1j * (grid.k1 * h[0] + grid.k2 * h[1])) - 1.0
    return r2 ** (-alpha / 2) * theta.coeffs * phase * _below_nyquist(grid)


def v_field(theta: SpectralField, xi: float, alpha: float, h) -> SpectralField:
    """v(.; h) as a spectral field (exact shift through the phase e^{ik.h})."""
    return SpectralField(theta.grid, _v_hat(theta, xi, alpha, h))


@dataclass(frozen=True)
class GSample:
    g: float
    x0: tuple
    h0: tuple
    ih: int


def g_sup(theta: SpectralField, xi: float, alpha: float, hs: np.ndarray, chunk: int = 16) -> GSample:
    """sup over grid x and the shifts ``hs`` of |v|^2, with its argmax.

    Ties go to the lexicographically smallest (x0, h0).
    """
    grid = theta.grid
    hs = np.asarray(hs, dtype=float).reshape(-1, 2)
    k1, k2 = grid.k1, grid.k2
    c = theta.coeffs * _below_nyquist(grid)
    r2 = xi * xi + np.sum(hs * hs, axis=1)
    if np.any(r2 == 0):
        raise ValueError("v is undefined for xi = 0 and h = 0")
    scale = r2 ** (-alpha / 2)
    best = (-1.0, None, None, -1)
    for s in range(0, len(hs), chunk):
        hh = hs[s:s + chunk]
        ph = np.exp(1j * (k1[None] * hh[:, 0, None, None] + k2[None] * hh[:, 1, None, None])) - 1.0
        vals = np.fft.irfft2(c[None] * ph * grid.n ** 2, s=grid.shape, axes=(1, 2))
        sq = (vals * scale[s:s + chunk, None, None]) ** 2
        flat = sq.reshape(len(hh), -1)
        arg = np.argmax(flat, axis=1)
        mx = flat[np.arange(len(hh)), arg]
        for j in range(len(hh)):
            i1, i2 = divmod(int(arg[j]), grid.n)
            x0 = (i1 * grid.dx, i2 * grid.dx)
            h0 = (float(hh[j, 0]), float(hh[j, 1]))
            cand = (float(mx[j]), x0, h0, s + j)
            if cand[0] > best[0] or (cand[0] == best[0] and (x0, h0) < (best[1], best[2])):
                best = cand
    return GSample(max(best[0], 0.0), best[1], best[2], best[3])


def holder_seminorm(theta: SpectralField, alpha: float, hs: np.ndarray) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return math.sqrt(g_sup(theta, 0.0, alpha, hs).g)


# ---------------------------------------------------------------------------
# kernel and dissipation
# ---------------------------------------------------------------------------

def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _gl_panels(edges: np.ndarray, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None]
    return nodes, weights


@dataclass(frozen=True)
class KernelModel:
    """K(r) = r^-3 log^-a(kappa + 1/r) with the quadrature layout used for D_h.

    ``cutoff`` is the quadrature cutoff radius (None means one grid spacing).
    The Taylor near field covers |y| < cutoff * 2**-taylor_depth; polar
    panels handle the rest of the disc, so depth 0 puts the whole ball under
    the Taylor expansion.  The polar region is cut off smoothly between
    ``inner`` and ``outer``; the rest goes to the periodized far field.
    """

    a: float = 0.25
    kappa: float = math.e
    cutoff: float | None = None
    inner: float = 1.0
    outer: float = 2.0
    images: int = 6
    taylor_depth: int = 4

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError("a must lie in (0, 1)")
        if self.kappa < math.e:
            raise ValueError("kappa must be >= e")
        if not 0 < self.inner < self.outer < math.pi:
            raise ValueError("need 0 < inner < outer < pi")
        if self.taylor_depth < 0:
            raise ValueError("taylor_depth must be non-negative")

    def K(self, r):
        r = np.asarray(r, dtype=float)
        return r ** -3.0 * np.log(self.kappa + 1.0 / r) ** (-self.a)

    def upper_envelope(self, r):
        r = np.asarray(r, dtype=float)
        return r ** -3.0 * np.log(self.kappa + 1.0 / r) ** (-self.a)

    def lower_envelope(self, r):
        r = np.asarray(r, dtype=float)
        return r ** -3.0 * np.log(1.0 / r) ** (-self.a)

    @cached_property
    def r0(self) -> float:
        """Largest r < 1 with K(r) >= lower_envelope(r) / 2."""
        def f(r):
            return (math.log(1.0 / r) / math.log(self.kappa + 1.0 / r)) ** self.a - 0.5
        return float(optimize.brentq(f, 1e-300, 1.0 - 1e-15, xtol=1e-15))

    def bounds_check(self, r: np.ndarray) -> dict:
        r = np.asarray(r, dtype=float)
        k = self.K(r)
        upper = bool(np.all(k <= self.upper_envelope(r) * (1 + 1e-12)))
        near = r < self.r0
        lower = bool(np.all(k[near] >= 0.5 * self.lower_envelope(r[near]) * (1 - 1e-12)))
        return {"upper": upper, "lower": lower, "r0": self.r0, "n_near": int(near.sum())}

    def chi(self, r):
        """Weight of the polar region: 1 below ``inner``, 0 above ``outer``."""
        return 1.0 - _smooth_step((np.asarray(r, dtype=float) - self.inner) / (self.outer - self.inner))

    def near_moments(self, rho: float) -> tuple[float, float]:
        """(int_0^rho log^-a(kappa+1/r) dr, int_0^rho r^2 log^-a(kappa+1/r) dr)."""
        f0 = lambda r: math.log(self.kappa + 1.0 / r) ** (-self.a)
        m0 = integrate.quad(f0, 0.0, rho, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        m2 = integrate.quad(lambda r: r * r * f0(r), 0.0, rho, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        return m0, m2

    # Fourier side -----------------------------------------------------------

    def symbol(self, kmag) -> np.ndarray:
        """sigma(k) = int_{R^2} (1 - cos(k.y)) K(y) dy, for the Fourier-side route."""
        kmag = np.asarray(kmag, dtype=float)
        out = np.zeros_like(kmag)
        pos = kmag > 0
        if np.any(pos):
            out[pos] = _kernel_symbol(self.a, self.kappa, kmag[pos])
        return out


@lru_cache(maxsize=4)
def _symbol_nodes(S: float = 4000.0):
    # nodes in s = k r for  int_0^S s^-2 (1 - J0(s)) l(s/k) ds
    geo = np.geomspace(1e-12, 1.0, 40)
    edges = np.concatenate([[0.0], geo, np.arange(2.0, S + 1.0)])
    s, w = _gl_panels(edges, 10)
    s, w = s.ravel(), w.ravel()
    small = s < 1e-3
    g = np.empty_like(s)
    g[~small] = (1.0 - special.j0(s[~small])) / s[~small] ** 2
    ss = s[small] ** 2
    g[small] = 0.25 - ss / 64.0 + ss * ss / 2304.0
    # int_S^inf J0(s)/s^2 ds
    j_tail = integrate.quad(lambda x: special.j0(x) / x ** 2, S, S + 2000.0, limit=4000)[0]
    # remaining tail, asymptotic J0(x) ~ sqrt(2/(pi x)) cos(x - pi/4), is below 1e-9
    return s, w * g, S, j_tail


def _kernel_symbol(a: float, kappa: float, k: np.ndarray) -> np.ndarray:
    s, wg, S, j_tail = _symbol_nodes()
    out = np.empty_like(k)
    u, uw = np.polynomial.legendre.leggauss(40)
    u = 0.5 * (u + 1.0) / S
    uw = 0.5 * uw / S
    for i, kk in enumerate(k):
        ell = np.log(kappa + kk / s) ** (-a)
        main = float(wg @ ell)
        # int_S^inf s^-2 l(s/k) ds = int_0^{1/S} log^-a(kappa + u k) du
        tail = float(uw @ np.log(kappa + u * kk) ** (-a))
        tail -= math.log(kappa + kk / S) ** (-a) * j_tail
        out[i] = TWO_PI * kk * (main + tail)
    return out


def _band(v: SpectralField):
    """Band-truncated, multiplicity-weighted coefficients for scattered evaluation."""
    grid = v.grid
    K = grid.kmax
    rows = np.nonzero(np.abs(grid.k1[:, 0]) <= K)[0]
    c = v.coeffs[rows, :K + 1] * grid.weights[rows, :K + 1]
    return c, grid.k1[rows, 0].copy(), grid.k2[0, :K + 1].copy()


def evaluate_at(v: SpectralField, pts) -> np.ndarray:
    """Spectral interpolation of a real field at arbitrary points."""
    c, k1, k2 = _band(v)
    return nudft_real(c, k1, k2, np.asarray(pts, dtype=float).reshape(-1, 2))


@lru_cache(maxsize=8)
def _far_kernel(kernel: KernelModel, n_up: int) -> np.ndarray:
    """Periodization of K (1 - chi) sampled on an n_up x n_up torus grid, with tail correction."""
    dz = TWO_PI / n_up
    z = np.fft.fftfreq(n_up, 1.0 / n_up) * dz
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    M = kernel.images
    acc = np.zeros((n_up, n_up))
    for m1 in range(-M, M + 1):
        for m2 in range(-M, M + 1):
            r = np.hypot(z1 + TWO_PI * m1, z2 + TWO_PI * m2)
            with np.errstate(divide="ignore"):
                kv = np.where(r > kernel.inner, kernel.K(np.maximum(r, kernel.inner)) * (1.0 - kernel.chi(r)), 0.0)
            acc += kv
    # images outside the (2M+1)^2 block, spread uniformly over the cell
    half = (2 * M + 1) * math.pi

    def radial_tail(phi):
        rho = half / max(abs(math.cos(phi)), abs(math.sin(phi)))
        return integrate.quad(lambda r: r ** -2 * math.log(kernel.kappa + 1.0 / r) ** (-kernel.a),
                              rho, np.inf, epsrel=1e-12)[0]
    tail = 8.0 * integrate.quad(radial_tail, 0.0, math.pi / 4, epsrel=1e-12)[0]

    # curvature of K across a cell: the symmetric image sum leaves (1/4) sum(Lap K) |z|^2,
    # and the midpoint rule behind the uniform tail costs -(h^2/24) sum(Lap K); both use
    # int_outside Lap K dA = -oint rho K'(rho) dphi, since r Lap K = (r K')'
    def dK(r):
        lg = math.log(kernel.kappa + 1.0 / r)
        return (-3.0 * r ** -4 * lg ** (-kernel.a)
                + kernel.a * r ** -5 * lg ** (-kernel.a - 1.0) / (kernel.kappa + 1.0 / r))
    lap = -8.0 * integrate.quad(lambda phi: (lambda rho: rho * dK(rho))(
        half / max(abs(math.cos(phi)), abs(math.sin(phi)))), 0.0, math.pi / 4, epsrel=1e-12)[0]
    acc += (tail + lap * (0.25 * (z1 ** 2 + z2 ** 2) - TWO_PI ** 2 / 24.0)) / TWO_PI ** 2
    acc.setflags(write=False)
    return acc


def dissipation_quadrature(v: SpectralField, kernel: KernelModel, x0, resolution: int = 1,
                           order: int = 10) -> float:
    """D_h[v](x0) from the kernel representation.

    Near field |y| < cutoff 2^-taylor_depth: fourth-order Taylor expansion of (v(x0)-v(x0+y))^2,
    integrated against K in closed angular form.  Polar region: Gauss-Legendre
    panels in r, trapezoid in angle, v by spectral interpolation, weighted by
    chi.  Far field: K (1 - chi) periodized over the torus, summed on a
    twice-refined grid.
    """
    grid = v.grid
    rho = grid.dx if kernel.cutoff is None else kernel.cutoff
    if rho < grid.dx * (1 - 1e-12):
        raise ValueError(f"cutoff {rho:.3g} is below the grid spacing {grid.dx:.3g}")
    if rho >= kernel.inner:
        raise ValueError("cutoff must lie below the polar region's inner radius")
    rho = rho * 2.0 ** -kernel.taylor_depth
    x0 = np.asarray(x0, dtype=float)
    c, k1, k2 = _band(v)
    K = grid.kmax
    kk1 = k1[:, None]
    kk2 = k2[None, :]

    def at(coeffs):
        return float(nudft_real(coeffs, k1, k2, x0[None])[0])

    v0 = at(c)
    # near field
    g1, g2 = at(1j * kk1 * c), at(1j * kk2 * c)
    h11, h12, h22 = at(-kk1 * kk1 * c), at(-kk1 * kk2 * c), at(-kk2 * kk2 * c)
    lap = -(kk1 ** 2 + kk2 ** 2)
    t1, t2 = at(1j * kk1 * lap * c), at(1j * kk2 * lap * c)
    hess = (3 * h11 ** 2 + 3 * h22 ** 2 + 2 * h11 * h22 + 4 * h12 ** 2) * math.pi / 4
    c4 = 0.25 * hess + (math.pi / 4) * (g1 * t1 + g2 * t2)
    m0, m2 = kernel.near_moments(rho)
    near = math.pi * (g1 * g1 + g2 * g2) * m0 + c4 * m2

    # polar region [rho, outer]
    kband = K * math.sqrt(2.0)
    geo = np.geomspace(rho, kernel.inner / 2, max(2, int(math.ceil(math.log2(kernel.inner / 2 / rho))) + 1) * resolution)
    width = min(0.25, 2.0 / kband) / resolution
    lin = np.linspace(kernel.inner / 2, kernel.outer, int(math.ceil((kernel.outer - kernel.inner / 2) / width)) + 1)
    edges = np.unique(np.concatenate([geo, lin]))
    rn, rw = _gl_panels(edges, order)
    polar = 0.0
    for p in range(rn.shape[0]):
        n_th = (int(2 * kband * edges[p + 1]) + 8) * resolution
        ang = np.arange(n_th) * (TWO_PI / n_th)
        cs, sn = np.cos(ang), np.sin(ang)
        r = rn[p]
        pts = np.stack([x0[0] + r[:, None] * cs[None], x0[1] + r[:, None] * sn[None]], axis=-1)
        vals = nudft_real(c, k1, k2, pts.reshape(-1, 2)).reshape(len(r), n_th)
        ang_int = np.sum((v0 - vals) ** 2, axis=1) * (TWO_PI / n_th)
        polar += float(np.sum(rw[p] * ang_int * kernel.K(r) * kernel.chi(r) * r))

    # far field
    n_up = 2 * grid.n
    shifted = v.coeffs * np.exp(1j * (grid.k1 * x0[0] + grid.k2 * x0[1])) * _below_nyquist(grid)
    pad = np.zeros((n_up, n_up // 2 + 1), dtype=np.complex128)
    h = grid.n // 2
    pad[:h, :h + 1] = shifted[:h]
    pad[-h:, :h + 1] = shifted[h:]
    vs = np.fft.irfft2(pad * n_up ** 2, s=(n_up, n_up))
    kp = _far_kernel(kernel, n_up)
    far = float(np.sum((v0 - vs) ** 2 * kp)) * (TWO_PI / n_up) ** 2

    return (near + polar + far) / TWO_PI


def dissipation_spectral(v: SpectralField, kernel: KernelModel, x0) -> float:
    """D_h[v](x0) via (2 pi)^-1 [2 v L v - L(v^2)], L the multiplier with the kernel's symbol."""
    grid = v.grid
    n_up = 2 * grid.n
    big = GridSpec(n_up)
    h = grid.n // 2
    c = v.coeffs * _below_nyquist(grid)
    pad = np.zeros(big.spectral_shape, dtype=np.complex128)
    pad[:h, :h + 1] = c[:h]
    pad[-h:, :h + 1] = c[h:]
    sq = big.forward(big.inverse(pad) ** 2)
    sig = _symbol_on(kernel, big)
    x0 = np.asarray(x0, dtype=float)
    wph = big.weights * np.exp(1j * (big.k1 * x0[0] + big.k2 * x0[1]))
    v0 = float(np.real(np.sum(wph * pad)))
    Lv = float(np.real(np.sum(wph * sig * pad)))
    Lsq = float(np.real(np.sum(wph * sig * sq)))
    return (2.0 * v0 * Lv - Lsq) / TWO_PI


@lru_cache(maxsize=8)
def _symbol_on(kernel: KernelModel, grid: GridSpec) -> np.ndarray:
    k2 = np.rint(grid.kmag ** 2).astype(np.int64)
    uniq, inv = np.unique(k2, return_inverse=True)
    vals = kernel.symbol(np.sqrt(uniq.astype(float)))
    out = vals[inv].reshape(grid.spectral_shape)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# bounds and checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    m_thetaf: float
    xi0: float
    alpha: float
    c1: float | None = None
    x0_candidate: float | None = None
    alpha0_candidate: float | None = None

    @property
    def M(self) -> float:
        return 4.0 * self.m_thetaf / self.xi0 ** self.alpha

    @classmethod
    def from_data(cls, theta0: SpectralField, f: SpectralField | None, xi0: float, alpha: float,
                  C: float = 1.0) -> "BoundConstants":
        sup_f = 0.0 if f is None else norm(f, "sup")
        return cls(C * (norm(theta0, "sup") + sup_f), xi0, alpha)


@dataclass
class LowerBoundSample:
    t: float
    x0: tuple
    h0: tuple
    v: float
    v_sup: float
    D: float
    ratio: float


@dataclass
class LowerBoundReport:
    c1: float
    samples: list
    violation: bool


def lower_bound_check(trajectory: Iterable, schedule: XiSchedule, kernel: KernelModel, alpha: float,
                      hs: np.ndarray, C: float = 1.0, resolution: int = 1) -> LowerBoundReport:
    """Minimal ratio of (D + C||v||^2/(r0 log^a(kappa + 1/r0))) to the superlinear term.

    The superlinear term is (|v|/||v||)^{1/(1-alpha)} |v|^2 / (|h| log^b(kappa + 1/(4|h|)))
    with b = a(2-alpha)/(1-alpha), evaluated at the argmax (x0, h0) of g.
    """
    a, kappa = kernel.a, kernel.kappa
    b = _b_exponent(a, alpha)
    r0 = kernel.r0
    second = C / (r0 * math.log(kappa + 1.0 / r0) ** a)
    samples = []
    for t, theta in trajectory:
        xi = schedule.xi_at(t)
        gs = g_sup(theta, xi, alpha, hs)
        if gs.g == 0:
            continue
        v = v_field(theta, xi, alpha, gs.h0)
        vx = float(evaluate_at(v, gs.x0)[0])
        vsup = math.sqrt(gs.g)
        D = dissipation_quadrature(v, kernel, gs.x0, resolution=resolution)
        hn = math.hypot(*gs.h0)
        superlin = (abs(vx) / vsup) ** (1.0 / (1.0 - alpha)) * vx * vx / (hn * math.log(kappa + 1.0 / (4 * hn)) ** b)
        ratio = (D + second * vsup * vsup) / superlin
        samples.append(LowerBoundSample(t, gs.x0, gs.h0, vx, vsup, D, ratio))
    if not samples:
        raise ValueError("trajectory has no nonzero v samples")
    c1 = min(s.ratio for s in samples)
    return LowerBoundReport(c1, samples, bool(c1 <= 0))


@dataclass
class TrackerRow:
    t: float
    g: float
    barrier: float
    xi: float
    holder_alpha: float
    h0: tuple
    crossing: bool
    localized: bool | None


@dataclass
class TrackerReport:
    rows: list
    M: float
    c0: float
    c0_threshold: float | None
    scan: dict
    hk_plateau: bool | None
    hk_growth: float | None
    flags: list = field(default_factory=list)

    def columns(self):
        return ["t", "g", "M2", "xi", "holder_alpha", "flags"]

    def csv_rows(self):
        for r in self.rows:
            flag = "cross" if r.crossing else ("nonlocal" if r.localized is False else "")
            yield [r.t, r.g, r.barrier, r.xi, r.holder_alpha, flag]


def _radial_spacing(hs: np.ndarray, hn: float) -> float:
    radii = np.unique(np.round(np.hypot(hs[:, 0], hs[:, 1]), 14))
    i = int(np.searchsorted(radii, hn))
    gaps = np.diff(radii)
    if gaps.size == 0:
        return 0.0
    return float(gaps[min(max(i - 1, 0), gaps.size - 1)])


def g_series(snapshots: Sequence, schedule: XiSchedule, alpha: float, hs: np.ndarray) -> list:
    return [(t, schedule.xi_at(t), g_sup(th, schedule.xi_at(t), alpha, hs)) for t, th in snapshots]


def holder_tracker(snapshots: Sequence, schedule: XiSchedule, alpha: float, M: float, hs: np.ndarray,
                   c0_scan: Sequence[float] = (), hk_series: tuple | None = None,
                   t0: float | None = None) -> TrackerReport:
    """Follow g(t) against the barrier M^2 along stored snapshots.

    ``c0_scan`` lists further schedule constants; the largest one whose g
    series stays below M^2 is reported as the threshold.  ``hk_series`` is
    (times, H^k norms); the plateau test compares sup over (t0, t_end] with sup
    over (t0, t_mid].
    """
    snapshots = list(snapshots)
    if len(snapshots) >= 2:
        ts = [t for t, _ in snapshots]
        cad = max(np.diff(ts))
        if cad > schedule.t_star / 20 * (1 + 1e-9):
            log.warning("snapshot cadence %.3g exceeds T*/20 = %.3g", cad, schedule.t_star / 20)
    barrier = M * M
    rows = []
    flags = []
    for t, xi, gs in g_series(snapshots, schedule, alpha, hs):
        hn = math.hypot(*gs.h0)
        crossing = gs.g > barrier
        localized = None
        if gs.g > barrier / 4:
            localized = bool(hn <= schedule.xi0 + _radial_spacing(hs, hn))
        holder = math.sqrt(gs.g) if xi == 0 else math.nan
        rows.append(TrackerRow(t, gs.g, barrier, xi, holder, gs.h0, crossing, localized))
        if crossing:
            flags.append(f"barrier crossed at t={t:.6g}")
        if localized is False:
            flags.append(f"argmax not localized at t={t:.6g} (|h0|={hn:.4g})")
    scan = {}
    for c0 in sorted(set(c0_scan), reverse=True):
        sch = schedule.with_c0(c0)
        scan[c0] = bool(all(gs.g <= barrier for _, _, gs in g_series(snapshots, sch, alpha, hs)))
    passing = [c0 for c0, ok in scan.items() if ok]
    threshold = max(passing) if passing else None
    plateau = growth = None
    if hk_series is not None:
        tt, hk = (np.asarray(x, dtype=float) for x in hk_series)
        t0 = schedule.t_star if t0 is None else t0
        sel = tt > t0
        if sel.sum() >= 2:
            tt, hk = tt[sel], hk[sel]
            mid = tt[0] + 0.5 * (tt[-1] - tt[0])
            s_mid = float(np.max(hk[tt <= mid]))
            growth = float(np.max(hk)) / s_mid - 1.0
            plateau = bool(growth < 0.05)
    return TrackerReport(rows, M, schedule.c0, threshold, scan, plateau, growth, flags)


def almost_monotone_check(gammas: Sequence[float], kappa: float, grid: np.ndarray) -> float:
    """sup over gamma and s <= t in ``grid`` of gamma F(s)/F(t), F(x) = x^gamma log(kappa + 1/(4x))."""
    grid = np.sort(np.asarray(grid, dtype=float))
    if np.any(grid <= 0):
        raise ValueError("grid must be positive")
    best = 0.0
    lg = np.log(kappa + 1.0 / (4.0 * grid))
    for g in gammas:
        F = grid ** g * lg
        best = max(best, float(g * np.max(np.maximum.accumulate(F) / F)))
    return best


@dataclass
class TrackedRun:
    record: object
    report: TrackerReport
    schedule: XiSchedule
    bounds: BoundConstants


def tracked_run(theta0: SpectralField, f: SpectralField | None, m, schedule: XiSchedule, hs: np.ndarray,
                t_factor: float = 10.0, c0_scan: Sequence[float] = (), hk: float = 3.0,
                c_cfl: float = 0.5, dt_max: float = 0.05, per_tstar: int = 20) -> TrackedRun:
    """Run to t_factor * T* with snapshots every T*/per_tstar and track g(t) and ||theta||_{H^hk}."""
    from .evolution import StepperConfig, default_observers, run

    every = schedule.t_star / per_tstar
    obs = default_observers(m, f)
    obs["Hk"] = lambda t, th: norm(th, "sobolev", hk)
    st = StepperConfig(dt=min(every, dt_max), t_end=t_factor * schedule.t_star, adaptive=True, c_cfl=c_cfl,
                       dt_max=dt_max, cadence=every, snapshot_every=every)
    rec = run(theta0, f, m, st, obs)
    bc = BoundConstants.from_data(theta0, f, schedule.xi0, schedule.alpha)
    rep = holder_tracker(rec.snapshots, schedule, schedule.alpha, bc.M, hs, c0_scan=c0_scan,
                         hk_series=(rec.t, rec.array("Hk")))
    return TrackedRun(rec, rep, schedule, bc)
