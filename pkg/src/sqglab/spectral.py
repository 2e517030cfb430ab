"""Fourier representation of real fields on the torus [0, 2pi)^2.

Coefficients use the ``rfft2`` half-plane layout: ``coeffs[i1, i2]`` holds
theta_hat(k1, k2) with ``k1 = fftfreq(n)*n`` along axis 0 and ``k2 >= 0``
along axis 1.  Normalization is

    theta_hat(k) = (2 pi)^-2 \\int theta(x) exp(-i k.x) dx,
    theta(x)     = sum_k theta_hat(k) exp(i k.x),

so the physical samples ``theta[i1, i2]`` sit at ``x = 2 pi (i1, i2) / n``.

Quadratic products are dealiased by the 2/3 rule: both factors and the
product are truncated to ``|k1|, |k2| <= kmax`` with ``kmax = (n - 1) // 3``,
which makes the retained part of every product exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from .multipliers import Multiplier, MeanZeroError, symbol_on_grid

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n!r}")

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def spectral_shape(self):
        return (self.n, self.n // 2 + 1)

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def kmax(self) -> int:
        return (self.n - 1) // 3

    @cached_property
    def k1(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)[:, None]
        k.setflags(write=False)
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.arange(self.n // 2 + 1, dtype=float)[None, :]
        k.setflags(write=False)
        return k

    @cached_property
    def kmag(self) -> np.ndarray:
        k = np.sqrt(self.k1 ** 2 + self.k2 ** 2)
        k.setflags(write=False)
        return k

    @cached_property
    def dealias(self) -> np.ndarray:
        m = (np.abs(self.k1) <= self.kmax) & (self.k2 <= self.kmax)
        m.setflags(write=False)
        return m

    @cached_property
    def ik1(self) -> np.ndarray:
        # Nyquist row dropped so derivatives keep Hermitian symmetry
        k = 1j * np.where(np.abs(self.k1) == self.n // 2, 0.0, self.k1) * np.ones_like(self.k2)
        k.setflags(write=False)
        return k

    @cached_property
    def ik2(self) -> np.ndarray:
        k = 1j * np.where(self.k2 == self.n // 2, 0.0, self.k2) * np.ones_like(self.k1)
        k.setflags(write=False)
        return k

    @cached_property
    def riesz_perp_symbols(self):
        """Symbols of u1 = R2 theta and u2 = -R1 theta (zero at k = 0)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(self.kmag > 0, 1.0 / self.kmag, 0.0)
        s1 = self.ik2 * inv
        s2 = -self.ik1 * inv
        s1.setflags(write=False)
        s2.setflags(write=False)
        return s1, s2

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each half-plane coefficient in full-spectrum sums."""
        w = np.full(self.spectral_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        w.setflags(write=False)
        return w

    @cached_property
    def coords(self):
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def forward(self, samples: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(samples) / self.n ** 2

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(coeffs * self.n ** 2, s=self.shape)


# ---------------------------------------------------------------------------
# array-level kernels (used directly by the time steppers)
# ---------------------------------------------------------------------------

def velocity_phys(grid: GridSpec, th_hat: np.ndarray):
    th = th_hat * grid.dealias
    s1, s2 = grid.riesz_perp_symbols
    return grid.inverse(s1 * th), grid.inverse(s2 * th)


def gradient_phys(grid: GridSpec, th_hat: np.ndarray):
    th = th_hat * grid.dealias
    return grid.inverse(grid.ik1 * th), grid.inverse(grid.ik2 * th)


def dealiased_product(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Spectral coefficients of a*b for two (dealiased) coefficient arrays."""
    pa = grid.inverse(a * grid.dealias)
    pb = grid.inverse(b * grid.dealias)
    return grid.forward(pa * pb) * grid.dealias


def transport_hat(grid: GridSpec, th_hat: np.ndarray) -> np.ndarray:
    """Dealiased coefficients of (R^perp theta) . grad theta."""
    u1, u2 = velocity_phys(grid, th_hat)
    d1, d2 = gradient_phys(grid, th_hat)
    out = grid.forward(u1 * d1 + u2 * d2) * grid.dealias
    out[0, 0] = 0.0  # divergence-free transport has zero mean; drop the rounding residue
    return out


def l2_sq(grid: GridSpec, coeffs: np.ndarray) -> float:
    return float(TWO_PI ** 2 * np.sum(grid.weights * np.abs(coeffs) ** 2))


# ---------------------------------------------------------------------------
# field types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable real field stored by its half-plane Fourier coefficients."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.spectral_shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.spectral_shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.spectral_shape, dtype=np.complex128))

    @classmethod
    def from_physical(cls, grid: GridSpec, samples) -> "SpectralField":
        samples = np.asarray(samples)
        if samples.shape != grid.shape:
            raise ValueError(f"samples of shape {samples.shape} do not match grid {grid.shape}")
        if np.iscomplexobj(samples):
            raise ValueError("samples must be real")
        return cls(grid, grid.forward(samples.astype(float)))

    @classmethod
    def from_modes(cls, grid: GridSpec, modes: Mapping[tuple[int, int], complex]) -> "SpectralField":
        """Real field sum of a*exp(ik.x) + conj(a)*exp(-ik.x) over the given modes.

        The zero mode is taken as a plain (real) constant.
        """
        n = grid.n
        c = np.zeros(grid.spectral_shape, dtype=np.complex128)
        for (k1, k2), amp in modes.items():
            if max(abs(k1), abs(k2)) >= n // 2:
                raise ValueError(f"mode {(k1, k2)} outside the representable range")
            if (k1, k2) == (0, 0):
                c[0, 0] += complex(amp).real
                continue
            if k2 < 0 or (k2 == 0 and k1 < 0):
                k1, k2, amp = -k1, -k2, np.conj(amp)
            c[k1 % n, k2] += amp
            if k2 == 0:
                c[(-k1) % n, 0] += np.conj(amp)
        return cls(grid, c)

    def to_physical(self) -> np.ndarray:
        return self.grid.inverse(self.coeffs)

    def full_coeffs(self) -> np.ndarray:
        """Full n x n spectrum (numpy fft2 ordering) rebuilt by conjugate symmetry."""
        n = self.grid.n
        full = np.zeros((n, n), dtype=np.complex128)
        h = n // 2 + 1
        full[:, :h] = self.coeffs
        idx = (-np.arange(n)) % n
        # columns k2 = n/2+1 .. n-1 equal conj of (-k1, n-k2)
        for c2 in range(h, n):
            full[:, c2] = np.conj(self.coeffs[idx, n - c2])
        return full

    def coefficient(self, k1: int, k2: int) -> complex:
        n = self.grid.n
        if k2 < 0 or (k2 == 0 and k1 < 0):
            return complex(np.conj(self.coeffs[(-k1) % n, -k2]))
        return complex(self.coeffs[k1 % n, k2])

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def without_mean(self) -> "SpectralField":
        c = self.coeffs.copy()
        c[0, 0] = 0.0
        return SpectralField(self.grid, c)

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * self.grid.dealias)

    def is_band_limited(self) -> bool:
        return not np.any(self.coeffs[~self.grid.dealias])

    def _check(self, other):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.coeffs / float(scalar))

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, mean={self.mean:.3g}, L2={norm(self, 'L2'):.6g})"


@dataclass(frozen=True, eq=False)
class VelocityField:
    u1: SpectralField
    u2: SpectralField

    def divergence_symbol_max(self) -> float:
        g = self.u1.grid
        return float(np.max(np.abs(g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs)))

    def to_physical(self):
        return self.u1.to_physical(), self.u2.to_physical()

    def sup(self) -> float:
        a, b = self.to_physical()
        return float(np.max(np.hypot(a, b)))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def apply_multiplier(m: Multiplier, theta: SpectralField) -> SpectralField:
    if m.inverse and abs(theta.coeffs[0, 0]) != 0.0:
        raise MeanZeroError(
            f"{type(m).__name__} requires a mean-zero field (mean = {theta.coeffs[0, 0].real:.3e})")
    return SpectralField(theta.grid, theta.coeffs * symbol_on_grid(m, theta.grid))


def riesz_perp(theta: SpectralField) -> VelocityField:
    s1, s2 = theta.grid.riesz_perp_symbols
    return VelocityField(SpectralField(theta.grid, s1 * theta.coeffs),
                         SpectralField(theta.grid, s2 * theta.coeffs))


def nonlinear_term(theta: SpectralField) -> SpectralField:
    """Dealiased -(R^perp theta) . grad theta."""
    return SpectralField(theta.grid, -transport_hat(theta.grid, theta.coeffs))


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    f._check(g)
    return SpectralField(f.grid, dealiased_product(f.grid, f.coeffs, g.coeffs))


def band_mask(grid: GridSpec, j: int, smoothed: bool = False) -> np.ndarray:
    if j < -1:
        raise ValueError(f"band index must be >= -1, got {j}")
    k = grid.kmag
    if not smoothed:
        if j == -1:
            return k < 1.0
        return (k >= 2.0 ** j) & (k < 2.0 ** (j + 1))
    mask = np.zeros(grid.spectral_shape, dtype=bool)
    for jj in (j - 1, j, j + 1):
        if jj >= -1:
            mask |= band_mask(grid, jj)
    return mask


def max_band(grid: GridSpec) -> int:
    """Largest j whose band meets the representable spectrum."""
    return int(np.floor(np.log2(grid.kmag.max())))


def lp_project(j: int, theta: SpectralField, smoothed: bool = False) -> SpectralField:
    return SpectralField(theta.grid, theta.coeffs * band_mask(theta.grid, j, smoothed))


def commutator(f: SpectralField, j: int, g: SpectralField) -> SpectralField:
    """[f, Delta_j] g = f Delta_j g - Delta_j (f g)."""
    f._check(g)
    grid = f.grid
    mask = band_mask(grid, j)
    c = dealiased_product(grid, f.coeffs, g.coeffs * mask) - mask * dealiased_product(grid, f.coeffs, g.coeffs)
    return SpectralField(grid, c)


def norm(theta: SpectralField, kind: str = "L2", s: float = 0.0) -> float:
    """Norms on the torus.

    ``kind`` is one of ``"L2"``, ``"sobolev"`` (inhomogeneous H^s, i.e.
    sqrt(||.||_L2^2 + ||.||_Hdot^s^2)), ``"hsobolev"`` (homogeneous), ``"sup"``
    or ``"mean"``.
    """
    grid = theta.grid
    c = theta.coeffs
    if kind == "L2":
        return float(np.sqrt(l2_sq(grid, c)))
    if kind in ("sobolev", "hsobolev"):
        k = grid.kmag
        with np.errstate(divide="ignore"):
            wk = np.where(k > 0, k ** (2.0 * s), 0.0)
        hdot = TWO_PI ** 2 * float(np.sum(grid.weights * wk * np.abs(c) ** 2))
        if kind == "hsobolev":
            return float(np.sqrt(hdot))
        return float(np.sqrt(hdot + l2_sq(grid, c)))
    if kind == "sup":
        return float(np.max(np.abs(theta.to_physical())))
    if kind == "mean":
        return abs(theta.mean)
    raise ValueError(f"unknown norm kind {kind!r}")


def random_field(grid: GridSpec, rng: np.random.Generator, decay: float = 2.0,
                 kcut: int | None = None, amplitude: float = 1.0) -> SpectralField:
    """Mean-zero band-limited field with |k|^-decay envelope and uniform phases.

    Normalized to the given L2 norm.
    """
    kcut = grid.kmax if kcut is None else min(kcut, grid.kmax)
    c = np.zeros(grid.spectral_shape, dtype=np.complex128)
    k = grid.kmag
    band = (np.abs(grid.k1) <= kcut) & (grid.k2 <= kcut) & (k > 0)
    phases = rng.uniform(0, TWO_PI, size=grid.spectral_shape)
    amps = rng.standard_normal(grid.spectral_shape)
    with np.errstate(divide="ignore"):
        env = np.where(k > 0, k, 1.0) ** (-decay)
    c[band] = (amps * env * np.exp(1j * phases))[band]
    # symmetrize via a physical roundtrip so the k2 = 0 column is Hermitian
    c = grid.forward(grid.inverse(c))
    c[0, 0] = 0.0
    field = SpectralField(grid, c)
    l2 = norm(field)
    return field * (amplitude / l2) if l2 > 0 else field
