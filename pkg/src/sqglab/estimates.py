"""Empirical witnesses for the Littlewood-Paley lemmas and the triangle weight bounds.

Inequalities with unspecified constants cannot be refuted by finite
computation.  What is reported here is a measured constant together with
its behaviour under refinement (grid growth, lattice growth).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ._accel import triangle_max
from .spectral import (
    GridSpec,
    SpectralField,
    band_mask,
    dealiased_product,
    l2_sq,
    norm,
    random_field,
)


@dataclass(frozen=True)
class EnsembleSpec:
    """``count`` pairs (f, g) of random mean-zero fields with |k|^-decay envelopes.

    Members are drawn on the ``base_n`` grid and truncated to ``grid``'s
    dealiased band, so ensembles on different grids are nested.
    """

    count: int
    grid: GridSpec
    decay: float
    seed: int = 0
    base_n: int | None = None

    def members(self) -> Iterator[tuple[SpectralField, SpectralField]]:
        base = GridSpec(self.base_n or self.grid.n)
        if base.n < self.grid.n:
            raise ValueError("base grid must be at least as fine as the target grid")
        rng = np.random.default_rng(self.seed)
        for _ in range(self.count):
            f = random_field(base, rng, decay=self.decay)
            g = random_field(base, rng, decay=self.decay)
            yield restrict(f, self.grid), restrict(g, self.grid)


def restrict(field: SpectralField, grid: GridSpec) -> SpectralField:
    """Keep the modes of ``field`` inside ``grid``'s dealiased band."""
    src = field.grid
    K = grid.kmax
    out = np.zeros(grid.spectral_shape, dtype=np.complex128)
    k1 = np.arange(-K, K + 1)
    out[k1 % grid.n, :K + 1] = field.coeffs[k1 % src.n, :K + 1]
    return SpectralField(grid, out)


def _hdot(f: SpectralField, s: float) -> float:
    return norm(f, "hsobolev", s)


def _smoothed(grid: GridSpec, j: int) -> np.ndarray:
    return band_mask(grid, j, smoothed=True)


def commutator_band(f: SpectralField, g: SpectralField, j: int) -> np.ndarray:
    """Coefficients of  smoothed-Delta_j [f, Delta_j] g."""
    grid = f.grid
    m = band_mask(grid, j)
    c = dealiased_product(grid, f.coeffs, g.coeffs * m) - m * dealiased_product(grid, f.coeffs, g.coeffs)
    return c * _smoothed(grid, j)


def product_band(f: SpectralField, g: SpectralField, j: int) -> np.ndarray:
    """Coefficients of  smoothed-Delta_j (f Delta_j g)."""
    grid = f.grid
    return dealiased_product(grid, f.coeffs, g.coeffs * band_mask(grid, j)) * _smoothed(grid, j)


def check_exponents(lemma: str, a1: float, a2: float) -> None:
    if lemma == "commutator":
        if not (a1 < 2 and a2 < 1 and a1 + a2 > 0):
            raise ValueError(f"commutator lemma needs a1 < 2, a2 < 1, a1 + a2 > 0; got ({a1}, {a2})")
    elif lemma == "product":
        if not a1 < 1:
            raise ValueError(f"product lemma needs a1 < 1; got a1 = {a1}")
    else:
        raise ValueError(f"unknown lemma {lemma!r}")


@dataclass
class LemmaTable:
    lemma: str
    a1: float
    a2: float
    j: np.ndarray
    ratios: np.ndarray      # (member, j)
    max_ratio: np.ndarray   # per j
    l2: float

    def trend_slope(self, j_min: int = 1) -> float:
        """Least-squares slope of log2(max ratio) against j for j >= j_min."""
        sel = (self.j >= j_min) & (self.max_ratio > 0)
        if sel.sum() < 2:
            return 0.0
        return float(np.polyfit(self.j[sel], np.log2(self.max_ratio[sel]), 1)[0])

    def rows(self):
        for j, r in zip(self.j, self.max_ratio):
            yield [int(j), float(r)]


def lp_lemma_ratio(lemma: str, a1: float, a2: float, ensemble: EnsembleSpec) -> LemmaTable:
    """Per-band ratios  ||.||_L2 2^{(a1+a2-1)j} / (||f||_{Hdot^a1} ||g||_{Hdot^a2})."""
    check_exponents(lemma, a1, a2)
    grid = ensemble.grid
    jmax = int(math.floor(math.log2(grid.n / 3)))
    js = np.arange(0, jmax + 1)
    op = commutator_band if lemma == "commutator" else product_band
    rows = []
    for f, g in ensemble.members():
        denom = _hdot(f, a1) * _hdot(g, a2)
        if denom == 0:
            rows.append(np.zeros(len(js)))
            continue
        rows.append(np.array([math.sqrt(l2_sq(grid, op(f, g, int(j)))) * 2.0 ** ((a1 + a2 - 1) * j) / denom
                              for j in js]))
    ratios = np.array(rows)
    mx = ratios.max(axis=0)
    return LemmaTable(lemma, a1, a2, js, ratios, mx, float(np.sqrt(np.sum(mx ** 2))))


def flatness(table_small: LemmaTable, table_big: LemmaTable) -> float:
    """|log2| of the ratio of l2 norms between two grids."""
    return abs(math.log2(table_big.l2 / table_small.l2))


# ---------------------------------------------------------------------------
# triangle weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TripleScan:
    n_max: int
    case: str = "frac"
    gamma: float = 0.5
    a: float = 0.25
    kappa: float = math.e

    def __post_init__(self):
        if self.n_max < 8:
            raise ValueError("n_max must be >= 8")
        if self.case not in ("frac", "log"):
            raise ValueError(f"unknown weight case {self.case!r}")

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        if self.case == "frac":
            return r ** (-self.gamma / 2)
        return np.log(self.kappa + r) ** (self.a / 2) / np.sqrt(r)

    def ratio(self, j, k, l) -> float:
        """|k| |w(l) - w(k)| / |j| for one triple with j + k - l = 0."""
        j, k, l = (np.asarray(v, dtype=float) for v in (j, k, l))
        if not np.allclose(j + k - l, 0):
            raise ValueError("triple must satisfy j + k - l = 0")
        nk, nl, nj = (float(np.hypot(*v)) for v in (k, l, j))
        return nk * abs(float(self.weight(nl)) - float(self.weight(nk))) / nj

    @property
    def ray_limit(self) -> float:
        """Limit of the ratio along l = unit vector, k parallel to l, |k| -> infinity: w(1)."""
        return float(self.weight(1.0))


@dataclass(frozen=True)
class ScanResult:
    worst: float
    j: tuple
    k: tuple
    l: tuple
    n_max: int
    ray_limit: float


def lattice(n_max: int) -> np.ndarray:
    r = np.arange(-n_max, n_max + 1)
    a, b = np.meshgrid(r, r, indexing="ij")
    v = np.column_stack([a.ravel(), b.ravel()])
    nn = np.sum(v * v, axis=1)
    return v[(nn > 0) & (nn <= n_max * n_max)]


def triangle_weight_scan(scan: TripleScan) -> ScanResult:
    """Max of |k| w(l) |w(l) - w(k)| / (|j| w(l)) over lattice triples j + k - l = 0, all lengths in (0, n_max]."""
    vecs = lattice(scan.n_max)
    norms = np.sqrt(np.sum(vecs.astype(float) ** 2, axis=1))
    w = scan.weight(norms)
    best, ik, il = triangle_max(vecs, norms, w, scan.n_max ** 2)
    k = tuple(int(x) for x in vecs[ik])
    l = tuple(int(x) for x in vecs[il])
    j = (l[0] - k[0], l[1] - k[1])
    return ScanResult(best, j, k, l, scan.n_max, scan.ray_limit)
