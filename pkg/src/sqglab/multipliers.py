"""Radial Fourier multipliers used as dissipation operators and weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class MeanZeroError(ValueError):
    """Raised when an inverse multiplier meets a field with nonzero mean."""


@dataclass(frozen=True)
class Multiplier:
    """Base class.  Subclasses provide ``_values`` on strictly positive |k|."""

    inverse = False

    def _values(self, kmag: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def symbol(self, kmag) -> np.ndarray:
        """Evaluate the symbol; the zero mode maps to 0."""
        kmag = np.asarray(kmag, dtype=float)
        out = np.zeros_like(kmag)
        pos = kmag > 0
        out[pos] = self._values(kmag[pos])
        return out

    def scalar(self, kmag: float) -> float:
        return float(self.symbol(np.array([kmag]))[0])

    def describe(self) -> dict:
        d = {"kind": type(self).__name__}
        d.update(self.__dict__)
        return d


@dataclass(frozen=True)
class FractionalLaplacian(Multiplier):
    """Lambda^gamma, symbol |k|^gamma."""

    gamma: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gamma <= 2.0:
            raise ValueError(f"gamma must lie in (0, 2], got {self.gamma}")

    def _values(self, kmag):
        return kmag ** self.gamma


@dataclass(frozen=True)
class LogSupercritical(Multiplier):
    """Symbol |k| / log^a(kappa + |k|)."""

    a: float = 0.25
    kappa: float = math.e

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if self.kappa < math.e:
            raise ValueError(f"kappa must be >= e, got {self.kappa}")

    def _values(self, kmag):
        return kmag / np.log(self.kappa + kmag) ** self.a


@dataclass(frozen=True)
class InverseFractionalLaplacian(Multiplier):
    gamma: float = 0.5
    inverse = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 2.0:
            raise ValueError(f"gamma must lie in (0, 2], got {self.gamma}")

    def _values(self, kmag):
        return kmag ** (-self.gamma)


@dataclass(frozen=True)
class InverseLog(Multiplier):
    a: float = 0.25
    kappa: float = math.e
    inverse = True

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if self.kappa < math.e:
            raise ValueError(f"kappa must be >= e, got {self.kappa}")

    def _values(self, kmag):
        return np.log(self.kappa + kmag) ** self.a / kmag


@dataclass(frozen=True)
class Identity(Multiplier):
    def symbol(self, kmag):
        return np.ones_like(np.asarray(kmag, dtype=float))


@dataclass(frozen=True)
class Inviscid(Multiplier):
    """Zero symbol: no dissipation."""

    def _values(self, kmag):
        return np.zeros_like(kmag)


def inverse_of(m: Multiplier) -> Multiplier:
    if isinstance(m, FractionalLaplacian):
        return InverseFractionalLaplacian(m.gamma)
    if isinstance(m, LogSupercritical):
        return InverseLog(m.a, m.kappa)
    if isinstance(m, InverseFractionalLaplacian):
        return FractionalLaplacian(m.gamma)
    if isinstance(m, InverseLog):
        return LogSupercritical(m.a, m.kappa)
    if isinstance(m, Identity):
        return m
    raise ValueError(f"{type(m).__name__} has no inverse")


def from_config(kind: str, gamma: float = 0.5, a: float = 0.25, kappa: float = math.e) -> Multiplier:
    kind = kind.strip().lower()
    table = {
        "fractional": lambda: FractionalLaplacian(gamma),
        "log": lambda: LogSupercritical(a, kappa),
        "inverse-fractional": lambda: InverseFractionalLaplacian(gamma),
        "inverse-log": lambda: InverseLog(a, kappa),
        "identity": Identity,
        "inviscid": Inviscid,
    }
    if kind not in table:
        raise ValueError(f"unknown multiplier kind {kind!r}; expected one of {sorted(table)}")
    return table[kind]()


@lru_cache(maxsize=64)
def symbol_on_grid(m: Multiplier, grid) -> np.ndarray:
    arr = m.symbol(grid.kmag)
    arr.setflags(write=False)
    return arr
