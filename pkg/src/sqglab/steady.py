"""Steady states of the forced stationary equation  R^perp Th.grad Th + m Th = f."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .evolution import Background
from .multipliers import Multiplier, symbol_on_grid
from .spectral import GridSpec, SpectralField, l2_sq, transport_hat

log = logging.getLogger(__name__)


class SteadyStateError(RuntimeError):
    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(f"{msg} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SteadyState:
    theta0: SpectralField
    f: SpectralField
    m: Multiplier
    residual: float
    iterations: int = 0
    history: tuple = ()


def shear_state(A: float, m_wave: int, grid: GridSpec) -> SpectralField:
    """A cos(m_wave x2)."""
    if int(m_wave) != m_wave or m_wave < 1:
        raise ValueError("m_wave must be a positive integer")
    if m_wave > grid.kmax:
        raise ValueError(f"m_wave={m_wave} lies outside the dealiased band (kmax={grid.kmax})")
    if A == 0:
        return SpectralField.zeros(grid)
    return SpectralField.from_modes(grid, {(0, int(m_wave)): A / 2})


def _stationary_hat(theta0: SpectralField, m: Multiplier) -> np.ndarray:
    grid = theta0.grid
    th = theta0.coeffs * grid.dealias
    return transport_hat(grid, th) + symbol_on_grid(m, grid) * th


def manufacture_forcing(theta0: SpectralField, m: Multiplier) -> SpectralField:
    if abs(theta0.mean) > 1e-12 * max(1.0, float(np.max(np.abs(theta0.coeffs)))):
        raise ValueError("steady state must be mean-zero")
    return SpectralField(theta0.grid, _stationary_hat(theta0, m))


def residual(theta0: SpectralField, f: SpectralField, m: Multiplier) -> float:
    r = _stationary_hat(theta0, m) - f.coeffs
    return float(np.sqrt(l2_sq(theta0.grid, r)))


def newton_krylov_steady(f: SpectralField, m: Multiplier, guess: SpectralField | None = None,
                         tol: float = 1e-10, max_iter: int = 30, gmres_rtol: float = 1e-12,
                         gmres_maxiter: int = 400) -> SteadyState:
    """Damped Newton on the dealiased mean-zero subspace, GMRES inner solves.

    Unknowns are the physical samples of the dealiased mean-zero field, so the
    Jacobian acts on real vectors.  A backtracking line search halves the step
    until the residual decreases.
    """
    grid = f.grid
    if abs(f.mean) > 1e-12 * max(1.0, float(np.max(np.abs(f.coeffs)))):
        raise ValueError("forcing must be mean-zero")
    if guess is None:
        guess = SpectralField.zeros(grid)
    sym = symbol_on_grid(m, grid)
    mask = grid.dealias.copy()
    mask[0, 0] = False
    f_hat = f.coeffs * mask

    def project(vec):
        return grid.forward(vec.reshape(grid.shape)) * mask

    def to_vec(hat):
        return grid.inverse(hat).ravel()

    th = guess.coeffs * mask

    def F(th):
        return transport_hat(grid, th) * mask + sym * th - f_hat

    def rnorm(r):
        return float(np.sqrt(l2_sq(grid, r)))

    r = F(th)
    res = rnorm(r)
    history = [res]
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SteadyStateError("Newton did not converge", res, it)
        bg = Background(SpectralField(grid, th))

        def jac(v):
            h = project(v)
            return to_vec(-bg.linear(h) * mask + sym * h)

        J = LinearOperator((grid.n ** 2, grid.n ** 2), matvec=jac, dtype=float)
        b = -to_vec(r)
        dx_vec, info = gmres(J, b, rtol=gmres_rtol, atol=0.1 * tol / grid.n, restart=80, maxiter=gmres_maxiter)
        dx = project(dx_vec)
        lin = rnorm(project(jac(to_vec(dx)) - b))
        if info != 0 and lin > 0.5 * res:
            raise SteadyStateError("Krylov stagnation (Jacobian near-singular)", res, it)
        step = 1.0
        while True:
            trial = th + step * dx
            r_trial = F(trial)
            res_trial = rnorm(r_trial)
            if res_trial < res or res_trial <= tol:
                break
            step *= 0.5
            if step < 1e-4:
                raise SteadyStateError("line search failed", res, it)
        th, r, res = trial, r_trial, res_trial
        it += 1
        history.append(res)
        log.debug("newton it=%d residual=%.3e step=%.3g", it, res, step)
    theta0 = SpectralField(grid, th)
    return SteadyState(theta0, f, m, residual(theta0, f, m), it, tuple(history))
