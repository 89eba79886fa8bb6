"""Linearized QCF dynamics ``u'' + P_U L_qcf u = 0`` with ``u'(0) = 0``.

Two independent solvers: the modal (eigenvector) solution and a leapfrog
integrator.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import ChainConfig, displacement, lp_norm, project_zero_mean
from .forces import LinearizedCoefficients
from .operators import qcf_operator
from .spectral import SpectralResult, qcf_eigenbasis

__all__ = [
    "DynamicalInstability",
    "Method",
    "TrajectoryResult",
    "modal_frequencies",
    "evolve_spectral",
    "evolve_leapfrog",
    "max_stable_step",
    "default_horizon",
    "AuditRow",
    "dynamical_stability_audit",
]

EIG_TOL = 1e-10


class DynamicalInstability(RuntimeError):
    """The operator has an eigenvalue off the non-negative real axis."""

    def __init__(self, eigenvalue):
        self.eigenvalue = complex(eigenvalue)
        super().__init__(f"dynamically unstable: eigenvalue {self.eigenvalue:.6g}")


class Method(enum.Enum):
    SPECTRAL_EXACT = "spectral"
    LEAPFROG = "leapfrog"


@dataclass(frozen=True)
class TrajectoryResult:
    times: np.ndarray
    norms: np.ndarray
    peak_ratio: float
    method: Method
    states: np.ndarray | None = None


def modal_frequencies(basis: SpectralResult) -> np.ndarray:
    """``sqrt(lambda_j)``; raises if some eigenvalue is negative or complex."""
    w = np.asarray(basis.eigenvalues)
    tol = EIG_TOL * basis.matrix_norm
    bad = np.flatnonzero((np.abs(np.imag(w)) > tol) | (np.real(w) < -tol))
    if bad.size:
        raise DynamicalInstability(w[bad[np.argmin(np.real(w[bad]))]])
    return np.sqrt(np.clip(np.real(w), 0.0, None))


def _trajectory(times, states, u0, cfg, method, keep):
    norms = np.array([lp_norm(s, 2, cfg) for s in states])
    n0 = lp_norm(u0, 2, cfg)
    peak = float(norms.max() / n0) if n0 > 0 else 1.0
    return TrajectoryResult(np.asarray(times), norms, peak, method, states if keep else None)


def evolve_spectral(
    u0,
    coeffs: LinearizedCoefficients,
    cfg: ChainConfig,
    times,
    basis: SpectralResult | None = None,
    keep_states: bool = False,
) -> TrajectoryResult:
    """Exact modal solution ``u(t) = V diag(cos(sqrt(lambda) t)) V^{-1} u0``."""
    u0 = displacement(u0, cfg)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    basis = qcf_eigenbasis(coeffs, cfg) if basis is None else basis
    omega = modal_frequencies(basis)
    z0 = np.linalg.solve(basis.V, u0)
    modal = np.cos(np.outer(times, omega)) * z0
    states = np.real(modal @ basis.V.T)
    return _trajectory(times, states, u0, cfg, Method.SPECTRAL_EXACT, keep_states)


def max_stable_step(basis: SpectralResult) -> float:
    """Largest admissible leapfrog step, ``0.5 * 2 / omega_max``."""
    return 1.0 / float(modal_frequencies(basis).max())


def evolve_leapfrog(
    u0,
    coeffs: LinearizedCoefficients,
    cfg: ChainConfig,
    dt: float,
    steps: int,
    record_every: int = 1,
    basis: SpectralResult | None = None,
    keep_states: bool = False,
) -> TrajectoryResult:
    """Velocity-Verlet integration from rest.

    Raises ``ValueError`` if ``dt`` exceeds :func:`max_stable_step`.
    """
    u0 = displacement(u0, cfg)
    basis = qcf_eigenbasis(coeffs, cfg) if basis is None else basis
    dt_max = max_stable_step(basis)
    if not 0 < dt <= dt_max:
        raise ValueError(f"time step {dt:.3e} outside (0, {dt_max:.3e}]")
    A = qcf_operator(coeffs, cfg).matrix

    u = u0.copy()
    v = np.zeros_like(u)
    a = -A @ u
    times, states = [0.0], [u.copy()]
    for k in range(1, steps + 1):
        v += 0.5 * dt * a
        u += dt * v
        a = -A @ u
        v += 0.5 * dt * a
        if k % record_every == 0:
            times.append(k * dt)
            states.append(u.copy())
    return _trajectory(np.array(times), np.array(states), u0, cfg, Method.LEAPFROG, keep_states)


def default_horizon(basis: SpectralResult) -> float:
    """Four periods of the slowest non-zero mode, ``4 pi / sqrt(lambda_min+)``."""
    omega = modal_frequencies(basis)
    positive = omega[omega > math.sqrt(EIG_TOL * basis.matrix_norm)]
    return 4 * math.pi / float(positive.min())


@dataclass(frozen=True)
class AuditRow:
    N: int
    K: int
    trials: int
    max_peak_ratio: float
    cond_V: float
    stable: bool
    offending_eigenvalue: complex | None = None

    @property
    def within_bound(self) -> bool:
        return self.stable and self.max_peak_ratio <= self.cond_V * (1 + 1e-6)


def _audit_cell(args) -> AuditRow:
    phiF, phi2F, N, K, horizon, trials, samples, seed = args
    coeffs = LinearizedCoefficients(phiF, phi2F)
    cfg = ChainConfig(N, K)
    basis = qcf_eigenbasis(coeffs, cfg)
    try:
        modal_frequencies(basis)
    except DynamicalInstability as exc:
        return AuditRow(N, K, trials, math.nan, basis.cond2, False, exc.eigenvalue)
    T = default_horizon(basis) if horizon is None else horizon
    times = np.linspace(0.0, T, samples)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, N])))
    peak = 0.0
    for _ in range(trials):
        u0 = project_zero_mean(rng.standard_normal(cfg.size), cfg)
        peak = max(peak, evolve_spectral(u0, coeffs, cfg, times, basis=basis).peak_ratio)
    return AuditRow(N, K, trials, peak, basis.cond2, True)


def dynamical_stability_audit(
    coeffs: LinearizedCoefficients,
    N_list,
    horizon: float | None = None,
    trials: int = 50,
    seed: int = 0,
    K_rule=lambda N: N // 2,
    samples: int = 2001,
    workers: int = 1,
) -> list[AuditRow]:
    """Largest sampled ``||u(t)|| / ||u0||`` per ``N`` against ``cond(V)``.

    Rows are in the order of ``N_list``.  An eigenvalue off the non-negative
    axis is reported in ``offending_eigenvalue`` instead of evolving.
    """
    cells = [
        (coeffs.phiF, coeffs.phi2F, int(N), K_rule(N), horizon, trials, samples, seed)
        for N in N_list
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_audit_cell, cells))
    return [_audit_cell(c) for c in cells]
