"""Energies and scaled force fields of the atomistic, local QC, QNL and QCF models.

Every model here is a next-nearest-neighbour pair model, so the energy splits
into a bond term on each ``y'_j`` and a second-neighbour term on
``s_j = y'_j + y'_{j+1}``.  Forces are ``-1/eps * dE/dy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .chain import ChainConfig, backward_difference, forward_state, project_zero_mean

__all__ = [
    "DomainError",
    "Potential",
    "LinearizedCoefficients",
    "lennard_jones",
    "deformation_gradient",
    "energy_atomistic",
    "forces_atomistic",
    "energy_qcl",
    "forces_qcl",
    "energy_qnl",
    "forces_qnl",
    "forces_qcf",
    "forces_qcf_projected",
    "qcf_force_sum",
]


class DomainError(ValueError):
    """A bond length left the domain ``(0, inf)`` of the pair potential."""


@dataclass(frozen=True)
class Potential:
    """A pair potential with its first two derivatives.

    ``r_star`` is the inflection point: convex on ``(0, r_star)``, concave
    beyond.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    ddphi: Callable[[np.ndarray], np.ndarray]
    r_star: float
    name: str = "custom"

    def phi_cb(self, r):
        """Cauchy-Born stored energy density ``phi(r) + phi(2r)``."""
        return self.phi(r) + self.phi(2 * r)

    def dphi_cb(self, r):
        return self.dphi(r) + 2 * self.dphi(2 * r)

    def coefficients(self, F: float) -> "LinearizedCoefficients":
        return LinearizedCoefficients(float(self.ddphi(F)), float(self.ddphi(2 * F)))


@dataclass(frozen=True)
class LinearizedCoefficients:
    """Second derivatives ``phi''(F)`` and ``phi''(2F)`` of the potential."""

    phiF: float
    phi2F: float

    @property
    def A_F(self) -> float:
        """Continuum elastic modulus ``phi''_F + 4 phi''_2F``."""
        return self.phiF + 4.0 * self.phi2F

    @property
    def ratio(self) -> float:
        """``A_F / phi''_F``."""
        return self.A_F / self.phiF

    @classmethod
    def from_ratio(cls, ratio: float, phiF: float = 1.0) -> "LinearizedCoefficients":
        """Coefficients with ``A_F / phi''_F = ratio``."""
        return cls(phiF, phiF * (ratio - 1.0) / 4.0)


def lennard_jones() -> Potential:
    """``phi(r) = r^-12 - 2 r^-6``, minimum at ``r = 1``."""

    def phi(r):
        r = np.asarray(r, dtype=float)
        return r**-12 - 2.0 * r**-6

    def dphi(r):
        r = np.asarray(r, dtype=float)
        return -12.0 * r**-13 + 12.0 * r**-7

    def ddphi(r):
        r = np.asarray(r, dtype=float)
        return 156.0 * r**-14 - 84.0 * r**-8

    r_star = brentq(lambda r: float(ddphi(r)), 1.0, 2.0, xtol=1e-15)
    return Potential(phi, dphi, ddphi, r_star, name="lennard-jones")


def deformation_gradient(y, cfg: ChainConfig) -> np.ndarray:
    """``y'_l = (y_l - y_{l-1}) / eps`` for a deformation in ``y_F + U``.

    The period of a deformation carries the offset ``y_{l+2N} = y_l + 2F``,
    so the wrap is taken through the displacement ``y - y_F``.
    """
    u = np.asarray(y, dtype=float) - forward_state(cfg)
    yp = cfg.F + backward_difference(u, cfg)
    if np.any(yp <= 0):
        bad = int(np.argmin(yp))
        raise DomainError(f"non-positive bond length y'={yp[bad]:.3e} at site {cfg.sites[bad]}")
    return yp


def _nnn(yp: np.ndarray) -> np.ndarray:
    return yp + np.roll(yp, -1)


def _energy(bond: np.ndarray, second: np.ndarray, cfg: ChainConfig) -> float:
    return cfg.eps * (math.fsum(bond) + math.fsum(second))


def _forces(g: np.ndarray, t: np.ndarray, cfg: ChainConfig) -> np.ndarray:
    # g_j: derivative of the bond term in y'_j; t_j: derivative of the
    # second-neighbour term in s_j.
    return cfg.N * (np.roll(g, -1) - g + np.roll(t, -1) - np.roll(t, 1))


def energy_atomistic(y, pot: Potential, cfg: ChainConfig) -> float:
    """Potential energy per period of the full next-nearest-neighbour chain."""
    yp = deformation_gradient(y, cfg)
    return _energy(pot.phi(yp), pot.phi(_nnn(yp)), cfg)


def forces_atomistic(y, pot: Potential, cfg: ChainConfig) -> np.ndarray:
    yp = deformation_gradient(y, cfg)
    return _forces(pot.dphi(yp), pot.dphi(_nnn(yp)), cfg)


def energy_qcl(y, pot: Potential, cfg: ChainConfig) -> float:
    """Local QC (Cauchy-Born) energy."""
    yp = deformation_gradient(y, cfg)
    return _energy(pot.phi_cb(yp), np.zeros(0), cfg)


def forces_qcl(y, pot: Potential, cfg: ChainConfig) -> np.ndarray:
    yp = deformation_gradient(y, cfg)
    return _forces(pot.dphi_cb(yp), np.zeros_like(yp), cfg)


def _qnl_bond_weights(cfg: ChainConfig) -> np.ndarray:
    # bond j collects half a Cauchy-Born term from each continuum atom j-1, j
    c = cfg.continuum.astype(float)
    return c + np.roll(c, 1)


def energy_qnl(y, pot: Potential, cfg: ChainConfig) -> float:
    """Quasi-nonlocal energy.

    Second-neighbour terms centred on continuum atoms are replaced by
    ``(phi(2 y'_l) + phi(2 y'_{l+1})) / 2``.
    """
    yp = deformation_gradient(y, cfg)
    w = _qnl_bond_weights(cfg)
    bond = pot.phi(yp) + 0.5 * w * pot.phi(2 * yp)
    second = np.where(cfg.atomistic, pot.phi(_nnn(yp)), 0.0)
    return _energy(bond, second, cfg)


def forces_qnl(y, pot: Potential, cfg: ChainConfig) -> np.ndarray:
    yp = deformation_gradient(y, cfg)
    w = _qnl_bond_weights(cfg)
    g = pot.dphi(yp) + w * pot.dphi(2 * yp)
    t = np.where(cfg.atomistic, pot.dphi(_nnn(yp)), 0.0)
    return _forces(g, t, cfg)


def forces_qcf(y, pot: Potential, cfg: ChainConfig) -> np.ndarray:
    """Raw force-mixed field: atomistic rows on A, local QC rows on C.

    The result does not have zero mean in general; see :func:`qcf_force_sum`.
    """
    return np.where(cfg.atomistic, forces_atomistic(y, pot, cfg), forces_qcl(y, pot, cfg))


def forces_qcf_projected(y, pot: Potential, cfg: ChainConfig) -> np.ndarray:
    """Zero-mean representative of the QCF forces as a functional on U."""
    return project_zero_mean(forces_qcf(y, pot, cfg), cfg)


def qcf_force_sum(y, pot: Potential, cfg: ChainConfig) -> float:
    """Closed form of ``sum_l F_qcf,l(y)``; only the two interfaces contribute."""
    yp = deformation_gradient(y, cfg)
    K = cfg.K

    def d(site):
        return yp[cfg.index(site)]

    left = 2 * pot.dphi(2 * d(-K)) - pot.dphi(d(-K) + d(-K - 1)) - pot.dphi(d(-K + 1) + d(-K))
    right = 2 * pot.dphi(2 * d(K + 1)) - pot.dphi(d(K + 2) + d(K + 1)) - pot.dphi(d(K + 1) + d(K))
    return float(cfg.N * (left - right))
