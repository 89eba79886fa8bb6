"""Lattice bookkeeping for the periodic chain.

Vectors are stored in natural order: site ``l = -N+1, ..., N`` lives at
array position ``l + N - 1``.  All stencils wrap modulo ``2N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "ChainConfig",
    "displacement",
    "dual_vector",
    "forward_state",
    "backward_difference",
    "second_difference",
    "antiderivative",
    "inner",
    "lp_norm",
    "u1p_norm",
    "u2p_norm",
    "quotient_norm",
    "negative_norm",
    "l1_dual_norm",
    "project_zero_mean",
    "heaviside",
]


@dataclass(frozen=True)
class ChainConfig:
    """A periodic chain of ``2N`` atoms with atomistic region ``{-K..K}``.

    Parameters
    ----------
    N : int
        Half the number of atoms per period; the lattice spacing is 1/N.
    K : int
        Half-width of the atomistic region, ``1 <= K < N``.
    F : float
        Macroscopic deformation gradient of the uniform state.
    """

    N: int
    K: int
    F: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if int(self.K) != self.K or not 1 <= self.K < self.N:
            raise ValueError(f"K must satisfy 1 <= K < N={self.N}, got {self.K!r}")

    @property
    def eps_exact(self) -> Fraction:
        return Fraction(1, self.N)

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    @property
    def size(self) -> int:
        return 2 * self.N

    @property
    def sites(self) -> np.ndarray:
        """Site labels ``-N+1, ..., N`` in storage order."""
        return np.arange(-self.N + 1, self.N + 1)

    def index(self, site):
        """Storage position of ``site`` (periodic, vectorised)."""
        return (np.asarray(site) + self.N - 1) % self.size

    @property
    def atomistic(self) -> np.ndarray:
        """Boolean mask of the atomistic region."""
        return np.abs(self.sites) <= self.K

    @property
    def continuum(self) -> np.ndarray:
        return ~self.atomistic

    @property
    def zero_mean_tol(self) -> float:
        return 1e-12 * self.size


def _check_length(v, cfg: ChainConfig) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (cfg.size,):
        raise ValueError(f"expected a vector of length {cfg.size}, got shape {v.shape}")
    return v


def displacement(values, cfg: ChainConfig, project: bool = False) -> np.ndarray:
    """Validate ``values`` as an element of the zero-mean space U.

    With ``project=True`` the mean is removed first.  Otherwise a vector whose
    sum exceeds ``1e-12 * 2N`` raises ``ValueError``.
    """
    v = _check_length(values, cfg)
    if project:
        v = project_zero_mean(v, cfg)
    total = math.fsum(v)
    if abs(total) > cfg.zero_mean_tol * max(1.0, float(np.max(np.abs(v), initial=0.0))):
        raise ValueError(f"displacement is not zero-mean (sum = {total:.3e})")
    return v


def dual_vector(values, cfg: ChainConfig) -> np.ndarray:
    """Zero-mean representative of a functional on U."""
    return displacement(values, cfg, project=True)


def forward_state(cfg: ChainConfig) -> np.ndarray:
    """The uniform deformation ``y_l = F * eps * l`` over one period."""
    return cfg.F * cfg.eps * cfg.sites.astype(float)


def backward_difference(u, cfg: ChainConfig) -> np.ndarray:
    """``u'_l = (u_l - u_{l-1}) / eps`` with periodic wrap."""
    u = _check_length(u, cfg)
    return (u - np.roll(u, 1)) * cfg.N


def second_difference(u, cfg: ChainConfig) -> np.ndarray:
    """``u''_l = (u_{l+1} - 2 u_l + u_{l-1}) / eps**2``."""
    u = _check_length(u, cfg)
    return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) * cfg.N**2


def antiderivative(w, cfg: ChainConfig) -> np.ndarray:
    """Zero-mean ``v`` with ``v' = w``; ``w`` must sum to zero."""
    w = _check_length(w, cfg)
    if abs(math.fsum(w)) > cfg.zero_mean_tol * max(1.0, float(np.max(np.abs(w)))):
        raise ValueError("only zero-sum vectors are gradients of periodic displacements")
    v = cfg.eps * np.cumsum(w)
    return project_zero_mean(v, cfg)


def inner(u, v, cfg: ChainConfig) -> float:
    """Weighted inner product ``eps * sum(u * v)``."""
    return cfg.eps * math.fsum(np.asarray(u, dtype=float) * np.asarray(v, dtype=float))


def lp_norm(v, p: float, cfg: ChainConfig) -> float:
    """The weighted ``l^p_eps`` norm, ``p`` in ``[1, inf]``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(_check_length(v, cfg))
    if math.isinf(p):
        return float(a.max())
    scale = float(a.max())
    if scale == 0.0:
        return 0.0
    # scaled to avoid overflow for large p
    return scale * (cfg.eps * math.fsum((a / scale) ** p)) ** (1.0 / p)


def u1p_norm(u, p: float, cfg: ChainConfig) -> float:
    return lp_norm(backward_difference(u, cfg), p, cfg)


def u2p_norm(u, p: float, cfg: ChainConfig) -> float:
    """``||u''||_p`` using the centered second difference."""
    return lp_norm(second_difference(u, cfg), p, cfg)


def quotient_norm(x, p: float, cfg: ChainConfig) -> float:
    """``min_c ||x - c e||_{l^p_eps}``.

    This is the dual norm of ``<x, .>`` restricted to zero-sum vectors in the
    conjugate ``l^q_eps`` norm.
    """
    x = _check_length(x, cfg)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if x.size == 0 or np.all(x == x[0]):
        return 0.0
    if math.isinf(p):
        return 0.5 * float(x.max() - x.min())
    if p == 1:
        c = float(np.median(x))
    elif p == 2:
        c = math.fsum(x) / x.size
    else:
        lo, hi = float(x.min()), float(x.max())
        scale = hi - lo
        res = minimize_scalar(
            lambda c: math.fsum(np.abs((x - c) / scale) ** p),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-14 * scale},
        )
        c = float(res.x)
    return lp_norm(x - c, p, cfg)


def negative_norm(g, s: int, p: float, cfg: ChainConfig) -> float:
    """Dual norm ``||g||_{U^{-s,p}} = sup <g, v>`` over ``||v||_{U^{s,q}} = 1``.

    Both supported cases reduce to a one-dimensional quotient norm:

    * ``s = 0``: ``min_c ||g - c||_p``.
    * ``s = 1``: with ``z = L1^{-1} g`` we have ``<g, v> = <z', v'>`` and ``v'``
      ranges over all zero-sum vectors, so the norm is ``min_c ||z' - c||_p``.
      For ``p = inf`` this is half the oscillation of ``z'``.
    """
    g = _check_length(g, cfg)
    if s == 0:
        return quotient_norm(project_zero_mean(g, cfg), p, cfg)
    if s == 1:
        return quotient_norm(_l1_inverse_gradient(project_zero_mean(g, cfg), cfg), p, cfg)
    raise ValueError(f"negative norm U^{{-{s},p}} is not supported (s must be 0 or 1)")


def l1_dual_norm(g, p: float, cfg: ChainConfig) -> float:
    """``||L1^{-1} g||_{U^{1,p}}``, an equivalent norm on ``U^{-1,p}``.

    For ``p = inf`` it lies between ``||g||_{U^{-1,inf}}`` and twice that.
    """
    g = _check_length(g, cfg)
    return lp_norm(_l1_inverse_gradient(project_zero_mean(g, cfg), cfg), p, cfg)


def _l1_inverse_gradient(g: np.ndarray, cfg: ChainConfig) -> np.ndarray:
    """``z'`` for ``L1 z = g``: ``-(z'_{l+1} - z'_l) / eps = g_l``, up to a constant."""
    zp = np.empty_like(g)
    zp[0] = 0.0
    zp[1:] = -cfg.eps * np.cumsum(g[:-1])
    return zp - math.fsum(zp) / zp.size


def project_zero_mean(v, cfg: ChainConfig) -> np.ndarray:
    """``(P_U v)_l = v_l - mean(v)``."""
    v = _check_length(v, cfg)
    out = v - math.fsum(v) / v.size
    # one correction sweep absorbs the rounding left by the subtraction
    return out - math.fsum(out) / out.size


def heaviside(cfg: ChainConfig) -> np.ndarray:
    """Periodic zero-mean step ``h`` with ``<h', v> = v_0`` for all ``v`` in U."""
    ell = cfg.sites.astype(float)
    eps = cfg.eps
    return np.where(
        ell >= 0,
        0.5 * (1.0 - eps * ell) - 0.25 * eps,
        -0.5 * (1.0 + eps * ell) - 0.25 * eps,
    )
