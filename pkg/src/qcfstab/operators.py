"""Linearized operators of the chain models at the uniform state ``y_F``.

A matrix ``L`` represents the bilinear form ``<L u, v> = eps * v @ L @ u``;
it acts on all of ``R^{2N}`` and U is handled by projection.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .chain import ChainConfig, backward_difference, heaviside
from .forces import LinearizedCoefficients

__all__ = [
    "Model",
    "LinearizedOperator",
    "StencilData",
    "SingularOperatorError",
    "difference_matrix",
    "projection_matrix",
    "antiderivative_matrix",
    "hessian_atomistic",
    "hessian_qcl",
    "hessian_qnl",
    "qcf_rows",
    "qcf_operator",
    "qcf_operator_split",
    "l1_operator",
    "l2tilde_operator",
    "l2_split",
    "stencil_data",
    "conjugate_operator",
    "z_prime_formula",
    "solve_on_U",
    "dump_matrix",
    "load_matrix",
]

SYMMETRY_RTOL = 1e-12


class Model(enum.Enum):
    ATOMISTIC = "atomistic"
    QCL = "qcl"
    QNL = "qnl"
    QCF = "qcf"
    QCF_PROJECTED = "qcf_projected"
    EQCF_CONJUGATE = "eqcf_conjugate"
    L1 = "l1"
    L2_REG = "l2_reg"
    L2_SNG = "l2_sng"
    L2_TILDE = "l2_tilde"


class SingularOperatorError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LinearizedOperator:
    matrix: np.ndarray
    model: Model

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def symmetric(self) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - m.T)) <= SYMMETRY_RTOL * max(1.0, np.max(np.abs(m))))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class StencilData:
    """Pieces of the conjugate operator acting on gradients ``u'``.

    ``sigma @ u'`` is the interior stress, ``alpha_K @ u'`` and
    ``alpha_minus_K @ u'`` the two interface functionals.
    """

    sigma: np.ndarray
    alpha_K: np.ndarray
    alpha_minus_K: np.ndarray


def difference_matrix(cfg: ChainConfig) -> np.ndarray:
    """``D`` with ``D @ u = u'`` (backward difference, periodic)."""
    n = cfg.size
    eye = np.eye(n)
    return (eye - np.roll(eye, 1, axis=0)) * cfg.N


def _pair_sum_matrix(cfg: ChainConfig) -> np.ndarray:
    # (S w)_j = w_j + w_{j+1}
    eye = np.eye(cfg.size)
    return eye + np.roll(eye, -1, axis=0)


def projection_matrix(cfg: ChainConfig) -> np.ndarray:
    n = cfg.size
    return np.eye(n) - np.full((n, n), 1.0 / n)


def antiderivative_matrix(cfg: ChainConfig) -> np.ndarray:
    """``G`` with ``(G w)' = w`` and ``G w`` zero-mean, for zero-sum ``w``."""
    n = cfg.size
    return projection_matrix(cfg) @ (cfg.eps * np.tril(np.ones((n, n))))


def l1_operator(cfg: ChainConfig) -> LinearizedOperator:
    """``(L1 u)_l = -(u_{l+1} - 2 u_l + u_{l-1}) / eps^2``."""
    D = difference_matrix(cfg)
    return LinearizedOperator(D.T @ D, Model.L1)


def _second_neighbour_form(cfg: ChainConfig, weights=None) -> np.ndarray:
    SD = _pair_sum_matrix(cfg) @ difference_matrix(cfg)
    if weights is None:
        return SD.T @ SD
    return SD.T @ (weights[:, None] * SD)


def hessian_atomistic(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    L1 = l1_operator(cfg).matrix
    m = coeffs.phiF * L1 + coeffs.phi2F * _second_neighbour_form(cfg)
    return LinearizedOperator(m, Model.ATOMISTIC)


def hessian_qcl(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    return LinearizedOperator(coeffs.A_F * l1_operator(cfg).matrix, Model.QCL)


def hessian_qnl(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    D = difference_matrix(cfg)
    c = cfg.continuum.astype(float)
    bond_w = c + np.roll(c, 1)
    m = (
        coeffs.phiF * (D.T @ D)
        + coeffs.phi2F * _second_neighbour_form(cfg, cfg.atomistic.astype(float))
        + 2.0 * coeffs.phi2F * (D.T @ (bond_w[:, None] * D))
    )
    return LinearizedOperator(m, Model.QNL)


def qcf_rows(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    """Unprojected ``L_qcf``: atomistic Hessian rows on A, local QC rows on C."""
    la = hessian_atomistic(coeffs, cfg).matrix
    lc = hessian_qcl(coeffs, cfg).matrix
    return LinearizedOperator(np.where(cfg.atomistic[:, None], la, lc), Model.QCF)


def l2tilde_operator(cfg: ChainConfig) -> LinearizedOperator:
    """Stride-2 second difference on A, four times the nearest one on C."""
    n = cfg.size
    eye = np.eye(n)
    stride2 = -(np.roll(eye, 2, axis=1) - 2 * eye + np.roll(eye, -2, axis=1))
    m = np.where(cfg.atomistic[:, None], stride2, 4.0 * l1_operator(cfg).matrix / cfg.N**2)
    return LinearizedOperator(m * cfg.N**2, Model.L2_TILDE)


def qcf_operator_split(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    """``phi''_F L1 + phi''_2F P_U L2~``."""
    P = projection_matrix(cfg)
    m = coeffs.phiF * l1_operator(cfg).matrix + coeffs.phi2F * (P @ l2tilde_operator(cfg).matrix)
    return LinearizedOperator(m, Model.QCF_PROJECTED)


def qcf_operator(
    coeffs: LinearizedCoefficients, cfg: ChainConfig, check: bool = True
) -> LinearizedOperator:
    """The projected linearized QCF operator ``P_U L_qcf``.

    Assembled by row mixing followed by projection.  With ``check`` the result
    is compared against :func:`qcf_operator_split`.
    """
    m = projection_matrix(cfg) @ qcf_rows(coeffs, cfg).matrix
    if check:
        other = qcf_operator_split(coeffs, cfg).matrix
        scale = max(1.0, float(np.max(np.abs(m))))
        err = float(np.max(np.abs(m - other)))
        if err > 1e-12 * scale:
            raise RuntimeError(f"QCF assemblies disagree: {err:.3e} (scale {scale:.3e})")
    return LinearizedOperator(m, Model.QCF_PROJECTED)


def l2_split(cfg: ChainConfig) -> tuple[LinearizedOperator, LinearizedOperator]:
    """Regular and singular parts of the second-neighbour QCF form."""
    n, K, N = cfg.size, cfg.K, cfg.N
    D = difference_matrix(cfg)
    B = np.zeros((n, n))
    for site in cfg.sites:
        j = cfg.index(site)
        if -K + 1 <= site <= K:
            B[j, cfg.index(site - 1)] += 1.0
            B[j, j] += 2.0
            B[j, cfg.index(site + 1)] += 1.0
        else:
            B[j, j] = 4.0
    reg = D.T @ B @ D

    sng = np.zeros((n, n))
    left = _curvature_row(cfg, -K)  # u'_{-K+1} - 2u'_{-K} + u'_{-K-1}
    right = _curvature_row(cfg, K + 1)  # u'_{K+2} - 2u'_{K+1} + u'_K
    sng[cfg.index(-K)] += N * (left @ D)
    sng[cfg.index(K)] -= N * (right @ D)
    return LinearizedOperator(reg, Model.L2_REG), LinearizedOperator(sng, Model.L2_SNG)


def _curvature_row(cfg: ChainConfig, centre: int) -> np.ndarray:
    row = np.zeros(cfg.size)
    row[cfg.index(centre - 1)] += 1.0
    row[cfg.index(centre)] -= 2.0
    row[cfg.index(centre + 1)] += 1.0
    return row


def stencil_data(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> StencilData:
    n, K = cfg.size, cfg.K
    a, b = coeffs.phiF, coeffs.phi2F
    sigma = np.zeros((n, n))
    for site in cfg.sites:
        j = cfg.index(site)
        if -K + 1 <= site <= K:
            sigma[j, cfg.index(site - 1)] += b
            sigma[j, j] += a + 2 * b
            sigma[j, cfg.index(site + 1)] += b
        else:
            sigma[j, j] = a + 4 * b
    return StencilData(
        sigma=sigma,
        alpha_K=b * _curvature_row(cfg, K + 1),
        alpha_minus_K=b * _curvature_row(cfg, -K),
    )


def _shifted_heaviside(cfg: ChainConfig, shift: int) -> np.ndarray:
    """The vector ``(h_{l + shift})_l``."""
    h = heaviside(cfg)
    return h[cfg.index(cfg.sites + shift)]


def conjugate_operator(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> LinearizedOperator:
    """``E_qcf`` acting on gradients, ``<L_qcf u, v> = <E_qcf u', v'>``.

    ``(E w)_l = sigma_l(w) - alpha_{-K}(w) h_{l+K-1} + alpha_K(w) h_{l-K-1}``.
    """
    st = stencil_data(coeffs, cfg)
    K = cfg.K
    m = (
        st.sigma
        - np.outer(_shifted_heaviside(cfg, K - 1), st.alpha_minus_K)
        + np.outer(_shifted_heaviside(cfg, -K - 1), st.alpha_K)
    )
    return LinearizedOperator(m, Model.EQCF_CONJUGATE)


def z_prime_formula(u, coeffs: LinearizedCoefficients, cfg: ChainConfig) -> np.ndarray:
    """Closed form of ``z'`` where ``z = L1^{-1} L_qcf u``."""
    up = backward_difference(u, cfg)
    st = stencil_data(coeffs, cfg)
    K = cfg.K

    def d(site):
        return up[cfg.index(site)]

    mean_sigma = 0.5 * cfg.eps * coeffs.phi2F * (d(-K) - d(-K + 1) - d(K) + d(K + 1))
    return (
        st.sigma @ up
        - mean_sigma
        - (st.alpha_minus_K @ up) * _shifted_heaviside(cfg, K - 1)
        + (st.alpha_K @ up) * _shifted_heaviside(cfg, -K - 1)
    )


def solve_on_U(matrix: np.ndarray, g, cfg: ChainConfig) -> np.ndarray:
    """Solve ``M u = g`` on U for ``M`` with zero column sums (``e^T M = 0``).

    The rank-one term ``e e^T`` removes the kernel; dense LU with partial
    pivoting, and a pivot below ``1e-13 * ||M||`` counts as singular.
    """
    n = cfg.size
    aug = np.asarray(matrix, dtype=float) + np.ones((n, n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(aug, check_finite=True)
    tiny = 1e-13 * np.linalg.norm(aug, ord=np.inf)
    if np.min(np.abs(np.diag(lu))) <= tiny:
        raise SingularOperatorError("operator is singular on U")
    return sla.lu_solve((lu, piv), np.asarray(g, dtype=float))


def dump_matrix(op, path) -> None:
    """Write a matrix as whitespace-separated rows, 17 significant digits."""
    m = op.matrix if isinstance(op, LinearizedOperator) else np.asarray(op)
    header = f"model={op.model.value}" if isinstance(op, LinearizedOperator) else ""
    np.savetxt(Path(path), m, fmt="%.16e", header=header)


def load_matrix(path) -> np.ndarray:
    return np.loadtxt(Path(path), ndmin=2)
