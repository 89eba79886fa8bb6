"""Dense eigenanalysis of the linearized operators.

Compares the spectrum of ``P_U L_qcf`` with that of the QNL Hessian and
measures the conditioning of the QCF eigenvector basis.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .chain import ChainConfig
from .forces import LinearizedCoefficients
from .operators import LinearizedOperator, hessian_qnl, qcf_operator

__all__ = [
    "EigensolverError",
    "DiagonalizationError",
    "SpectralResult",
    "SpectrumComparison",
    "eigendecompose",
    "qcf_eigenbasis",
    "compare_spectra",
    "spectrum_distance",
    "eigenvector_condition",
    "table1",
    "table2",
    "REFERENCE_TABLE1",
    "REFERENCE_TABLE2",
]

RESIDUAL_RTOL = 1e-8
ZERO_MODE_RTOL = 1e-10
DEFECTIVE_COND = 1e12

# published sorted-spectrum distances, K = N/2, phi''_F = 1
REFERENCE_TABLE1 = {
    (50, -0.1): 1.19e-10, (50, -0.15): 9.93e-11, (50, -0.2): 7.31e-11, (50, -0.25): 6.64e-11,
    (100, -0.1): 6.97e-10, (100, -0.15): 6.19e-10, (100, -0.2): 4.71e-10, (100, -0.25): 3.16e-10,
    (150, -0.1): 2.05e-9, (150, -0.15): 1.83e-9, (150, -0.2): 1.31e-9, (150, -0.25): 1.23e-9,
    (200, -0.1): 4.44e-9, (200, -0.15): 3.12e-9, (200, -0.2): 2.90e-9, (200, -0.25): 2.10e-9,
    (250, -0.1): 8.25e-9, (250, -0.15): 6.38e-9, (250, -0.2): 6.38e-9, (250, -0.25): 3.96e-9,
    (300, -0.1): 1.62e-8, (300, -0.15): 1.15e-8, (300, -0.2): 9.98e-9, (300, -0.25): 8.86e-9,
}  # fmt: skip

# published cond(V), K = N/2, phi''_F = 1
REFERENCE_TABLE2 = {
    (10, -0.1): 1.4563, (10, -0.15): 1.7607, (10, -0.2): 2.3770, (10, -0.24): 5.4398,
    (30, -0.1): 1.5242, (30, -0.15): 1.9441, (30, -0.2): 2.8049, (30, -0.24): 6.2876,
    (90, -0.1): 1.5794, (90, -0.15): 2.0537, (90, -0.2): 3.0726, (90, -0.24): 7.4324,
    (270, -0.1): 1.6049, (270, -0.15): 2.1095, (270, -0.2): 3.1510, (270, -0.24): 8.2878,
    (810, -0.1): 1.6136, (810, -0.15): 2.1191, (810, -0.2): 3.2021, (810, -0.24): 8.3863,
    (2430, -0.1): 1.6139, (2430, -0.15): 3.7477, (2430, -0.2): 3.2075, (2430, -0.24): 8.5968,
}  # fmt: skip
REFERENCE_TABLE1.update({(N, 0.0): 0.0 for N in (50, 100, 150, 200, 250, 300)})
REFERENCE_TABLE2.update({(N, 0.0): 1.00 for N in (10, 30, 90, 270, 810, 2430)})


class EigensolverError(np.linalg.LinAlgError):
    pass


class DiagonalizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SpectralResult:
    """Eigenpairs sorted by (real, imag), unit columns, largest entry positive."""

    eigenvalues: np.ndarray
    V: np.ndarray
    max_residual: float
    cond2: float
    matrix_norm: float

    @property
    def degraded(self) -> bool:
        return not self.max_residual <= RESIDUAL_RTOL * self.matrix_norm


def _normalize_columns(V: np.ndarray) -> np.ndarray:
    V = V / np.linalg.norm(V, axis=0)
    lead = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    return V * (np.abs(lead) / lead)


def _finish(A: np.ndarray, w: np.ndarray, V: np.ndarray) -> SpectralResult:
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], _normalize_columns(V[:, order])
    if np.all(w.imag == 0) and np.isrealobj(A):
        w, V = w.real, V.real
    resid = float(np.max(np.linalg.norm(A @ V - V * w, axis=0)))
    return SpectralResult(w, V, resid, float(np.linalg.cond(V)), float(np.linalg.norm(A, 2)))


def eigendecompose(op) -> SpectralResult:
    """Residual-checked dense eigendecomposition.

    Symmetric inputs use the symmetric driver, everything else the general
    Hessenberg-QR driver.
    """
    A = op.matrix if isinstance(op, LinearizedOperator) else np.asarray(op, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if isinstance(op, LinearizedOperator):
        symmetric = op.symmetric
    else:
        symmetric = np.max(np.abs(A - A.T)) <= 1e-12 * max(1.0, np.max(np.abs(A)))
    try:
        if symmetric:
            w, V = sla.eigh(0.5 * (A + A.T))
        else:
            w, V = sla.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"QR iteration failed: {exc}") from exc
    return _finish(A, np.asarray(w, dtype=complex), V)


def qcf_eigenbasis(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> SpectralResult:
    """Eigenbasis of ``P_U L_qcf`` with the translation mode set to ``e/|e|``.

    Raises
    ------
    DiagonalizationError
        If residuals fail, the zero mode is not isolated, or ``V`` is
        numerically singular.
    """
    op = qcf_operator(coeffs, cfg)
    A = op.matrix
    res = eigendecompose(op)
    if res.degraded:
        raise DiagonalizationError(f"eigen-residual {res.max_residual:.3e} too large")
    zero = np.flatnonzero(np.abs(res.eigenvalues) <= ZERO_MODE_RTOL * res.matrix_norm)
    if zero.size != 1:
        raise DiagonalizationError(f"expected one zero eigenvalue, found {zero.size}")
    V = np.array(res.V, copy=True)
    V[:, zero[0]] = 1.0 / math.sqrt(cfg.size)
    w = np.array(res.eigenvalues, copy=True)
    w[zero[0]] = 0.0
    cond = float(np.linalg.cond(V))
    if not cond < DEFECTIVE_COND:
        raise DiagonalizationError(f"eigenvector matrix is numerically singular (cond {cond:.3e})")
    resid = float(np.max(np.linalg.norm(A @ V - V * w, axis=0)))
    return SpectralResult(w, V, resid, cond, res.matrix_norm)


@dataclass(frozen=True)
class SpectrumComparison:
    distance: float
    max_imag: float
    qcf: np.ndarray
    qnl: np.ndarray
    residual_tol: float


def compare_spectra(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> SpectrumComparison:
    qcf = eigendecompose(qcf_operator(coeffs, cfg))
    qnl = eigendecompose(hessian_qnl(coeffs, cfg))
    if qcf.degraded or qnl.degraded:
        raise EigensolverError("eigenpairs failed residual certification")
    a = np.sort(np.real(qcf.eigenvalues))
    b = np.sort(np.real(qnl.eigenvalues))
    return SpectrumComparison(
        distance=float(np.linalg.norm(a - b)),
        max_imag=float(np.max(np.abs(np.imag(qcf.eigenvalues)), initial=0.0)),
        qcf=a,
        qnl=b,
        residual_tol=RESIDUAL_RTOL * qcf.matrix_norm,
    )


def spectrum_distance(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> float:
    """Euclidean distance (unscaled) between the sorted QCF and QNL spectra."""
    return compare_spectra(coeffs, cfg).distance


def eigenvector_condition(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> float:
    """2-norm condition number of the unit-column QCF eigenvector matrix."""
    return qcf_eigenbasis(coeffs, cfg).cond2


def _table_cell(args):
    kind, N, phi2F, phiF = args
    coeffs = LinearizedCoefficients(phiF, phi2F)
    cfg = ChainConfig(N, N // 2)
    try:
        if kind == 1:
            value = spectrum_distance(coeffs, cfg)
        else:
            value = eigenvector_condition(coeffs, cfg)
        return value, ""
    except np.linalg.LinAlgError as exc:
        return math.nan, str(exc)


def _table(kind, N_list, phi2F_list, phiF, workers):
    cells = [(kind, int(N), float(b), phiF) for N in N_list for b in phi2F_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_table_cell, cells))
    else:
        results = [_table_cell(c) for c in cells]
    ref = REFERENCE_TABLE1 if kind == 1 else REFERENCE_TABLE2
    return [
        {
            "N": c[1],
            "K": c[1] // 2,
            "phi2F": c[2],
            "value": value,
            "reference": ref.get((c[1], c[2]), math.nan) if phiF == 1.0 else math.nan,
            "error": err,
        }
        for c, (value, err) in zip(cells, results)
    ]


def table1(N_list, phi2F_list, phiF: float = 1.0, workers: int = 1) -> list[dict]:
    """Rows of sorted-spectrum distances, K = N/2, in grid order."""
    return _table(1, N_list, phi2F_list, phiF, workers)


def table2(N_list, phi2F_list, phiF: float = 1.0, workers: int = 1) -> list[dict]:
    """Rows of ``cond(V)``, K = N/2, in grid order."""
    return _table(2, N_list, phi2F_list, phiF, workers)
