"""Coercivity and operator-norm stability of the linearized QCF operator."""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .chain import (
    ChainConfig,
    antiderivative,
    backward_difference,
    heaviside,
    lp_norm,
    negative_norm,
    project_zero_mean,
    quotient_norm,
    second_difference,
)
from .forces import LinearizedCoefficients
from .operators import (
    SingularOperatorError,
    antiderivative_matrix,
    conjugate_operator,
    difference_matrix,
    l1_operator,
    l2tilde_operator,
    projection_matrix,
    qcf_operator,
    solve_on_U,
    stencil_data,
)

__all__ = [
    "CoercivityResult",
    "U2InfReport",
    "TMatrixResult",
    "U1InfReport",
    "WitnessResult",
    "Figure1Row",
    "zero_mean_basis",
    "coercivity_infimum",
    "u2inf_stability_check",
    "t_matrix",
    "u1inf_stability_constant",
    "instability_witness",
    "fit_exponent",
    "figure1_sweep",
]


def zero_mean_basis(cfg: ChainConfig) -> np.ndarray:
    """Orthonormal basis of the zero-mean subspace, shape ``(2N, 2N-1)``."""
    return sla.null_space(np.ones((1, cfg.size)))


@dataclass(frozen=True)
class CoercivityResult:
    min_value: float
    minimizer: np.ndarray
    N: int


def coercivity_infimum(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> CoercivityResult:
    """``inf <L_qcf u, u>`` over ``u`` in U with ``||u'||_{l^2_eps} = 1``.

    Only the symmetric part of the operator enters the quadratic form, so this
    is the smallest eigenvalue of the pencil ``(sym(P_U L_qcf), L1)`` on U.
    """
    if not coeffs.phiF > 0:
        raise ValueError("coercivity analysis assumes phi''_F > 0")
    L = qcf_operator(coeffs, cfg).matrix
    Q = zero_mean_basis(cfg)
    S = Q.T @ (0.5 * (L + L.T)) @ Q
    M = Q.T @ l1_operator(cfg).matrix @ Q
    vals, vecs = sla.eigh(S, M, subset_by_index=[0, 0])
    u = Q @ vecs[:, 0]
    u = u / lp_norm(backward_difference(u, cfg), 2, cfg)
    return CoercivityResult(float(vals[0]), u, cfg.N)


@dataclass(frozen=True)
class U2InfReport:
    hypothesis_holds: bool
    bound: float
    samples: int
    l2tilde_violations: int = 0
    inverse_violations: int = 0
    worst_l2tilde_ratio: float = 0.0
    worst_inverse_ratio: float = 0.0
    augmented_invertible: bool = True

    @property
    def passed(self) -> bool:
        return (
            self.hypothesis_holds
            and self.l2tilde_violations == 0
            and self.inverse_violations == 0
            and self.augmented_invertible
        )


def u2inf_stability_check(
    coeffs: LinearizedCoefficients,
    cfg: ChainConfig,
    samples: int = 1000,
    rng: np.random.Generator | None = None,
    extra=(),
) -> U2InfReport:
    """Sampling audit of the ``U^{2,inf} -> U^{0,inf}`` stability estimate.

    Checks ``||P_U L2~ u||_inf <= (4 + 2 eps) ||u''||_inf`` and
    ``||u''||_inf <= bound * ||P_U L_qcf u||_inf`` on random ``u`` and on any
    vectors passed in ``extra``.
    """
    margin = abs(coeffs.phiF) - (4 + 2 * cfg.eps) * abs(coeffs.phi2F)
    if margin <= 0:
        return U2InfReport(False, math.inf, 0)
    bound = 1.0 / margin
    rng = np.random.default_rng() if rng is None else rng

    P = projection_matrix(cfg)
    PL2 = P @ l2tilde_operator(cfg).matrix
    L = qcf_operator(coeffs, cfg).matrix
    n = cfg.size
    try:
        solve_on_U(L, np.zeros(n), cfg)
        invertible = True
    except SingularOperatorError:
        invertible = False

    tol = 1e-12
    v1 = v2 = 0
    w1 = w2 = 0.0
    trial = [project_zero_mean(x, cfg) for x in extra]
    trial += [project_zero_mean(rng.standard_normal(n), cfg) for _ in range(samples)]
    for u in trial:
        upp = float(np.max(np.abs(second_difference(u, cfg))))
        if upp == 0.0:
            continue
        r1 = float(np.max(np.abs(PL2 @ u))) / ((4 + 2 * cfg.eps) * upp)
        r2 = upp / (bound * float(np.max(np.abs(L @ u))))
        w1, w2 = max(w1, r1), max(w2, r2)
        v1 += r1 > 1 + tol
        v2 += r2 > 1 + tol
    return U2InfReport(True, bound, len(trial), v1, v2, w1, w2, invertible)


@dataclass(frozen=True)
class TMatrixResult:
    T: np.ndarray
    norm_inf: float
    invertible: bool
    F: float = math.nan


def t_matrix(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> TMatrixResult:
    """``T = P_U (P_U E_qcf + e e^T)^{-1} P_U`` and its max-row-sum norm."""
    n = cfg.size
    P = projection_matrix(cfg)
    E = conjugate_operator(coeffs, cfg).matrix
    aug = P @ E + np.ones((n, n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(aug)
    if np.min(np.abs(np.diag(lu))) <= 1e-13 * np.linalg.norm(aug, ord=np.inf):
        return TMatrixResult(np.full((n, n), np.nan), math.inf, False, cfg.F)
    T = P @ sla.lu_solve((lu, piv), P)
    return TMatrixResult(T, float(np.max(np.sum(np.abs(T), axis=1))), True, cfg.F)


def analytic_t_bound(coeffs: LinearizedCoefficients) -> float:
    """``2 / (phi''_F + 8 phi''_2F)`` when its hypotheses hold, else ``inf``."""
    margin = coeffs.phiF + 8 * coeffs.phi2F
    if margin <= 0 or coeffs.phi2F > 0:
        return math.inf
    return 2.0 / margin


@dataclass(frozen=True)
class U1InfReport:
    """Norms of ``L_qcf^{-1}`` between ``U^{-1,inf}`` and ``U^{1,inf}``.

    ``value`` is exact.  ``half_split_value`` is the norm of
    ``(L1^{-1} L_qcf)^{-1}`` on ``U^{1,inf}``, which brackets ``value`` within
    a factor two.  The enumeration and sampling fields are filled for small
    chains only.
    """

    value: float
    half_split_value: float
    t_norm: float
    analytic_bound: float
    enumerated_value: float = math.nan
    enumerated_half_split: float = math.nan
    sampled_lower_bound: float = math.nan


def _gradient_response(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> np.ndarray:
    """Matrix ``M`` with ``M z' = (L_qcf^{-1} L1 z)'``, and ``M e = 0``."""
    L = qcf_operator(coeffs, cfg).matrix
    rhs = l1_operator(cfg).matrix @ antiderivative_matrix(cfg)
    n = cfg.size
    aug = L + np.ones((n, n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(aug)
    if np.min(np.abs(np.diag(lu))) <= 1e-13 * np.linalg.norm(aug, ord=np.inf):
        raise SingularOperatorError("L_qcf is singular on U")
    return difference_matrix(cfg) @ sla.lu_solve((lu, piv), rhs) @ projection_matrix(cfg)


def _half_split_norm(M: np.ndarray) -> float:
    # max of m.w over w in [-1, 1]^n with sum(w) = 0: +1 on the top half, -1 on the rest
    s = np.sort(M, axis=1)
    h = M.shape[1] // 2
    return float(np.max(s[:, h:].sum(axis=1) - s[:, :h].sum(axis=1)))


def u1inf_stability_constant(
    coeffs: LinearizedCoefficients,
    cfg: ChainConfig,
    samples: int = 0,
    rng: np.random.Generator | None = None,
    enumerate_small: bool = True,
) -> U1InfReport:
    """Exact ``||L_qcf^{-1}||_{L(U^{-1,inf}, U^{1,inf})}`` plus cross-checks.

    Writing ``g = L1 z`` gives ``||g||_{U^{-1,inf}} = osc(z')/2`` and
    ``L_qcf^{-1} g = M z'``.  Since ``M`` annihilates constants the supremum
    over ``osc(w) <= 2`` of ``|(M w)_i|`` is the absolute row sum of ``M``.

    For ``2N <= 16`` and ``enumerate_small`` both suprema are recomputed by
    brute force over the vertices of their polytopes.  ``samples > 0`` adds a
    random lower bound for ``half_split_value``.
    """
    M = _gradient_response(coeffs, cfg)
    value = float(np.max(np.sum(np.abs(M), axis=1)))
    half_split = _half_split_norm(M)
    enum_value = enum_half = sampled = math.nan
    n = cfg.size
    if enumerate_small and n <= 16:
        box = np.array(list(itertools.product((0.0, 2.0), repeat=n)))
        enum_value = float(np.max(np.abs(box @ M.T)))
        half = np.array([w for w in itertools.product((-1.0, 1.0), repeat=n) if sum(w) == 0])
        enum_half = float(np.max(np.abs(half @ M.T)))
    if samples:
        rng = np.random.default_rng() if rng is None else rng
        w = rng.uniform(-1.0, 1.0, size=(samples, n))
        w -= w.mean(axis=1, keepdims=True)
        w /= np.max(np.abs(w), axis=1, keepdims=True)
        sampled = float(np.max(np.abs(w @ M.T)))
    return U1InfReport(
        value=value,
        half_split_value=half_split,
        t_norm=t_matrix(coeffs, cfg).norm_inf,
        analytic_bound=analytic_t_bound(coeffs),
        enumerated_value=enum_value,
        enumerated_half_split=enum_half,
        sampled_lower_bound=sampled,
    )


@dataclass(frozen=True)
class WitnessResult:
    v: np.ndarray
    v_prime: np.ndarray
    ratio: float
    ratio_holder: float
    alpha_minus_K: float
    alpha_K: float
    support: np.ndarray = field(repr=False)


def witness_gradient(coeffs: LinearizedCoefficients, cfg: ChainConfig) -> np.ndarray:
    """Gradient of the test displacement for ``U^{1,p}`` instability.

    A shifted heaviside, except at ``K-1 .. K+2`` where it is replaced by
    ``0, -A/6b, A/3b, -A/6b`` with ``b = phi''_2F``.
    """
    K, A, b = cfg.K, coeffs.A_F, coeffs.phi2F
    vp = heaviside(cfg)[cfg.index(cfg.sites - K - 1)]
    vp[cfg.index(K - 1)] = 0.0
    vp[cfg.index(K)] = -A / (6 * b)
    vp[cfg.index(K + 1)] = A / (3 * b)
    vp[cfg.index(K + 2)] = -A / (6 * b)
    return vp


def instability_witness(
    coeffs: LinearizedCoefficients, cfg: ChainConfig, p: float
) -> WitnessResult:
    """Test displacement ``v`` with ``||v'||_p / ||L_qcf v||_{U^{-1,p}} ~ N^{1/p}``.

    ``ratio`` uses the exact dual norm of ``P_U L_qcf v``; ``ratio_holder``
    uses the Hoelder upper bound ``||E_qcf v'||_p`` for the denominator, so
    ``ratio_holder <= ratio``.
    """
    if not 1 <= p < math.inf:
        raise ValueError("witness requires 1 <= p < inf")
    if coeffs.phi2F == 0:
        raise ValueError("witness requires phi''_2F != 0")
    if not 2 <= cfg.K < cfg.N - 2:
        raise ValueError(f"witness requires 2 <= K < N-2, got K={cfg.K}, N={cfg.N}")

    vp = witness_gradient(coeffs, cfg)
    v = antiderivative(vp, cfg)
    st = stencil_data(coeffs, cfg)
    a_mk, a_k = float(st.alpha_minus_K @ vp), float(st.alpha_K @ vp)
    scale = abs(coeffs.A_F) + abs(coeffs.phi2F)
    if abs(a_mk) > 1e-12 * scale or abs(a_k + coeffs.A_F) > 1e-12 * scale:
        raise RuntimeError(f"witness interface values off: alpha_-K={a_mk}, alpha_K={a_k}")

    Ev = conjugate_operator(coeffs, cfg).matrix @ vp
    support = cfg.sites[np.abs(Ev) > 1e-12 * scale]
    if support.size > 5 or np.any(np.abs(support - cfg.K) > 2):
        raise RuntimeError(f"E_qcf v' supported on {support.tolist()}")

    numerator = lp_norm(vp, p, cfg)
    Lv = qcf_operator(coeffs, cfg).matrix @ v
    return WitnessResult(
        v=v,
        v_prime=vp,
        ratio=numerator / negative_norm(Lv, 1, p, cfg),
        ratio_holder=numerator / lp_norm(Ev, p, cfg),
        alpha_minus_K=a_mk,
        alpha_K=a_k,
        support=support,
    )


def fit_exponent(Ns, values, window: int = 3) -> float:
    """Least-squares slope of ``log|values|`` against ``log N`` over the largest ``window`` N."""
    order = np.argsort(Ns)
    x = np.log(np.asarray(Ns, dtype=float)[order][-window:])
    y = np.log(np.abs(np.asarray(values, dtype=float)[order][-window:]))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class Figure1Row:
    N: int
    K: int
    ratio: float
    t_norm: float
    analytic_bound: float
    note: str


def _figure1_cell(args) -> Figure1Row:
    N, K, ratio, phiF = args
    coeffs = LinearizedCoefficients.from_ratio(ratio, phiF)
    res = t_matrix(coeffs, ChainConfig(N, K))
    if not res.invertible:
        note = "singular"
    elif ratio > 0:
        note = "A_F>0: bounded uniformly in N (conjectured)"
    else:
        note = "A_F<=0: beyond critical strain"
    return Figure1Row(N, K, ratio, res.norm_inf, analytic_t_bound(coeffs), note)


def figure1_sweep(
    N_list,
    ratio_grid,
    phiF: float = 1.0,
    K_rule=lambda N: N // 2,
    workers: int = 1,
) -> list[Figure1Row]:
    """``||T||_inf`` over a grid of ``(N, A_F / phi''_F)``, in grid order."""
    cells = [(N, K_rule(N), float(r), phiF) for N in N_list for r in ratio_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_figure1_cell, cells))
    return [_figure1_cell(c) for c in cells]
