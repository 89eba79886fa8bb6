import math

import numpy as np
import pytest

from qcfstab.chain import (
    ChainConfig,
    backward_difference,
    heaviside,
    inner,
    lp_norm,
    negative_norm,
    project_zero_mean,
)
from qcfstab.forces import LinearizedCoefficients
from qcfstab.operators import conjugate_operator, l1_operator, projection_matrix, qcf_operator
from qcfstab.stability import (
    analytic_t_bound,
    coercivity_infimum,
    figure1_sweep,
    fit_exponent,
    instability_witness,
    t_matrix,
    u1inf_stability_constant,
    u2inf_stability_check,
    witness_gradient,
    zero_mean_basis,
)


def test_zero_mean_basis():
    cfg = ChainConfig(5, 2)
    Q = zero_mean_basis(cfg)
    assert Q.shape == (10, 9)
    assert np.allclose(Q.T @ Q, np.eye(9))
    assert np.allclose(Q.sum(axis=0), 0)


def test_coercivity_without_second_neighbours():
    for a in (0.5, 1.0, 3.0):
        res = coercivity_infimum(LinearizedCoefficients(a, 0.0), ChainConfig(12, 6))
        assert res.min_value == pytest.approx(a, rel=1e-10)


def test_coercivity_minimizer_normalised():
    cfg = ChainConfig(16, 8)
    res = coercivity_infimum(LinearizedCoefficients(1.0, -0.15), cfg)
    assert lp_norm(backward_difference(res.minimizer, cfg), 2, cfg) == pytest.approx(1.0, abs=1e-10)
    L = qcf_operator(LinearizedCoefficients(1.0, -0.15), cfg).matrix
    assert inner(L @ res.minimizer, res.minimizer, cfg) == pytest.approx(res.min_value, abs=1e-9)
    assert res.N == 16


def test_coercivity_is_below_sampled_rayleigh_quotients(rng):
    cfg = ChainConfig(16, 8)
    c = LinearizedCoefficients(1.0, -0.1)
    res = coercivity_infimum(c, cfg)
    L = qcf_operator(c, cfg).matrix
    U = rng.standard_normal((10_000, cfg.size))
    U -= U.mean(axis=1, keepdims=True)
    dU = (U - np.roll(U, 1, axis=1)) * cfg.N
    quotients = np.einsum("ij,ij->i", U @ L.T, U) / np.einsum("ij,ij->i", dU, dU)
    assert res.min_value <= quotients.min() + 1e-12


def test_coercivity_requires_positive_nearest_neighbour():
    with pytest.raises(ValueError):
        coercivity_infimum(LinearizedCoefficients(-1.0, 0.0), ChainConfig(4, 2))


def test_coercivity_eventually_negative():
    c = LinearizedCoefficients(1.0, -0.2)
    values = [coercivity_infimum(c, ChainConfig(N, N // 2)).min_value for N in (16, 32, 64)]
    assert all(v < 0 for v in values)
    assert values[0] > values[1] > values[2]


def test_u2inf_audit_with_heaviside(rng):
    cfg = ChainConfig(32, 8)
    rep = u2inf_stability_check(LinearizedCoefficients(1.0, -0.15), cfg, 200, rng, extra=[heaviside(cfg)])
    assert rep.hypothesis_holds and rep.passed
    assert rep.samples == 201
    assert rep.bound == pytest.approx(1 / (1 - (4 + 2 / 32) * 0.15))
    assert rep.worst_l2tilde_ratio <= 1 and rep.worst_inverse_ratio <= 1


def test_u2inf_without_second_neighbours_is_exact(rng):
    cfg = ChainConfig(10, 4)
    rep = u2inf_stability_check(LinearizedCoefficients(2.0, 0.0), cfg, 50, rng)
    assert rep.bound == 0.5
    assert rep.worst_inverse_ratio == pytest.approx(1.0, rel=1e-12)


def test_u2inf_hypothesis_failure_is_reported():
    rep = u2inf_stability_check(LinearizedCoefficients(1.0, -0.3), ChainConfig(10, 4), 10)
    assert not rep.hypothesis_holds and not rep.passed
    assert rep.samples == 0


def test_t_matrix_without_second_neighbours():
    for N in (4, 7, 20):
        res = t_matrix(LinearizedCoefficients(2.0, 0.0), ChainConfig(N, N // 2))
        assert res.invertible
        assert np.allclose(res.T, projection_matrix(ChainConfig(N, N // 2)) / 2.0)
        assert res.norm_inf == pytest.approx((2 - 1 / N) / 2.0)


def test_t_matrix_inverts_on_U(rng):
    cfg = ChainConfig(12, 5)
    c = LinearizedCoefficients(1.0, -0.12)
    res = t_matrix(c, cfg)
    PE = projection_matrix(cfg) @ conjugate_operator(c, cfg).matrix
    assert np.allclose(res.T @ np.ones(cfg.size), 0, atol=1e-12)
    for _ in range(5):
        f = project_zero_mean(rng.standard_normal(cfg.size), cfg)
        assert np.allclose(res.T @ (PE @ f), f, atol=1e-10)


def test_t_matrix_singular_at_fracture():
    # A_F = 0 makes the constant gradient part degenerate
    res = t_matrix(LinearizedCoefficients(1.0, -0.25), ChainConfig(6, 3))
    assert not res.invertible and math.isinf(res.norm_inf)


def test_analytic_bound():
    assert analytic_t_bound(LinearizedCoefficients(1.0, -0.1)) == pytest.approx(10.0)
    assert math.isinf(analytic_t_bound(LinearizedCoefficients(1.0, -0.125)))
    assert math.isinf(analytic_t_bound(LinearizedCoefficients(1.0, 0.1)))


@pytest.mark.parametrize("N,K", [(4, 2), (5, 1), (6, 3)])
@pytest.mark.parametrize("b", [0.0, -0.05, -0.1])
def test_u1inf_exact_value_matches_enumeration(N, K, b, rng):
    rep = u1inf_stability_constant(LinearizedCoefficients(1.0, b), ChainConfig(N, K), samples=2000, rng=rng)
    assert rep.value == pytest.approx(rep.enumerated_value, rel=1e-12)
    assert rep.half_split_value == pytest.approx(rep.enumerated_half_split, rel=1e-12)
    assert rep.sampled_lower_bound <= rep.half_split_value * (1 + 1e-12)
    assert rep.half_split_value <= rep.value * (1 + 1e-12) <= 2 * rep.half_split_value * (1 + 1e-12)
    # the exact operator norm coincides with ||T||_inf
    assert rep.value == pytest.approx(rep.t_norm, rel=1e-10)


def test_u1inf_value_by_direct_definition(rng):
    # sup ||L^{-1} g||_{U^{1,inf}} / ||g||_{U^{-1,inf}} sampled from the definition
    cfg = ChainConfig(5, 2)
    c = LinearizedCoefficients(1.0, -0.1)
    rep = u1inf_stability_constant(c, cfg)
    L = qcf_operator(c, cfg).matrix
    aug = L + np.ones((cfg.size, cfg.size))
    best = 0.0
    for _ in range(3000):
        g = project_zero_mean(rng.standard_normal(cfg.size), cfg)
        u = np.linalg.solve(aug, g)
        best = max(best, lp_norm(backward_difference(u, cfg), math.inf, cfg) / negative_norm(g, 1, math.inf, cfg))
    assert best <= rep.value * (1 + 1e-10)
    assert best >= 0.5 * rep.value


def test_u1inf_without_second_neighbours():
    for N in (4, 6, 12):
        rep = u1inf_stability_constant(LinearizedCoefficients(1.0, 0.0), ChainConfig(N, N // 2))
        assert rep.half_split_value == pytest.approx(1.0, rel=1e-12)
        assert rep.value == pytest.approx(2 - 1 / N, rel=1e-12)


def test_u1inf_below_analytic_bound():
    rep = u1inf_stability_constant(LinearizedCoefficients(1.0, -0.1), ChainConfig(16, 4))
    assert rep.value <= 10.0
    assert math.isnan(rep.enumerated_value)


def test_witness_gradient_structure():
    cfg = ChainConfig(20, 6)
    c = LinearizedCoefficients(1.0, -0.1)
    vp = witness_gradient(c, cfg)
    assert abs(vp.sum()) < 1e-12
    assert vp[cfg.index(cfg.K - 1)] == 0
    assert vp[cfg.index(cfg.K + 1)] == pytest.approx(-2 * vp[cfg.index(cfg.K)])


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_witness_properties(p):
    cfg = ChainConfig(32, 16)
    c = LinearizedCoefficients(1.0, -0.1)
    w = instability_witness(c, cfg, p)
    assert w.alpha_minus_K == pytest.approx(0.0, abs=1e-12)
    assert w.alpha_K == pytest.approx(-c.A_F, rel=1e-12)
    assert set(w.support.tolist()) <= set(range(cfg.K - 2, cfg.K + 3))
    assert np.allclose(backward_difference(w.v, cfg), w.v_prime, atol=1e-12)
    assert w.ratio_holder <= w.ratio * (1 + 1e-12)


def test_witness_ratio_grows():
    c = LinearizedCoefficients(1.0, -0.1)
    r = [instability_witness(c, ChainConfig(N, N // 2), 1.0).ratio for N in (16, 32, 64)]
    assert r[0] < r[1] < r[2]


def test_witness_preconditions():
    c = LinearizedCoefficients(1.0, -0.1)
    with pytest.raises(ValueError):
        instability_witness(c, ChainConfig(10, 5), math.inf)
    with pytest.raises(ValueError):
        instability_witness(LinearizedCoefficients(1.0, 0.0), ChainConfig(10, 5), 1.0)
    with pytest.raises(ValueError):
        instability_witness(c, ChainConfig(10, 1), 1.0)
    with pytest.raises(ValueError):
        instability_witness(c, ChainConfig(10, 8), 1.0)


def test_fit_exponent():
    Ns = [8, 16, 32, 64, 128]
    vals = [3.0 * N**0.7 for N in Ns]
    assert fit_exponent(Ns, vals) == pytest.approx(0.7)
    vals[0] = 1e6  # outside the fitting window
    assert fit_exponent(Ns, vals) == pytest.approx(0.7)
    assert fit_exponent(Ns[::-1], [-v for v in vals[::-1]]) == pytest.approx(0.7)


def test_figure1_sweep_order_and_trivial_row():
    rows = figure1_sweep([6, 8], [0.5, 1.0])
    assert [(r.N, r.ratio) for r in rows] == [(6, 0.5), (6, 1.0), (8, 0.5), (8, 1.0)]
    assert rows[1].t_norm == pytest.approx(2 - 1 / 6)
    assert rows[0].K == 3


def test_figure1_sweep_parallel_matches_serial():
    serial = figure1_sweep([6, 10], [0.3, 0.7, 1.0])
    parallel = figure1_sweep([6, 10], [0.3, 0.7, 1.0], workers=2)
    assert serial == parallel


def test_figure1_blow_up_is_monotone():
    rows = figure1_sweep([20], [0.05, 0.1, 0.2, 0.4, 0.8])
    norms = [r.t_norm for r in rows]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_l1_coercivity_scale():
    # <L1 u, u> = ||u'||^2 fixes the normalisation used above
    cfg = ChainConfig(6, 2)
    u = project_zero_mean(np.arange(12.0) ** 2, cfg)
    assert inner(l1_operator(cfg) @ u, u, cfg) == pytest.approx(lp_norm(backward_difference(u, cfg), 2, cfg) ** 2)
