import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcfstab.chain import ChainConfig, forward_state, project_zero_mean
from qcfstab.forces import (
    DomainError,
    LinearizedCoefficients,
    deformation_gradient,
    energy_atomistic,
    energy_qcl,
    energy_qnl,
    forces_atomistic,
    forces_qcf,
    forces_qcf_projected,
    forces_qcl,
    forces_qnl,
    lennard_jones,
    qcf_force_sum,
)

LJ = lennard_jones()
PAIRS = [
    (energy_atomistic, forces_atomistic),
    (energy_qcl, forces_qcl),
    (energy_qnl, forces_qnl),
]


def perturbed(cfg, seed, amp=0.02):
    r = np.random.default_rng(seed)
    return forward_state(cfg) + amp * cfg.eps * project_zero_mean(r.standard_normal(cfg.size), cfg)


def fd_forces(energy, y, cfg):
    h = 1e-6 * cfg.eps
    out = np.empty(cfg.size)
    for j in range(cfg.size):
        yp, ym = y.copy(), y.copy()
        yp[j] += h
        ym[j] -= h
        out[j] = -(energy(yp, LJ, cfg) - energy(ym, LJ, cfg)) / (2 * h) / cfg.eps
    return out


def test_lennard_jones_values():
    assert float(LJ.dphi(1.0)) == 0.0
    assert float(LJ.ddphi(1.0)) == pytest.approx(72.0, rel=1e-15)
    assert float(LJ.phi(1.0)) == -1.0
    assert LJ.r_star == pytest.approx((13 / 7) ** (1 / 6), rel=1e-12)


def test_lennard_jones_inflection_by_bisection():
    lo, hi = 1.0, 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if LJ.ddphi(mid) > 0:
            lo = mid
        else:
            hi = mid
    assert LJ.r_star == pytest.approx(lo, abs=1e-12)


def test_lennard_jones_convexity_switch():
    left = np.linspace(0.8, LJ.r_star - 1e-6, 200)
    right = np.linspace(LJ.r_star + 1e-6, 4.0, 200)
    assert np.all(LJ.ddphi(left) > 0)
    assert np.all(LJ.ddphi(right) < 0)


def test_lennard_jones_derivatives_by_differences():
    r = np.linspace(0.85, 3.0, 50)
    h = 1e-6
    assert np.allclose(LJ.dphi(r), (LJ.phi(r + h) - LJ.phi(r - h)) / (2 * h), rtol=1e-6, atol=1e-8)
    assert np.allclose(LJ.ddphi(r), (LJ.dphi(r + h) - LJ.dphi(r - h)) / (2 * h), rtol=1e-6, atol=1e-8)


def test_lennard_jones_decay():
    # monotone decay of |phi|, |phi'|, |phi''| beyond 2 r_star; no rate asserted
    r = np.linspace(2 * LJ.r_star, 10.0, 300)
    for f in (LJ.phi, LJ.dphi, LJ.ddphi):
        assert np.all(np.diff(np.abs(f(r))) < 0)


def test_coefficients():
    c = LJ.coefficients(1.0)
    assert c.phiF == pytest.approx(72.0)
    assert c.phi2F == pytest.approx(156 * 2.0**-14 - 84 * 2.0**-8)
    assert c.A_F == c.phiF + 4 * c.phi2F
    d = LinearizedCoefficients.from_ratio(0.4, 2.0)
    assert d.ratio == pytest.approx(0.4)
    assert d.phiF == 2.0


@pytest.mark.parametrize("F", [0.9, 1.0, 1.1])
def test_energies_at_uniform_state(F):
    cfg = ChainConfig(6, 2, F)
    y = forward_state(cfg)
    ref = 2 * (float(LJ.phi(F)) + float(LJ.phi(2 * F)))
    assert energy_atomistic(y, LJ, cfg) == pytest.approx(ref, rel=1e-14)
    assert energy_qcl(y, LJ, cfg) == pytest.approx(2 * float(LJ.phi_cb(F)), rel=1e-14)
    assert energy_qnl(y, LJ, cfg) == pytest.approx(ref, rel=1e-14)


def test_atomistic_energy_by_hand_n2():
    cfg = ChainConfig(2, 1, 1.05)
    y = forward_state(cfg) + np.array([0.01, -0.02, 0.03, -0.02])
    # positions over two periods; the period length is 2F
    pos = np.concatenate([y, y + 2 * cfg.F, y + 4 * cfg.F])
    total = 0.0
    for j in range(4, 8):
        r1 = (pos[j] - pos[j - 1]) * cfg.N
        r2 = (pos[j + 1] - pos[j - 1]) * cfg.N
        total += float(LJ.phi(r1) + LJ.phi(r2))
    assert energy_atomistic(y, LJ, cfg) == pytest.approx(cfg.eps * total, rel=1e-14)


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_translation_invariance(seed, c):
    cfg = ChainConfig(8, 3, 1.05)
    y = perturbed(cfg, seed)
    for energy, _ in PAIRS:
        e0 = energy(y, LJ, cfg)
        assert energy(y + c, LJ, cfg) == pytest.approx(e0, rel=1e-12)


@pytest.mark.parametrize("F", [0.95, 1.05, 1.2])
def test_uniform_state_is_equilibrium(F):
    cfg = ChainConfig(10, 4, F)
    y = forward_state(cfg)
    for _, force in PAIRS:
        assert np.max(np.abs(force(y, LJ, cfg))) < 1e-10
    assert np.max(np.abs(forces_qcf(y, LJ, cfg))) < 1e-10
    assert np.max(np.abs(forces_qcf_projected(y, LJ, cfg))) < 1e-10


@pytest.mark.parametrize("energy,force", PAIRS)
@pytest.mark.parametrize("N,K", [(4, 1), (7, 3), (12, 5)])
def test_forces_match_energy_gradient(energy, force, N, K):
    cfg = ChainConfig(N, K, 1.05)
    y = perturbed(cfg, 11 * N + K)
    f = force(y, LJ, cfg)
    ref = fd_forces(energy, y, cfg)
    assert np.max(np.abs(f - ref)) <= 1e-5 * np.max(np.abs(ref))


@given(st.integers(0, 2**32 - 1))
def test_conservative_forces_have_zero_sum(seed):
    cfg = ChainConfig(9, 4, 1.05)
    y = perturbed(cfg, seed, amp=0.1)
    for _, force in PAIRS:
        f = force(y, LJ, cfg)
        assert abs(math.fsum(f)) <= 1e-12 * max(1.0, np.max(np.abs(f))) * cfg.size


def test_qcf_rows():
    cfg = ChainConfig(9, 3, 1.05)
    y = perturbed(cfg, 4, amp=0.1)
    f = forces_qcf(y, LJ, cfg)
    assert np.array_equal(f[cfg.atomistic], forces_atomistic(y, LJ, cfg)[cfg.atomistic])
    assert np.array_equal(f[cfg.continuum], forces_qcl(y, LJ, cfg)[cfg.continuum])
    assert abs(forces_qcf_projected(y, LJ, cfg).sum()) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_qcf_force_sum_interface_formula(seed, K):
    cfg = ChainConfig(9, K, 1.05)
    y = perturbed(cfg, seed, amp=0.2)
    f = forces_qcf(y, LJ, cfg)
    total = math.fsum(f)
    assert abs(total - qcf_force_sum(y, LJ, cfg)) <= 1e-12 * max(1.0, np.max(np.abs(f)))


def test_qcf_force_sum_generally_nonzero():
    cfg = ChainConfig(9, 3, 1.05)
    assert abs(qcf_force_sum(perturbed(cfg, 1, amp=0.2), LJ, cfg)) > 1e-6


def test_qnl_with_one_continuum_atom():
    # K = N-1 leaves site N as the only continuum atom
    cfg = ChainConfig(6, 5, 1.05)
    y = perturbed(cfg, 2, amp=0.1)
    yp = deformation_gradient(y, cfg)
    a, b = yp[cfg.index(cfg.N)], yp[cfg.index(cfg.N + 1)]
    stencil = 0.5 * (LJ.phi(2 * a) + LJ.phi(2 * b)) - LJ.phi(a + b)
    diff = energy_qnl(y, LJ, cfg) - energy_atomistic(y, LJ, cfg)
    assert diff == pytest.approx(cfg.eps * float(stencil), rel=1e-9, abs=1e-15)


def test_domain_error():
    cfg = ChainConfig(4, 1)
    y = forward_state(cfg)
    y[3] = y[2] - 0.01
    for _, force in PAIRS:
        with pytest.raises(DomainError):
            force(y, LJ, cfg)
    with pytest.raises(DomainError):
        energy_atomistic(y, LJ, cfg)
    with pytest.raises(ValueError):
        forces_qcf(y, LJ, cfg)
