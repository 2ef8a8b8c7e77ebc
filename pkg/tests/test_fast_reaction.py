"""Kramers rates, plateau dynamics, quasi-stationary limit, regime table."""

import math
import warnings

import numpy as np
import pytest

from driftwell.constraint import linear_path
from driftwell.fast_reaction import (
    REGIME_FAST_KRAMERS,
    REGIME_FAST_LIMITING,
    REGIME_FAST_QS,
    REGIME_OPEN,
    REGIME_SLOW_I,
    REGIME_SLOW_II,
    case2_K,
    case2_flux,
    classify_regime,
    constrained_kramers_ode,
    flux_general,
    kramers_rates,
    limit_dissipation,
    limit_trajectory,
    plateau_psi_prediction,
    qs_psi,
    sigma_b,
)
from driftwell.potential import (
    Branch,
    barrier_heights,
    branch_inverse,
    curvatures,
    landmarks,
    quartic_potential,
)

POT = quartic_potential()
LM = landmarks(POT)


class TestSigmaB:
    def test_limits(self):
        assert sigma_b(POT, LM.h_crit * (1 - 1e-10), LM) == pytest.approx(0.0, abs=1e-4)
        assert sigma_b(POT, 1e-10, LM) == pytest.approx(LM.sigma_star, abs=1e-4)

    def test_residual_against_bisection_oracle(self):
        from scipy.optimize import bisect

        b = 0.5
        sb = sigma_b(POT, b, LM)
        assert abs(barrier_heights(POT, sb, LM)[0] - b) <= 1e-12
        ref = bisect(lambda s: barrier_heights(POT, s, LM)[0] - b,
                     1e-12, LM.sigma_star * (1 - 1e-12), xtol=1e-13)
        assert sb == pytest.approx(ref, abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            sigma_b(POT, 1.5, LM)
        with pytest.raises(ValueError):
            sigma_b(POT, -0.1, LM)


class TestRates:
    def test_exact_prefactor_at_plateau(self):
        b = 0.5
        sb = sigma_b(POT, b, LM)
        am, a0, _ = curvatures(POT, sb, LM)
        rm, rp = kramers_rates(POT, sb, b, 0.1, LM)
        assert rm == pytest.approx(math.sqrt(am * a0) / (2 * math.pi), rel=1e-9)
        assert rp < 1e-6 * rm  # reverse hops exponentially suppressed

    def test_mirror_symmetry(self):
        for s in (0.2, 0.7, 1.1):
            rm, _ = kramers_rates(POT, s, 0.4, 0.12, LM)
            _, rp = kramers_rates(POT, -s, 0.4, 0.12, LM)
            assert rm == pytest.approx(rp, rel=1e-12)

    def test_flux_general_consistency(self):
        # R = tau (m_- r_- - m_+ r_+) with tau = exp(-b/nu^2)
        b, nu, sig = 0.4, 0.15, 0.3
        tau = math.exp(-b / nu ** 2)
        rm, rp = kramers_rates(POT, sig, b, nu, LM)
        lhs = flux_general(POT, 0.7, 0.3, sig, nu, LM)
        assert lhs == pytest.approx(tau * (0.7 * rm - 0.3 * rp), rel=1e-10)

    def test_no_overflow_at_small_nu(self):
        rm, rp = kramers_rates(POT, 1.2, 0.9, 1e-3, LM)
        assert np.isfinite(rm) and np.isfinite(rp)


class TestConstrainedOde:
    def test_single_peak_regime_before_window(self):
        b, nu = 0.5, 0.1
        sb = sigma_b(POT, b, LM)
        xm_b = branch_inverse(POT, Branch.MINUS, sb, LM)
        path = linear_path(-1.1, 1.0)
        run = constrained_kramers_ode(POT, b, nu, path, m0=1.0, t0=0.0,
                                      t_end=0.2, n_samples=101, lm=LM)
        early = run.t < 0.15
        assert np.max(np.abs(run.sigma[early] - POT.d1(run.ell[early]))) < 1e-3
        assert np.all(run.ell[early] < xm_b)
        assert np.max(np.abs(run.m_minus + run.m_plus - 1.0)) < 1e-12

    def test_efolding_time_matches_rate(self):
        # when sigma crosses sigma_b, -mdot/m equals r_-(sigma_b) up to the
        # tiny reverse-hop correction
        b, nu = 0.5, 0.12
        sb = sigma_b(POT, b, LM)
        path = linear_path(-1.1, 1.0)
        run = constrained_kramers_ode(POT, b, nu, path, m0=1.0, t0=0.0,
                                      t_end=2.2, n_samples=4001, lm=LM)
        rm, _ = kramers_rates(POT, sb, b, nu, LM)
        i = int(np.argmax(run.sigma >= sb))
        assert 0 < i < len(run.t) - 1
        dm = (run.m_minus[i + 1] - run.m_minus[i - 1]) / (run.t[i + 1] - run.t[i - 1])
        rate = -dm / run.m_minus[i]
        assert rate == pytest.approx(rm, rel=0.05)


class TestLimitTrajectory:
    def test_piecewise_structure(self):
        b = 0.5
        path = linear_path(-1.3, 1.0)
        tr = limit_trajectory(POT, b, path, 0.0, 2.6, n_samples=2001, lm=LM)
        sb = tr.sigma_b
        xm_b = branch_inverse(POT, Branch.MINUS, sb, LM)
        xp_b = branch_inverse(POT, Branch.PLUS, sb, LM)
        assert tr.t1 == pytest.approx(xm_b + 1.3, abs=1e-10)
        assert tr.t2 == pytest.approx(xp_b + 1.3, abs=1e-10)
        pre = tr.t < tr.t1
        mid = (tr.t > tr.t1) & (tr.t < tr.t2)
        post = tr.t > tr.t2
        assert np.all(tr.m_minus[pre] == 1.0)
        assert np.all(tr.sigma[mid] == sb)
        assert np.all(tr.m_minus[post] == 0.0)
        assert np.max(np.abs(tr.sigma[pre] - POT.d1(tr.ell[pre]))) < 1e-12
        # m_- decreasing, m_+ increasing
        assert np.all(np.diff(tr.m_minus) <= 1e-12)
        assert np.all(np.diff(tr.m_plus) >= -1e-12)

    def test_midpoint_mass(self):
        b = 0.5
        sb = sigma_b(POT, b, LM)
        xm_b = branch_inverse(POT, Branch.MINUS, sb, LM)
        xp_b = branch_inverse(POT, Branch.PLUS, sb, LM)
        mid = 0.5 * (xm_b + xp_b)
        path = linear_path(mid - 1.0, 1.0)
        tr = limit_trajectory(POT, b, path, 0.0, 2.0, n_samples=2001, lm=LM)
        i = int(np.argmin(np.abs(tr.ell - mid)))
        assert tr.m_minus[i] == pytest.approx(0.5, abs=1e-3)

    def test_plateau_dissipation_sign(self):
        for b in (0.2, 0.5, 0.9):
            sb = sigma_b(POT, b, LM)
            assert limit_dissipation(POT, sb, LM) > 0.0
        # even tilt: equal effective well depths, no plateau dissipation
        assert limit_dissipation(POT, 0.0, LM) == pytest.approx(0.0, abs=1e-14)

    def test_energy_balance(self):
        # Edot = sigma ell_dot - D_b ell_dot on the plateau window
        b = 0.5
        path = linear_path(-1.3, 1.0)
        tr = limit_trajectory(POT, b, path, 0.0, 2.6, n_samples=40001, lm=LM)
        mid = (tr.t > tr.t1 + 0.05) & (tr.t < tr.t2 - 0.05)
        de = np.gradient(tr.energy, tr.t)
        expected = tr.sigma - tr.dissipation_plateau
        assert np.max(np.abs(de[mid] - expected[mid])) < 1e-3


class TestQuasiStationary:
    def test_zero_at_center(self):
        psi, mm, mp = qs_psi(POT, 0.0, LM)
        assert psi == 0.0
        assert mm == mp == 0.5

    def test_divergence_at_edges(self):
        xp0 = branch_inverse(POT, Branch.PLUS, 0.0, LM)
        psi_lo, _, _ = qs_psi(POT, -xp0 * (1 - 1e-12), LM)
        psi_hi, _, _ = qs_psi(POT, xp0 * (1 - 1e-12), LM)
        assert psi_lo < -10 and psi_hi > 10

    def test_antisymmetry(self):
        for e in (0.2, 0.5, 0.9):
            assert qs_psi(POT, e, LM)[0] == pytest.approx(-qs_psi(POT, -e, LM)[0], abs=1e-12)

    def test_affine_masses(self):
        xp0 = branch_inverse(POT, Branch.PLUS, 0.0, LM)
        ells = np.linspace(-0.8, 0.8, 9)
        mms = np.array([qs_psi(POT, float(e), LM)[1] for e in ells])
        slopes = np.diff(mms) / np.diff(ells)
        assert np.max(np.abs(slopes + 1.0 / (2 * xp0))) < 1e-12


class TestCase2:
    def test_gamma_value(self):
        assert float(-POT.d3(-LM.x_star)) == pytest.approx(24.0 / math.sqrt(3.0), abs=1e-10)

    def test_agreement_with_general_flux(self):
        sigma = LM.sigma_star - 0.05
        nu = 0.05
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            approx = case2_flux(POT, sigma, nu, 1.0, LM)
        general = flux_general(POT, 1.0, 0.0, sigma, nu, LM)
        assert approx / general == pytest.approx(1.0, abs=1.0)  # within factor 2

    def test_monotone_decay_in_gap(self):
        nu = 0.04
        gaps = [0.05, 0.08, 0.12, 0.2]
        vals = [case2_flux(POT, LM.sigma_star - g, nu, 1.0, LM) for g in gaps]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_validity_warning(self):
        with pytest.warns(UserWarning, match="validity"):
            case2_flux(POT, LM.sigma_star - 1e-4, 0.1, 1.0, LM)

    def test_k_equation(self):
        nu = 0.05
        tau = nu  # p = 1 > 2/3
        k = case2_K(POT, tau, nu, LM)
        gamma = 24.0 / math.sqrt(3.0)
        c = 4 * math.sqrt(2) / (3 * math.sqrt(gamma))
        lhs = math.sqrt(gamma / math.pi) * k * math.exp(-c * k ** 3)
        assert lhs == pytest.approx(tau * nu ** (-2 / 3), rel=1e-10)
        # gap scale (nu^2 ln(1/nu))^(2/3) up to the K-factor: order one sanity
        assert 0.5 < k < 5.0


class TestClassifier:
    def test_six_rows(self):
        # representative pairs generated from each row's defining relation
        assert classify_regime(0.2, math.exp(-10.0), POT, a_crit=1.0, lm=LM) == REGIME_SLOW_I
        assert classify_regime(0.05, math.exp(-6.0), POT, a_crit=1.0, lm=LM) == REGIME_SLOW_II
        assert classify_regime(1e-4, 1e-12, POT, lm=LM) == REGIME_OPEN  # tau = nu^(1/3)
        assert classify_regime(0.05 ** 2, 0.05, POT, lm=LM) == REGIME_FAST_LIMITING
        assert classify_regime(math.exp(-0.5 / 0.01), 0.1, POT, lm=LM) == REGIME_FAST_KRAMERS
        assert classify_regime(math.exp(-1.5 / 0.01), 0.1, POT, lm=LM) == REGIME_FAST_QS

    def test_slow_needs_a_crit(self):
        with pytest.raises(ValueError, match="a_crit"):
            classify_regime(0.2, math.exp(-10.0), POT, lm=LM)

    def test_domain(self):
        with pytest.raises(ValueError):
            classify_regime(1.5, 0.1, POT, lm=LM)
