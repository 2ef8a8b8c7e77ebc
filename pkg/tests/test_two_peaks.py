"""Two-peaks transport, quasi-stationary algebra, tangency and stability."""

import numpy as np
import pytest
from scipy.optimize import brentq

from driftwell.constraint import linear_path
from driftwell.potential import Branch, branch_inverse, landmarks, quartic_potential
from driftwell.two_peaks import (
    NoIntersectionError,
    TwoPeaksState,
    corner_level,
    linear_decay_rate,
    qs_solve,
    qs_trajectory,
    tangency,
    tpm_integrate,
)

POT = quartic_potential()
LM = landmarks(POT)


class TestIntegrate:
    def test_single_peak_follows_constraint(self):
        # m2 = 0 makes sigma = H'(x1) + tau*ell_dot, so x1 tracks ell exactly
        path = linear_path(-1.5, 1.0)
        init = TwoPeaksState(x1=-1.5, x2=-1.5, m1=1.0, m2=0.0, t=0.0)
        traj = tpm_integrate(init, POT, tau=1e-3, path=path, t_end=0.8)
        assert np.max(np.abs(traj.x1 - path.ell(traj.t))) < 1e-6

    def test_symmetric_frozen_state_is_stationary(self):
        path = linear_path(0.0, 0.0)
        init = TwoPeaksState(x1=-1.0, x2=1.0, m1=0.5, m2=0.5)
        traj = tpm_integrate(init, POT, tau=1e-2, path=path, t_end=1.0)
        assert np.max(np.abs(traj.x1 + 1.0)) < 1e-8
        assert np.max(np.abs(traj.x2 - 1.0)) < 1e-8
        assert np.max(np.abs(traj.sigma)) < 1e-8

    def test_constraint_invariant(self):
        m1 = 0.4
        sig0 = -0.6
        x1 = branch_inverse(POT, Branch.MINUS, sig0, LM)
        x2 = branch_inverse(POT, Branch.PLUS, sig0, LM)
        path = linear_path(m1 * x1 + (1 - m1) * x2, 0.7)
        init = TwoPeaksState(x1=x1, x2=x2, m1=m1, m2=1 - m1)
        traj = tpm_integrate(init, POT, tau=5e-3, path=path, t_end=0.5)
        drift = traj.x1 * m1 + traj.x2 * (1 - m1) - path.ell(traj.t)
        assert np.max(np.abs(drift)) < 1e-6

    def test_energy_balance_audit(self):
        # Runge-Kutta steps preserve the linear constraint invariant to
        # machine precision, so the pointwise balance defect
        # Edot + D - sigma*ell_dot = sigma * d/dt(m.x - ell) sits at roundoff;
        # the discrete audit |E(T)-E(0) - int(-D + sigma*ell_dot)| is then
        # dominated by quadrature error and shrinks under sample refinement.
        m1 = 0.4
        sig0 = -0.6
        x1 = branch_inverse(POT, Branch.MINUS, sig0, LM)
        x2 = branch_inverse(POT, Branch.PLUS, sig0, LM)
        path = linear_path(m1 * x1 + (1 - m1) * x2, 1.0)
        init = TwoPeaksState(x1=x1, x2=x2, m1=m1, m2=1 - m1)

        traj = tpm_integrate(init, POT, 5e-3, path, 0.3, rtol=1e-10, atol=1e-12,
                             n_samples=3201)
        drift = m1 * traj.x1 + (1 - m1) * traj.x2 - path.ell(traj.t)
        assert np.max(np.abs(drift)) < 1e-11

        def balance_defect(stride):
            t = traj.t[::stride]
            e = traj.energy[::stride]
            d = traj.dissipation[::stride]
            s = traj.sigma[::stride]
            work = np.trapezoid(-d + s * 1.0, t)
            return abs(e[-1] - e[0] - work)

        coarse = balance_defect(32)
        fine = balance_defect(1)
        assert fine < coarse / 8.0


class TestQuasiStationary:
    def test_symmetric_intersection(self):
        qs = qs_solve(POT, 0.5, 0.0, (Branch.MINUS, Branch.PLUS), LM)
        assert qs.x1 == pytest.approx(-1.0, abs=1e-10)
        assert qs.x2 == pytest.approx(1.0, abs=1e-10)
        assert qs.sigma == pytest.approx(0.0, abs=1e-10)

    def test_single_peak_reduction(self):
        qs = qs_solve(POT, 1.0, -1.3, (Branch.MINUS, Branch.PLUS), LM)
        assert qs.x1 == pytest.approx(-1.3, abs=1e-12)
        assert qs.sigma == pytest.approx(float(POT.d1(-1.3)), abs=1e-12)

    def test_corner_configuration(self):
        # at the corner constraint level the intersection is exactly the
        # branch meeting point (-x_*, x_**)
        ell = (-LM.x_star + LM.x_starstar) / 2.0
        qs = qs_solve(POT, 0.5, ell, (Branch.MINUS, Branch.PLUS), LM)
        assert qs.x1 == pytest.approx(-LM.x_star, abs=1e-7)
        assert qs.x2 == pytest.approx(LM.x_starstar, abs=1e-7)
        qs0 = qs_solve(POT, 0.5, ell, (Branch.ZERO, Branch.PLUS), LM)
        assert qs0.x1 == pytest.approx(-LM.x_star, abs=1e-7)

    def test_invariants(self):
        # ell must lie in the stable-stable range [m1 X_-(-s*) + m2 X_+(-s*),
        # m1 X_-(s*) + m2 X_+(s*)] for the pair to intersect the line
        for m1, ell in [(0.3, 0.3), (0.7, -0.3), (0.5, 0.2)]:
            qs = qs_solve(POT, m1, ell, (Branch.MINUS, Branch.PLUS), LM)
            assert abs(POT.d1(qs.x1) - qs.sigma) <= 1e-10
            assert abs(POT.d1(qs.x2) - qs.sigma) <= 1e-10
            assert abs(m1 * qs.x1 + (1 - m1) * qs.x2 - ell) <= 1e-10

    def test_no_intersection_past_fold(self):
        m1 = 0.1
        s_me = tangency(POT, m1, LM)
        x0 = branch_inverse(POT, Branch.ZERO, s_me, LM)
        xp = branch_inverse(POT, Branch.PLUS, s_me, LM)
        ell_fold = m1 * x0 + (1 - m1) * xp
        with pytest.raises(NoIntersectionError):
            qs_solve(POT, m1, ell_fold + 0.05, (Branch.ZERO, Branch.PLUS), LM)


class TestTangency:
    def test_balanced_masses_have_no_interior_root(self):
        assert tangency(POT, 0.5, LM) is None

    def test_small_m1_has_interior_root(self):
        s_me = tangency(POT, 0.1, LM)
        assert s_me is not None and 0.0 < s_me < LM.sigma_star
        # oracle: independent bisection of the indicator on a fresh bracket
        def Z(s):
            x0 = branch_inverse(POT, Branch.ZERO, s, LM)
            xp = branch_inverse(POT, Branch.PLUS, s, LM)
            return 0.1 * POT.d2(xp) + 0.9 * POT.d2(x0)
        ref = brentq(Z, 1e-6, LM.sigma_star * (1 - 1e-9), xtol=1e-13)
        assert s_me == pytest.approx(ref, abs=1e-9)

    def test_vanishing_m2_merges_continuously(self):
        assert tangency(POT, 1.0 - 1e-6, LM) is None

    def test_decay_rate_values(self):
        from driftwell.two_peaks import QSPoint
        qs = QSPoint(0.0, 1.0, 0.0, (Branch.ZERO, Branch.PLUS))
        assert linear_decay_rate(POT, qs, 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_decay_rate_positive_until_tangency(self):
        m1 = 0.1
        s_me = tangency(POT, m1, LM)
        for s in np.linspace(s_me * 1.01, LM.sigma_star * 0.999, 25):
            x0 = branch_inverse(POT, Branch.ZERO, float(s), LM)
            xp = branch_inverse(POT, Branch.PLUS, float(s), LM)
            from driftwell.two_peaks import QSPoint
            zeta = linear_decay_rate(POT, QSPoint(x0, xp, float(s), (Branch.ZERO, Branch.PLUS)), m1)
            assert zeta > 0.0
        x0 = branch_inverse(POT, Branch.ZERO, s_me, LM)
        xp = branch_inverse(POT, Branch.PLUS, s_me, LM)
        from driftwell.two_peaks import QSPoint
        assert linear_decay_rate(POT, QSPoint(x0, xp, s_me, (Branch.ZERO, Branch.PLUS)), m1) == pytest.approx(0.0, abs=1e-9)


class TestShadowing:
    def test_gap_scales_linearly_in_tau(self):
        # quasi-stationary shadowing: sup-gap over a window away from merging
        # halves when tau is halved (within 25 percent)
        m1 = 0.3
        sig0 = -1.0
        x1 = branch_inverse(POT, Branch.MINUS, sig0, LM)
        x2 = branch_inverse(POT, Branch.PLUS, sig0, LM)
        ell0 = m1 * x1 + (1 - m1) * x2
        path = linear_path(ell0, 1.0)
        qs_at = qs_trajectory(POT, m1, path, LM)

        s_me = tangency(POT, m1, LM)
        x0m = branch_inverse(POT, Branch.ZERO, s_me, LM)
        xpm = branch_inverse(POT, Branch.PLUS, s_me, LM)
        ell_fold = m1 * x0m + (1 - m1) * xpm
        t_stop = (ell_fold - 0.15 - ell0)  # stay clear of the fold

        gaps = []
        for tau in (1e-3, 5e-4):
            init = TwoPeaksState(x1=x1, x2=x2, m1=m1, m2=1 - m1)
            traj = tpm_integrate(init, POT, tau, path, t_stop, n_samples=241)
            sup = 0.0
            for tk, a1, a2 in zip(traj.t, traj.x1, traj.x2):
                q = qs_at(float(tk))
                sup = max(sup, abs(a1 - q.x1), abs(a2 - q.x2))
            gaps.append(sup)
        ratio = gaps[0] / gaps[1]
        assert 2.0 * 0.75 <= ratio <= 2.0 * 1.25

    def test_corner_level_value(self):
        assert corner_level(POT, 0.5, LM) == pytest.approx(
            0.5 * (LM.x_starstar - LM.x_star), abs=1e-12
        )
