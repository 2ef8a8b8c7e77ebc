"""Grid solver: conservation, positivity, constraint, equilibrium, symmetry."""

import math

import numpy as np
import pytest

from driftwell.constraint import linear_path
from driftwell.fp_solver import (
    CFLViolation,
    DensityField,
    Grid,
    default_dt,
    default_grid,
    equilibrium,
    init_gaussian,
    multiplier,
    normalized,
    observables,
    pwm_run,
    run,
    step,
)
from driftwell.potential import (
    Branch,
    arctan_potential,
    branch_inverse,
    landmarks,
    quartic_potential,
)

POT = quartic_potential()
LM = landmarks(POT)


def small_grid(nu=0.1, half=3.5, n=384):
    return Grid(-half, half, n)


class TestGridAndInit:
    def test_default_grid_resolution(self):
        g = default_grid(POT, 0.05, LM)
        assert g.dx <= 0.05 / 4.0
        assert g.n_cells >= 512 and g.n_cells % 2 == 0
        assert g.x_hi > LM.x_starstar + 1.0
        # symmetric centers mirror exactly
        assert np.all(g.centers == -g.centers[::-1])

    def test_gaussian_mass_exact(self):
        g = small_grid()
        rho = init_gaussian(POT, -1.2, 0.1, g)
        assert rho.mass() == pytest.approx(1.0, abs=5e-16)

    def test_gaussian_mean(self):
        g = small_grid()
        rho = init_gaussian(POT, -1.2, 0.1, g)
        assert abs(rho.moment() - (-1.2)) <= 10 * g.dx ** 2

    def test_gaussian_stiffness_matches_curvature(self):
        g = small_grid(n=1024)
        nu = 0.1
        rho = init_gaussian(POT, -1.2, nu, g)
        alpha = float(POT.d2(-1.2))  # 12*1.44 - 4 = 13.28
        assert alpha == pytest.approx(13.28, abs=1e-12)
        obs = observables(rho, POT, nu, 1.0, 0.0)
        assert obs.width == pytest.approx(nu / math.sqrt(alpha), rel=5e-3)

    def test_nonconvex_point_rejected(self):
        with pytest.raises(ValueError, match="nonconvex"):
            init_gaussian(POT, 0.0, 0.1, small_grid())


class TestMultiplier:
    def test_even_density_zero_force(self):
        g = small_grid()
        vals = (np.exp(-(g.centers - 1.0) ** 2 / 0.02)
                + np.exp(-(g.centers + 1.0) ** 2 / 0.02))
        rho = normalized(g, vals)
        assert abs(multiplier(rho, POT, 0.1, 0.0)) <= 1e-12

    def test_narrow_peak_local_force(self):
        g = small_grid(n=2048)
        rho = init_gaussian(POT, -1.3, 0.02, g)
        assert multiplier(rho, POT, 0.1, 0.0) == pytest.approx(
            float(POT.d1(-1.3)), abs=5e-3
        )

    def test_rate_term_additive(self):
        g = small_grid()
        rho = init_gaussian(POT, -1.2, 0.1, g)
        tau = 0.07
        a = multiplier(rho, POT, tau, 1.3)
        b = multiplier(rho, POT, tau, 0.0)
        assert a - b == pytest.approx(tau * 1.3, abs=1e-15)


class TestStep:
    def test_mass_conservation_thousand_steps(self):
        nu = tau = 0.1
        path = linear_path(-1.2, 0.5)
        g = small_grid()
        dt = default_dt(POT, nu, tau, g, -1.2, -1.1, LM)
        rho = init_gaussian(POT, -1.2, nu, g)
        sigma = None
        for _ in range(1000):
            rho, sigma = step(rho, POT, nu, tau, path, dt, sigma)
        assert abs(rho.mass() - 1.0) <= 1e-12
        assert float(np.min(rho.values)) >= -1e-14
        assert rho.moment() == pytest.approx(float(path.ell(rho.t)), abs=1e-10)

    def test_cfl_violation_raises(self):
        nu = tau = 0.1
        path = linear_path(-1.2, 0.5)
        g = small_grid()
        rho = init_gaussian(POT, -1.2, nu, g)
        with pytest.raises(CFLViolation):
            step(rho, POT, nu, tau, path, dt=1.0)

    def test_self_convergence(self):
        # error against refined references drops ~4x when (dx, dt) -> (dx/2, dt/4)
        nu, tau = 0.2, 0.1
        path = linear_path(-0.9, 0.5)
        t_end = 0.1

        def final_density(n, dt):
            g = Grid(-3.2, 3.2, n)
            res = run(POT, nu, tau, path, 0.0, t_end, grid=g, dt=dt,
                      n_obs=3, lm=LM)
            return res.final.values

        base_n, base_dt = 256, 2.5e-5
        avg2 = lambda f: 0.5 * (f[0::2] + f[1::2])
        f0 = final_density(base_n, base_dt)
        c1 = avg2(final_density(2 * base_n, base_dt / 4))
        c2 = avg2(avg2(final_density(4 * base_n, base_dt / 16)))
        dx0 = 6.4 / base_n
        e1 = float(np.sum(np.abs(f0 - c1)) * dx0)
        e2 = float(np.sum(np.abs(c1 - c2)) * dx0)
        assert 2.5 <= e1 / e2 <= 8.0


class TestEquilibrium:
    def test_normalization(self):
        g = small_grid()
        rho = equilibrium(POT, 2.0, 0.05, g)
        assert rho.mass() == pytest.approx(1.0, abs=5e-16)

    def test_single_mode_location(self):
        g = small_grid(n=2048)
        sigma = 2.0  # beyond sigma_*: unique well
        rho = equilibrium(POT, sigma, 0.05, g)
        mode = g.centers[int(np.argmax(rho.values))]
        target = branch_inverse(POT, Branch.PLUS, sigma, LM)
        assert abs(mode - target) <= g.dx

    def test_stationarity_under_step(self):
        nu = tau = 0.1
        g = small_grid()
        rho_eq = equilibrium(POT, 0.7, nu, g)
        ell_star = rho_eq.moment()
        path = linear_path(ell_star, 0.0)
        dt = default_dt(POT, nu, tau, g, ell_star, ell_star, LM)
        new, sigma = step(rho_eq, POT, nu, tau, path, dt)
        l1 = float(np.sum(np.abs(new.values - rho_eq.values)) * g.dx)
        assert l1 <= 1e-8
        assert sigma == pytest.approx(0.7, abs=1e-6)

    def test_long_time_convergence_to_gibbs(self):
        nu = tau = 0.1
        g = small_grid()
        rho = init_gaussian(POT, 1.35, nu, g)
        path = linear_path(rho.moment(), 0.0)
        alpha_min = min(float(POT.d2(1.0)), abs(float(POT.d2(0.0))))
        t_relax = 50.0 * tau / alpha_min
        res = run(POT, nu, tau, path, 0.0, t_relax, grid=g, initial=rho,
                  n_obs=5, lm=LM)
        sigma_inf = float(res.sigma_steps[-1])
        eq = equilibrium(POT, sigma_inf, nu, g)
        l1 = float(np.sum(np.abs(res.final.values - eq.values)) * g.dx)
        assert l1 <= 1e-6


class TestRun:
    def test_symmetry_even_data_zero_drive(self):
        nu = tau = 0.1
        g = small_grid(n=512)
        vals = (np.exp(-(g.centers - 1.0) ** 2 * POT.d2(1.0) / (2 * nu ** 2))
                + np.exp(-(g.centers + 1.0) ** 2 * POT.d2(1.0) / (2 * nu ** 2)))
        rho0 = normalized(g, vals)
        res = run(POT, nu, tau, linear_path(0.0, 0.0), 0.0, 0.5, grid=g,
                  initial=rho0, n_obs=11, lm=LM)
        assert float(np.max(np.abs(res.sigma_steps))) <= 1e-10

    def test_energy_balance_audit_refines(self):
        nu, tau = 0.2, 0.1
        path = linear_path(-1.0, 1.0)
        t_end = 0.4

        def audit(n, dt):
            g = Grid(-3.2, 3.2, n)
            res = run(POT, nu, tau, path, 0.0, t_end, grid=g, dt=dt,
                      n_obs=401, lm=LM)
            de = np.gradient(res.energy, res.t)
            r = np.abs(de + res.dissipation - res.sigma * 1.0)
            return float(np.trapezoid(r, res.t))

        coarse = audit(256, 4e-5)
        fine = audit(512, 2e-5)
        assert fine <= coarse / 3.0

    def test_reversed_run_point_reflection(self):
        nu = tau = 0.1
        t_end = 0.8
        fwd = run(POT, nu, tau, linear_path(-1.3, 1.0), 0.0, t_end,
                  n_obs=101, lm=LM)
        bwd = run(POT, nu, tau, linear_path(1.3, -1.0), 0.0, t_end,
                  n_obs=101, lm=LM)
        assert np.max(np.abs(fwd.sigma + bwd.sigma)) < 5e-7
        assert np.max(np.abs(fwd.y + bwd.y)) < 5e-7
        assert np.max(np.abs(fwd.m_minus - bwd.m_plus)) < 5e-7


class TestPwm:
    def test_degenerate_coupling_matches_run(self):
        nu = tau = 0.1
        path = linear_path(-1.2, 0.8)
        g = small_grid()
        plain = run(POT, nu, tau, path, 0.0, 0.2, grid=g, n_obs=21, lm=LM)
        coupled = pwm_run(POT, nu, tau, path, m1=1.0, x2_0=1.2, t0=0.0,
                          t_end=0.2, grid=g, n_obs=21, lm=LM)
        assert np.max(np.abs(plain.sigma_steps - coupled.sigma_steps)) < 1e-9
        assert np.max(np.abs(plain.final.values - coupled.final.values)) < 1e-9

    def test_constraint_combined_moment(self):
        nu = tau = 0.1
        m1 = 0.7
        sig0 = -0.4
        x1 = branch_inverse(POT, Branch.MINUS, sig0, LM)
        x2 = branch_inverse(POT, Branch.PLUS, sig0, LM)
        ell0 = m1 * x1 + (1 - m1) * x2
        path = linear_path(ell0, 1.0)
        g = small_grid()
        rho0 = init_gaussian(POT, x1, nu, g)
        res = pwm_run(POT, nu, tau, path, m1=m1, x2_0=x2, t0=0.0, t_end=0.3,
                      grid=g, initial=rho0, n_obs=61, lm=LM)
        combined = m1 * res.ell_hat + (1 - m1) * res.x2
        assert np.max(np.abs(combined - path.ell(res.t))) <= 1e-8

    def test_log_width_slope_in_spinodal(self):
        # after the grid peak crosses -x_*, ln w grows at rate -H''(x1)/tau.
        # The local-linearization premise needs the peak narrow relative to
        # the variation of H'', so drive it fast toward the flat center of
        # the spinodal interval and measure there.
        nu, tau = 0.03, 0.05
        m1 = 0.8
        sig0 = -0.3
        x1 = branch_inverse(POT, Branch.MINUS, sig0, LM)
        x2 = branch_inverse(POT, Branch.PLUS, sig0, LM)
        ell0 = m1 * x1 + (1 - m1) * x2
        path = linear_path(ell0, 10.0)
        res = pwm_run(POT, nu, tau, path, m1=m1, x2_0=x2, t0=0.0, t_end=0.145,
                      n_obs=3001, lm=LM)
        w = res.width
        xbar = res.ell_hat
        sel = (np.abs(xbar) < 0.32) & (w > 0.075) & (w < 0.14)
        assert np.count_nonzero(sel) > 10
        idx = np.nonzero(sel)[0]
        slope = np.polyfit(res.t[idx], np.log(w[idx]), 1)[0]
        pred = float(np.mean(-POT.d2(xbar[idx]) / tau))
        assert slope == pytest.approx(pred, rel=0.2)
