"""Fast-reaction regime: barrier-hopping mass exchange between two wells.

When the relaxation time is exponentially small in the squared noise
amplitude, tau = exp(-b/nu^2), transfer between the wells of the tilted
potential runs at the rescaled rates

    r_pm(sigma) = sqrt(alpha_pm alpha_0) / (2 pi) * exp((b - h_pm(sigma))/nu^2),

and the constrained dynamics locks the multiplier onto the plateau value
sigma_b solving h_-(sigma_b) = b.  This module provides the rates, the
plateau trajectory of the limit model, a two-mass validation ODE that
exhibits the plateau at finite nu, the quasi-stationary (sigma ~ 0) limit,
the near-edge flux asymptotics, and the scaling-regime classifier.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .constraint import ConstraintPath
from .potential import (
    Branch,
    Landmarks,
    Potential,
    _newton_bracketed,
    barrier_heights,
    barrier_slopes,
    branch_inverse,
    curvatures,
    landmarks,
)

_EXP_CAP = 700.0  # exp overflow guard; caller-visible values saturate finite


@dataclass(frozen=True)
class KramersParams:
    """Barrier parameter b > 0 with the implied relaxation time."""

    b: float
    nu: float

    def __post_init__(self):
        if self.b <= 0.0 or self.nu <= 0.0:
            raise ValueError("need b > 0 and nu > 0")

    @property
    def tau(self) -> float:
        return math.exp(-self.b / self.nu ** 2)


@dataclass(frozen=True)
class TwoMassState:
    m_minus: float
    m_plus: float
    sigma: float
    t: float


@dataclass
class KramersRun:
    t: np.ndarray
    ell: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray
    m_minus: np.ndarray
    m_plus: np.ndarray
    energy: np.ndarray
    sigma_b: float
    status: str


def _safe_exp(arg: float) -> float:
    return math.exp(min(arg, _EXP_CAP))


def sigma_b(pot: Potential, b: float, lm: Landmarks | None = None) -> float:
    """Plateau multiplier: the root of h_-(sigma) = b in (0, sigma_*).

    h_- decreases from h_crit at sigma = 0 to zero at sigma_*, so the root
    exists precisely for 0 < b < h_crit.
    """
    lm = lm or landmarks(pot)
    if not 0.0 < b < lm.h_crit:
        raise ValueError(f"b must lie in (0, h_crit) = (0, {lm.h_crit:g})")
    eps = 1e-13 * lm.sigma_star
    f = lambda s: barrier_heights(pot, s, lm)[0] - b
    df = lambda s: barrier_slopes(pot, s, lm)[0]
    lo, hi = eps, lm.sigma_star * (1.0 - 1e-12)
    return float(_newton_bracketed(f, df, lo, hi, f(lo), f(hi)))


def kramers_rates(pot: Potential, sigma: float, b: float, nu: float,
                  lm: Landmarks | None = None) -> tuple[float, float]:
    """Rescaled hopping rates (r_minus, r_plus), evaluated in log domain."""
    lm = lm or landmarks(pot)
    am, a0, ap = curvatures(pot, sigma, lm)
    hm, hp = barrier_heights(pot, sigma, lm)
    log_pref_m = 0.5 * math.log(max(am * a0, 1e-300)) - math.log(2.0 * math.pi)
    log_pref_p = 0.5 * math.log(max(ap * a0, 1e-300)) - math.log(2.0 * math.pi)
    rm = _safe_exp(log_pref_m + (b - hm) / nu ** 2)
    rp = _safe_exp(log_pref_p + (b - hp) / nu ** 2)
    return rm, rp


def flux_general(pot: Potential, m_minus: float, m_plus: float, sigma: float,
                 nu: float, lm: Landmarks | None = None) -> float:
    """Unrescaled barrier flux of the matched-asymptotics formula.

    Equals tau * (m_- r_- - m_+ r_+) for any consistent b; the b-free form
    is the diagnostic behind the rates.
    """
    lm = lm or landmarks(pot)
    am, a0, ap = curvatures(pot, sigma, lm)
    hm, hp = barrier_heights(pot, sigma, lm)
    term_m = m_minus * math.sqrt(am * a0) * _safe_exp(-hm / nu ** 2)
    term_p = m_plus * math.sqrt(ap * a0) * _safe_exp(-hp / nu ** 2)
    return (term_m - term_p) / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# constrained two-mass validation model
# ---------------------------------------------------------------------------

def _solve_sigma_two_mass(pot: Potential, m_minus: float, ell: float,
                          lm: Landmarks, clamp: bool = False) -> float:
    """Invert ell = m_- X_-(sigma) + m_+ X_+(sigma); increasing in sigma.

    With clamp=True an unrepresentable ell maps to the nearest boundary
    multiplier instead of raising; the stiff solver probes off-manifold
    states and needs a total right-hand side.
    """
    s_star = lm.sigma_star
    lo, hi = -s_star * (1 - 1e-12), s_star * (1 - 1e-12)
    mp = 1.0 - m_minus

    def g(s):
        return (m_minus * branch_inverse(pot, Branch.MINUS, s, lm)
                + mp * branch_inverse(pot, Branch.PLUS, s, lm) - ell)

    def dg(s):
        total = 0.0
        for m, br in ((m_minus, Branch.MINUS), (mp, Branch.PLUS)):
            c = pot.hpp(branch_inverse(pot, br, s, lm))
            if c <= 0.0:
                return 0.0
            total += m / c
        return total

    glo, ghi = g(lo), g(hi)
    if glo > 1e-12 or ghi < -1e-12:
        if clamp:
            return lo if glo > 0.0 else hi
        raise ValueError(f"constraint unsolvable: ell={ell:g} leaves the "
                         "representable two-well range")
    return float(_newton_bracketed(g, dg, lo, hi, glo, ghi))


def constrained_kramers_ode(pot: Potential, b: float, nu: float,
                            path: ConstraintPath, m0: float,
                            t0: float = 0.0, t_end: float = 1.0,
                            rtol: float = 1e-8, atol: float = 1e-12,
                            n_samples: int = 801,
                            lm: Landmarks | None = None) -> KramersRun:
    """Two quasi-stationary peaks exchanging mass at the Kramers rates.

    Validation model: positions are pinned to the stable branches, sigma is
    solved from the constraint each step, and the left mass follows
    dm_-/dt = -(m_- r_-(sigma) - m_+ r_+(sigma)).  Its purpose is to exhibit
    the plateau sigma ~ sigma_b at moderate nu.
    """
    lm = lm or landmarks(pot)
    sb = sigma_b(pot, b, lm)
    rate_cap = 1e12  # rates beyond this mean instantaneous transfer anyway

    def rhs(t, y):
        m = min(max(y[0], 0.0), 1.0)
        sig = _solve_sigma_two_mass(pot, m, float(path.ell(t)), lm, clamp=True)
        rm, rp = kramers_rates(pot, sig, b, nu, lm)
        rm, rp = min(rm, rate_cap), min(rp, rate_cap)
        return [-(m * rm - (1.0 - m) * rp)]

    def drained(t, y):
        return y[0] - 1e-12
    drained.terminal = True
    drained.direction = -1

    sol = solve_ivp(rhs, (t0, t_end), [m0], method="Radau", rtol=rtol,
                    atol=atol, dense_output=True, events=[drained])
    t_hi = float(sol.t[-1])
    ts = np.linspace(t0, t_hi, n_samples)
    mm = np.clip(sol.sol(ts)[0], 0.0, 1.0)
    ells = np.array([float(path.ell(t)) for t in ts])
    sig = np.array([
        _solve_sigma_two_mass(pot, float(m), float(e), lm)
        for m, e in zip(mm, ells)
    ])
    xm = np.array([branch_inverse(pot, Branch.MINUS, s, lm) for s in sig])
    xp = np.array([branch_inverse(pot, Branch.PLUS, s, lm) for s in sig])
    energy = mm * pot.eval(xm) + (1.0 - mm) * pot.eval(xp)
    psi = (sig - sb) / nu ** 2
    status = "drained" if sol.status == 1 else ("ok" if sol.status == 0 else sol.message)
    return KramersRun(ts, ells, sig, psi, mm, 1.0 - mm, energy, sb, status)


def plateau_psi_prediction(pot: Potential, b: float, m_minus: float,
                           ell_dot: float, lm: Landmarks | None = None) -> float:
    """Self-consistent rescaled multiplier on the plateau.

    psi = ln( 2 pi ell_dot / (sqrt(a_- a_0) (X_+ - X_-) m_-) ) / |h_-'(sigma_b)|,
    everything evaluated at sigma_b.
    """
    lm = lm or landmarks(pot)
    sb = sigma_b(pot, b, lm)
    am, a0, _ = curvatures(pot, sb, lm)
    xm = branch_inverse(pot, Branch.MINUS, sb, lm)
    xp = branch_inverse(pot, Branch.PLUS, sb, lm)
    slope_m, _ = barrier_slopes(pot, sb, lm)
    num = 2.0 * math.pi * ell_dot / (math.sqrt(am * a0) * (xp - xm) * m_minus)
    return math.log(num) / abs(slope_m)


# ---------------------------------------------------------------------------
# limit trajectory of the conjectured dynamics
# ---------------------------------------------------------------------------

@dataclass
class LimitTrajectoryFR:
    t: np.ndarray
    ell: np.ndarray
    sigma: np.ndarray
    m_minus: np.ndarray
    m_plus: np.ndarray
    energy: np.ndarray
    sigma_b: float
    t1: float | None
    t2: float | None
    dissipation_plateau: float  # D_b


def limit_dissipation(pot: Potential, sb: float, lm: Landmarks | None = None) -> float:
    """Plateau dissipation rate D_b >= 0; zero iff the tilted wells balance."""
    lm = lm or landmarks(pot)
    xm = branch_inverse(pot, Branch.MINUS, sb, lm)
    xp = branch_inverse(pot, Branch.PLUS, sb, lm)
    num = (pot.h(xm) - sb * xm) - (pot.h(xp) - sb * xp)
    return float(num / (xp - xm))


def limit_trajectory(pot: Potential, b: float | None, path: ConstraintPath,
                     t0: float, t_end: float, n_samples: int = 801,
                     mode: str = "auto",
                     lm: Landmarks | None = None) -> LimitTrajectoryFR:
    """Piecewise limit of the fast-reaction dynamics under a monotone drive.

    sigma follows H'(ell) outside the transfer window [t1, t2] defined by
    ell(t1) = X_-(sigma_b), ell(t2) = X_+(sigma_b); on the window sigma is
    flat at sigma_b and the left mass interpolates linearly in ell.  Modes:
    'auto' picks the barrier root when 0 < b < h_crit and the
    quasi-stationary value sigma_b = 0 when b >= h_crit; 'limiting' pins
    sigma_b = sigma_* (the polynomial-coupling edge case).
    """
    if not path.monotone:
        raise ValueError("limit trajectory needs a monotone increasing drive")
    lm = lm or landmarks(pot)
    if mode == "limiting":
        sb = lm.sigma_star
    elif mode == "quasi-stationary" or (mode == "auto" and (b is None or b >= lm.h_crit)):
        sb = 0.0
    elif mode == "auto":
        sb = sigma_b(pot, b, lm)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    xm_b = branch_inverse(pot, Branch.MINUS, sb, lm)
    xp_b = branch_inverse(pot, Branch.PLUS, sb, lm)

    def hit(level):
        f = lambda t: float(path.ell(t)) - level
        if f(t0) > 0.0 or f(t_end) < 0.0:
            return None
        return float(brentq(f, t0, t_end, xtol=1e-13))

    t1, t2 = hit(xm_b), hit(xp_b)
    ts = np.linspace(t0, t_end, n_samples)
    ells = np.array([float(path.ell(t)) for t in ts])

    sig = np.empty_like(ells)
    mm = np.empty_like(ells)
    for i, (t, e) in enumerate(zip(ts, ells)):
        if t1 is not None and t >= t1 and (t2 is None or t <= t2):
            sig[i] = sb
            mm[i] = (xp_b - e) / (xp_b - xm_b)
        elif t1 is None or t < t1:
            sig[i] = float(pot.d1(e))
            mm[i] = 1.0
        else:
            sig[i] = float(pot.d1(e))
            mm[i] = 0.0
    mm = np.clip(mm, 0.0, 1.0)
    xm = np.array([branch_inverse(pot, Branch.MINUS, min(s, lm.sigma_star), lm)
                   if m > 0.0 else 0.0 for s, m in zip(sig, mm)])
    xp = np.array([branch_inverse(pot, Branch.PLUS, max(s, -lm.sigma_star), lm)
                   if m < 1.0 else 0.0 for s, m in zip(sig, mm)])
    energy = mm * pot.eval(xm) + (1.0 - mm) * pot.eval(xp)
    return LimitTrajectoryFR(ts, ells, sig, mm, 1.0 - mm, energy, sb, t1, t2,
                             limit_dissipation(pot, sb, lm))


# ---------------------------------------------------------------------------
# quasi-stationary limit and near-edge asymptotics
# ---------------------------------------------------------------------------

def qs_psi(pot: Potential, ell: float, lm: Landmarks | None = None):
    """Rescaled multiplier and masses of the quasi-stationary transfer.

    Valid for |ell| < X_+(0); psi diverges to -inf/+inf at the window edges.
    Returns (psi, m_minus, m_plus).
    """
    lm = lm or landmarks(pot)
    xp0 = branch_inverse(pot, Branch.PLUS, 0.0, lm)
    if not abs(ell) < xp0:
        raise ValueError(f"quasi-stationary window needs |ell| < {xp0:g}")
    psi = -math.log((xp0 - ell) / (xp0 + ell)) / (2.0 * xp0)
    m_minus = (xp0 - ell) / (2.0 * xp0)
    m_plus = (xp0 + ell) / (2.0 * xp0)
    return psi, m_minus, m_plus


def case2_flux(pot: Potential, sigma: float, nu: float, m_minus: float,
               lm: Landmarks | None = None) -> float:
    """Barrier flux when sigma sits just below sigma_* (merging wells).

    Near the spinodal edge both curvatures collapse like sqrt(2 gamma u)
    with u = sigma_* - sigma and gamma = -H'''(-x_*), and the barrier
    shrinks to (4 sqrt(2)/(3 sqrt(gamma))) u^(3/2); substituting into the
    general flux gives

        R = m_- sqrt(2 gamma u) / (2 pi) * exp(-(4 sqrt(2)/(3 sqrt(gamma))) u^(3/2)/nu^2).

    Warns outside its validity window u^(3/2) >> nu^2.
    """
    lm = lm or landmarks(pot)
    gap = lm.sigma_star - sigma
    if gap <= 0.0:
        raise ValueError("case-2 asymptotics need sigma < sigma_*")
    if gap ** 1.5 / nu ** 2 < 5.0:
        warnings.warn("case-2 flux outside its validity window "
                      "((sigma_*-sigma)^(3/2) should exceed 5 nu^2)",
                      stacklevel=2)
    gamma = float(-pot.d3(-lm.x_star))
    expo = -(4.0 * math.sqrt(2.0) / (3.0 * math.sqrt(gamma))) * gap ** 1.5 / nu ** 2
    return m_minus * math.sqrt(2.0 * gamma * gap) / (2.0 * math.pi) * _safe_exp(expo)


def case2_K(pot: Potential, tau: float, nu: float,
            lm: Landmarks | None = None) -> float:
    """Large parameter K of the edge regime, from
    sqrt(gamma/pi) K exp(-(4 sqrt(2)/(3 sqrt(gamma))) K^3) = tau nu^(-2/3).

    Returns the decaying (large-K) root; the multiplier gap then scales like
    K^2 nu^(4/3).
    """
    lm = lm or landmarks(pot)
    gamma = float(-pot.d3(-lm.x_star))
    c = 4.0 * math.sqrt(2.0) / (3.0 * math.sqrt(gamma))
    pref = math.sqrt(gamma / math.pi)
    rhs = tau * nu ** (-2.0 / 3.0)
    k_peak = (1.0 / (3.0 * c)) ** (1.0 / 3.0)
    if pref * k_peak * math.exp(-c * k_peak ** 3) <= rhs:
        raise ValueError("tau nu^(-2/3) too large: no decaying root (need tau << nu^(2/3))")
    g = lambda k: pref * k * math.exp(-c * k ** 3) - rhs
    hi = k_peak * 2.0
    while g(hi) > 0.0:
        hi *= 2.0
    return float(brentq(g, k_peak, hi, xtol=1e-13))


# ---------------------------------------------------------------------------
# scaling-regime classifier
# ---------------------------------------------------------------------------

REGIME_SLOW_I = "slow-I"
REGIME_SLOW_II = "slow-II"
REGIME_OPEN = "OPEN"
REGIME_FAST_LIMITING = "fast-III-limiting"
REGIME_FAST_KRAMERS = "fast-III-Kramers"
REGIME_FAST_QS = "fast-IV"

OPEN_A_THRESHOLD = 0.05         # below: tau decays faster than any a/log(1/nu)
KRAMERS_B_FRACTION = 0.05       # b_eff above this fraction of h_crit: Kramers


def classify_regime(tau: float, nu: float, pot: Potential,
                    a_crit: float | None = None,
                    lm: Landmarks | None = None) -> str:
    """Map a (tau, nu) pair onto the scaling-regime table.

    Pointwise heuristics for genuinely small parameters: the effective
    descriptors are b_eff = nu^2 ln(1/tau) (exponential coupling),
    p_eff = ln tau / ln nu (polynomial coupling) and
    a_eff = tau ln(1/nu) (logarithmic coupling).  Decision order:
    quasi-stationary when b_eff >= h_crit; polynomial-or-faster couplings
    (p_eff > 2/3) split into Kramers vs limiting by b_eff; the remaining
    slow side splits into the open problem (a_eff below threshold) and the
    slow rows, which need a caller-supplied a_crit.
    """
    if not (0.0 < tau < 1.0 and 0.0 < nu < 1.0):
        raise ValueError("classifier needs tau, nu in (0, 1)")
    lm = lm or landmarks(pot)
    b_eff = nu ** 2 * math.log(1.0 / tau)
    p_eff = math.log(tau) / math.log(nu)
    a_eff = tau * math.log(1.0 / nu)

    if b_eff >= lm.h_crit:
        return REGIME_FAST_QS
    if p_eff > 2.0 / 3.0:
        if b_eff >= KRAMERS_B_FRACTION * lm.h_crit:
            return REGIME_FAST_KRAMERS
        return REGIME_FAST_LIMITING
    if a_eff <= OPEN_A_THRESHOLD:
        return REGIME_OPEN
    if a_crit is None:
        raise ValueError("slow-reaction rows need a caller-supplied a_crit")
    return REGIME_SLOW_I if a_eff > a_crit else REGIME_SLOW_II
