"""Two-peaks reduction: transport of two point masses under the constraint.

The model couples peak positions x1 <= x2 with fixed masses m1, m2 through
    tau * dx_i/dt = sigma - H'(x_i),
    sigma = m1 H'(x1) + m2 H'(x2) + tau * ell_dot,
which preserves m1 x1 + m2 x2 = ell(t) exactly.  Its quasi-stationary
skeleton H'(x1) = H'(x2) = sigma, m1 x1 + m2 x2 = ell is an algebraic system
whose solution branches, fold (tangency) and linear stability are computed
here as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .constraint import ConstraintPath
from .potential import Branch, Landmarks, Potential, landmarks, branch_inverse


@dataclass(frozen=True)
class TwoPeaksState:
    x1: float
    x2: float
    m1: float
    m2: float
    t: float = 0.0

    def __post_init__(self):
        if not np.isclose(self.m1 + self.m2, 1.0, atol=1e-12):
            raise ValueError("peak masses must sum to 1")
        if min(self.m1, self.m2) < -1e-15:
            raise ValueError("peak masses must be nonnegative")
        if self.x1 > self.x2 + 1e-12:
            raise ValueError("need x1 <= x2")


@dataclass(frozen=True)
class QSPoint:
    """Quasi-stationary configuration: equal forces plus the constraint line."""

    x1: float
    x2: float
    sigma: float
    branch_pair: tuple[Branch, Branch]


@dataclass
class TpmTrajectory:
    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    sigma: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    merged_estimate: float | None = None  # step-failure time if the solver died


class NoIntersectionError(ValueError):
    """The branch curve does not meet the constraint line for this pair."""


# ---------------------------------------------------------------------------
# full ODE model
# ---------------------------------------------------------------------------

def tpm_sigma(pot: Potential, state_x1, state_x2, m1, tau, ell_dot):
    m2 = 1.0 - m1
    return m1 * float(pot.d1(state_x1)) + m2 * float(pot.d1(state_x2)) + tau * ell_dot


def tpm_integrate(init: TwoPeaksState, pot: Potential, tau: float,
                  path: ConstraintPath, t_end: float,
                  rtol: float = 1e-8, atol: float = 1e-10,
                  n_samples: int = 801) -> TpmTrajectory:
    """Integrate the two-peaks ODE with an adaptive embedded RK pair.

    The constraint m1 x1 + m2 x2 = ell(t) is an invariant of the flow; it
    holds to integrator tolerance.  Near a discontinuous merging the problem
    turns stiff; a solver failure is reported through ``merged_estimate``
    rather than raised.
    """
    m1, m2 = init.m1, init.m2

    def rhs(t, y):
        s = tpm_sigma(pot, y[0], y[1], m1, tau, float(path.ell_dot(t)))
        return [(s - float(pot.d1(y[0]))) / tau, (s - float(pot.d1(y[1]))) / tau]

    sol = solve_ivp(rhs, (init.t, t_end), [init.x1, init.x2], method="RK45",
                    rtol=rtol, atol=atol, dense_output=True, max_step=t_end - init.t)
    t_hi = sol.t[-1]
    ts = np.linspace(init.t, t_hi, n_samples)
    ys = sol.sol(ts)
    x1, x2 = ys[0], ys[1]
    ell_dots = np.array([float(path.ell_dot(t)) for t in ts])
    sigma = m1 * pot.d1(x1) + m2 * pot.d1(x2) + tau * ell_dots
    energy = m1 * pot.eval(x1) + m2 * pot.eval(x2)
    diss = (m1 * (pot.d1(x1) - sigma) ** 2 + m2 * (pot.d1(x2) - sigma) ** 2) / tau
    merged = None if sol.status == 0 else float(t_hi)
    return TpmTrajectory(ts, x1, x2, sigma, energy, diss, merged)


# ---------------------------------------------------------------------------
# quasi-stationary algebra
# ---------------------------------------------------------------------------

def corner_level(pot: Potential, m1: float, lm: Landmarks | None = None) -> float:
    """Constraint value at which the (minus,plus) pair hands over to (zero,plus)."""
    lm = lm or landmarks(pot)
    return -m1 * lm.x_star + (1.0 - m1) * lm.x_starstar


def _pair_Z(pot: Potential, m1: float, pair, sigma: float, lm: Landmarks) -> float:
    """Fold indicator m1 H''(x2) + m2 H''(x1) for the given branch pair."""
    x1 = branch_inverse(pot, pair[0], sigma, lm)
    x2 = branch_inverse(pot, pair[1], sigma, lm)
    return m1 * float(pot.d2(x2)) + (1.0 - m1) * float(pot.d2(x1))


def qs_solve(pot: Potential, m1: float, ell: float,
             pair: tuple[Branch, Branch],
             lm: Landmarks | None = None) -> QSPoint:
    """Solve the quasi-stationary system on a given branch pair.

    Reduces to the scalar equation m1 X_a(sigma) + m2 X_b(sigma) = ell.  On
    pairs involving the unstable branch only the dynamically selected side of
    the fold (positive tangency indicator) is searched.
    """
    lm = lm or landmarks(pot)
    m2 = 1.0 - m1
    s_star = lm.sigma_star
    if m1 >= 1.0 - 1e-15:
        # single peak: x1 = ell, sigma = H'(ell)
        sig = float(pot.d1(ell))
        x2 = branch_inverse(pot, pair[1], sig, lm) if abs(sig) <= s_star else ell
        return QSPoint(float(ell), float(x2), sig, pair)

    def g(s):
        return (m1 * branch_inverse(pot, pair[0], s, lm)
                + m2 * branch_inverse(pot, pair[1], s, lm) - ell)

    # ell(sigma) is monotone on each pair up to the fold of the tangency
    # indicator; restrict the bracket to the dynamically selected side.
    lo, hi = -s_star, s_star
    if pair == (Branch.ZERO, Branch.PLUS):
        fold = _find_fold(pot, m1, pair, lm)
        if fold is not None:
            lo = fold
    elif pair == (Branch.MINUS, Branch.ZERO):
        fold = _find_fold(pot, m1, pair, lm)
        if fold is not None:
            hi = fold
    elif pair != (Branch.MINUS, Branch.PLUS):
        raise ValueError(f"unsupported branch pair {pair}")

    glo, ghi = g(lo), g(hi)
    if abs(glo) <= 1e-11:
        sig = lo
    elif abs(ghi) <= 1e-11:
        sig = hi
    elif glo * ghi > 0.0:
        raise NoIntersectionError(
            f"no intersection of pair {pair[0].value}-{pair[1].value} with ell={ell:g}"
        )
    else:
        sig = brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)
    x1 = branch_inverse(pot, pair[0], sig, lm)
    x2 = branch_inverse(pot, pair[1], sig, lm)
    return QSPoint(float(x1), float(x2), float(sig), pair)


def _find_fold(pot: Potential, m1: float, pair, lm: Landmarks) -> float | None:
    """Largest-|sigma| interior root of the tangency indicator, if any.

    For (zero,plus) the relevant fold is approached from sigma_* downward;
    for (minus,zero) from -sigma_* upward (mirror situation).
    """
    s_star = lm.sigma_star
    eps = 1e-9 * s_star
    sigmas = np.linspace(s_star - eps, -s_star + eps, 2048)
    if pair == (Branch.MINUS, Branch.ZERO):
        sigmas = sigmas[::-1]
    z_prev = _pair_Z(pot, m1, pair, sigmas[0], lm)
    for i in range(1, len(sigmas)):
        z = _pair_Z(pot, m1, pair, sigmas[i], lm)
        if z_prev > 0.0 >= z:
            if z == 0.0:
                return float(sigmas[i])
            lo, hi = sorted((sigmas[i - 1], sigmas[i]))
            return float(brentq(lambda q: _pair_Z(pot, m1, pair, q, lm),
                                lo, hi, xtol=1e-14, rtol=8.9e-16))
        z_prev = z
    return None


def tangency(pot: Potential, m1: float, lm: Landmarks | None = None) -> float | None:
    """Multiplier at which the constraint line becomes tangent to the
    unstable-stable branch curve (discontinuous merging), or None when the
    indicator stays positive and the peaks merge continuously.
    """
    if not 0.0 < m1 < 1.0:
        raise ValueError("tangency needs 0 < m1 < 1")
    lm = lm or landmarks(pot)
    return _find_fold(pot, m1, (Branch.ZERO, Branch.PLUS), lm)


def linear_decay_rate(pot: Potential, qs: QSPoint, m1: float) -> float:
    """Relaxation rate of perturbations around a quasi-stationary point."""
    m2 = 1.0 - m1
    return m1 * float(pot.d2(qs.x2)) + m2 * float(pot.d2(qs.x1))


def qs_trajectory(pot: Potential, m1: float, path: ConstraintPath,
                  lm: Landmarks | None = None):
    """Time-parametrized quasi-stationary path with automatic pair switching.

    Returns a callable t -> QSPoint using the (minus,plus) pair below the
    corner constraint level and (zero,plus) above it.
    """
    lm = lm or landmarks(pot)
    level = corner_level(pot, m1, lm)

    def at(t: float) -> QSPoint:
        ell = float(path.ell(t))
        pair = (Branch.MINUS, Branch.PLUS) if ell <= level else (Branch.ZERO, Branch.PLUS)
        return qs_solve(pot, m1, ell, pair, lm)

    return at
