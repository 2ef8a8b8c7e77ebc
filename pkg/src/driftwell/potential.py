"""Double-well potentials and their landmark geometry.

A potential H must be even, at least C^3, with H' growing at least linearly,
a single spinodal interval (-x_*, x_*) where H'' < 0, and H'' > 0 outside it.
The inverse of H' then has three monotone branches X_-, X_0, X_+ which carry
most of the reduced models built on top of this module.

Everything here is closed-form callables plus robust scalar root finding; no
symbolic differentiation, no tabulated potentials.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq


class NotDoubleWellError(ValueError):
    """Raised when a potential fails the double-well sign structure."""


class BranchDomainError(ValueError):
    """Raised when a force value lies outside a branch domain."""


class Branch(enum.Enum):
    """The three monotone branches of the inverse of H'."""

    MINUS = "minus"
    ZERO = "zero"
    PLUS = "plus"


@dataclass(frozen=True)
class Potential:
    """Closed-form potential with analytic derivatives.

    ``eval`` is H itself; ``d1``, ``d2``, ``d3`` are its first three
    derivatives.  All callables must accept scalars and numpy arrays.
    ``s_eval`` .. ``s_d3`` are optional float-in/float-out twins used by the
    root finders and the compiled kernels; shipped potentials provide them.
    Instances are immutable and safe to share across workers.
    """

    name: str
    eval: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    params: dict = field(default_factory=dict)
    s_eval: Callable | None = None
    s_d1: Callable | None = None
    s_d2: Callable | None = None
    s_d3: Callable | None = None

    def shifted(self, x, sigma):
        """Effective (tilted) potential H(x) - sigma*x."""
        return self.eval(x) - sigma * x

    # scalar fast paths with array fallbacks
    def h(self, x: float) -> float:
        return self.s_eval(x) if self.s_eval else float(self.eval(x))

    def hp(self, x: float) -> float:
        return self.s_d1(x) if self.s_d1 else float(self.d1(x))

    def hpp(self, x: float) -> float:
        return self.s_d2(x) if self.s_d2 else float(self.d2(x))

    def hppp(self, x: float) -> float:
        return self.s_d3(x) if self.s_d3 else float(self.d3(x))


@dataclass(frozen=True)
class Landmarks:
    """Geometric landmarks of a double-well potential.

    x_star / x_starstar are the spinodal edge and the matching outer position
    with H'(x_starstar) = sigma_star = -H'(x_star).  h_crit is the central
    barrier of the untilted potential, h_star the largest barrier that occurs
    over the whole admissible tilt range.
    """

    x_star: float
    x_starstar: float
    sigma_star: float
    h_crit: float
    h_star: float


@dataclass(frozen=True)
class AssumptionReport:
    a1_even: bool
    a2_double_well: bool
    a3_concave_branches: bool
    messages: tuple

    @property
    def all_passed(self) -> bool:
        return self.a1_even and self.a2_double_well and self.a3_concave_branches


# ---------------------------------------------------------------------------
# shipped potentials
# ---------------------------------------------------------------------------

def quartic_potential(depth: float = 1.0, width: float = 1.0) -> Potential:
    """Standard quartic double well H(x) = depth * ((x/width)^2 - 1)^2."""
    d, w = float(depth), float(width)

    def h(x):
        u = (np.asarray(x, dtype=float) / w) ** 2 - 1.0
        return d * u * u

    def h1(x):
        x = np.asarray(x, dtype=float)
        return 4.0 * d * x * (x * x / (w * w) - 1.0) / (w * w)

    def h2(x):
        x = np.asarray(x, dtype=float)
        return d * (12.0 * x * x / (w ** 4) - 4.0 / (w * w))

    def h3(x):
        x = np.asarray(x, dtype=float)
        return 24.0 * d * x / (w ** 4)

    w2, w4 = w * w, w ** 4
    return Potential(
        "quartic", h, h1, h2, h3, {"depth": d, "width": w},
        s_eval=lambda x: d * (x * x / w2 - 1.0) ** 2,
        s_d1=lambda x: 4.0 * d * x * (x * x / w2 - 1.0) / w2,
        s_d2=lambda x: d * (12.0 * x * x / w4 - 4.0 / w2),
        s_d3=lambda x: 24.0 * d * x / w4,
    )


def arctan_potential(k: float = 2.0) -> Potential:
    """Double well with H'(x) = x - k*arctan(x); needs k > 1.

    The antiderivative is H(x) = x^2/2 - k*(x*arctan(x) - log(1+x^2)/2),
    which is even with H(0) = 0.
    """
    if k <= 1.0:
        raise ValueError("arctan potential needs k > 1 for a double well")
    k = float(k)

    def h(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x * x - k * (x * np.arctan(x) - 0.5 * np.log1p(x * x))

    def h1(x):
        x = np.asarray(x, dtype=float)
        return x - k * np.arctan(x)

    def h2(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - k / (1.0 + x * x)

    def h3(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * k * x / (1.0 + x * x) ** 2

    return Potential(
        "arctan", h, h1, h2, h3, {"k": k},
        s_eval=lambda x: 0.5 * x * x - k * (x * math.atan(x) - 0.5 * math.log1p(x * x)),
        s_d1=lambda x: x - k * math.atan(x),
        s_d2=lambda x: 1.0 - k / (1.0 + x * x),
        s_d3=lambda x: 2.0 * k * x / (1.0 + x * x) ** 2,
    )


_FACTORIES = {
    "quartic": quartic_potential,
    "arctan": arctan_potential,
}


def make_potential(name: str, **params) -> Potential:
    """Look up a shipped potential by name, forwarding keyword parameters."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown potential {name!r}; available: {sorted(_FACTORIES)}"
        ) from None
    return factory(**params)


def negated(pot: Potential) -> Potential:
    """Sign-flipped potential; useful to exercise assumption failures."""
    return Potential(
        f"neg-{pot.name}",
        lambda x: -pot.eval(x),
        lambda x: -pot.d1(x),
        lambda x: -pot.d2(x),
        lambda x: -pot.d3(x),
        dict(pot.params),
        s_eval=(lambda x: -pot.s_eval(x)) if pot.s_eval else None,
        s_d1=(lambda x: -pot.s_d1(x)) if pot.s_d1 else None,
        s_d2=(lambda x: -pot.s_d2(x)) if pot.s_d2 else None,
        s_d3=(lambda x: -pot.s_d3(x)) if pot.s_d3 else None,
    )


# ---------------------------------------------------------------------------
# landmarks
# ---------------------------------------------------------------------------

def _scan_bound(pot: Potential) -> float:
    """Upper scan bound: where H' growth dominates twice the force scale.

    Doubles the bound until H'(b) clears 2*sigma_star_estimate and H'' > 0,
    so that all landmark roots are bracketed inside [0, b].
    """
    b = 1.0
    for _ in range(60):
        xs = np.linspace(0.0, b, 512)
        sig_est = max(1e-30, float(np.max(-pot.d1(xs))))
        if pot.d1(b) > 2.0 * sig_est and pot.d2(b) > 0.0:
            return b
        b *= 2.0
    raise NotDoubleWellError("H' does not grow past its force scale; no scan bound")


def landmarks(pot: Potential, x_scan: float | None = None) -> Landmarks:
    """Locate x_*, x_**, sigma_*, h_crit and h_* of a double-well potential.

    Scans H'' for sign changes on a symmetric interval; anything other than
    exactly one change per half axis is rejected.
    """
    b = float(x_scan) if x_scan is not None else _scan_bound(pot)
    xs = np.linspace(-b, b, 8193)
    signs = np.sign(pot.d2(xs))
    signs[signs == 0.0] = 1.0
    flips = np.nonzero(np.diff(signs) != 0.0)[0]
    if len(flips) != 2 or pot.d2(0.0) >= 0.0:
        raise NotDoubleWellError(
            f"H'' has {len(flips)} sign changes on [-{b:g}, {b:g}] (need 2)"
        )

    i = flips[1]  # positive-side change
    x_star = brentq(pot.d2, xs[i], xs[i + 1], xtol=1e-15, rtol=8.9e-16)
    sigma_star = float(-pot.d1(x_star))
    if sigma_star <= 0.0:
        raise NotDoubleWellError("H'(x_*) must be negative inside the spinodal")

    hi = b
    while pot.d1(hi) <= sigma_star:
        hi *= 2.0
    x_starstar = brentq(lambda x: pot.d1(x) - sigma_star, x_star * (1 + 1e-12), hi,
                        xtol=1e-15, rtol=8.9e-16)
    x_plus0 = brentq(pot.d1, x_star * (1 + 1e-12), hi, xtol=1e-15, rtol=8.9e-16)

    h_crit = float(pot.eval(0.0) - pot.eval(x_plus0))
    h_star = float(
        pot.eval(x_star) - pot.eval(x_starstar) + sigma_star * (x_star + x_starstar)
    )
    return Landmarks(float(x_star), float(x_starstar), sigma_star, h_crit, h_star)


# ---------------------------------------------------------------------------
# branch inverses
# ---------------------------------------------------------------------------

_RESIDUAL_TOL = 1e-12
_EDGE_TOL = 1e-13


def _newton_bracketed(f, df, lo: float, hi: float, flo: float, fhi: float) -> float:
    """Root of f on [lo, hi] by Newton with a bisection safeguard.

    f(lo) and f(hi) must have opposite (or zero) signs; converges to machine
    x-accuracy and polishes the residual below 1e-12 where the slope allows.
    Hand-rolled because this sits inside triply nested solves and must avoid
    per-call overhead.
    """
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo > 0.0:  # normalize to f(lo) < 0 < f(hi)
        lo, hi, flo, fhi = hi, lo, fhi, flo
    x = 0.5 * (lo + hi)
    for _ in range(120):
        fx = f(x)
        if abs(fx) <= 1e-13:
            return x
        if fx < 0.0:
            lo = x
        else:
            hi = x
        dfx = df(x)
        if dfx != 0.0:
            step = fx / dfx
            x_new = x - step
        else:
            x_new = lo + 0.5 * (hi - lo)
        if not (min(lo, hi) < x_new < max(lo, hi)):
            x_new = lo + 0.5 * (hi - lo)
        if abs(x_new - x) <= 1e-15 * (1.0 + abs(x_new)):
            x = x_new
            break
        x = x_new
        if abs(hi - lo) <= 1e-15 * (1.0 + abs(x)):
            break
    return x


def _solve_increasing(pot: Potential, sigma: float, lo: float, hi: float) -> float:
    """Root of H'(x) = sigma on [lo, hi] where H' is increasing."""
    f = lambda x: pot.hp(x) - sigma
    return float(_newton_bracketed(f, pot.hpp, lo, hi, f(lo), f(hi)))


def branch_inverse(pot: Potential, branch: Branch, sigma: float,
                   lm: Landmarks | None = None) -> float:
    """Evaluate X_minus, X_zero or X_plus at the force value sigma.

    Evenness of H is exploited: X_minus(s) = -X_plus(-s) and
    X_zero(-s) = -X_zero(s), so only the right half axis is ever solved.
    """
    lm = lm or landmarks(pot)
    s_star = lm.sigma_star
    sigma = float(sigma)

    if branch is Branch.MINUS:
        if sigma > s_star + _EDGE_TOL:
            raise BranchDomainError(f"X_minus needs sigma <= sigma_* ({sigma:g} > {s_star:g})")
        return -branch_inverse(pot, Branch.PLUS, -sigma, lm)

    if branch is Branch.ZERO:
        if abs(sigma) > s_star + _EDGE_TOL:
            raise BranchDomainError(f"X_zero needs |sigma| <= sigma_* (got {sigma:g})")
        if sigma < 0.0:
            return -branch_inverse(pot, Branch.ZERO, -sigma, lm)
        if sigma >= s_star - _EDGE_TOL:
            return -lm.x_star
        if sigma == 0.0:
            return 0.0
        # H' decreases from sigma_star to -sigma_star across [-x_*, x_*];
        # for sigma in (0, sigma_*) the root sits in (-x_*, 0).
        g = lambda x: pot.hp(x) - sigma
        return float(_newton_bracketed(g, pot.hpp, -lm.x_star, 0.0,
                                       g(-lm.x_star), g(0.0)))

    # PLUS branch
    if sigma < -s_star - _EDGE_TOL:
        raise BranchDomainError(f"X_plus needs sigma >= -sigma_* ({sigma:g} < {-s_star:g})")
    if sigma <= -s_star + _EDGE_TOL:
        return lm.x_star
    hi = max(2.0 * lm.x_starstar, 1.0)
    while pot.hp(hi) < sigma:
        hi *= 2.0
    return _solve_increasing(pot, sigma, lm.x_star, hi)


def barrier_heights(pot: Potential, sigma: float,
                    lm: Landmarks | None = None) -> tuple[float, float]:
    """Barriers h_-(sigma), h_+(sigma) of the tilted potential H - sigma*x.

    h_pm is the height of the saddle at X_0 above the well at X_pm; defined
    for |sigma| < sigma_*.
    """
    lm = lm or landmarks(pot)
    if abs(sigma) >= lm.sigma_star:
        raise BranchDomainError("barrier heights need |sigma| < sigma_*")
    x0 = branch_inverse(pot, Branch.ZERO, sigma, lm)
    xm = branch_inverse(pot, Branch.MINUS, sigma, lm)
    xp = branch_inverse(pot, Branch.PLUS, sigma, lm)
    top = pot.h(x0) - sigma * x0
    return (float(top - (pot.h(xm) - sigma * xm)),
            float(top - (pot.h(xp) - sigma * xp)))


def barrier_slopes(pot: Potential, sigma: float,
                   lm: Landmarks | None = None) -> tuple[float, float]:
    """Analytic d h_pm / d sigma = X_pm(sigma) - X_0(sigma) (envelope identity)."""
    lm = lm or landmarks(pot)
    x0 = branch_inverse(pot, Branch.ZERO, sigma, lm)
    xm = branch_inverse(pot, Branch.MINUS, sigma, lm)
    xp = branch_inverse(pot, Branch.PLUS, sigma, lm)
    return float(xm - x0), float(xp - x0)


def curvatures(pot: Potential, sigma: float,
               lm: Landmarks | None = None) -> tuple[float, float, float]:
    """|H''| at the three critical points of the tilted potential."""
    lm = lm or landmarks(pot)
    if abs(sigma) >= lm.sigma_star:
        raise BranchDomainError("curvatures need |sigma| < sigma_*")
    return tuple(
        abs(pot.hpp(branch_inverse(pot, br, sigma, lm)))
        for br in (Branch.MINUS, Branch.ZERO, Branch.PLUS)
    )


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------

def verify_assumptions(pot: Potential, n_samples: int = 2001) -> AssumptionReport:
    """Check evenness, double-well structure and branch concavity numerically.

    Failures are reported, never raised, so broken potentials can be examined.
    """
    msgs = []

    xs = np.linspace(0.0, 4.0, n_samples)
    scale = float(np.max(np.abs(pot.eval(xs)))) + 1.0
    a1 = bool(np.max(np.abs(pot.eval(xs) - pot.eval(-xs))) <= 1e-11 * scale)
    if not a1:
        msgs.append("A1: H is not even on the sampled grid")

    try:
        lm = landmarks(pot)
        inner = np.linspace(-lm.x_star * (1 - 1e-6), lm.x_star * (1 - 1e-6), n_samples)
        outer = np.linspace(lm.x_star * (1 + 1e-6), 3.0 * lm.x_starstar, n_samples)
        a2 = bool(np.all(pot.d2(inner) < 0.0) and np.all(pot.d2(outer) > 0.0))
        if not a2:
            msgs.append("A2: H'' sign pattern violates the monotone-branch layout")
    except (NotDoubleWellError, ValueError) as exc:
        lm = None
        a2 = False
        msgs.append(f"A2: {exc}")

    a3 = False
    if a2 and lm is not None:
        # Geometric condition behind the merging analysis: the unstable-stable
        # branch curve x2 = X_plus(H'(x1)) is concave on the spinodal interval.
        # For an even H the mirrored curve X_minus o H' is then automatically
        # convex, which is the form the decreasing-constraint case needs.
        xs3 = np.linspace(-lm.x_star * (1 - 1e-7), lm.x_star * (1 - 1e-7), 401)
        ok = True
        gp = np.array([branch_inverse(pot, Branch.PLUS, float(pot.d1(x)), lm) for x in xs3])
        gm = np.array([branch_inverse(pot, Branch.MINUS, float(pot.d1(x)), lm) for x in xs3])
        # 1e-8 slack absorbs branch-inversion noise in the second differences
        if np.max(gp[:-2] - 2.0 * gp[1:-1] + gp[2:]) > 1e-8:
            ok = False
            msgs.append("A3: X_plus o H' not concave on the spinodal interval")
        if np.min(gm[:-2] - 2.0 * gm[1:-1] + gm[2:]) < -1e-8:
            ok = False
            msgs.append("A3: X_minus o H' not convex on the spinodal interval")
        a3 = ok
    elif not a2:
        msgs.append("A3: skipped (A2 failed)")

    return AssumptionReport(a1, a2, a3, tuple(msgs))
