"""Deterministic width law for a peak inside the spinodal region.

Once a peak crosses -x_* the separation of characteristics widens it at the
local exponential rate -H''(x1(t))/tau.  With the noise amplitude coupled to
the relaxation time by nu = exp(-a/tau), widening aggregates into

    w(t)^2 = (1/tau) * exp(-(2 phi(t) + 2 a)/tau) * int_t0^t exp(2 phi(s)/tau) ds,
    phi(t) = int_{t1}^t H''(x1(s)) ds,

so the width stays exponentially small until phi reaches -a and then explodes
on the tau scale.  All exponentials are evaluated in log domain: the
exponents scale like 1/tau and overflow otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import logsumexp

from .potential import Landmarks, Potential, landmarks


@dataclass(frozen=True)
class WidthState:
    phi: float
    w2: float
    t: float


def phi_of_t(x1_path: Callable[[float], float], pot: Potential,
             t1: float, t: float) -> float:
    """Accumulated widening exponent int_{t1}^t H''(x1(s)) ds."""
    if t == t1:
        return 0.0
    val, _ = quad(lambda s: float(pot.d2(x1_path(s))), t1, t,
                  epsabs=1e-10, epsrel=1e-12, limit=200)
    return float(val)


def _phi_grid(x1_path, pot, t1, t0, t, n):
    """Cumulative Simpson of H''(x1) on a uniform grid over [t0, t],
    anchored so that phi(t1) = 0 even when t1 lies outside the grid."""
    ts = np.linspace(t0, t, n)
    f = np.array([float(pot.d2(x1_path(s))) for s in ts])
    h = ts[1] - ts[0]
    mids = np.array([float(pot.d2(x1_path(s))) for s in 0.5 * (ts[1:] + ts[:-1])])
    seg = h * (f[:-1] + 4.0 * mids + f[1:]) / 6.0  # Simpson per segment
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    return ts, cum + phi_of_t(x1_path, pot, t1, t0)


def _log_expm1_over(z: np.ndarray) -> np.ndarray:
    """log((exp(z) - 1)/z), stable over the whole real line."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    tiny = np.abs(z) < 1e-8
    big = z > 36.0
    neg = z < -36.0
    mid = ~(tiny | big | neg)
    out[tiny] = 0.5 * z[tiny]
    out[big] = z[big] - np.log(z[big])
    out[neg] = -np.log(-z[neg])
    with np.errstate(divide="ignore"):
        out[mid] = np.log(np.expm1(z[mid]) / z[mid])
    return out


def width_squared(x1_path: Callable[[float], float], pot: Potential,
                  tau: float, a: float, t0: float, t1: float, t: float,
                  n_nodes: int = 513) -> float:
    """Squared width at time t, evaluated in log domain.

    The inner integral int_{t0}^t exp(2 phi(s)/tau) ds uses a piecewise
    exponential rule: phi is taken linear on each segment, for which the
    segment integral is exact, and everything combines through log-sum-exp
    so exponents of order 1/tau never overflow.
    """
    if t <= t0:
        return 0.0
    log_i = None
    n = n_nodes
    for _ in range(6):
        ts, phis = _phi_grid(x1_path, pot, t1, t0, t, n)
        h = ts[1] - ts[0]
        z = 2.0 * np.diff(phis) / tau  # exponent change per segment
        seg_logs = 2.0 * phis[:-1] / tau + np.log(h) + _log_expm1_over(z)
        cand = float(logsumexp(seg_logs))
        if log_i is not None and abs(cand - log_i) < 1e-11 * max(1.0, abs(cand)):
            log_i = cand
            break
        log_i = cand
        n = 2 * n - 1
    phi_t = phi_of_t(x1_path, pot, t1, t)
    return float(np.exp(log_i - (2.0 * phi_t + 2.0 * a) / tau - np.log(tau)))


def splitting_time(x1_path: Callable[[float], float], pot: Potential,
                   a: float, t1: float, t3: float) -> float | None:
    """First root of phi(t) + a on (t1, t3), or None when phi never gets there.

    phi decreases strictly past t1 (H'' < 0 along a spinodal path), so a sign
    scan plus bisection localizes the root to 1e-10.
    """
    if a <= 0.0:
        raise ValueError("widening parameter a must be positive")
    g = lambda t: phi_of_t(x1_path, pot, t1, t) + a
    if g(t3) > 0.0:
        return None
    ts = np.linspace(t1, t3, 257)
    vals = np.array([g(float(s)) for s in ts])
    idx = int(np.argmax(vals <= 0.0))
    if vals[idx] > 0.0:
        return None
    if idx == 0:
        return float(ts[0])
    return float(brentq(g, ts[idx - 1], ts[idx], xtol=1e-10, rtol=8.9e-16))


def beta_at(pot: Potential, x1_t2: float, lm: Landmarks | None = None) -> float:
    """Local exponential profile rate -H''(x1) > 0 of the exploding width."""
    lm = lm or landmarks(pot)
    if abs(x1_t2) > lm.x_star:
        raise ValueError("not in spinodal region")
    return float(-pot.d2(x1_t2))
