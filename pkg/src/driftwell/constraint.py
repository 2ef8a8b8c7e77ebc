"""Driving protocols: the prescribed first moment ell(t) and its rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ConstraintPath:
    """Prescribed constraint ell(t) with its time derivative.

    ``monotone`` asserts that ell_dot stays within positive bounds
    ``rate_bounds = (c, C)`` on the run interval; several reduced models
    require this.
    """

    ell: Callable[[float], float]
    ell_dot: Callable[[float], float]
    monotone: bool = False
    rate_bounds: tuple[float, float] | None = None

    def __call__(self, t):
        return self.ell(t)


def linear_path(c0: float, c1: float) -> ConstraintPath:
    """ell(t) = c0 + c1*t."""
    c0, c1 = float(c0), float(c1)
    return ConstraintPath(
        ell=lambda t: c0 + c1 * np.asarray(t, dtype=float),
        ell_dot=lambda t: c1 * np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else c1,
        monotone=c1 > 0.0,
        rate_bounds=(c1, c1) if c1 > 0.0 else None,
    )


def piecewise_linear_path(times, values) -> ConstraintPath:
    """Piecewise-linear ell through (times[i], values[i]); flat extrapolation."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.shape != vs.shape or len(ts) < 2:
        raise ValueError("need matching 1-d breakpoint arrays with >= 2 points")
    if np.any(np.diff(ts) <= 0.0):
        raise ValueError("breakpoint times must be strictly increasing")
    slopes = np.diff(vs) / np.diff(ts)

    def ell(t):
        return np.interp(t, ts, vs)

    def ell_dot(t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(ts, t_arr, side="right") - 1, 0, len(slopes) - 1)
        out = slopes[idx]
        out = np.where((t_arr < ts[0]) | (t_arr > ts[-1]), 0.0, out)
        return float(out) if np.ndim(t) == 0 else out

    rising = bool(np.all(slopes > 0.0))
    return ConstraintPath(
        ell=ell,
        ell_dot=ell_dot,
        monotone=rising,
        rate_bounds=(float(np.min(slopes)), float(np.max(slopes))) if rising else None,
    )
