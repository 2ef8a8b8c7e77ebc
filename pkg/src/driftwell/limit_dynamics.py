"""Slow-reaction limit as an event-driven hybrid system.

Between events the state is a single peak or a pair of peaks pinned to the
branches of the inverse force map; masses are frozen, the multiplier sigma
follows the constraint algebraically, and the widening variable phi of an
unstable peak accumulates the spinodal curvature.  Events fire when sigma
hits +-sigma_*, when phi reaches -a, or when the tangency indicator of an
unstable-stable pair vanishes; jump rules then relabel masses, consult the
mass-transfer function for splittings, and restart the next leg.

Legs are integrated exactly: sigma(t) comes from a scalar root-find per
sample (the constraint differentiates into the usual rate equations, so this
is the same dynamics without drift), and event times are located by
bracketing plus bisection on the active boundary function.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .constraint import ConstraintPath
from .mass_splitting import run_split
from .potential import Branch, Landmarks, Potential, branch_inverse, landmarks
from .two_peaks import NoIntersectionError, qs_solve, _find_fold


class Config(enum.Enum):
    S_MINUS = "S-"
    S_ZERO = "S0"
    S_PLUS = "S+"
    T_MINUS_PLUS = "T-+"
    T_MINUS_ZERO = "T-0"
    T_ZERO_PLUS = "T0+"


class EventKind(enum.Enum):
    SWITCHING = "switching"
    INVERSE_SWITCHING = "inverse-switching"
    SPLITTING = "splitting"
    MERGING_CONTINUOUS = "merging-continuous"
    MERGING_DISCONTINUOUS = "merging-discontinuous"


_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class LimitState:
    config: Config
    m_minus: float
    m_zero: float
    m_plus: float
    sigma: float
    phi: float
    t: float

    @property
    def masses(self) -> tuple[float, float, float]:
        return (self.m_minus, self.m_zero, self.m_plus)


@dataclass(frozen=True)
class EventRecord:
    t_event: float
    kind: EventKind
    pre: LimitState
    post: LimitState
    d_sigma: float
    d_energy: float
    note: str = ""


@dataclass
class LimitTrajectory:
    t: np.ndarray
    config: list
    m_minus: np.ndarray
    m_zero: np.ndarray
    m_plus: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    energy: np.ndarray
    events: list


class EventLoopError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration algebra
# ---------------------------------------------------------------------------

def _A(pot: Potential, branch: Branch, sigma: float, lm: Landmarks) -> float:
    return float(pot.d2(branch_inverse(pot, branch, sigma, lm)))


def config_branches(config: Config) -> tuple:
    return {
        Config.S_MINUS: (Branch.MINUS,),
        Config.S_ZERO: (Branch.ZERO,),
        Config.S_PLUS: (Branch.PLUS,),
        Config.T_MINUS_PLUS: (Branch.MINUS, Branch.PLUS),
        Config.T_MINUS_ZERO: (Branch.MINUS, Branch.ZERO),
        Config.T_ZERO_PLUS: (Branch.ZERO, Branch.PLUS),
    }[config]


def _mass_of(state: LimitState, branch: Branch) -> float:
    return {Branch.MINUS: state.m_minus, Branch.ZERO: state.m_zero,
            Branch.PLUS: state.m_plus}[branch]


def state_ell(state: LimitState, pot: Potential, lm: Landmarks) -> float:
    """Constraint value carried by the massive peaks."""
    total = 0.0
    for br in config_branches(state.config):
        total += _mass_of(state, br) * branch_inverse(pot, br, state.sigma, lm)
    return total


def state_energy(state: LimitState, pot: Potential, lm: Landmarks) -> float:
    e = 0.0
    for br in config_branches(state.config):
        e += _mass_of(state, br) * float(pot.eval(branch_inverse(pot, br, state.sigma, lm)))
    return e


def tangency_indicator(state: LimitState, pot: Potential, lm: Landmarks) -> float | None:
    """Z_{-0} or Z_{0+} for the unstable-stable pairs, None elsewhere."""
    s = state.sigma
    if state.config is Config.T_ZERO_PLUS:
        return (state.m_zero * _A(pot, Branch.PLUS, s, lm)
                + state.m_plus * _A(pot, Branch.ZERO, s, lm))
    if state.config is Config.T_MINUS_ZERO:
        return (state.m_minus * _A(pot, Branch.ZERO, s, lm)
                + state.m_zero * _A(pot, Branch.MINUS, s, lm))
    return None


def validate_state(state: LimitState, pot: Potential, a: float,
                   lm: Landmarks | None = None) -> None:
    """Membership conditions: mass pattern, sigma range, phi range, Z > 0."""
    lm = lm or landmarks(pot)
    mm, m0, mp = state.masses
    if abs(mm + m0 + mp - 1.0) > 1e-10:
        raise ValueError("masses must sum to 1")
    if min(mm, m0, mp) < -1e-12:
        raise ValueError("masses must be nonnegative")
    if mm * m0 * mp > 1e-12:
        raise ValueError("at most two peaks may carry mass")
    s, s_star = state.sigma, lm.sigma_star
    cfg = state.config
    zero_mass = {Config.S_MINUS: (m0, mp), Config.S_ZERO: (mm, mp),
                 Config.S_PLUS: (mm, m0), Config.T_MINUS_PLUS: (m0,),
                 Config.T_MINUS_ZERO: (mp,), Config.T_ZERO_PLUS: (mm,)}[cfg]
    if any(abs(m) > 1e-12 for m in zero_mass):
        raise ValueError(f"mass pattern inconsistent with {cfg.value}")
    lo, hi = {
        Config.S_MINUS: (-np.inf, s_star), Config.S_PLUS: (-s_star, np.inf),
        Config.S_ZERO: (-s_star, s_star), Config.T_MINUS_PLUS: (-s_star, s_star),
        Config.T_MINUS_ZERO: (-s_star, s_star), Config.T_ZERO_PLUS: (-s_star, s_star),
    }[cfg]
    if not lo - _BOUNDARY_TOL <= s <= hi + _BOUNDARY_TOL:
        raise ValueError(f"sigma={s:g} outside the range of {cfg.value}")
    if cfg in (Config.S_ZERO, Config.T_MINUS_ZERO, Config.T_ZERO_PLUS):
        if not -a - _BOUNDARY_TOL <= state.phi <= 1e-12:
            raise ValueError(f"phi={state.phi:g} outside [-a, 0]")
    elif abs(state.phi) > 1e-12:
        raise ValueError("phi must be 0 in configurations without an unstable peak")
    z = tangency_indicator(state, pot, lm)
    if z is not None and z < -_BOUNDARY_TOL:
        raise ValueError("tangency indicator must stay nonnegative")


def single_peak_state(pot: Potential, ell0: float, t0: float = 0.0,
                      lm: Landmarks | None = None) -> LimitState:
    """Well-prepared single peak at ell0, classified by region."""
    lm = lm or landmarks(pot)
    sigma = float(pot.d1(ell0))
    if ell0 <= -lm.x_star:
        cfg, masses = Config.S_MINUS, (1.0, 0.0, 0.0)
    elif ell0 >= lm.x_star:
        cfg, masses = Config.S_PLUS, (0.0, 0.0, 1.0)
    else:
        cfg, masses = Config.S_ZERO, (0.0, 1.0, 0.0)
    return LimitState(cfg, *masses, sigma=sigma, phi=0.0, t=t0)


# ---------------------------------------------------------------------------
# regular dynamics
# ---------------------------------------------------------------------------

def regular_rhs(state: LimitState, pot: Potential, ell_dot: float,
                lm: Landmarks | None = None,
                a: float | None = None) -> tuple[float, float]:
    """(sigma_dot, phi_dot) on a regular segment.

    Masses are frozen.  For single peaks sigma_dot = A_i(sigma) * ell_dot;
    for pairs the constraint gives sigma_dot = ell_dot A_i A_j / Z_ij.  The
    widening variable integrates the spinodal curvature while m_0 > 0.
    """
    lm = lm or landmarks(pot)
    s = state.sigma
    s_star = lm.sigma_star
    cfg = state.config

    at_edge = False
    if cfg in (Config.S_ZERO, Config.T_MINUS_PLUS, Config.T_MINUS_ZERO,
               Config.T_ZERO_PLUS):
        at_edge = abs(abs(s) - s_star) <= _BOUNDARY_TOL
    elif cfg is Config.S_MINUS:
        at_edge = abs(s - s_star) <= _BOUNDARY_TOL
    elif cfg is Config.S_PLUS:
        at_edge = abs(s + s_star) <= _BOUNDARY_TOL
    if a is not None and state.m_zero > 0.0 and state.phi <= -a + _BOUNDARY_TOL:
        at_edge = True
    z = tangency_indicator(state, pot, lm)
    if z is not None and z <= _BOUNDARY_TOL:
        at_edge = True
    if at_edge:
        raise ValueError("at event boundary")

    branches = config_branches(cfg)
    if len(branches) == 1:
        sigma_dot = _A(pot, branches[0], s, lm) * ell_dot
    else:
        ai = _A(pot, branches[0], s, lm)
        aj = _A(pot, branches[1], s, lm)
        zz = _mass_of(state, branches[0]) * aj + _mass_of(state, branches[1]) * ai
        sigma_dot = ell_dot * ai * aj / zz
    phi_dot = _A(pot, Branch.ZERO, s, lm) if state.m_zero > 0.0 else 0.0
    return float(sigma_dot), float(phi_dot)


# ---------------------------------------------------------------------------
# event detection and jumps
# ---------------------------------------------------------------------------

def detect_event(state: LimitState, pot: Potential, a: float,
                 ell_dot: float = 1.0,
                 lm: Landmarks | None = None) -> EventKind | None:
    """Classify the boundary a state sits on, None in the interior.

    Direction of crossing comes from the sign of sigma_dot implied by
    ell_dot.  Simultaneous boundaries resolve by the documented priority
    splitting > merging > switching.
    """
    lm = lm or landmarks(pot)
    s_star = lm.sigma_star
    cfg, s = state.config, state.sigma

    if state.m_zero > 0.0 and state.phi <= -a + _BOUNDARY_TOL:
        return EventKind.SPLITTING

    z = tangency_indicator(state, pot, lm)
    if z is not None and abs(z) <= _BOUNDARY_TOL:
        return EventKind.MERGING_DISCONTINUOUS

    at_plus = abs(s - s_star) <= _BOUNDARY_TOL
    at_minus = abs(s + s_star) <= _BOUNDARY_TOL
    if not (at_plus or at_minus):
        return None

    # sign of sigma_dot just inside the boundary
    try:
        probe = replace(state, sigma=s - np.sign(s) * 1e-7 * s_star)
        sigma_dot, _ = regular_rhs(probe, pot, ell_dot, lm)
    except ValueError:
        sigma_dot = ell_dot

    if cfg is Config.S_MINUS and at_plus:
        return EventKind.SWITCHING if sigma_dot > 0 else None
    if cfg is Config.S_PLUS and at_minus:
        return EventKind.SWITCHING if sigma_dot < 0 else None
    if cfg is Config.S_ZERO:
        # Table row: inverse switching; a forward exit is relabelled as
        # trivial continuous merging by the integrator
        return EventKind.INVERSE_SWITCHING
    if cfg is Config.T_MINUS_PLUS:
        if (at_plus and sigma_dot > 0) or (at_minus and sigma_dot < 0):
            return EventKind.SWITCHING
        return None
    if cfg is Config.T_ZERO_PLUS:
        if at_minus:
            return EventKind.MERGING_CONTINUOUS
        return EventKind.INVERSE_SWITCHING if sigma_dot > 0 else None
    if cfg is Config.T_MINUS_ZERO:
        if at_plus:
            return EventKind.MERGING_CONTINUOUS
        return EventKind.INVERSE_SWITCHING if sigma_dot < 0 else None
    return None


def _solve_sigma(pot: Potential, cfg: Config, masses, ell: float,
                 lm: Landmarks) -> float:
    """Invert ell = sum m_i X_i(sigma) on the configuration's branch set."""
    mm, m0, mp = masses
    if cfg in (Config.S_MINUS, Config.S_ZERO, Config.S_PLUS):
        return float(pot.d1(ell))
    if cfg is Config.T_MINUS_PLUS:
        qs = qs_solve(pot, mm, ell, (Branch.MINUS, Branch.PLUS), lm)
    elif cfg is Config.T_ZERO_PLUS:
        qs = qs_solve(pot, m0, ell, (Branch.ZERO, Branch.PLUS), lm)
    else:
        qs = qs_solve(pot, mm, ell, (Branch.MINUS, Branch.ZERO), lm)
    return qs.sigma


def _relabel(masses) -> tuple[Config, tuple[float, float, float]]:
    """Configuration label for a mass triple, zero-mass peaks dropped."""
    mm, m0, mp = masses
    mm = 0.0 if mm < 1e-14 else mm
    m0 = 0.0 if m0 < 1e-14 else m0
    mp = 0.0 if mp < 1e-14 else mp
    pattern = (mm > 0.0, m0 > 0.0, mp > 0.0)
    table = {
        (True, False, False): Config.S_MINUS,
        (False, True, False): Config.S_ZERO,
        (False, False, True): Config.S_PLUS,
        (True, False, True): Config.T_MINUS_PLUS,
        (True, True, False): Config.T_MINUS_ZERO,
        (False, True, True): Config.T_ZERO_PLUS,
    }
    return table[pattern], (mm, m0, mp)


def apply_jump(state: LimitState, kind: EventKind, pot: Potential,
               mass_split: Callable[[float, float], float] | None = None,
               lm: Landmarks | None = None) -> LimitState:
    """Update rules at a singular event.

    Switching swaps the mass labels across the spinodal edge and keeps
    everything continuous; inverse switching also resets phi.  Splitting
    consults the mass-transfer function, empties the unstable peak and
    reinitializes sigma from the constraint.  Merging pools the pair into
    the surviving stable peak with sigma = H'(ell).
    """
    lm = lm or landmarks(pot)
    s_star = lm.sigma_star
    mm, m0, mp = state.masses
    ell = state_ell(state, pot, lm)
    provider = mass_split or (lambda m, s: run_split(pot, m, s, lm=lm).m12)

    if kind is EventKind.SWITCHING:
        if state.sigma >= 0.0:
            masses = (m0, mm, mp)      # m_- <-> m_0 at +sigma_*
        else:
            masses = (mm, mp, m0)      # m_0 <-> m_+ at -sigma_*
        cfg, masses = _relabel(masses)
        return LimitState(cfg, *masses, sigma=state.sigma, phi=state.phi, t=state.t)

    if kind is EventKind.INVERSE_SWITCHING:
        if state.sigma >= 0.0:
            masses = (m0, mm, mp)
        else:
            masses = (mm, mp, m0)
        cfg, masses = _relabel(masses)
        return LimitState(cfg, *masses, sigma=state.sigma, phi=0.0, t=state.t)

    if kind is EventKind.SPLITTING:
        if m0 <= 0.0:
            raise ValueError("splitting needs an unstable peak")
        if state.config is Config.T_MINUS_ZERO:
            # companion on the left: reflecting space turns this into the
            # standard problem at tilt -sigma, whose rightward transfer is
            # the mass joining the left companion here
            m_to_left = provider(m0, -state.sigma)
            m_to_left = min(max(m_to_left, 0.0), m0)
            new = (mm + m_to_left, 0.0, mp + (m0 - m_to_left))
        else:
            m12 = provider(m0, state.sigma)
            m12 = min(max(m12, 0.0), m0)
            new = (mm + (m0 - m12), 0.0, mp + m12)
        cfg, masses = _relabel(new)
        sigma = _solve_sigma(pot, cfg, masses, ell, lm)
        return LimitState(cfg, *masses, sigma=sigma, phi=0.0, t=state.t)

    if kind in (EventKind.MERGING_CONTINUOUS, EventKind.MERGING_DISCONTINUOUS):
        sigma = float(pot.d1(ell))
        if state.config is Config.T_ZERO_PLUS:
            masses = (0.0, 0.0, 1.0)   # into S_+
        elif state.config is Config.T_MINUS_ZERO:
            masses = (1.0, 0.0, 0.0)   # into S_-
        elif state.config is Config.S_ZERO:
            # trivial continuous merging: the lone peak leaves the spinodal
            masses = (0.0, 0.0, 1.0) if ell >= 0.0 else (1.0, 0.0, 0.0)
        else:
            raise ValueError(f"merging undefined from {state.config.value}")
        cfg, masses = _relabel(masses)
        return LimitState(cfg, *masses, sigma=sigma, phi=0.0, t=state.t)

    raise ValueError(f"unknown event kind {kind}")


# ---------------------------------------------------------------------------
# exact leg integration
# ---------------------------------------------------------------------------

def _next_crossing(path: ConstraintPath, level: float, t_lo: float, t_hi: float,
                   n_scan: int = 4097) -> float | None:
    """Earliest t in (t_lo, t_hi] where ell(t) crosses the level.

    A leg often starts within roundoff of its own boundary level, so values
    inside a small dead band around the level are treated as "on" it; the
    path must leave the band before a crossing back counts.  Excursions
    shorter than the scan resolution (span/4096) are not representable.
    """
    if t_hi <= t_lo:
        return None
    ts = np.linspace(t_lo, t_hi, n_scan)
    vals = np.asarray(path.ell(ts), dtype=float) - level
    band = 1e-11 * max(1.0, abs(level))
    off = np.nonzero(np.abs(vals) > band)[0]
    if len(off) == 0:
        return None
    f = lambda t: float(path.ell(t)) - level
    last_off = int(off[0])
    sign_ref = np.sign(vals[last_off])
    for i in range(last_off + 1, len(ts)):
        v = vals[i]
        if abs(v) <= band:
            continue
        if np.sign(v) != sign_ref:
            return float(brentq(f, ts[last_off], ts[i], xtol=1e-13, rtol=8.9e-16))
        last_off = i
    return None


class _SigmaTable:
    """Monotone sigma(ell) lookup for one leg, brentq-polished per query."""

    def __init__(self, pot, cfg, masses, lm, n=513):
        self.pot, self.cfg, self.masses, self.lm = pot, cfg, masses, lm
        branches = config_branches(cfg)
        s_star = lm.sigma_star
        if cfg is Config.T_ZERO_PLUS:
            fold = _find_fold(pot, masses[1], (Branch.ZERO, Branch.PLUS), lm)
            lo = fold if fold is not None else -s_star
            hi = s_star
        elif cfg is Config.T_MINUS_ZERO:
            fold = _find_fold(pot, masses[0], (Branch.MINUS, Branch.ZERO), lm)
            lo = -s_star
            hi = fold if fold is not None else s_star
        else:
            fold = None
            lo, hi = -s_star, s_star
        self.fold = fold
        grid = np.linspace(lo, hi, n)
        ells = np.empty(n)
        for k, s in enumerate(grid):
            ells[k] = sum(
                _mass_of_masses(masses, br) * branch_inverse(pot, br, float(s), lm)
                for br in branches
            )
        order = np.argsort(ells)
        self.ell_grid = ells[order]
        self.sigma_grid = grid[order]
        self.branches = branches

    def __call__(self, ell: float) -> float:
        # local bracket from the table, then Newton with bisection safeguard
        from .potential import _newton_bracketed

        j = int(np.clip(np.searchsorted(self.ell_grid, ell) - 1, 0,
                        len(self.ell_grid) - 2))
        lo = min(self.sigma_grid[j], self.sigma_grid[j + 1])
        hi = max(self.sigma_grid[j], self.sigma_grid[j + 1])
        pot, lm, masses, branches = self.pot, self.lm, self.masses, self.branches

        def g(s):
            return sum(
                _mass_of_masses(masses, br) * branch_inverse(pot, br, s, lm)
                for br in branches
            ) - ell

        def dg(s):
            tot = 0.0
            for br in branches:
                c = pot.hpp(branch_inverse(pot, br, s, lm))
                if c == 0.0:
                    return 0.0
                tot += _mass_of_masses(masses, br) / c
            return tot

        glo, ghi = g(lo), g(hi)
        if abs(glo) <= 1e-13:
            return float(lo)
        if abs(ghi) <= 1e-13:
            return float(hi)
        if glo * ghi > 0.0:  # query at (or just past) the table edge
            return float(self.sigma_grid[j] if abs(glo) < abs(ghi) else self.sigma_grid[j + 1])
        return float(_newton_bracketed(g, dg, lo, hi, glo, ghi))


def _mass_of_masses(masses, branch: Branch) -> float:
    return {Branch.MINUS: masses[0], Branch.ZERO: masses[1],
            Branch.PLUS: masses[2]}[branch]


class _Leg:
    """One regular segment: sigma solver, phi accumulator, event candidates."""

    def __init__(self, pot, state, a, path, t_end, lm, entry_level=None):
        self.pot, self.state, self.a, self.path, self.lm = pot, state, a, path, lm
        self.t0 = state.t
        self.t_end = t_end
        cfg = state.config
        mm, m0, mp = state.masses
        xs, xss = lm.x_star, lm.x_starstar

        if cfg in (Config.S_MINUS, Config.S_ZERO, Config.S_PLUS):
            self.solve_sigma = lambda ell: float(pot.d1(ell))
        else:
            self.table = _SigmaTable(pot, cfg, state.masses, lm)
            self.solve_sigma = self.table

        # (ell level, event kind, sigma value pinned at the event)
        lv = []
        if cfg is Config.S_MINUS:
            lv.append((-xs, EventKind.SWITCHING, lm.sigma_star))
        elif cfg is Config.S_PLUS:
            lv.append((xs, EventKind.SWITCHING, -lm.sigma_star))
        elif cfg is Config.S_ZERO:
            for level, sig in ((xs, -lm.sigma_star), (-xs, lm.sigma_star)):
                if entry_level is not None and abs(level - entry_level) < 1e-12:
                    kind = EventKind.INVERSE_SWITCHING
                else:
                    kind = EventKind.MERGING_CONTINUOUS
                lv.append((level, kind, sig))
        elif cfg is Config.T_MINUS_PLUS:
            lv.append((-mm * xs + mp * xss, EventKind.SWITCHING, lm.sigma_star))
            lv.append((-mm * xss + mp * xs, EventKind.SWITCHING, -lm.sigma_star))
        elif cfg is Config.T_ZERO_PLUS:
            if self.table.fold is not None:
                z = self.table.fold
                lev = (m0 * branch_inverse(pot, Branch.ZERO, z, lm)
                       + mp * branch_inverse(pot, Branch.PLUS, z, lm))
                lv.append((lev, EventKind.MERGING_DISCONTINUOUS, z))
            else:
                lv.append((xs, EventKind.MERGING_CONTINUOUS, -lm.sigma_star))
            lv.append((-m0 * xs + mp * xss, EventKind.INVERSE_SWITCHING, lm.sigma_star))
        elif cfg is Config.T_MINUS_ZERO:
            if self.table.fold is not None:
                z = self.table.fold
                lev = (mm * branch_inverse(pot, Branch.MINUS, z, lm)
                       + m0 * branch_inverse(pot, Branch.ZERO, z, lm))
                lv.append((lev, EventKind.MERGING_DISCONTINUOUS, z))
            else:
                lv.append((-xs, EventKind.MERGING_CONTINUOUS, lm.sigma_star))
            lv.append((-mm * xss + m0 * xs, EventKind.INVERSE_SWITCHING, -lm.sigma_star))
        self.level_events = lv
        self.has_phi = m0 > 0.0
        self._phi_cache = None

    def sigma_at(self, t: float) -> float:
        return self.solve_sigma(float(self.path.ell(t)))

    def _curvature_at(self, t: float) -> float:
        return float(self.pot.d2(branch_inverse(
            self.pot, Branch.ZERO, self.sigma_at(t), self.lm)))

    def _phi_grid(self, t_hi: float, n=1025):
        cached = self._phi_cache
        if cached is not None and cached[0] >= t_hi - 1e-15:
            return cached[1], cached[2]
        ts = np.linspace(self.t0, max(t_hi, self.t0 + 1e-15), n)
        a0 = np.array([self._curvature_at(float(t)) for t in ts])
        mids = np.array([self._curvature_at(float(t))
                         for t in 0.5 * (ts[1:] + ts[:-1])])
        h = ts[1] - ts[0]
        seg = h * (a0[:-1] + 4.0 * mids + a0[1:]) / 6.0  # Simpson per segment
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        self._phi_cache = (t_hi, ts, self.state.phi + cum)
        return ts, self.state.phi + cum

    def phi_at(self, t: float, t_hi: float) -> float:
        if not self.has_phi:
            return 0.0
        ts, phis = self._phi_grid(t_hi)
        return float(np.interp(t, ts, phis))

    def next_event(self):
        """(t_event, kind, pinned sigma or None) or (None, None, None)."""
        candidates = []
        for level, kind, sig_pin in self.level_events:
            t_hit = _next_crossing(self.path, level, self.t0, self.t_end)
            if t_hit is not None:
                candidates.append((t_hit, kind, sig_pin))
        horizon = min([c[0] for c in candidates], default=self.t_end)
        if self.has_phi and self.a is not None:
            t_sp = self._phi_event(horizon)
            if t_sp is not None:
                candidates.append((t_sp, EventKind.SPLITTING, None))
        if not candidates:
            return None, None, None
        # priority at (numerically) identical times: splitting > merging > switching
        rank = {EventKind.SPLITTING: 0, EventKind.MERGING_DISCONTINUOUS: 1,
                EventKind.MERGING_CONTINUOUS: 1, EventKind.SWITCHING: 2,
                EventKind.INVERSE_SWITCHING: 2}
        t_min = min(c[0] for c in candidates)
        near = [c for c in candidates if c[0] <= t_min + 1e-12]
        near.sort(key=lambda c: rank[c[1]])
        return near[0]

    def _phi_event(self, t_hi: float) -> float | None:
        ts, phis = self._phi_grid(t_hi)
        target = -self.a
        if phis[-1] > target:
            return None
        idx = int(np.argmax(phis <= target))
        if idx == 0:
            return float(ts[0])
        # refine with quadrature between grid nodes
        g = lambda t: self.phi_fine(ts[idx - 1], phis[idx - 1], t) - target
        return float(brentq(g, ts[idx - 1], ts[idx], xtol=1e-12, rtol=8.9e-16))

    def phi_fine(self, t_ref: float, phi_ref: float, t: float) -> float:
        val, _ = quad(
            lambda s: float(self.pot.d2(branch_inverse(
                self.pot, Branch.ZERO, self.sigma_at(float(s)), self.lm))),
            t_ref, t, epsabs=1e-11, epsrel=1e-12, limit=100)
        return phi_ref + val


def integrate(pot: Potential, a: float, path: ConstraintPath, init: LimitState,
              t_end: float,
              mass_split: Callable[[float, float], float] | None = None,
              n_samples: int = 1201, max_events: int = 256,
              lm: Landmarks | None = None) -> LimitTrajectory:
    """Run the hybrid system: exact regular legs alternating with jumps.

    Each leg solves sigma algebraically from the constraint (no drift),
    locates its earliest boundary event by bracketing and bisection, applies
    the jump rule, and continues until t_end or the event budget is spent.
    """
    lm = lm or landmarks(pot)
    validate_state(init, pot, a, lm)
    sample_ts = np.linspace(init.t, t_end, n_samples)
    cfg_out: list = [None] * n_samples
    arrs = {k: np.full(n_samples, np.nan) for k in
            ("m_minus", "m_zero", "m_plus", "sigma", "phi", "energy")}
    events: list[EventRecord] = []

    state = init
    entry_level = None
    for _ in range(max_events):
        leg = _Leg(pot, state, a, path, t_end, lm, entry_level)
        t_ev, kind, sig_pin = leg.next_event()
        t_stop = t_end if t_ev is None else t_ev

        in_leg = (sample_ts >= state.t - 1e-15) & (sample_ts <= t_stop + 1e-15)
        for idx in np.nonzero(in_leg)[0]:
            if cfg_out[idx] is not None:
                continue
            tk = float(sample_ts[idx])
            sig = leg.sigma_at(tk)
            cfg_out[idx] = state.config.value
            arrs["m_minus"][idx], arrs["m_zero"][idx], arrs["m_plus"][idx] = state.masses
            arrs["sigma"][idx] = sig
            arrs["phi"][idx] = leg.phi_at(tk, t_stop)
            arrs["energy"][idx] = state_energy(
                replace(state, sigma=sig), pot, lm)

        if t_ev is None:
            break

        phi_ev = -a if kind is EventKind.SPLITTING else leg.phi_at(t_ev, t_ev)
        sigma_ev = leg.sigma_at(t_ev) if sig_pin is None else float(sig_pin)
        pre = replace(state, sigma=sigma_ev, phi=phi_ev, t=t_ev)
        post = apply_jump(pre, kind, pot, mass_split, lm)
        d_sigma = post.sigma - pre.sigma
        d_energy = state_energy(post, pot, lm) - state_energy(pre, pot, lm)
        note = ""
        if kind is EventKind.MERGING_CONTINUOUS and pre.config is Config.S_ZERO:
            note = "trivial"
        events.append(EventRecord(t_ev, kind, pre, post, d_sigma, d_energy, note))
        if d_energy > 1e-8:
            raise EventLoopError(
                f"energy increased by {d_energy:g} at {kind.value}; jump rule violated"
            )
        entry_level = float(path.ell(t_ev)) if kind in (
            EventKind.SWITCHING,) else None
        state = post
    else:
        raise EventLoopError(f"event budget {max_events} exceeded")

    return LimitTrajectory(sample_ts, cfg_out, arrs["m_minus"], arrs["m_zero"],
                           arrs["m_plus"], arrs["sigma"], arrs["phi"],
                           arrs["energy"], events)


# ---------------------------------------------------------------------------
# closed-form next event for constant rates
# ---------------------------------------------------------------------------

def next_event_constant_rate(pot: Potential, m1: float, m2: float, a: float,
                             ell_dot: float,
                             lm: Landmarks | None = None):
    """Next singular event on an unstable-stable leg under constant drive.

    Just after a switching the pair (m1 at X_0, m2 at X_+) moves with sigma
    decreasing from sigma_*.  Parametrizing by sigma, splitting happens when
    the accumulated spinodal curvature reaches a*ell_dot, discontinuous
    merging when the tangency indicator vanishes, continuous merging at
    -sigma_*; whichever its sigma value is reached first wins.  Returns
    (kind, sigma_event, dt_since_switching).
    """
    if ell_dot <= 0.0:
        raise ValueError("constant-rate formulas need ell_dot > 0")
    lm = lm or landmarks(pot)
    s_star = lm.sigma_star

    def Z(s):
        return (m1 * _A(pot, Branch.PLUS, s, lm)
                + m2 * _A(pot, Branch.ZERO, s, lm))

    from .two_peaks import tangency

    sigma_z = tangency(pot, m1, lm) if 0.0 < m1 < 1.0 else None

    def G(s):
        # integral of Z / H''(X_+) from s to sigma_*; integrand is smooth
        val, _ = quad(lambda q: Z(q) / _A(pot, Branch.PLUS, q, lm), s, s_star,
                      epsabs=1e-12, epsrel=1e-11, limit=200)
        return val

    target = a * ell_dot
    floor = sigma_z if sigma_z is not None else -s_star * (1.0 - 1e-10)
    if G(floor) >= target:
        sigma_ev = brentq(lambda s: G(s) - target, floor, s_star * (1.0 - 1e-14),
                          xtol=1e-12, rtol=8.9e-16)
        kind = EventKind.SPLITTING
    elif sigma_z is not None:
        sigma_ev, kind = sigma_z, EventKind.MERGING_DISCONTINUOUS
    else:
        sigma_ev, kind = -s_star, EventKind.MERGING_CONTINUOUS

    # dt via the sigma-parametrized time integral; substitute sigma = s* - u^2
    # to absorb the inverse-square-root vanishing of H''(X_0) at the corner
    u_max = np.sqrt(max(s_star - sigma_ev, 0.0))

    def time_integrand(u):
        s = s_star - u * u
        if s <= -s_star:
            return 0.0
        a0 = _A(pot, Branch.ZERO, s, lm)
        ap = _A(pot, Branch.PLUS, s, lm)
        if a0 == 0.0:
            # limiting value 2u/|A_0| -> 2/sqrt(2*gamma) at the corner
            gamma = float(-pot.d3(-lm.x_star))
            return Z(s) / ap * 2.0 / np.sqrt(2.0 * gamma)
        return Z(s) / (abs(a0) * ap) * 2.0 * u

    dt, _ = quad(time_integrand, 0.0, u_max, epsabs=1e-12, epsrel=1e-10,
                 limit=200)
    return kind, float(sigma_ev), float(dt / ell_dot)
