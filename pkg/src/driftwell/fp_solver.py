"""Conservative grid solver for the constrained drift-diffusion law.

Space is discretized by an exponential-fitting finite-volume flux (see
_kernels), which preserves positivity for any step, conserves mass by
construction and reproduces the cell-sampled Gibbs density as its exact
fixed point.  Diffusion and drift are advanced together implicitly through
one tridiagonal solve; the multiplier is chosen each step so that the
discrete first moment lands exactly on the constraint target, which is the
discrete counterpart of the closure relation sigma = int H' rho + tau ell_dot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import FP_CFL, FP_CONSTRAINT, fp_run_kernel, pwm_run_kernel
from .constraint import ConstraintPath
from .potential import Landmarks, Potential, landmarks


class CFLViolation(RuntimeError):
    pass


class ConstraintUnreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid; symmetric grids get exactly mirrored centers."""

    x_lo: float
    x_hi: float
    n_cells: int
    centers: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.x_hi <= self.x_lo or self.n_cells < 8:
            raise ValueError("need x_lo < x_hi and at least 8 cells")
        dx = (self.x_hi - self.x_lo) / self.n_cells
        if abs(self.x_lo + self.x_hi) < 1e-14 * (self.x_hi - self.x_lo):
            c = dx * (np.arange(self.n_cells) - (self.n_cells - 1) / 2.0)
        else:
            c = self.x_lo + dx * (np.arange(self.n_cells) + 0.5)
        object.__setattr__(self, "centers", c)

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells


def default_grid(pot: Potential, nu: float, lm: Landmarks | None = None) -> Grid:
    """Symmetric domain wide enough that boundary mass stays below roundoff.

    Half-width x_** + 4 max(1, 8 nu); resolution dx <= nu/4 with at least
    512 cells, rounded up to an even count so the midline is a cell face.
    """
    lm = lm or landmarks(pot)
    half = lm.x_starstar + 4.0 * max(1.0, 8.0 * nu)
    n = max(512, int(math.ceil(2.0 * half / (nu / 4.0))))
    n += n % 2
    return Grid(-half, half, n)


@dataclass
class DensityField:
    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def mass(self) -> float:
        return float(math.fsum(self.values.tolist()) * self.grid.dx)

    def moment(self) -> float:
        return float(math.fsum((self.grid.centers * self.values).tolist())
                     * self.grid.dx)


@dataclass(frozen=True)
class Observables:
    t: float
    ell_hat: float
    y: float
    m_minus: float
    m_plus: float
    energy: float
    h_int: float
    entropy: float
    dissipation: float
    sigma: float
    width: float


@dataclass
class FpRunResult:
    t: np.ndarray
    ell_hat: np.ndarray
    sigma: np.ndarray
    y: np.ndarray
    m_minus: np.ndarray
    m_plus: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    h_int: np.ndarray
    dissipation: np.ndarray
    width: np.ndarray
    snapshots: list          # (t, values) pairs at requested times
    final: DensityField
    sigma_steps: np.ndarray  # multiplier accepted at every step
    t_steps: np.ndarray
    min_rho: float
    max_mass_dev: float
    max_moment_resid: float
    x2: np.ndarray | None = None   # point-peak path for the pwm variant


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------

def init_gaussian(pot: Potential, ell0: float, nu: float, grid: Grid) -> DensityField:
    """Local-equilibrium Gaussian at ell0 with stiffness H''(ell0).

    Mass is renormalized to one exactly; the discrete mean matches ell0 up
    to sampling error, which is far below dx^2 for resolved widths.
    """
    alpha = float(pot.d2(ell0))
    if alpha <= 0.0:
        raise ValueError(f"nonconvex initialization point: H''({ell0:g}) <= 0")
    x = grid.centers
    vals = np.exp(-alpha * (x - ell0) ** 2 / (2.0 * nu ** 2))
    vals /= math.fsum(vals.tolist()) * grid.dx
    return DensityField(grid, vals, 0.0)


def normalized(grid: Grid, values, t: float = 0.0) -> DensityField:
    """Wrap raw nonnegative values as a unit-mass density field."""
    vals = np.asarray(values, dtype=float).copy()
    if np.any(vals < 0.0):
        raise ValueError("density values must be nonnegative")
    vals /= math.fsum(vals.tolist()) * grid.dx
    return DensityField(grid, vals, t)


def equilibrium(pot: Potential, sigma: float, nu: float, grid: Grid) -> DensityField:
    """Gibbs density of the tilted potential, max-shifted before exponentiation."""
    x = grid.centers
    hs = pot.eval(x) - sigma * x
    vals = np.exp(-(hs - np.min(hs)) / nu ** 2)
    vals /= math.fsum(vals.tolist()) * grid.dx
    return DensityField(grid, vals, 0.0)


def multiplier(rho: DensityField, pot: Potential, tau: float,
               ell_dot: float) -> float:
    """Continuous-time closure sigma = int H' rho dx + tau ell_dot.

    Diagnostic counterpart of the per-step moment solve.
    """
    x = rho.grid.centers
    return float(np.dot(pot.d1(x), rho.values) * rho.grid.dx + tau * ell_dot)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def observables(field_or_values, pot: Potential, nu: float, tau: float,
                sigma: float, grid: Grid | None = None,
                t: float = 0.0) -> Observables:
    if isinstance(field_or_values, DensityField):
        grid = field_or_values.grid
        vals = field_or_values.values
        t = field_or_values.t
    else:
        vals = np.asarray(field_or_values)
    x = grid.centers
    dx = grid.dx
    mom = float(np.dot(x, vals) * dx)
    y = float(np.dot(pot.d1(x), vals) * dx)
    half = grid.n_cells // 2
    m_minus = float(np.sum(vals[:half]) * dx)
    m_plus = float(np.sum(vals[half:]) * dx)
    h_int = float(np.dot(pot.eval(x), vals) * dx)
    pos = vals > 0.0
    entropy = float(-nu ** 2 * np.sum(vals[pos] * np.log(vals[pos])) * dx)
    rho_face = 0.5 * (vals[1:] + vals[:-1])
    u_face = np.diff(pot.eval(x) - sigma * x) / dx
    grad = np.diff(vals) / dx
    num = (u_face * rho_face + nu ** 2 * grad) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(rho_face > 0.0, num / rho_face, 0.0)
    dissipation = float(np.sum(integrand) * dx / tau)
    var = float(np.dot(x * x, vals) * dx) - mom * mom
    width = math.sqrt(max(var, 0.0))
    return Observables(t, mom, y, m_minus, m_plus, h_int - entropy, h_int,
                       entropy, dissipation, sigma, width)


# ---------------------------------------------------------------------------
# stepping and run drivers
# ---------------------------------------------------------------------------

MOMENT_TOL = 5e-15
CFL_FACTOR = 0.5
ACTIVE_FLOOR = 1e-12


def _face_increments(pot: Potential, grid: Grid) -> np.ndarray:
    h = pot.eval(grid.centers)
    return np.diff(h)


def _run_speed_scale(pot: Potential, nu: float, ell_lo: float, ell_hi: float,
                     lm: Landmarks) -> float:
    """Envelope of |H' - sigma| over the region that can carry mass.

    Mass stays within the hull of the constraint range and the outer branch
    positions plus a tail margin; the multiplier is bounded by the force
    needed to hold a peak anywhere on the constraint path.
    """
    margin = max(1.0, 10.0 * nu)
    lo = min(ell_lo, -lm.x_starstar) - margin
    hi = max(ell_hi, lm.x_starstar) + margin
    xs = np.linspace(lo, hi, 2049)
    hmax = float(np.max(np.abs(pot.d1(xs))))
    ps = np.linspace(ell_lo, ell_hi, 513)
    sigma_max = max(lm.sigma_star, float(np.max(np.abs(pot.d1(ps)))))
    return hmax + sigma_max + 1.0


def default_dt(pot: Potential, nu: float, tau: float, grid: Grid,
               ell_lo: float, ell_hi: float,
               lm: Landmarks | None = None) -> float:
    lm = lm or landmarks(pot)
    v = _run_speed_scale(pot, nu, ell_lo, ell_hi, lm)
    return CFL_FACTOR * tau * grid.dx / v


def _raise_on_status(status: int, k_done: int):
    if status == FP_CFL:
        raise CFLViolation(
            f"CFL violation at step {k_done}: dt exceeds the advective bound"
        )
    if status == FP_CONSTRAINT:
        raise ConstraintUnreachable(
            f"constraint unreachable at step {k_done}: moment solve degenerated"
        )


def step(rho: DensityField, pot: Potential, nu: float, tau: float,
         path: ConstraintPath, dt: float,
         sigma_hint: float | None = None) -> tuple[DensityField, float]:
    """One implicit step; returns the new field and the accepted multiplier."""
    grid = rho.grid
    target = float(path.ell(rho.t + dt))
    sig0 = sigma_hint if sigma_hint is not None else multiplier(
        rho, pot, tau, float(path.ell_dot(rho.t)))
    kernel = fp_run_kernel()
    vals = rho.values.copy()
    sigma_out = np.zeros(1)
    diag = np.zeros(3)
    store_steps = np.empty(0, dtype=np.int64)
    store_out = np.empty((0, grid.n_cells))
    k_done, sigma, status = kernel(
        vals, _face_increments(pot, grid), grid.centers,
        np.asarray(pot.d1(grid.centers), dtype=float), grid.dx, nu ** 2, tau,
        dt, np.array([target]), sig0, MOMENT_TOL, CFL_FACTOR, ACTIVE_FLOOR,
        store_steps, store_out, sigma_out, diag)
    _raise_on_status(status, k_done)
    return DensityField(grid, vals, rho.t + dt), float(sigma)


def run(pot: Potential, nu: float, tau: float, path: ConstraintPath,
        t0: float, t_end: float, grid: Grid | None = None,
        dt: float | None = None, initial: DensityField | None = None,
        n_obs: int = 1201, snapshot_times=(),
        lm: Landmarks | None = None) -> FpRunResult:
    """Integrate the constrained law and record observables and snapshots."""
    lm = lm or landmarks(pot)
    grid = grid or default_grid(pot, nu, lm)
    ells = np.array([float(path.ell(t)) for t in np.linspace(t0, t_end, 257)])
    if dt is None:
        dt = default_dt(pot, nu, tau, grid, float(np.min(ells)),
                        float(np.max(ells)), lm)
    n_steps = max(1, int(math.ceil((t_end - t0) / dt)))
    dt_eff = (t_end - t0) / n_steps

    if initial is None:
        initial = init_gaussian(pot, float(path.ell(t0)), nu, grid)
    vals = initial.values.copy()

    targets = np.array([float(path.ell(t0 + (k + 1) * dt_eff))
                        for k in range(n_steps)])

    obs_steps = np.unique(np.clip(np.round(
        np.linspace(0, n_steps, n_obs)).astype(np.int64), 0, n_steps))
    snap_steps = np.unique(np.clip(np.round(
        (np.asarray(list(snapshot_times), dtype=float) - t0) / dt_eff
    ).astype(np.int64), 0, n_steps)) if len(snapshot_times) else np.empty(0, np.int64)
    store_steps = np.unique(np.concatenate([obs_steps, snap_steps]))
    store_steps = store_steps[store_steps > 0]
    store_out = np.empty((len(store_steps), grid.n_cells))
    sigma_out = np.zeros(n_steps)
    diag = np.zeros(3)

    sig0 = multiplier(initial, pot, tau, float(path.ell_dot(t0)))
    kernel = fp_run_kernel()
    k_done, _, status = kernel(
        vals, _face_increments(pot, grid), grid.centers,
        np.asarray(pot.d1(grid.centers), dtype=float), grid.dx, nu ** 2, tau,
        dt_eff, targets, sig0, MOMENT_TOL, CFL_FACTOR, ACTIVE_FLOOR,
        store_steps, store_out, sigma_out, diag)
    _raise_on_status(status, k_done)

    return _assemble(pot, nu, tau, grid, t0, dt_eff, n_steps, initial, vals,
                     sig0, sigma_out, store_steps, store_out, obs_steps,
                     snap_steps, diag, None)


def pwm_run(pot: Potential, nu: float, tau: float, path: ConstraintPath,
            m1: float, x2_0: float, t0: float, t_end: float,
            grid: Grid | None = None, dt: float | None = None,
            initial: DensityField | None = None, n_obs: int = 1201,
            snapshot_times=(), lm: Landmarks | None = None) -> FpRunResult:
    """Grid density carrying mass m1 coupled to a point peak of mass m2.

    The combined first moment m1 * mean(rho) + m2 * x2 tracks the
    constraint; with m2 = 0 the trajectories coincide with run().
    """
    lm = lm or landmarks(pot)
    if not 0.0 < m1 <= 1.0:
        raise ValueError("need 0 < m1 <= 1")
    m2 = 1.0 - m1
    if m2 > 0.0 and not x2_0 > lm.x_star:
        raise ValueError("point peak must start in the right stable region")
    grid = grid or default_grid(pot, nu, lm)
    ells = np.array([float(path.ell(t)) for t in np.linspace(t0, t_end, 257)])
    if dt is None:
        dt = default_dt(pot, nu, tau, grid, float(np.min(ells)),
                        float(np.max(ells)), lm)
    n_steps = max(1, int(math.ceil((t_end - t0) / dt)))
    dt_eff = (t_end - t0) / n_steps

    if initial is None:
        ell_grid0 = (float(path.ell(t0)) - m2 * x2_0) / m1
        initial = init_gaussian(pot, ell_grid0, nu, grid)
    vals = initial.values.copy()

    targets = np.array([float(path.ell(t0 + (k + 1) * dt_eff))
                        for k in range(n_steps)])
    obs_steps = np.unique(np.clip(np.round(
        np.linspace(0, n_steps, n_obs)).astype(np.int64), 0, n_steps))
    snap_steps = np.unique(np.clip(np.round(
        (np.asarray(list(snapshot_times), dtype=float) - t0) / dt_eff
    ).astype(np.int64), 0, n_steps)) if len(snapshot_times) else np.empty(0, np.int64)
    store_steps = np.unique(np.concatenate([obs_steps, snap_steps]))
    store_steps = store_steps[store_steps > 0]
    store_out = np.empty((len(store_steps), grid.n_cells))
    sigma_out = np.zeros(n_steps)
    x2_out = np.zeros(n_steps)
    diag = np.zeros(3)
    x2_box = np.array([float(x2_0)])

    sig0 = (m1 * float(np.dot(pot.d1(grid.centers), initial.values) * grid.dx)
            + m2 * float(pot.d1(x2_0)) + tau * float(path.ell_dot(t0)))
    kernel = pwm_run_kernel(pot)
    k_done, _, status = kernel(
        vals, x2_box, m1, m2, _face_increments(pot, grid), grid.centers,
        np.asarray(pot.d1(grid.centers), dtype=float), grid.dx, nu ** 2, tau,
        dt_eff, targets, sig0, MOMENT_TOL, CFL_FACTOR, ACTIVE_FLOOR,
        store_steps, store_out, x2_out, sigma_out, diag)
    _raise_on_status(status, k_done)

    return _assemble(pot, nu, tau, grid, t0, dt_eff, n_steps, initial, vals,
                     sig0, sigma_out, store_steps, store_out, obs_steps,
                     snap_steps, diag, np.concatenate([[x2_0], x2_out]))


def _assemble(pot, nu, tau, grid, t0, dt_eff, n_steps, initial, final_vals,
              sig0, sigma_out, store_steps, store_out, obs_steps, snap_steps,
              diag, x2_full):
    rows = {0: initial.values}
    for idx, kstep in enumerate(store_steps):
        rows[int(kstep)] = store_out[idx]
    sigma_at = lambda k: sig0 if k == 0 else float(sigma_out[k - 1])

    obs_list = []
    for k in obs_steps:
        k = int(k)
        obs_list.append(observables(rows[k], pot, nu, tau, sigma_at(k),
                                    grid=grid, t=t0 + k * dt_eff))
    snaps = [(t0 + int(k) * dt_eff, rows[int(k)].copy()) for k in snap_steps]

    arr = lambda name: np.array([getattr(o, name) for o in obs_list])
    return FpRunResult(
        t=arr("t"), ell_hat=arr("ell_hat"), sigma=arr("sigma"), y=arr("y"),
        m_minus=arr("m_minus"), m_plus=arr("m_plus"), energy=arr("energy"),
        entropy=arr("entropy"), h_int=arr("h_int"),
        dissipation=arr("dissipation"), width=arr("width"),
        snapshots=snaps,
        final=DensityField(grid, final_vals, t0 + n_steps * dt_eff),
        sigma_steps=sigma_out,
        t_steps=t0 + dt_eff * np.arange(1, n_steps + 1),
        min_rho=float(diag[0]), max_mass_dev=float(diag[1]),
        max_moment_resid=float(diag[2]),
        x2=(None if x2_full is None else
            x2_full[np.clip(obs_steps, 0, n_steps)]),
    )
