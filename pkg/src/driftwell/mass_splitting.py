"""Mass-splitting problem: how an exploding unstable peak divides its mass.

A Gaussian-shaped unstable peak at X_0(sigma_tilde) with mass m1, together
with a stable point peak carrying m2, evolves under pure constrained
transport (no diffusion, rescaled time).  Characteristics fall into the two
stable wells; the fraction that ends on the far side defines the transfer
function M(m1, sigma_tilde).  The ensemble discretization restricts to N
characteristics at symmetric Gaussian quantile offsets and integrates the
coupled system with explicit Euler, which conserves the constraint to
roundoff by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfinv

from ._kernels import msm_advance
from .potential import Branch, Landmarks, Potential, branch_inverse, landmarks


@dataclass(frozen=True)
class CharacteristicEnsemble:
    xi: np.ndarray          # characteristic positions, sorted ascending
    x2: float               # stable point peak
    m1: float
    m2: float
    s: float                # rescaled time
    ell: float              # conserved constraint value
    mirror: bool = False    # True: companion peak sits on the minus branch


@dataclass(frozen=True)
class MassSplitResult:
    m12: float              # mass transferred to the region right of x_*
    x_hat1: float
    x_hat2: float
    sigma_hat: float
    n12: int                # characteristics ending left of the saddle
    converged: bool
    s_end: float
    ell: float
    ell_drift: float        # |final constraint - initial constraint|
    mirror: bool = False

    def final_masses(self, m1: float, m2: float) -> tuple[float, float]:
        """(left, right) masses after the split, companion included."""
        left = m1 - self.m12
        right = self.m12
        if self.mirror:
            return left + m2, right
        return left, right + m2


class NotConvergedError(RuntimeError):
    pass


DEFAULT_N = 2000
DEFAULT_S_MAX = 200.0
DEFAULT_DS = 1e-3
SPEED_TOL = 1e-8


def default_eps(lm: Landmarks) -> float:
    # initial cloud must sit deep inside the spinodal interval
    return 1e-3 * lm.x_star


def init_ensemble(pot: Potential, m1: float, sigma_tilde: float, N: int,
                  eps: float | None = None, mirror: bool = False,
                  lm: Landmarks | None = None) -> CharacteristicEnsemble:
    """Gaussian-quantile ensemble around the unstable position X_0(sigma_tilde).

    Quantile levels are the midpoints (n-1/2)/N; the literal n/N rule would
    put the last characteristic at infinity.  Offsets are symmetric, so the
    ensemble mean is exactly the unstable position.
    """
    lm = lm or landmarks(pot)
    if not 0.0 < m1 <= 1.0:
        raise ValueError("need 0 < m1 <= 1")
    if abs(sigma_tilde) >= lm.sigma_star:
        raise ValueError("need |sigma_tilde| < sigma_*")
    if N < 2:
        raise ValueError("need at least two characteristics")
    eps = default_eps(lm) if eps is None else float(eps)
    if not 0.0 < eps < lm.x_star:
        raise ValueError("eps must be positive and well inside the spinodal width")

    x1t = branch_inverse(pot, Branch.ZERO, sigma_tilde, lm)
    companion = Branch.MINUS if mirror else Branch.PLUS
    x2t = branch_inverse(pot, companion, sigma_tilde, lm)

    levels = (np.arange(1, N + 1) - 0.5) / N
    q = erfinv(2.0 * levels - 1.0)
    xi = x1t + eps * q
    m2 = 1.0 - m1
    ell = m1 * x1t + m2 * x2t
    return CharacteristicEnsemble(xi, float(x2t), float(m1), float(m2), 0.0,
                                  float(ell), mirror)


def ensemble_ell(ens: CharacteristicEnsemble) -> float:
    return ens.m1 * float(np.mean(ens.xi)) + ens.m2 * ens.x2


def ensemble_energy(pot: Potential, ens: CharacteristicEnsemble) -> float:
    return ens.m1 * float(np.mean(pot.eval(ens.xi))) + ens.m2 * float(pot.eval(ens.x2))


def msm_step(ens: CharacteristicEnsemble, pot: Potential,
             ds: float) -> CharacteristicEnsemble:
    """One explicit Euler step of the constrained transport system."""
    if ds <= 0.0:
        raise ValueError("ds must be positive")
    advance = msm_advance(pot)
    xi = ens.xi.copy()
    x2_box = np.array([ens.x2])
    advance(xi, x2_box, ens.m1, ens.m2, ds, 1, 0.0)
    return replace(ens, xi=xi, x2=float(x2_box[0]), s=ens.s + ds)


def run_split(pot: Potential, m1: float, sigma_tilde: float, N: int = DEFAULT_N,
              eps: float | None = None, s_max: float = DEFAULT_S_MAX,
              ds: float = DEFAULT_DS, mirror: bool = False,
              lm: Landmarks | None = None,
              raise_on_failure: bool = True) -> MassSplitResult:
    """Integrate the ensemble to its frozen state and classify the outcome.

    Stops when every transport speed falls below 1e-8 (or s_max is hit).
    A characteristic ending right of the final saddle X_0(sigma_hat) counts
    toward the transferred mass m12.
    """
    lm = lm or landmarks(pot)
    ens = init_ensemble(pot, m1, sigma_tilde, N, eps, mirror, lm)
    advance = msm_advance(pot)
    xi = ens.xi.copy()
    x2_box = np.array([ens.x2])
    max_steps = int(round(s_max / ds))
    steps, sigma_hat, ok = advance(xi, x2_box, ens.m1, ens.m2, ds, max_steps,
                                   SPEED_TOL)
    if not ok and raise_on_failure:
        raise NotConvergedError(
            f"ensemble not frozen after s={s_max:g} (m1={m1:g}, sigma={sigma_tilde:g})"
        )

    x_saddle = branch_inverse(pot, Branch.ZERO, _clip_sigma(sigma_hat, lm), lm)
    n_right = int(np.sum(xi > x_saddle))
    n12 = N - n_right
    m12 = m1 * n_right / N

    right = xi[xi > x_saddle]
    left = xi[xi <= x_saddle]
    sig = _clip_sigma(sigma_hat, lm)
    x_hat2 = float(np.mean(right)) if n_right else branch_inverse(pot, Branch.PLUS, sig, lm)
    x_hat1 = float(np.mean(left)) if n12 else branch_inverse(pot, Branch.MINUS, sig, lm)
    ell_end = (ens.m1 * math.fsum(xi.tolist()) / N + ens.m2 * float(x2_box[0]))
    return MassSplitResult(float(m12), x_hat1, x_hat2, float(sigma_hat), n12,
                           bool(ok), steps * ds, ens.ell,
                           abs(ell_end - ens.ell), mirror)


def _clip_sigma(sigma: float, lm: Landmarks) -> float:
    s = lm.sigma_star * (1.0 - 1e-12)
    return min(max(sigma, -s), s)


def transfer_fraction(pot: Potential, m_unstable: float, sigma_tilde: float,
                      mirror: bool = False, N: int = DEFAULT_N,
                      eps: float | None = None,
                      lm: Landmarks | None = None) -> float:
    """M(m1, sigma_tilde): mass moved rightward across the saddle."""
    return run_split(pot, m_unstable, sigma_tilde, N=N, eps=eps, mirror=mirror,
                     lm=lm).m12


def tabulate_M(pot: Potential, m1_grid, sigma_grid, N: int = DEFAULT_N,
               eps: float | None = None, lm: Landmarks | None = None,
               workers: int = 1) -> list[dict]:
    """One run_split per (m1, sigma_tilde) cell; failures recorded, not fatal."""
    lm = lm or landmarks(pot)
    cells = [(float(m1), float(s)) for m1 in m1_grid for s in sigma_grid]
    if workers > 1:
        # potentials carry closures, so workers rebuild them from the registry
        import multiprocessing as mp

        args = [(pot.name, pot.params, m1, s, N, eps) for m1, s in cells]
        with mp.get_context("spawn").Pool(workers) as pool:
            rows = pool.starmap(_tabulate_cell_named, args)
    else:
        rows = [_tabulate_cell(pot, m1, s, N, eps) for m1, s in cells]
    return rows


def _tabulate_cell_named(pot_name, pot_params, m1, sigma_tilde, N, eps):
    from .potential import make_potential

    return _tabulate_cell(make_potential(pot_name, **pot_params), m1,
                          sigma_tilde, N, eps)


def _tabulate_cell(pot, m1, sigma_tilde, N, eps):
    try:
        res = run_split(pot, m1, sigma_tilde, N=N, eps=eps, raise_on_failure=False)
        return {
            "m1": m1, "sigma_tilde": sigma_tilde, "m12": res.m12,
            "x_hat1": res.x_hat1, "x_hat2": res.x_hat2,
            "sigma_hat": res.sigma_hat, "converged": res.converged,
        }
    except Exception:  # noqa: BLE001 - per-cell failures must not kill the sweep
        return {
            "m1": m1, "sigma_tilde": sigma_tilde, "m12": float("nan"),
            "x_hat1": float("nan"), "x_hat2": float("nan"),
            "sigma_hat": float("nan"), "converged": False,
        }


class MTable:
    """Bilinear interpolant over a tabulated transfer function.

    Drop-in provider for the limit dynamics: call with (m1, sigma_tilde).
    """

    def __init__(self, m1_values, sigma_values, m12_matrix):
        self.m1_values = np.asarray(m1_values, dtype=float)
        self.sigma_values = np.asarray(sigma_values, dtype=float)
        self.m12 = np.asarray(m12_matrix, dtype=float)
        if self.m12.shape != (len(self.m1_values), len(self.sigma_values)):
            raise ValueError("m12 matrix shape does not match the grids")
        if np.any(np.isnan(self.m12)):
            raise ValueError("table contains failed cells")

    @classmethod
    def from_rows(cls, rows):
        m1s = sorted({r["m1"] for r in rows})
        sigs = sorted({r["sigma_tilde"] for r in rows})
        mat = np.full((len(m1s), len(sigs)), np.nan)
        for r in rows:
            mat[m1s.index(r["m1"]), sigs.index(r["sigma_tilde"])] = r["m12"]
        return cls(m1s, sigs, mat)

    def __call__(self, m1: float, sigma_tilde: float) -> float:
        mv, sv = self.m1_values, self.sigma_values
        i = int(np.clip(np.searchsorted(mv, m1) - 1, 0, len(mv) - 2))
        j = int(np.clip(np.searchsorted(sv, sigma_tilde) - 1, 0, len(sv) - 2))
        tm = np.clip((m1 - mv[i]) / (mv[i + 1] - mv[i]), 0.0, 1.0)
        ts = np.clip((sigma_tilde - sv[j]) / (sv[j + 1] - sv[j]), 0.0, 1.0)
        z = self.m12
        val = ((1 - tm) * (1 - ts) * z[i, j] + tm * (1 - ts) * z[i + 1, j]
               + (1 - tm) * ts * z[i, j + 1] + tm * ts * z[i + 1, j + 1])
        return float(min(max(val, 0.0), m1))
