"""Declarative scenario files: parsing, validation, defaults echo, dispatch.

A scenario is a single INI-style document selecting one model and its
parameters.  Parsing fills documented defaults and records the effective
configuration, which re-parses to the same scenario (round-trip property);
dispatch runs the selected solver and writes its CSV/JSON artifacts plus a
meta.json carrying the potential landmarks for downstream figure scripts.
All algorithms are deterministic, so identical scenarios produce identical
output bytes.
"""

from __future__ import annotations

import configparser
import io as _io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fast_reaction, fp_solver, limit_dynamics, mass_splitting, two_peaks
from .constraint import ConstraintPath, linear_path, piecewise_linear_path
from .io import fmt, write_csv, write_json
from .potential import Potential, landmarks, make_potential, verify_assumptions
from .two_peaks import TwoPeaksState

MODELS = ("fp", "pwm", "tpm", "msm", "limit", "kramers", "qs", "classify",
          "tabulate-M", "verify")


class ScenarioError(ValueError):
    """Validation failure; message carries the offending key path."""


@dataclass
class Scenario:
    model: str
    name: str
    potential_name: str
    potential_params: dict
    constraint_kind: str | None
    c0: float | None
    c1: float | None
    times: list | None
    values: list | None
    t0: float
    t_end: float
    params: dict
    grid: dict | None
    snapshot_times: list
    n_obs: int
    effective: str = field(default="", repr=False)

    def make_potential(self) -> Potential:
        return make_potential(self.potential_name, **self.potential_params)

    def make_path(self) -> ConstraintPath:
        if self.constraint_kind == "linear":
            return linear_path(self.c0, self.c1)
        return piecewise_linear_path(self.times, self.values)


_MODEL_REQUIRED = {
    "fp": ("nu", "tau"),
    "pwm": ("nu", "tau", "m1", "x2"),
    "tpm": ("tau", "m1", "sigma0"),
    "msm": ("m1", "sigma_tilde"),
    "limit": ("a",),
    "kramers": ("b", "nu"),
    "qs": (),
    "classify": ("tau", "nu"),
    "tabulate-M": (),
    "verify": (),
}

_NEEDS_CONSTRAINT = ("fp", "pwm", "tpm", "limit", "kramers")

_FLOAT_KEYS = ("nu", "tau", "a", "b", "m1", "m0", "x2", "sigma_tilde",
               "sigma0", "eps", "dt", "a_crit", "ds", "s_max")
_INT_KEYS = ("N", "n_obs", "n_points", "workers")


def _parse_float_list(raw: str) -> list:
    return [float(v) for v in raw.replace(",", " ").split()]


def parse_scenario(source) -> Scenario:
    """Parse and validate a scenario file (path or raw text)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if isinstance(source, Path):
        text = source.read_text()
    else:
        s = str(source)
        looks_like_doc = "\n" in s or s.lstrip().startswith(("[", "#", ";"))
        text = s if looks_like_doc else Path(s).read_text()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"config parse error: {exc}") from exc

    if not cp.has_section("scenario"):
        raise ScenarioError("scenario: section missing")
    model = cp.get("scenario", "model", fallback=None)
    if model not in MODELS:
        raise ScenarioError(f"scenario.model: expected one of {MODELS}, got {model!r}")
    name = cp.get("scenario", "name", fallback=model)

    pot_name = cp.get("potential", "name", fallback="quartic")
    pot_params = {}
    if cp.has_section("potential"):
        for key, raw in cp.items("potential"):
            if key != "name":
                pot_params[key] = float(raw)
    try:
        make_potential(pot_name, **pot_params)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"potential: {exc}") from exc

    params: dict = {}
    if cp.has_section("params"):
        for key, raw in cp.items("params"):
            if key in ("m1_grid", "sigma_grid"):
                params[key] = _parse_float_list(raw)
            elif key in _INT_KEYS or key.upper() in _INT_KEYS:
                params["N" if key.lower() == "n" else key] = int(raw)
            elif key in _FLOAT_KEYS:
                params[key] = float(raw)
            else:
                try:
                    params[key] = float(raw)
                except ValueError:
                    params[key] = raw
    for req in _MODEL_REQUIRED[model]:
        if req not in params:
            raise ScenarioError(f"params.{req}: required for model {model}")

    kind = c0 = c1 = times = values = None
    t0, t_end = 0.0, 1.0
    if model in _NEEDS_CONSTRAINT:
        if not cp.has_section("constraint"):
            raise ScenarioError(f"constraint: section required for model {model}")
        kind = cp.get("constraint", "kind", fallback="linear")
        if kind == "linear":
            try:
                c0 = cp.getfloat("constraint", "c0")
                c1 = cp.getfloat("constraint", "c1")
            except (configparser.NoOptionError, ValueError) as exc:
                raise ScenarioError(f"constraint.c0/c1: {exc}") from exc
        elif kind == "piecewise":
            try:
                times = _parse_float_list(cp.get("constraint", "times"))
                values = _parse_float_list(cp.get("constraint", "values"))
            except configparser.NoOptionError as exc:
                raise ScenarioError(f"constraint.times/values: {exc}") from exc
            if len(times) != len(values) or len(times) < 2:
                raise ScenarioError("constraint.times/values: need matching lists")
        else:
            raise ScenarioError(f"constraint.kind: unknown kind {kind!r}")
        try:
            t0 = cp.getfloat("constraint", "t0", fallback=0.0)
            t_end = cp.getfloat("constraint", "t_end")
        except (configparser.NoOptionError, ValueError) as exc:
            raise ScenarioError(f"constraint.t_end: {exc}") from exc
        if t_end <= t0:
            raise ScenarioError("constraint.t_end: must exceed t0")

    grid = None
    if cp.has_section("grid"):
        try:
            grid = {"x_lo": cp.getfloat("grid", "x_lo"),
                    "x_hi": cp.getfloat("grid", "x_hi"),
                    "n_cells": cp.getint("grid", "n_cells")}
        except (configparser.NoOptionError, ValueError) as exc:
            raise ScenarioError(f"grid: {exc}") from exc

    snapshot_times = []
    n_obs = 1201
    if cp.has_section("output"):
        raw = cp.get("output", "snapshot_times", fallback="")
        if raw.strip():
            snapshot_times = _parse_float_list(raw)
        n_obs = cp.getint("output", "n_obs", fallback=1201)

    sc = Scenario(model, name, pot_name, pot_params, kind, c0, c1, times,
                  values, t0, t_end, params, grid, snapshot_times, n_obs)
    sc.effective = render_effective(sc)
    return sc


def render_effective(sc: Scenario) -> str:
    """Effective configuration with defaults resolved; re-parses identically."""
    cp = configparser.ConfigParser()
    cp["scenario"] = {"model": sc.model, "name": sc.name}
    cp["potential"] = {"name": sc.potential_name,
                       **{k: fmt(v) for k, v in sc.potential_params.items()}}
    if sc.constraint_kind is not None:
        sect = {"kind": sc.constraint_kind, "t0": fmt(sc.t0), "t_end": fmt(sc.t_end)}
        if sc.constraint_kind == "linear":
            sect["c0"], sect["c1"] = fmt(sc.c0), fmt(sc.c1)
        else:
            sect["times"] = ", ".join(fmt(v) for v in sc.times)
            sect["values"] = ", ".join(fmt(v) for v in sc.values)
        cp["constraint"] = sect

    params = dict(sc.params)
    pot = sc.make_potential()
    lm = landmarks(pot)
    grid = sc.grid
    if sc.model in ("fp", "pwm") and grid is None:
        # dx <= nu/4 rule and domain margins resolved here
        g = fp_solver.default_grid(pot, params["nu"], lm)
        grid = {"x_lo": g.x_lo, "x_hi": g.x_hi, "n_cells": g.n_cells}
    if sc.model in ("msm", "tabulate-M"):
        params.setdefault("N", mass_splitting.DEFAULT_N)
        params.setdefault("eps", mass_splitting.default_eps(lm))
        params.setdefault("s_max", mass_splitting.DEFAULT_S_MAX)
        params.setdefault("ds", mass_splitting.DEFAULT_DS)
    if params:
        cp["params"] = {k: (", ".join(fmt(x) for x in v) if isinstance(v, list)
                            else fmt(v)) for k, v in sorted(params.items())}
    if grid is not None:
        cp["grid"] = {k: fmt(v) for k, v in grid.items()}
    cp["output"] = {"n_obs": str(sc.n_obs)}
    if sc.snapshot_times:
        cp["output"]["snapshot_times"] = ", ".join(fmt(v) for v in sc.snapshot_times)
    buf = _io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def dispatch(sc: Scenario, out_dir, workers: int = 1) -> dict:
    """Run the selected model and write its artifacts; returns a summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pot = sc.make_potential()
    lm = landmarks(pot)
    t_start = time.perf_counter()

    (out / "effective.cfg").write_text(sc.effective)
    write_json(out / "meta.json", {
        "model": sc.model, "name": sc.name,
        "potential": {"name": sc.potential_name, **sc.potential_params},
        "landmarks": {"x_star": lm.x_star, "x_starstar": lm.x_starstar,
                      "sigma_star": lm.sigma_star, "h_crit": lm.h_crit,
                      "h_star": lm.h_star},
    })

    summary = {"model": sc.model, "name": sc.name}
    runner = {
        "fp": _run_fp, "pwm": _run_fp, "tpm": _run_tpm, "msm": _run_msm,
        "limit": _run_limit, "kramers": _run_kramers, "qs": _run_qs,
        "classify": _run_classify, "tabulate-M": _run_mtable,
        "verify": _run_verify,
    }[sc.model]
    summary.update(runner(sc, pot, lm, out, workers))
    summary["wall_time_s"] = round(time.perf_counter() - t_start, 3)
    return summary


def _write_hprime(pot, lm, out):
    xs = np.linspace(-1.5 * lm.x_starstar, 1.5 * lm.x_starstar, 801)
    write_csv(out / "hprime.csv", ["x", "hprime"], [xs, pot.d1(xs)])


def _run_fp(sc, pot, lm, out, workers):
    p = sc.params
    path = sc.make_path()
    grid = None
    if sc.grid:
        grid = fp_solver.Grid(sc.grid["x_lo"], sc.grid["x_hi"], sc.grid["n_cells"])
    kwargs = dict(grid=grid, dt=p.get("dt"), n_obs=sc.n_obs,
                  snapshot_times=sc.snapshot_times, lm=lm)
    if sc.model == "fp":
        res = fp_solver.run(pot, p["nu"], p["tau"], path, sc.t0, sc.t_end, **kwargs)
    else:
        res = fp_solver.pwm_run(pot, p["nu"], p["tau"], path, p["m1"], p["x2"],
                                sc.t0, sc.t_end, **kwargs)
    header = ["t", "ell", "sigma", "y", "m_minus", "m_plus", "E", "S", "D", "width"]
    cols = [res.t, res.ell_hat, res.sigma, res.y, res.m_minus, res.m_plus,
            res.energy, res.entropy, res.dissipation, res.width]
    if res.x2 is not None:
        header.append("x2")
        cols.append(res.x2)
    write_csv(out / "series.csv", header, cols)
    for t_snap, vals in res.snapshots:
        write_csv(out / "snapshots" / f"snap_{t_snap:.6f}.csv",
                  ["x", "rho"], [res.final.grid.centers, vals])
    _write_hprime(pot, lm, out)
    return {"steps": len(res.sigma_steps), "m_minus_final": float(res.m_minus[-1]),
            "max_mass_dev": res.max_mass_dev, "min_rho": res.min_rho}


def _run_tpm(sc, pot, lm, out, workers):
    from .potential import Branch, branch_inverse

    p = sc.params
    path = sc.make_path()
    m1 = p["m1"]
    sig0 = p["sigma0"]
    x1 = branch_inverse(pot, Branch.MINUS, sig0, lm)
    x2 = branch_inverse(pot, Branch.PLUS, sig0, lm)
    init = TwoPeaksState(x1=x1, x2=x2, m1=m1, m2=1 - m1, t=sc.t0)
    traj = two_peaks.tpm_integrate(init, pot, p["tau"], path, sc.t_end,
                                   n_samples=sc.n_obs)
    write_csv(out / "trajectory.csv", ["t", "x1", "x2", "sigma", "E", "D"],
              [traj.t, traj.x1, traj.x2, traj.sigma, traj.energy,
               traj.dissipation])
    return {"samples": len(traj.t), "merged_estimate": traj.merged_estimate}


def _run_msm(sc, pot, lm, out, workers):
    p = sc.params
    res = mass_splitting.run_split(
        pot, p["m1"], p["sigma_tilde"], N=int(p.get("N", mass_splitting.DEFAULT_N)),
        eps=p.get("eps"), s_max=p.get("s_max", mass_splitting.DEFAULT_S_MAX),
        ds=p.get("ds", mass_splitting.DEFAULT_DS), lm=lm)
    write_json(out / "split.json", {
        "m1": p["m1"], "sigma_tilde": p["sigma_tilde"], "m12": res.m12,
        "x_hat1": res.x_hat1, "x_hat2": res.x_hat2, "sigma_hat": res.sigma_hat,
        "n12": res.n12, "converged": res.converged, "s_end": res.s_end,
    })
    return {"m12": res.m12, "converged": res.converged}


def _run_limit(sc, pot, lm, out, workers):
    p = sc.params
    path = sc.make_path()
    init = limit_dynamics.single_peak_state(pot, float(path.ell(sc.t0)), sc.t0, lm)
    provider = None
    if "m_table_N" in p:
        rows = mass_splitting.tabulate_M(
            pot, np.linspace(0.05, 1.0, 20), np.linspace(-0.9, 0.9, 19) * lm.sigma_star,
            N=int(p["m_table_N"]), lm=lm, workers=workers)
        provider = mass_splitting.MTable.from_rows(rows)
    traj = limit_dynamics.integrate(pot, p["a"], path, init, sc.t_end,
                                    mass_split=provider, n_samples=sc.n_obs, lm=lm)
    write_csv(out / "trajectory.csv",
              ["t", "config", "m_minus", "m_zero", "m_plus", "sigma", "phi", "E"],
              [traj.t, [c if c is not None else "" for c in traj.config],
               traj.m_minus, traj.m_zero, traj.m_plus, traj.sigma, traj.phi,
               traj.energy])
    write_json(out / "events.json", [{
        "t": ev.t_event, "kind": ev.kind.value, "note": ev.note,
        "d_sigma": ev.d_sigma, "d_energy": ev.d_energy,
        "pre": _state_dict(ev.pre), "post": _state_dict(ev.post),
    } for ev in traj.events])
    return {"events": [ev.kind.value for ev in traj.events],
            "final_config": traj.events[-1].post.config.value if traj.events else None}


def _state_dict(st):
    return {"config": st.config.value, "m_minus": st.m_minus, "m_zero": st.m_zero,
            "m_plus": st.m_plus, "sigma": st.sigma, "phi": st.phi, "t": st.t}


def _run_kramers(sc, pot, lm, out, workers):
    p = sc.params
    path = sc.make_path()
    run = fast_reaction.constrained_kramers_ode(
        pot, p["b"], p["nu"], path, p.get("m0", 1.0), sc.t0, sc.t_end,
        n_samples=sc.n_obs, lm=lm)
    write_csv(out / "series.csv",
              ["t", "ell", "sigma", "psi", "m_minus", "m_plus", "E"],
              [run.t, run.ell, run.sigma, run.psi, run.m_minus, run.m_plus,
               run.energy])
    return {"sigma_b": run.sigma_b, "status": run.status,
            "m_minus_final": float(run.m_minus[-1])}


def _run_qs(sc, pot, lm, out, workers):
    from .potential import Branch, branch_inverse

    n = int(sc.params.get("n_points", 401))
    xp0 = branch_inverse(pot, Branch.PLUS, 0.0, lm)
    ells = np.linspace(-xp0 * 0.999, xp0 * 0.999, n)
    rows = [fast_reaction.qs_psi(pot, float(e), lm) for e in ells]
    write_csv(out / "qs.csv", ["ell", "psi", "m_minus", "m_plus"],
              [ells, [r[0] for r in rows], [r[1] for r in rows],
               [r[2] for r in rows]])
    return {"points": n}


def _run_classify(sc, pot, lm, out, workers):
    p = sc.params
    label = fast_reaction.classify_regime(p["tau"], p["nu"], pot,
                                          a_crit=p.get("a_crit"), lm=lm)
    payload = {"tau": p["tau"], "nu": p["nu"], "regime": label,
               "supported": label != fast_reaction.REGIME_OPEN}
    write_json(out / "classify.json", payload)
    return payload


def _run_mtable(sc, pot, lm, out, workers):
    p = sc.params
    m1_grid = p.get("m1_grid") or np.linspace(0.1, 1.0, 10).tolist()
    sigma_grid = p.get("sigma_grid") or np.linspace(-0.9, 0.9, 13) * lm.sigma_star
    rows = mass_splitting.tabulate_M(
        pot, m1_grid, sigma_grid, N=int(p.get("N", mass_splitting.DEFAULT_N)),
        eps=p.get("eps"), lm=lm, workers=workers)
    write_csv(out / "mtable.csv",
              ["m1", "sigma_tilde", "m12", "x_hat1", "x_hat2", "sigma_hat",
               "converged"],
              [[r[k] for r in rows] for k in
               ("m1", "sigma_tilde", "m12", "x_hat1", "x_hat2", "sigma_hat",
                "converged")])
    n_fail = sum(not r["converged"] for r in rows)
    return {"cells": len(rows), "failed": n_fail}


def _run_verify(sc, pot, lm, out, workers):
    rep = verify_assumptions(pot, int(sc.params.get("n_samples", 2001)))
    payload = {"a1_even": rep.a1_even, "a2_double_well": rep.a2_double_well,
               "a3_concave_branches": rep.a3_concave_branches,
               "all_passed": rep.all_passed, "messages": list(rep.messages)}
    write_json(out / "verify.json", payload)
    return payload
