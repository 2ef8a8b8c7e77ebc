"""Command-line entry points.

Subcommands: run (scenario-driven), tabulate-M, classify, verify-potential.
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .fast_reaction import REGIME_OPEN, classify_regime
from .potential import landmarks, make_potential, verify_assumptions
from .scenario import Scenario, ScenarioError, dispatch, parse_scenario


def _preset_text(name: str) -> str:
    ref = resources.files("driftwell") / "presets" / f"{name}.cfg"
    if not ref.is_file():
        avail = sorted(p.name[:-4] for p in
                       (resources.files("driftwell") / "presets").iterdir())
        raise ScenarioError(f"unknown preset {name!r}; available: {avail}")
    return ref.read_text()


def _parse_range(spec: str) -> list:
    """start:stop:count range notation used by sweep flags."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ScenarioError(f"range {spec!r} must be start:stop:count")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ScenarioError("range count must be positive")
    return np.linspace(lo, hi, n).tolist()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="driftwell",
                                 description="constrained double-well dynamics")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or preset")
    p_run.add_argument("--scenario", type=Path, help="scenario config path")
    p_run.add_argument("--preset", help="name of a shipped preset")
    p_run.add_argument("--out", type=Path, required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=1)

    p_tab = sub.add_parser("tabulate-M", help="sweep the mass-transfer function")
    p_tab.add_argument("--m1", default="0.1:1.0:10", help="start:stop:count")
    p_tab.add_argument("--sigma", default="0.0:1.4:15", help="start:stop:count")
    p_tab.add_argument("--N", type=int, default=2000)
    p_tab.add_argument("--eps", type=float, default=None)
    p_tab.add_argument("--potential", default="quartic")
    p_tab.add_argument("--out", type=Path, required=True)
    p_tab.add_argument("--workers", type=int, default=1)

    p_cls = sub.add_parser("classify", help="scaling-regime classification")
    p_cls.add_argument("--tau", type=float, required=True)
    p_cls.add_argument("--nu", type=float, required=True)
    p_cls.add_argument("--a-crit", type=float, default=None)
    p_cls.add_argument("--potential", default="quartic")

    p_ver = sub.add_parser("verify-potential", help="check the shape assumptions")
    p_ver.add_argument("--potential", default="quartic")
    p_ver.add_argument("--n-samples", type=int, default=2001)

    args = ap.parse_args(argv)
    try:
        return _execute(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface module errors as exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _execute(args) -> int:
    if args.command == "run":
        if (args.scenario is None) == (args.preset is None):
            raise ScenarioError("run needs exactly one of --scenario / --preset")
        source = args.scenario if args.scenario else _preset_text(args.preset)
        sc = parse_scenario(source)
        summary = dispatch(sc, args.out, workers=args.workers)
        print(_one_line(summary))
        return 0

    if args.command == "tabulate-M":
        sc = Scenario("tabulate-M", "mtable", args.potential, {}, None, None,
                      None, None, None, 0.0, 1.0,
                      {"m1_grid": _parse_range(args.m1),
                       "sigma_grid": _parse_range(args.sigma),
                       "N": args.N,
                       **({"eps": args.eps} if args.eps is not None else {})},
                      None, [], 1201)
        from .scenario import render_effective

        sc.effective = render_effective(sc)
        summary = dispatch(sc, args.out, workers=args.workers)
        print(_one_line(summary))
        return 0

    if args.command == "classify":
        pot = make_potential(args.potential)
        label = classify_regime(args.tau, args.nu, pot, a_crit=args.a_crit)
        print(f"regime: {label}")
        if label == REGIME_OPEN:
            print("no reduced model available for this coupling (open problem)")
        return 0

    if args.command == "verify-potential":
        pot = make_potential(args.potential)
        rep = verify_assumptions(pot, args.n_samples)
        lm = None
        try:
            lm = landmarks(pot)
        except Exception:  # noqa: BLE001 - report still useful without landmarks
            pass
        print(f"A1 even:            {'pass' if rep.a1_even else 'FAIL'}")
        print(f"A2 double well:     {'pass' if rep.a2_double_well else 'FAIL'}")
        print(f"A3 branch geometry: {'pass' if rep.a3_concave_branches else 'FAIL'}")
        for msg in rep.messages:
            print(f"  - {msg}")
        if lm is not None:
            print(f"landmarks: x_*={lm.x_star:.6g} x_**={lm.x_starstar:.6g} "
                  f"sigma_*={lm.sigma_star:.6g} h_crit={lm.h_crit:.6g} "
                  f"h_*={lm.h_star:.6g}")
        return 0

    raise ScenarioError(f"unknown command {args.command}")


def _one_line(summary: dict) -> str:
    parts = [f"{k}={v}" for k, v in summary.items() if k not in ("model", "name")]
    return f"[{summary['model']}:{summary.get('name', '')}] " + " ".join(parts)


if __name__ == "__main__":
    sys.exit(main())
