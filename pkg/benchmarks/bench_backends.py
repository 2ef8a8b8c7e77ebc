"""Time the hot kernels on both backends (numba vs pure numpy).

The backend is fixed at import time by DRIFTWELL_DISABLE_NUMBA, so this
script re-executes itself in a worker subprocess per backend and prints a
combined table.  Usage: python3 benchmarks/bench_backends.py
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time


def _bench_fp(n_steps=2000):
    import numpy as np

    from driftwell.constraint import linear_path
    from driftwell.fp_solver import Grid, run
    from driftwell.potential import landmarks, quartic_potential

    pot = quartic_potential()
    lm = landmarks(pot)
    grid = Grid(-3.5, 3.5, 512)
    path = linear_path(-1.2, 0.5)
    dt = 1e-5
    # warm-up compiles outside the timed section
    run(pot, 0.1, 0.1, path, 0.0, 10 * dt, grid=grid, dt=dt, n_obs=2, lm=lm)
    t0 = time.perf_counter()
    run(pot, 0.1, 0.1, path, 0.0, n_steps * dt, grid=grid, dt=dt, n_obs=2, lm=lm)
    el = time.perf_counter() - t0
    return {"name": "fp step kernel (512 cells)", "steps": n_steps,
            "seconds": el, "us_per_step": 1e6 * el / n_steps}


def _bench_msm(n_steps=4000, n_chars=2000):
    import numpy as np

    from driftwell._kernels import msm_advance
    from driftwell.mass_splitting import init_ensemble
    from driftwell.potential import landmarks, quartic_potential

    pot = quartic_potential()
    lm = landmarks(pot)
    ens = init_ensemble(pot, 0.5, 0.3, N=n_chars, lm=lm)
    advance = msm_advance(pot)
    xi = ens.xi.copy()
    x2 = np.array([ens.x2])
    advance(xi, x2, ens.m1, ens.m2, 1e-3, 10, 0.0)  # warm-up/compile
    xi = ens.xi.copy()
    x2 = np.array([ens.x2])
    t0 = time.perf_counter()
    advance(xi, x2, ens.m1, ens.m2, 1e-3, n_steps, 0.0)
    el = time.perf_counter() - t0
    return {"name": f"characteristics advance (N={n_chars})", "steps": n_steps,
            "seconds": el, "us_per_step": 1e6 * el / n_steps}


def worker():
    from driftwell.backend import backend_name

    out = {"backend": backend_name(),
           "results": [_bench_fp(), _bench_msm()]}
    print(json.dumps(out))


def main():
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DRIFTWELL_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--worker"],
                              env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(proc.returncode)
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        rows[payload["backend"]] = payload["results"]

    names = [r["name"] for r in next(iter(rows.values()))]
    print(f"{'kernel':<38} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for i, name in enumerate(names):
        nb = rows.get("numba", rows.get("numpy"))[i]["us_per_step"]
        np_ = rows["numpy"][i]["us_per_step"]
        print(f"{name:<38} {nb:>9.1f} us {np_:>9.1f} us {np_ / nb:>8.1f}x")


if __name__ == "__main__":
    if "--worker" in sys.argv:
        worker()
    else:
        main()
