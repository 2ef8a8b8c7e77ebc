"""Kernel backend selection.

Hot inner loops ship in two flavours: a numba-compiled one and a pure-numpy
twin.  ``DRIFTWELL_DISABLE_NUMBA=1`` (or a missing numba install) selects the
numpy path; the benchmark under benchmarks/ compares the two.
"""

from __future__ import annotations

import os

_env = os.environ.get("DRIFTWELL_DISABLE_NUMBA", "0").strip().lower()
_disabled = _env in ("1", "true", "yes", "on")

try:
    import numba  # noqa: F401
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _disabled


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
