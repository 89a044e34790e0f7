"""Select the compiled core when importable, else the NumPy fallback.

Set ``DVCM_PURE_PYTHON=1`` to force the fallback. Even with the compiled core
loaded, the exponential-based correlation kernels stay on NumPy: its
vectorised ``exp`` beats a scalar libm loop (see ``benchmarks/bench_core.py``).
"""

import os

from . import _numpy_core

BACKEND = "numpy"
core = _numpy_core

if os.environ.get("DVCM_PURE_PYTHON") != "1":
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        pass
    else:
        core = _compiled
        BACKEND = "cython"

pairwise_distance = core.pairwise_distance
kron_design = core.kron_design
exp_corr = _numpy_core.exp_corr
gneiting_corr = _numpy_core.gneiting_corr

__all__ = [
    "BACKEND",
    "core",
    "pairwise_distance",
    "exp_corr",
    "gneiting_corr",
    "kron_design",
]
