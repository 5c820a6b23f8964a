"""Hot-kernel backend selection.

The numerically heavy inner loops (sliding GLRT, SoS likelihood scan, Viterbi
forward pass, DD phase tracker) exist twice: numba @njit versions and
vectorized pure-numpy versions.  CPMSYNC_BACKEND picks one:

    auto   (default) numba if importable, else numpy
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy path

benchmarks/bench_kernels.py compares the two.
"""

import os

_choice = os.environ.get("CPMSYNC_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"CPMSYNC_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _kernels_numpy as kernels
elif _choice == "numba":
    from . import _kernels_numba as kernels
else:
    try:
        from . import _kernels_numba as kernels
    except ImportError:
        from . import _kernels_numpy as kernels

BACKEND = kernels.BACKEND_NAME
