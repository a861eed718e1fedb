"""Backend selection for the scan kernels.

Prefers the compiled extension; falls back to the numpy implementations when
it is missing.  Set EXTREMAL_PURE_PYTHON=1 to force the fallback.  Both
backends are bit-identical (all randomness stays in numpy), so the choice
only affects speed.
"""

from __future__ import annotations

import os

if os.environ.get("EXTREMAL_PURE_PYTHON", "0") not in ("", "0"):
    from . import _scan_py as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _scan as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _scan_py as _impl  # type: ignore[no-redef]

        BACKEND = "numpy"

interval_mins = _impl.interval_mins
topk_smallest = _impl.topk_smallest
