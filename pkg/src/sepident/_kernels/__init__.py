"""Per-step kernel backend selection.

The compiled core is preferred when importable; otherwise the numpy
reference backend is used. Set ``SEPIDENT_PURE_PYTHON=1`` to force the
fallback (the benchmark under ``benchmarks/`` uses this to compare both).
"""

import os

from . import _ref

if os.environ.get("SEPIDENT_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

rls_gain = _impl.rls_gain
sm_downdate = _impl.sm_downdate
rls_gain_downdate = _impl.rls_gain_downdate

__all__ = ["BACKEND", "rls_gain", "sm_downdate", "rls_gain_downdate"]
