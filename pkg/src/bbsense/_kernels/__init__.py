"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy
implementation when the extension is missing or BBSENSE_PURE_PYTHON=1.
Both backends implement the same contract (see _fallback for reference
semantics) and agree to floating-point roundoff.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("BBSENSE_PURE_PYTHON", "") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

ghz_stats = _impl.ghz_stats
detection_series = _impl.detection_series

__all__ = ["ghz_stats", "detection_series", "BACKEND"]
