"""Hot-kernel dispatch: compiled extension if available, NumPy otherwise.

Set the environment variable ``CALBENCH_PURE=1`` (before import) to force
the pure-NumPy backend, e.g. for benchmarking or debugging.
"""

import os

if os.environ.get("CALBENCH_PURE"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

ew_stats = _impl.ew_stats
em_stats = _impl.em_stats
ew_sweep = _impl.ew_sweep
em_sweep = _impl.em_sweep
pav = _impl.pav

__all__ = ["BACKEND", "ew_stats", "em_stats", "ew_sweep", "em_sweep", "pav"]
