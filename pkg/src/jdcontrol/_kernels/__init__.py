"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the NumPy
reference module is the fallback.  Set ``JDCONTROL_BACKEND`` to ``python`` or
``cython`` to force a backend (``cython`` raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import reference

_requested = os.environ.get("JDCONTROL_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _fast as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = reference
        BACKEND = "python"
elif _requested in ("python", "reference"):
    _impl = reference
    BACKEND = "python"
elif _requested == "cython":
    from . import _fast as _impl

    BACKEND = "cython"
else:
    raise ImportError(
        f"JDCONTROL_BACKEND={_requested!r} not recognized (use 'auto', 'python' or 'cython')"
    )

KIND_FREE = reference.KIND_FREE
KIND_HARMONIC = reference.KIND_HARMONIC

forward_sweep = _impl.forward_sweep
adjoint_recursion = _impl.adjoint_recursion
