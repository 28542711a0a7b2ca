"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The field sweep diagonalizes thousands of small dense Hermitian matrices per
orientation; that loop dominates total runtime. At import time the compiled
Cython kernel is preferred, falling back to the numpy implementation when
the extension is unavailable. Set ``MICROESR_KERNEL=python`` or
``MICROESR_KERNEL=compiled`` to force a backend (the latter raises if the
extension did not build).
"""

from __future__ import annotations

import os

from . import eigsweep_py

_requested = os.environ.get("MICROESR_KERNEL", "").strip().lower()

if _requested == "python":
    _impl = eigsweep_py
else:
    try:
        from . import _eigsweep as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "MICROESR_KERNEL=compiled but the _eigsweep extension is not built"
            ) from None
        _impl = eigsweep_py

BACKEND: str = _impl.BACKEND
eigvals_sweep = _impl.eigvals_sweep

__all__ = ["BACKEND", "eigvals_sweep", "eigsweep_py"]
