"""Pure-numpy eigenvalue-sweep kernel (fallback for the compiled module)."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def eigvals_sweep(h_static: np.ndarray, h_field: np.ndarray, fields_mt: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of ``h_static + b * h_field`` for every b.

    Both matrices are Hermitian (MHz and MHz/mT); returns an
    ``(len(fields), dim)`` float array in MHz. Uses one batched LAPACK call.
    """
    fields = np.asarray(fields_mt, dtype=float)
    h = h_static[None, :, :] + fields[:, None, None] * h_field[None, :, :]
    return np.linalg.eigvalsh(h)
