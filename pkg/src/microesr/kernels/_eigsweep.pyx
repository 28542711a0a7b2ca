# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled eigenvalue-sweep kernel.

Repeatedly assembles ``h_static + b * h_field`` into a reused buffer and
calls LAPACK zheev directly, avoiding the per-matrix allocation and gufunc
overhead of the batched numpy path. Eigenvalue-only mode is insensitive to
the C/Fortran layout of a Hermitian buffer (the transpose is the conjugate,
which has the same real spectrum), so no transposition is needed.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_lapack cimport zheev

cnp.import_array()

BACKEND = "compiled"


def eigvals_sweep(h_static, h_field, fields_mt):
    """Ascending eigenvalues of ``h_static + b * h_field`` for every b.

    Mirrors :func:`microesr.kernels.eigsweep_py.eigvals_sweep`.
    """
    hs_arr = np.ascontiguousarray(h_static, dtype=np.complex128)
    hf_arr = np.ascontiguousarray(h_field, dtype=np.complex128)
    b_arr = np.ascontiguousarray(fields_mt, dtype=np.float64)
    if hs_arr.ndim != 2 or hs_arr.shape[0] != hs_arr.shape[1] or hs_arr.shape != hf_arr.shape:
        raise ValueError("h_static and h_field must be equal-shape square matrices")

    cdef double complex[:, ::1] hs = hs_arr
    cdef double complex[:, ::1] hf = hf_arr
    cdef double[::1] bs = b_arr
    cdef int n = hs.shape[0]
    cdef Py_ssize_t nb = bs.shape[0]

    out_arr = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double complex[:, ::1] a = np.empty((n, n), dtype=np.complex128)
    cdef double[::1] rwork = np.empty(max(1, 3 * n - 2), dtype=np.float64)

    cdef char jobz = b'N'
    cdef char uplo = b'L'
    cdef int info = 0
    cdef int lwork = -1
    cdef double complex wquery
    cdef double[::1] wtmp = np.empty(n, dtype=np.float64)

    # Workspace size query.
    zheev(&jobz, &uplo, &n, &a[0, 0], &n, &wtmp[0], &wquery, &lwork, &rwork[0], &info)
    lwork = <int>wquery.real
    if lwork < 2 * n - 1:
        lwork = 2 * n - 1
    cdef double complex[::1] work = np.empty(lwork, dtype=np.complex128)

    cdef Py_ssize_t ib
    cdef int i, j
    cdef double b
    for ib in range(nb):
        b = bs[ib]
        for i in range(n):
            for j in range(n):
                a[i, j] = hs[i, j] + b * hf[i, j]
        zheev(&jobz, &uplo, &n, &a[0, 0], &n, &out[ib, 0], &work[0], &lwork, &rwork[0], &info)
        if info != 0:
            raise RuntimeError(f"zheev failed at field index {ib} (info={info})")
    return out_arr
