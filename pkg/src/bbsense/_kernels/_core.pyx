# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: GHZ readout statistics and grid propagation.

Same contract as bbsense._kernels._fallback; that module is the reference
for semantics.  The per-time reconstruction uses two BLAS zgemm calls and
C loops for the phase factors and readout reductions, avoiding the
per-step temporaries of the numpy path.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, fabs
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

ctypedef double complex zcomplex


cdef inline zcomplex cpow_int(zcomplex z, int m) noexcept nogil:
    """z**m for small positive integer m by repeated multiplication."""
    cdef zcomplex acc = 1.0 + 0.0j
    cdef zcomplex base = z
    cdef int k = m
    while k > 0:
        if k & 1:
            acc = acc * base
        base = base * base
        k >>= 1
    return acc


cdef inline void _matmul(zcomplex* a, zcomplex* b, zcomplex* c,
                         int rows, int inner, int cols) noexcept nogil:
    """c = a @ b for C-ordered buffers via a Fortran-order zgemm swap."""
    cdef zcomplex one = 1.0 + 0.0j
    cdef zcomplex zero = 0.0 + 0.0j
    zgemm("N", "N", &cols, &rows, &inner, &one, b, &cols, a, &inner,
          &zero, c, &cols)


cdef void _ghz_reduce(zcomplex* u, int d, int m, double* out_pdet,
                      double* out_l1) noexcept nogil:
    cdef int i, j
    cdef zcomplex row, amp = 0
    cdef double pop, inv_d = 1.0 / d, l1 = 0.0, pdet
    for i in range(d):
        row = 0
        for j in range(d):
            row = row + cpow_int(u[i * d + j], m)
        amp = amp + row
        pop = (row.real * row.real + row.imag * row.imag) * inv_d
        l1 += fabs(pop - inv_d)
    amp = amp * inv_d
    pdet = 1.0 - (amp.real * amp.real + amp.imag * amp.imag)
    if pdet < 0.0:
        pdet = 0.0
    elif pdet > 1.0:
        pdet = 1.0
    out_pdet[0] = pdet
    out_l1[0] = l1


def ghz_stats(u, int m):
    """Survival amplitude and diagonal-string populations of the probe."""
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] uc = \
        np.ascontiguousarray(u, dtype=np.complex128)
    cdef int d = uc.shape[0]
    cdef cnp.ndarray[double, ndim=1] pops = np.empty(d)
    cdef zcomplex row, amp = 0
    cdef double inv_d = 1.0 / d
    cdef int i, j
    for i in range(d):
        row = 0
        for j in range(d):
            row = row + cpow_int(uc[i, j], m)
        amp = amp + row
        pops[i] = (row.real * row.real + row.imag * row.imag) * inv_d
    return complex(amp * inv_d), pops


def detection_series(lam, b3, w, e, evecs, double omega, int m, t_grid,
                     stop_threshold=None, bint stop_on_l1=False):
    """Detection probability and L1 statistic along a time grid.

    See bbsense._kernels._fallback.detection_series for the contract.
    """
    cdef cnp.ndarray[double, ndim=1, mode="c"] lam_ = \
        np.ascontiguousarray(lam, dtype=np.float64)
    cdef cnp.ndarray[zcomplex, ndim=3, mode="c"] b3_ = \
        np.ascontiguousarray(b3, dtype=np.complex128)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] w_ = \
        np.ascontiguousarray(w, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1, mode="c"] e_ = \
        np.ascontiguousarray(e, dtype=np.float64)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] evecs_ = \
        np.ascontiguousarray(evecs, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ts = \
        np.ascontiguousarray(t_grid, dtype=np.float64)

    cdef int d = evecs_.shape[0]
    cdef int d3 = lam_.shape[0]
    cdef int nt = ts.shape[0]
    cdef double thr = -1.0
    cdef bint has_thr = stop_threshold is not None
    if has_thr:
        thr = float(stop_threshold)

    cdef cnp.ndarray[double, ndim=1] p_det = np.empty(nt)
    cdef cnp.ndarray[double, ndim=1] l1 = np.empty(nt)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] xw = np.empty((d3, d), dtype=np.complex128)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] a = np.empty((d, d3), dtype=np.complex128)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] m1 = np.empty((d, d), dtype=np.complex128)
    cdef cnp.ndarray[zcomplex, ndim=2, mode="c"] u = np.empty((d, d), dtype=np.complex128)

    cdef zcomplex* b3p = &b3_[0, 0, 0]
    cdef zcomplex* ap = &a[0, 0]
    cdef zcomplex* xwp = &xw[0, 0]
    cdef zcomplex* m1p = &m1[0, 0]
    cdef zcomplex* up = &u[0, 0]
    cdef zcomplex* wp = &w_[0, 0]
    cdef zcomplex* evp = &evecs_[0, 0]

    cdef int idx, i, j, alpha, n_eval = 0
    cdef double t, ph
    cdef zcomplex xi, phase_p, phase_m, rot
    cdef int block = d * d3

    with nogil:
        for idx in range(nt):
            t = ts[idx]
            ph = omega * t
            phase_p = cos(ph) + 1j * sin(ph)
            phase_m = cos(ph) - 1j * sin(ph)
            # xw[alpha, j] = exp(-i lam[alpha] t) * w[alpha, j]
            for alpha in range(d3):
                xi = cos(lam_[alpha] * t) - 1j * sin(lam_[alpha] * t)
                for j in range(d):
                    xwp[alpha * d + j] = xi * wp[alpha * d + j]
            # a = phase_p * b3[0] + b3[1] + phase_m * b3[2]
            for i in range(block):
                ap[i] = phase_p * b3p[i] + b3p[block + i] + phase_m * b3p[2 * block + i]
            _matmul(ap, xwp, m1p, d, d3, d)
            # row phases exp(+i e_p t), then rotate back: u = evecs @ m1
            for i in range(d):
                rot = cos(e_[i] * t) + 1j * sin(e_[i] * t)
                for j in range(d):
                    m1p[i * d + j] = rot * m1p[i * d + j]
            _matmul(evp, m1p, up, d, d, d)
            _ghz_reduce(up, d, m, &p_det[idx], &l1[idx])
            n_eval = idx + 1
            if has_thr and (l1[idx] if stop_on_l1 else p_det[idx]) >= thr:
                break

    return p_det[:n_eval], l1[:n_eval], n_eval
