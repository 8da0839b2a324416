# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the statevector simulator and QSP products."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def apply_ops(double complex[:, ::1] state,
              long long[::1] bitpos,
              unsigned long long[::1] cmask,
              unsigned long long[::1] cval,
              double complex[:, :, ::1] mats):
    """Apply a flattened gate list in place to a (dim, batch) amplitude block."""
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t batch = state.shape[1]
    cdef Py_ssize_t nops = bitpos.shape[0]
    cdef Py_ssize_t half = dim >> 1
    cdef Py_ssize_t g, k, i, j, b
    cdef unsigned long long step, low, mask, val, ii
    cdef double complex u00, u01, u10, u11, a0, a1
    if dim & (dim - 1) or mats.shape[0] != nops or cmask.shape[0] != nops or cval.shape[0] != nops:
        raise ValueError("state rows must be a power of two and gate arrays equally long")
    for g in range(nops):
        if bitpos[g] < 0 or ((<unsigned long long>1) << bitpos[g]) >= <unsigned long long>dim or cmask[g] >= <unsigned long long>dim:
            raise ValueError(f"gate {g} addresses a qubit outside the register")
    with nogil:
        for g in range(nops):
            step = (<unsigned long long>1) << bitpos[g]
            low = step - 1
            mask = cmask[g]
            val = cval[g]
            u00 = mats[g, 0, 0]
            u01 = mats[g, 0, 1]
            u10 = mats[g, 1, 0]
            u11 = mats[g, 1, 1]
            # k enumerates indices with the target bit cleared
            for k in range(half):
                ii = (((<unsigned long long>k) & ~low) << 1) | ((<unsigned long long>k) & low)
                if (ii & mask) != val:
                    continue
                i = <Py_ssize_t>ii
                j = <Py_ssize_t>(ii | step)
                for b in range(batch):
                    a0 = state[i, b]
                    a1 = state[j, b]
                    state[i, b] = u00 * a0 + u01 * a1
                    state[j, b] = u10 * a0 + u11 * a1


def qsp_products(double[::1] phases, long long[::1] word, double[:, ::1] xs):
    """Interleaved QSP unitaries e^{i phi_0 Z} prod_k W(x_{word[k]}) e^{i phi_k Z}.

    ``xs`` has shape (npoints, nvars); returns an (npoints, 2, 2) array.
    """
    cdef Py_ssize_t npts = xs.shape[0]
    cdef Py_ssize_t d = word.shape[0]
    cdef Py_ssize_t p, k
    out_arr = np.empty((npts, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double complex m00, m01, m10, m11, n00, n01, n10, n11
    cdef double complex e, ec
    cdef double c, s, x
    ep_arr = np.exp(1j * np.asarray(phases))
    cdef double complex[::1] ep = ep_arr
    with nogil:
        for p in range(npts):
            e = ep[0]
            m00 = e
            m01 = 0
            m10 = 0
            m11 = e.conjugate()
            for k in range(d):
                x = xs[p, word[k]]
                c = cos(x)
                s = sin(x)
                # M <- M W, W = [[c, i s], [i s, c]]
                n00 = m00 * c + m01 * (1j * s)
                n01 = m00 * (1j * s) + m01 * c
                n10 = m10 * c + m11 * (1j * s)
                n11 = m10 * (1j * s) + m11 * c
                # M <- M diag(e, conj(e))
                e = ep[k + 1]
                ec = e.conjugate()
                m00 = n00 * e
                m01 = n01 * ec
                m10 = n10 * e
                m11 = n11 * ec
            out[p, 0, 0] = m00
            out[p, 0, 1] = m01
            out[p, 1, 0] = m10
            out[p, 1, 1] = m11
    return out_arr
