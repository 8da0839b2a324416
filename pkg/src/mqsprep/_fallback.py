"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and semantics match the compiled module exactly; the selector in
:mod:`mqsprep.kernels` picks one of the two at import time.
"""
from __future__ import annotations

import numpy as np


def apply_ops(state, bitpos, cmask, cval, mats):
    dim, batch = state.shape
    nq = dim.bit_length() - 1
    if dim & (dim - 1) or not len(mats) == len(cmask) == len(cval) == len(bitpos):
        raise ValueError("state rows must be a power of two and gate arrays equally long")
    for g in range(len(bitpos)):
        if not 0 <= int(bitpos[g]) < nq or int(cmask[g]) >= dim:
            raise ValueError(f"gate {g} addresses a qubit outside the register")
    t = state.reshape((2,) * nq + (batch,))
    for g in range(len(bitpos)):
        axis_of = lambda bit: nq - 1 - bit  # noqa: E731
        idx0 = [slice(None)] * (nq + 1)
        mask = int(cmask[g])
        val = int(cval[g])
        bit = 0
        while mask >> bit:
            if (mask >> bit) & 1:
                idx0[axis_of(bit)] = (val >> bit) & 1
            bit += 1
        idx1 = list(idx0)
        tax = axis_of(int(bitpos[g]))
        idx0[tax] = 0
        idx1[tax] = 1
        i0, i1 = tuple(idx0), tuple(idx1)
        u = mats[g]
        a0 = t[i0].copy()
        a1 = t[i1]
        t[i0] = u[0, 0] * a0 + u[0, 1] * a1
        t[i1] = u[1, 0] * a0 + u[1, 1] * a1


def qsp_products(phases, word, xs):
    phases = np.asarray(phases, dtype=float)
    xs = np.asarray(xs, dtype=float)
    npts = xs.shape[0]
    e0 = np.exp(1j * phases[0])
    m = np.zeros((npts, 2, 2), dtype=complex)
    m[:, 0, 0] = e0
    m[:, 1, 1] = np.conj(e0)
    for k, v in enumerate(word):
        c = np.cos(xs[:, v])
        s = 1j * np.sin(xs[:, v])
        n00 = m[:, 0, 0] * c + m[:, 0, 1] * s
        n01 = m[:, 0, 0] * s + m[:, 0, 1] * c
        n10 = m[:, 1, 0] * c + m[:, 1, 1] * s
        n11 = m[:, 1, 0] * s + m[:, 1, 1] * c
        e = np.exp(1j * phases[k + 1])
        m[:, 0, 0] = n00 * e
        m[:, 0, 1] = n01 * np.conj(e)
        m[:, 1, 0] = n10 * e
        m[:, 1, 1] = n11 * np.conj(e)
    return m
