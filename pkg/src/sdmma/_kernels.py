"""Compiled sample loops used by the estimators and the experiment harness.

The cubic statistics are symmetric in their column indices: the ``S2``
column ``(i, j, k)`` only depends on the unordered pair ``{i, j}`` and the
``S3`` column on the multiset ``{i, j, k}``.  The loops below store one
representative column per class and fold the class size into the tap-side
vector, which is arithmetically the same contraction as the dense form in
:mod:`sdmma.tensorops`.  :func:`expand_moments` rebuilds the dense matrices.
"""
from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

from .tensorops import MomentSet

# No nnan/ninf: divergence checks rely on isfinite.
_FAST = {"reassoc", "contract", "arcp", "nsz"}


@lru_cache(maxsize=None)
def symmetry_tables(N: int):
    """Representative columns and class sizes for the two cubic statistics.

    Returns ``(p2, m2, p3, m3, dense2, dense3)`` where ``p*`` are ``(C, 3)``
    index triples, ``m*`` their multiplicities, and ``dense*`` map every dense
    column ``i + N*j + N**2*k`` to its representative.
    """
    p2, m2, p3, m3 = [], [], [], []
    idx2, idx3 = {}, {}
    for k in range(N):
        for j in range(N):
            for i in range(j + 1):
                idx2[(i, j, k)] = len(p2)
                p2.append((i, j, k))
                m2.append(1.0 if i == j else 2.0)
    for k in range(N):
        for j in range(k + 1):
            for i in range(j + 1):
                idx3[(i, j, k)] = len(p3)
                p3.append((i, j, k))
                m3.append({1: 1.0, 2: 3.0, 3: 6.0}[len({i, j, k})])
    dense2 = np.empty(N**3, dtype=np.int64)
    dense3 = np.empty(N**3, dtype=np.int64)
    for k in range(N):
        for j in range(N):
            for i in range(N):
                c = i + N * j + N * N * k
                dense2[c] = idx2[(min(i, j), max(i, j), k)]
                dense3[c] = idx3[tuple(sorted((i, j, k)))]
    return (
        np.array(p2, dtype=np.int64),
        np.array(m2),
        np.array(p3, dtype=np.int64),
        np.array(m3),
        dense2,
        dense3,
    )


def compressed_zeros(N: int):
    p2, _, p3, _, _, _ = symmetry_tables(N)
    return (
        np.zeros((N, N), complex),
        np.zeros((N, p2.shape[0]), complex),
        np.zeros((N, p3.shape[0]), complex),
    )


def compress_moments(m: MomentSet):
    p2, _, p3, _, _, _ = symmetry_tables(m.n_taps)
    N = m.n_taps
    c2 = p2[:, 0] + N * p2[:, 1] + N * N * p2[:, 2]
    c3 = p3[:, 0] + N * p3[:, 1] + N * N * p3[:, 2]
    return m.s1.copy(), m.s2[:, c2].copy(), m.s3[:, c3].copy()


def expand_moments(s1, s2c, s3c, count) -> MomentSet:
    N = s1.shape[0]
    _, _, _, _, dense2, dense3 = symmetry_tables(N)
    return MomentSet(s1.copy(), s2c[:, dense2], s3c[:, dense3], int(count))


@numba.njit(cache=True)
def _shift_in(x, sample):
    for i in range(x.shape[0] - 1, 0, -1):
        x[i] = x[i - 1]
    x[0] = sample


@numba.njit(cache=True)
def mma_run(r, w, x, mu, r_m, record_every, offset, out):
    """Stochastic MMA2-2 over ``r``; mutates ``w`` and the window ``x``.

    Taps are written to ``out`` whenever the absolute sample count
    ``offset + t + 1`` is a multiple of ``record_every``.  Returns
    ``(records_written, divergence_index)`` with ``-1`` for no divergence.
    """
    N = w.shape[0]
    k = 0
    for t in range(r.shape[0]):
        _shift_in(x, r[t])
        y = 0j
        for i in range(N):
            y += np.conj(w[i]) * x[i]
        yr = y.real
        yi = y.imag
        e = complex((r_m - yr * yr) * yr, -(r_m - yi * yi) * yi)
        finite = True
        for i in range(N):
            w[i] += mu * e * x[i]
            if not (np.isfinite(w[i].real) and np.isfinite(w[i].imag)):
                finite = False
        if not finite:
            return k, offset + t + 1
        if record_every > 0 and (offset + t + 1) % record_every == 0:
            out[k, :] = w
            k += 1
    return k, -1


@numba.njit(cache=True, fastmath=_FAST)
def _sd_sample(x, w, g, s1, s2, s3, a_n, r_m, u2, u3, v2, v3, p2, m2, p3, m3):
    # absorb x into the compressed moments and leave the gradient in g
    N = w.shape[0]
    keep = 1.0 - a_n
    for c in range(p2.shape[0]):
        i = p2[c, 0]
        j = p2[c, 1]
        q = p2[c, 2]
        u2[c] = np.conj(x[i] * x[j]) * x[q]
        v2[c] = m2[c] * w[i] * w[j] * np.conj(w[q])
    for c in range(p3.shape[0]):
        i = p3[c, 0]
        j = p3[c, 1]
        q = p3[c, 2]
        u3[c] = x[i] * x[j] * x[q]
        v3[c] = m3[c] * np.conj(w[i] * w[j] * w[q])
    for i in range(N):
        lx = a_n * x[i]
        acc1 = 0j
        for j in range(N):
            s1[i, j] = keep * s1[i, j] + lx * np.conj(x[j])
            acc1 += s1[i, j] * w[j]
        acc2 = 0j
        for c in range(p2.shape[0]):
            s2[i, c] = keep * s2[i, c] + lx * u2[c]
            acc2 += s2[i, c] * v2[c]
        acc3 = 0j
        for c in range(p3.shape[0]):
            s3[i, c] = keep * s3[i, c] + lx * u3[c]
            acc3 += s3[i, c] * v3[c]
        g[i] = r_m * acc1 - 0.75 * acc2 - 0.25 * acc3


@numba.njit(cache=True)
def sd_run(r, w, x, s1, s2, s3, count, mu, r_m, lam, record_every, out, p2, m2, p3, m3):
    """Steepest-descent MMA2-2 over ``r`` with running compressed moments.

    ``lam <= 0`` selects the harmonic ``1/n`` weights.  Mutates ``w``, ``x``
    and the moment arrays.  Returns ``(records_written, divergence_index)``.
    """
    N = w.shape[0]
    u2 = np.empty(p2.shape[0], np.complex128)
    u3 = np.empty(p3.shape[0], np.complex128)
    v2 = np.empty(p2.shape[0], np.complex128)
    v3 = np.empty(p3.shape[0], np.complex128)
    g = np.empty(N, np.complex128)
    k = 0
    for t in range(r.shape[0]):
        _shift_in(x, r[t])
        n = count + t + 1
        a_n = 1.0 / n if lam <= 0.0 else lam
        _sd_sample(x, w, g, s1, s2, s3, a_n, r_m, u2, u3, v2, v3, p2, m2, p3, m3)
        finite = True
        for i in range(N):
            w[i] += mu * g[i]
            if not (np.isfinite(w[i].real) and np.isfinite(w[i].imag)):
                finite = False
        if not finite:
            return k, n
        if record_every > 0 and n % record_every == 0:
            out[k, :] = w
            k += 1
    return k, -1
