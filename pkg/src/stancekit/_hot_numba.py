"""Numba-compiled hot kernels: sparse Gram assembly and the EP site sweep.

Same contracts as ``_hot_numpy``.  All functions are nopython-compiled
and cached on disk, so repeated processes pay the compile cost once.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _row_dot(data, indices, lo_a, hi_a, lo_b, hi_b):
    # merge over the shared sorted indices, ascending order
    total = 0.0
    a = lo_a
    b = lo_b
    while a < hi_a and b < hi_b:
        ia = indices[a]
        ib = indices[b]
        if ia == ib:
            total += data[a] * data[b]
            a += 1
            b += 1
        elif ia < ib:
            a += 1
        else:
            b += 1
    return total


@njit(cache=True)
def pairwise_gram(data, indices, indptr, width):
    n = indptr.shape[0] - 1
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            v = _row_dot(data, indices, indptr[i], indptr[i + 1], indptr[j], indptr[j + 1])
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True)
def _cross_row_dot(data_a, indices_a, lo_a, hi_a, data_b, indices_b, lo_b, hi_b):
    total = 0.0
    a = lo_a
    b = lo_b
    while a < hi_a and b < hi_b:
        ia = indices_a[a]
        ib = indices_b[b]
        if ia == ib:
            total += data_a[a] * data_b[b]
            a += 1
            b += 1
        elif ia < ib:
            a += 1
        else:
            b += 1
    return total


@njit(cache=True)
def cross_gram(data_a, indices_a, indptr_a, data_b, indices_b, indptr_b, width):
    na = indptr_a.shape[0] - 1
    nb = indptr_b.shape[0] - 1
    out = np.empty((na, nb), dtype=np.float64)
    for i in range(na):
        for j in range(nb):
            out[i, j] = _cross_row_dot(
                data_a, indices_a, indptr_a[i], indptr_a[i + 1],
                data_b, indices_b, indptr_b[j], indptr_b[j + 1],
            )
    return out


@njit(cache=True)
def _pdf_over_cdf(z):
    if z > -8.0:
        phi = 0.5 * math.erfc(-z * _INV_SQRT2)
        return _INV_SQRT2PI * math.exp(-0.5 * z * z) / phi
    # deep left tail: Mills-ratio continued fraction, N(z)/Phi(z) = x + r
    x = -z
    r = 0.0
    for k in range(32, 0, -1):
        r = k / (x + r)
    return x + r


@njit(cache=True)
def ep_sweep(K, y, tau, nu, Sigma, mu, damping):
    n = y.shape[0]
    max_dtau = 0.0
    max_dnu = 0.0
    skipped = 0
    s = np.empty(n, dtype=np.float64)
    for i in range(n):
        sii = Sigma[i, i]
        if sii <= 0.0:
            skipped += 1
            continue
        tau_cav = 1.0 / sii - tau[i]
        if tau_cav <= 0.0:
            skipped += 1
            continue
        nu_cav = mu[i] / sii - nu[i]
        m_cav = nu_cav / tau_cav
        v_cav = 1.0 / tau_cav
        root = math.sqrt(1.0 + v_cav)
        z = y[i] * m_cav / root
        r = _pdf_over_cdf(z)
        m_hat = m_cav + y[i] * v_cav * r / root
        v_hat = v_cav - v_cav * v_cav * r * (z + r) / (1.0 + v_cav)
        if v_hat <= 0.0:
            skipped += 1
            continue
        tau_new = (1.0 - damping) * tau[i] + damping * (1.0 / v_hat - tau_cav)
        nu_new = (1.0 - damping) * nu[i] + damping * (m_hat / v_hat - nu_cav)
        if tau_new < 0.0:
            skipped += 1
            continue
        dtau = tau_new - tau[i]
        dnu = nu_new - nu[i]
        denom = 1.0 + dtau * sii
        if denom <= 1e-12:
            skipped += 1
            continue
        coef = dtau / denom
        snu = 0.0
        for a in range(n):
            s[a] = Sigma[a, i]
            snu += s[a] * nu[a]
        tau[i] = tau_new
        nu[i] = nu_new
        scale = dnu - coef * (snu + dnu * s[i])
        for a in range(n):
            sa = s[a]
            mu[a] += scale * sa
            row = Sigma[a]
            ca = coef * sa
            for b in range(n):
                row[b] -= ca * s[b]
        if abs(dtau) > max_dtau:
            max_dtau = abs(dtau)
        if abs(dnu) > max_dnu:
            max_dnu = abs(dnu)
    return max_dtau, max_dnu, skipped
