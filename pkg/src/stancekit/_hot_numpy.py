"""Pure-numpy fallback implementations of the hot kernels.

Signatures mirror ``_hot_numba``.  Gram assembly goes through scipy's
sparse matmul; the EP sweep keeps the per-site loop in Python with
vectorised rank-1 updates.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import log_ndtr

_LOG_INV_SQRT2PI = -0.5 * np.log(2.0 * np.pi)


def pairwise_gram(data, indices, indptr, width):
    """Dense matrix of pairwise dot products between CSR rows."""
    n = indptr.shape[0] - 1
    mat = sp.csr_matrix((data, indices, indptr), shape=(n, width))
    return np.asarray((mat @ mat.T).todense(), dtype=np.float64)


def cross_gram(data_a, indices_a, indptr_a, data_b, indices_b, indptr_b, width):
    na = indptr_a.shape[0] - 1
    nb = indptr_b.shape[0] - 1
    a = sp.csr_matrix((data_a, indices_a, indptr_a), shape=(na, width))
    b = sp.csr_matrix((data_b, indices_b, indptr_b), shape=(nb, width))
    return np.asarray((a @ b.T).todense(), dtype=np.float64)


def _pdf_over_cdf(z: float) -> float:
    # exp(log N(z) - log Phi(z)) stays finite far into the left tail
    return float(np.exp(_LOG_INV_SQRT2PI - 0.5 * z * z - log_ndtr(z)))


def ep_sweep(K, y, tau, nu, Sigma, mu, damping):
    """One pass of sequential EP site updates for a probit likelihood.

    Updates tau, nu, Sigma, mu in place; returns the largest absolute
    site-parameter changes and the number of skipped sites.
    """
    n = y.shape[0]
    max_dtau = 0.0
    max_dnu = 0.0
    skipped = 0
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
        root = np.sqrt(1.0 + v_cav)
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
        s = Sigma[:, i].copy()
        snu = float(s @ nu)
        tau[i] = tau_new
        nu[i] = nu_new
        Sigma -= coef * np.outer(s, s)
        mu += (dnu - coef * (snu + dnu * s[i])) * s
        if abs(dtau) > max_dtau:
            max_dtau = abs(dtau)
        if abs(dnu) > max_dnu:
            max_dnu = abs(dnu)
    return max_dtau, max_dnu, skipped
