"""Shared test utilities: random inputs and independent numerical oracles.

The oracles here are deliberately independent of the package's inference
code: the GPC oracle integrates the exact posterior on a tensor
Gauss-Hermite grid, and the predictive-probability oracle is plain Monte
Carlo.
"""

import numpy as np
from scipy.special import log_ndtr, ndtr

from rumourgp.textproc import SparseFeatureVector

# grid sizes keeping the tensor product around or below 2 * 10^6 nodes
GH_POINTS = {1: 80, 2: 48, 3: 28, 4: 20, 5: 15, 6: 11}


def random_sparse_vec(rng, dims, density=0.4, max_val=3):
    nnz = rng.binomial(dims, density)
    idx = np.sort(rng.choice(dims, size=nnz, replace=False))
    vals = rng.integers(1, max_val + 1, size=nnz).astype(float)
    return SparseFeatureVector(dims=dims, indices=idx, values=vals)


def random_psd(rng, n, scale=1.0):
    A = rng.normal(size=(n, n + 2))
    return (A @ A.T) / (n + 2) * scale


def _posterior_mode(K_inv, y, n):
    """Newton iteration for the exact probit GPC posterior mode."""
    f = np.zeros(n)
    for _ in range(200):
        z = y * f
        ratio = np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - log_ndtr(z))
        grad = y * ratio - K_inv @ f
        w = ratio * (z + ratio)
        H = K_inv + np.diag(w)
        step = np.linalg.solve(H, grad)
        f = f + step
        if np.max(np.abs(step)) < 1e-12:
            break
    z = y * f
    ratio = np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - log_ndtr(z))
    w = ratio * (z + ratio)
    return f, w


def gh_logz_and_means(K, y, q=None):
    """GPC evidence and posterior means by adaptive tensor Gauss-Hermite.

    The grid is centered on the exact posterior mode and scaled by the
    Laplace covariance (mode and curvature come from a plain Newton solve,
    independent of the EP code path); the integral itself is then evaluated
    exactly against the prior-times-likelihood integrand, so the rule
    converges to Z = E_{f ~ N(0,K)}[ prod_i Phi(y_i f_i) ] and to the exact
    posterior means as q grows.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if q is None:
        q = GH_POINTS[n]
    K_reg = K + 1e-12 * np.eye(n)
    K_inv = np.linalg.inv(K_reg)
    mode, w = _posterior_mode(K_inv, y, n)
    cov = np.linalg.inv(K_inv + np.diag(w))
    Lc = np.linalg.cholesky(cov)

    nodes, weights = np.polynomial.hermite.hermgauss(q)
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    logW = np.zeros(len(Z))
    wgrids = np.meshgrid(*([np.log(weights)] * n), indexing="ij")
    for g in wgrids:
        logW = logW + g.ravel()

    F = mode[None, :] + np.sqrt(2.0) * (Z @ Lc.T)
    sign, logdet_K = np.linalg.slogdet(K_reg)
    quad = np.einsum("ij,jk,ik->i", F, K_inv, F)
    log_prior = -0.5 * (quad + logdet_K + n * np.log(2 * np.pi))
    log_lik = np.sum(log_ndtr(y[None, :] * F), axis=1)
    # d f = 2^{n/2} |Lc| dz and the GH rule absorbs e^{-z^T z}
    log_jac = 0.5 * n * np.log(2.0) + float(np.sum(np.log(np.diag(Lc))))
    log_terms = logW + np.sum(Z * Z, axis=1) + log_prior + log_lik + log_jac

    top = float(np.max(log_terms))
    dens = np.exp(log_terms - top)
    z_total = float(np.sum(dens))
    logz = top + np.log(z_total)
    means = dens @ F / z_total
    return logz, means


def mc_probit_gauss(mu, var, n_samples, rng):
    """Monte-Carlo estimate of the predictive integral E_{f~N(mu,var)}[Phi(f)]."""
    f = mu + np.sqrt(var) * rng.standard_normal(n_samples)
    return float(np.mean(ndtr(f)))
