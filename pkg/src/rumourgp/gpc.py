"""Binary Gaussian Process classification with a probit likelihood.

The non-Gaussian posterior is approximated by Expectation Propagation: each
Bernoulli factor is replaced by an unnormalized Gaussian site in natural
parameters (site_nu, site_tau).  A sweep recomputes all cavities from the
current posterior, moment-matches every site against the probit factor, and
then rebuilds the joint Gaussian posterior from the sites through the
numerically stable B = I + sqrt(S) K sqrt(S) factorization.  Sites are
updated with elementwise damping so that site precisions never go negative.

The log marginal likelihood (evidence) estimate is assembled from the site
normalizers in natural-parameter form, which stays finite for zero site
precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import log_ndtr, ndtr
from threadpoolctl import threadpool_limits

from .errors import NumericalError
from .kernels import TaskedInput

__all__ = [
    "EPConfig",
    "BinaryDataset",
    "EPApproximation",
    "LatentPrediction",
    "probit",
    "ep_fit",
    "predict_latent",
    "predict_prob",
]

_LOG_2PI = np.log(2.0 * np.pi)
_CAVITY_MIN = 1e-12


def probit(z):
    """Standard normal CDF, vectorized."""
    return ndtr(z)


@dataclass(frozen=True)
class EPConfig:
    """Schedule of the EP sweeps.

    ``tolerance`` bounds the maximum absolute site-parameter change per sweep
    at convergence; ``damping`` is the step-halving factor applied when an
    undamped update would drive a site precision negative.
    """

    tolerance: float = 1e-4
    max_sweeps: int = 100
    damping: float = 0.5
    max_jitter_escalations: int = 6

    def __post_init__(self):
        if not (0 < self.damping < 1):
            raise ValueError("damping must be in (0, 1)")
        if self.tolerance <= 0 or self.max_sweeps < 1:
            raise ValueError("tolerance must be positive and max_sweeps >= 1")


@dataclass(frozen=True)
class BinaryDataset:
    """Tasked inputs with +/-1 targets for one one-vs-all subproblem."""

    inputs: list[TaskedInput]
    targets: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim != 1 or y.size != len(self.inputs) or y.size == 0:
            raise ValueError("targets must be a 1-d array matching inputs, nonempty")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("targets must be +/-1")
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return self.targets.size


@dataclass(frozen=True, eq=False)
class EPApproximation:
    """EP site parameters, Gaussian posterior and evidence for one binary GPC."""

    site_nu: np.ndarray
    site_tau: np.ndarray
    post_mean: np.ndarray
    post_cov: np.ndarray
    log_evidence: float
    converged: bool
    sweeps: int
    jitter_added: float = 0.0


@dataclass(frozen=True)
class LatentPrediction:
    """Gaussian predictive latent; ``mean``/``variance`` may be scalars or arrays."""

    mean: np.ndarray
    variance: np.ndarray


def _posterior_from_sites(K, site_nu, site_tau):
    """Rebuild (Sigma, mu, L) from sites; raises LinAlgError if chol fails."""
    n = K.shape[0]
    srt = np.sqrt(site_tau)
    B = np.eye(n) + (srt[:, None] * K) * srt[None, :]
    L = cholesky(B, lower=True, check_finite=False)
    if not np.all(np.isfinite(L)):
        raise np.linalg.LinAlgError("non-finite Cholesky factor")
    V = solve_triangular(L, srt[:, None] * K, lower=True, check_finite=False)
    Sigma = K - V.T @ V
    Sigma = (Sigma + Sigma.T) / 2.0
    mu = Sigma @ site_nu
    return Sigma, mu, L


def _probit_moments(y, nu_cav, tau_cav):
    """Log normalizer and derivative terms of the tilted probit distribution."""
    var_cav = 1.0 / tau_cav
    mu_cav = nu_cav * var_cav
    s = np.sqrt(1.0 + var_cav)
    z = y * mu_cav / s
    logphi = log_ndtr(z)
    # phi(z)/Phi(z), stable for very negative z
    ratio = np.exp(-0.5 * z * z - 0.5 * _LOG_2PI - logphi)
    dlz = y * ratio / s
    d2lz = -ratio * (z + ratio) / (1.0 + var_cav)
    mu_hat = mu_cav + var_cav * dlz
    var_hat = var_cav * (1.0 + var_cav * d2lz)
    return logphi, mu_hat, var_hat


def _damped_steps(old, delta, damping):
    """Per-site step scales in {1, damping, damping^2, ...} keeping old+s*delta >= 0."""
    scale = np.ones_like(old)
    for _ in range(60):
        bad = old + scale * delta < 0
        if not np.any(bad):
            return scale
        scale[bad] *= damping
    scale[old + scale * delta < 0] = 0.0
    return scale


def ep_fit(K, y, cfg: EPConfig | None = None) -> EPApproximation:
    """Fit the EP approximation for targets ``y`` under Gram matrix ``K``.

    Sweeps run until the largest site-parameter change falls below
    ``cfg.tolerance`` or ``cfg.max_sweeps`` is reached; hitting the sweep
    limit is reported on the returned approximation (``converged=False``)
    rather than raised, since evidence optimization legitimately probes bad
    hyperparameters.  A Gram matrix that cannot be factorized even after
    escalating diagonal jitter raises :class:`NumericalError`.
    """
    if cfg is None:
        cfg = EPConfig()
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    if K.shape != (n, n):
        raise ValueError(f"K must be ({n}, {n}), got {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ValueError("K contains non-finite entries")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("targets must be +/-1")

    scale = float(np.mean(np.abs(np.diag(K)))) or 1.0
    jitter = 0.0
    # oversubscribed BLAS pools are 10-50x slower at these matrix sizes
    with threadpool_limits(limits=1):
        for escalation in range(cfg.max_jitter_escalations + 1):
            try:
                return _ep_fit_inner(K, y, cfg, jitter)
            except np.linalg.LinAlgError:
                jitter = scale * 1e-10 * (100.0 ** escalation)
    raise NumericalError(
        f"Gram matrix could not be factorized after jitter escalation up to {jitter:g}"
    )


def _ep_fit_inner(K, y, cfg, jitter):
    n = y.size
    if jitter:
        K = K + jitter * np.eye(n)
    site_nu = np.zeros(n)
    site_tau = np.zeros(n)
    Sigma = K.copy()
    mu = np.zeros(n)
    L = None
    converged = False
    sweeps = 0

    for sweep in range(1, cfg.max_sweeps + 1):
        sweeps = sweep
        sigma_diag = np.diag(Sigma).copy()
        # guard against a degenerate marginal before forming the cavity
        sigma_diag = np.maximum(sigma_diag, _CAVITY_MIN)
        tau_cav = 1.0 / sigma_diag - site_tau
        nu_cav = mu / sigma_diag - site_nu
        ok = tau_cav > _CAVITY_MIN

        d_tau = np.zeros(n)
        d_nu = np.zeros(n)
        if np.any(ok):
            _, mu_hat, var_hat = _probit_moments(y[ok], nu_cav[ok], tau_cav[ok])
            var_hat = np.maximum(var_hat, 1e-300)
            tau_target = 1.0 / var_hat - tau_cav[ok]
            nu_target = mu_hat / var_hat - nu_cav[ok]
            usable = np.isfinite(tau_target) & np.isfinite(nu_target)
            d_tau[ok] = np.where(usable, tau_target - site_tau[ok], 0.0)
            d_nu[ok] = np.where(usable, nu_target - site_nu[ok], 0.0)

        step = _damped_steps(site_tau, d_tau, cfg.damping)
        site_tau = np.maximum(site_tau + step * d_tau, 0.0)
        site_nu = site_nu + step * d_nu

        Sigma, mu, L = _posterior_from_sites(K, site_nu, site_tau)

        change = max(
            float(np.max(np.abs(step * d_tau))), float(np.max(np.abs(step * d_nu)))
        )
        if change < cfg.tolerance:
            converged = True
            break

    if L is None:  # pragma: no cover - max_sweeps >= 1 guarantees a sweep ran
        Sigma, mu, L = _posterior_from_sites(K, site_nu, site_tau)

    log_evidence = _log_evidence(y, site_nu, site_tau, Sigma, mu, L)
    return EPApproximation(
        site_nu=site_nu,
        site_tau=site_tau,
        post_mean=mu,
        post_cov=Sigma,
        log_evidence=log_evidence,
        converged=converged,
        sweeps=sweeps,
        jitter_added=jitter,
    )


def _log_evidence(y, site_nu, site_tau, Sigma, mu, L):
    """EP marginal likelihood from converged sites and posterior.

    Assembled in natural parameters: per-site normalizer terms plus the
    determinant of B and the quadratic form nu^T Sigma nu / 2.
    """
    sigma_diag = np.maximum(np.diag(Sigma), _CAVITY_MIN)
    tau_cav = np.maximum(1.0 / sigma_diag - site_tau, _CAVITY_MIN)
    nu_cav = mu / sigma_diag - site_nu

    var_cav = 1.0 / tau_cav
    z = y * (nu_cav * var_cav) / np.sqrt(1.0 + var_cav)
    logphi = log_ndtr(z)

    tau_hat = tau_cav + site_tau
    nu_hat = nu_cav + site_nu
    site_terms = (
        logphi
        + 0.5 * np.log(tau_hat / tau_cav)
        - nu_hat**2 / (2.0 * tau_hat)
        + nu_cav**2 / (2.0 * tau_cav)
    )
    det_term = -float(np.sum(np.log(np.diag(L))))
    quad_term = 0.5 * float(site_nu @ mu)
    return float(np.sum(site_terms)) + det_term + quad_term


def predict_latent(
    approx: EPApproximation, K, k_star, k_ss
) -> LatentPrediction:
    """Predictive latent mean and variance at one or more test points.

    ``k_star`` is the vector of kernel values against the training inputs,
    shape (n,) for a single point or (n, m) for a batch; ``k_ss`` is the
    matching scalar or (m,) vector of test self-covariances.
    """
    K = np.asarray(K, dtype=np.float64)
    k_star = np.asarray(k_star, dtype=np.float64)
    n = approx.site_nu.size
    if K.shape != (n, n):
        raise ValueError(f"K must be ({n}, {n}), got {K.shape}")
    single = k_star.ndim == 1
    ks = k_star[:, None] if single else k_star
    if ks.shape[0] != n:
        raise ValueError(f"k_star must have leading dimension {n}")

    with threadpool_limits(limits=1):
        srt = np.sqrt(approx.site_tau)
        B = np.eye(n) + (srt[:, None] * K) * srt[None, :]
        L = cholesky(B, lower=True, check_finite=False)
        w = solve_triangular(L, srt * (K @ approx.site_nu), lower=True, check_finite=False)
        w = solve_triangular(L, w, lower=True, trans="T", check_finite=False)
        alpha = approx.site_nu - srt * w

        mean = ks.T @ alpha
        V = solve_triangular(L, srt[:, None] * ks, lower=True, check_finite=False)
        variance = np.asarray(k_ss, dtype=np.float64) - np.sum(V * V, axis=0)

    bad = variance < -1e-10
    if np.any(bad):
        raise NumericalError(
            f"negative predictive variance {float(np.min(variance)):g}"
        )
    variance = np.maximum(variance, 0.0)
    if single:
        return LatentPrediction(mean=float(mean[0]), variance=float(variance[0]))
    return LatentPrediction(mean=mean, variance=variance)


def predict_prob(lp: LatentPrediction):
    """p(y=+1): closed-form probit integral Phi(mean / sqrt(1 + variance))."""
    return ndtr(np.asarray(lp.mean) / np.sqrt(1.0 + np.asarray(lp.variance)))
