"""Kernels over sparse inputs: linear (optionally ARD) and ICM coregionalization.

The pairwise operations (``linear_kernel``, ``icm_kernel``) and the generic
``gram`` builder define the semantics; the ``*_gram_matrix`` helpers compute
the same matrices with vectorized sparse algebra and are what the model code
uses.  Tests assert the two routes agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .textproc import SparseFeatureVector

__all__ = [
    "LinearKernelParams",
    "CoregionalizationParams",
    "TaskedInput",
    "linear_kernel",
    "coreg_matrix",
    "icm_kernel",
    "gram",
    "stack_features",
    "linear_gram_matrix",
    "icm_gram_matrix",
]

DEFAULT_RELATIVE_JITTER = 1e-6


@dataclass(frozen=True)
class LinearKernelParams:
    """Scalar signal variance, or per-feature ARD variances when present."""

    variance: float = 1.0
    ard_variances: np.ndarray | None = None

    def __post_init__(self):
        if self.ard_variances is not None:
            ard = np.asarray(self.ard_variances, dtype=np.float64)
            if ard.ndim != 1 or ard.size == 0:
                raise ValueError("ard_variances must be a nonempty 1-d array")
            if np.any(ard <= 0):
                raise ValueError("ard_variances must be positive")
            object.__setattr__(self, "ard_variances", ard)
        elif self.variance <= 0:
            raise ValueError(f"variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class CoregionalizationParams:
    """Parameters of the task covariance B = diag(kappa) + v v^T."""

    kappa: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if kappa.ndim != 1 or kappa.shape != v.shape or kappa.size < 1:
            raise ValueError("kappa and v must be 1-d arrays of equal positive length")
        if np.any(kappa < 0):
            raise ValueError("kappa entries must be nonnegative")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "v", v)

    @property
    def n_tasks(self) -> int:
        return self.kappa.size


@dataclass(frozen=True)
class TaskedInput:
    """A feature vector tagged with the task (rumour) it belongs to."""

    x: SparseFeatureVector
    task: int

    def __post_init__(self):
        if self.task < 0:
            raise ValueError(f"task index must be nonnegative, got {self.task}")


def linear_kernel(
    x: SparseFeatureVector, x2: SparseFeatureVector, p: LinearKernelParams
) -> float:
    """sigma^2 <x, x2>, or the ARD-weighted dot product sum_i a_i x_i x2_i."""
    if x.dims != x2.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {x2.dims}")
    if p.ard_variances is not None and p.ard_variances.size != x.dims:
        raise ValueError(
            f"ARD length {p.ard_variances.size} does not match dims {x.dims}"
        )
    common, ia, ib = np.intersect1d(x.indices, x2.indices, return_indices=True)
    if common.size == 0:
        return 0.0
    prod = x.values[ia] * x2.values[ib]
    if p.ard_variances is not None:
        return float(np.sum(p.ard_variances[common] * prod))
    return float(p.variance * np.sum(prod))


def coreg_matrix(p: CoregionalizationParams) -> np.ndarray:
    """B = diag(kappa) + v v^T, symmetric positive semidefinite."""
    return np.diag(p.kappa) + np.outer(p.v, p.v)


def icm_kernel(
    a: TaskedInput,
    b: TaskedInput,
    p_data: LinearKernelParams,
    p_coreg: CoregionalizationParams,
) -> float:
    """k_data(a.x, b.x) * B[a.task, b.task]."""
    d = p_coreg.n_tasks
    if a.task >= d or b.task >= d:
        raise ValueError(f"task index out of range for {d} tasks")
    bmat = coreg_matrix(p_coreg)
    return linear_kernel(a.x, b.x, p_data) * float(bmat[a.task, b.task])


def gram(inputs, kernel, jitter: float | None = None) -> np.ndarray:
    """Kernel matrix over ``inputs`` with jitter added to the diagonal.

    The upper triangle is computed and mirrored, so the result is exactly
    symmetric.  ``jitter=None`` uses ``DEFAULT_RELATIVE_JITTER`` times the
    mean diagonal; pass an explicit value (possibly 0) to override.
    """
    n = len(inputs)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = kernel(inputs[i], inputs[j])
    out = out + np.triu(out, 1).T
    if jitter is None:
        jitter = DEFAULT_RELATIVE_JITTER * float(np.mean(np.diag(out)))
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    out[np.diag_indices_from(out)] += jitter
    return out


# ---------------------------------------------------------------------------
# vectorized builders used by the model code

def stack_features(vecs: list[SparseFeatureVector]) -> sp.csr_matrix:
    """Stack sparse feature vectors into an (n, dims) CSR matrix."""
    if not vecs:
        raise ValueError("need at least one feature vector")
    dims = vecs[0].dims
    if any(v.dims != dims for v in vecs):
        raise ValueError("all feature vectors must share dims")
    indptr = np.zeros(len(vecs) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([v.indices.size for v in vecs])
    indices = (
        np.concatenate([v.indices for v in vecs])
        if indptr[-1]
        else np.zeros(0, dtype=np.int64)
    )
    data = (
        np.concatenate([v.values for v in vecs]) if indptr[-1] else np.zeros(0)
    )
    return sp.csr_matrix((data, indices, indptr), shape=(len(vecs), dims))


def linear_gram_matrix(
    X: sp.csr_matrix, p: LinearKernelParams, X2: sp.csr_matrix | None = None
) -> np.ndarray:
    """Dense matrix of linear kernel values between the rows of X and X2."""
    if X2 is None:
        X2 = X
    if p.ard_variances is not None:
        if p.ard_variances.size != X.shape[1]:
            raise ValueError("ARD length does not match dims")
        return np.asarray((X.multiply(p.ard_variances) @ X2.T).todense())
    return p.variance * np.asarray((X @ X2.T).todense())


def icm_gram_matrix(
    X: sp.csr_matrix,
    tasks: np.ndarray,
    p_data: LinearKernelParams,
    p_coreg: CoregionalizationParams,
    X2: sp.csr_matrix | None = None,
    tasks2: np.ndarray | None = None,
) -> np.ndarray:
    """Dense ICM kernel matrix: data kernel scaled entrywise by B[task, task']."""
    if X2 is None:
        X2, tasks2 = X, tasks
    tasks = np.asarray(tasks)
    tasks2 = np.asarray(tasks2)
    if tasks.max(initial=-1) >= p_coreg.n_tasks or tasks2.max(initial=-1) >= p_coreg.n_tasks:
        raise ValueError("task index out of range")
    base = linear_gram_matrix(X, p_data, X2)
    bmat = coreg_matrix(p_coreg)
    return base * bmat[np.ix_(tasks, tasks2)]


def add_jitter(K: np.ndarray, jitter: float | None = None) -> tuple[np.ndarray, float]:
    """Return (K + jitter*I, jitter), defaulting to the relative rule of ``gram``."""
    if jitter is None:
        jitter = DEFAULT_RELATIVE_JITTER * float(np.mean(np.diag(K)))
    out = K.copy()
    out[np.diag_indices_from(out)] += jitter
    return out, jitter
