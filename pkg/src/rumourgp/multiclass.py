"""One-vs-all stance classifier built from three binary GPC models.

The three binary models share the feature space, training inputs and kernel
family; only the +/-1 target recoding differs (class-of-interest = +1).
Class probabilities are the three independent one-vs-all probit predictions;
the returned label is the argmax with ties broken by the lowest label code.

Models persist to a versioned plain-text format with all floats written as
17-significant-digit decimals, which round-trip float64 exactly.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError
from .gpc import (
    BinaryDataset,
    EPApproximation,
    EPConfig,
    _posterior_from_sites,
    ep_fit,
    predict_latent,
    predict_prob,
)
from .hyperopt import OptimizedParams, OptimizerConfig, optimize_evidence
from .kernels import (
    CoregionalizationParams,
    LinearKernelParams,
    TaskedInput,
    add_jitter,
    coreg_matrix,
    icm_gram_matrix,
    linear_gram_matrix,
    stack_features,
)
from .textproc import BrownLexicon, SparseFeatureVector, StanceLabel, Vocabulary

__all__ = [
    "FeatureSpace",
    "ClassPosterior",
    "BinaryModel",
    "OneVsAllModel",
    "FeatureWeight",
    "train_ova",
    "classify",
    "classify_batch",
    "ard_relevance",
    "save_model",
    "load_model",
    "lexicon_hash",
    "vocab_hash",
]

FORMAT_NAME = "rumourgp-ova"
FORMAT_VERSION = 1


def _g17(x: float) -> str:
    return f"{float(x):.17g}"


def vocab_hash(vocab: Vocabulary) -> str:
    lines = sorted(f"{t}\t{i}" for t, i in vocab.entries.items())
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def lexicon_hash(lexicon: BrownLexicon) -> str:
    lines = sorted(f"{w}\t{b}" for w, b in lexicon.entries.items())
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FeatureSpace:
    """Descriptor of the feature mapping a model was trained with."""

    kind: str  # "bow" | "brown" | "raw"
    dims: int
    vocab: Vocabulary | None = None
    lexicon: BrownLexicon | None = None
    source_hash: str = ""

    def featurize(self, tokens: list[str]) -> SparseFeatureVector:
        from . import textproc

        if self.kind == "bow":
            return textproc.featurize_bow(tokens, self.vocab)
        if self.kind == "brown":
            return textproc.featurize_brown(tokens, self.lexicon)
        raise ValueError(f"feature space kind {self.kind!r} cannot featurize tokens")

    def feature_names(self) -> list[tuple[str, str | None]]:
        """(display name, detail) per feature index; detail is the Brown bitstring."""
        names: list[tuple[str, str | None]] = [(f"f{i}", None) for i in range(self.dims)]
        if self.kind == "bow":
            for token, i in self.vocab.entries.items():
                names[i] = (token, None)
        elif self.kind == "brown":
            reps = self.lexicon.representatives()
            for bits, i in self.lexicon.cluster_index.items():
                names[i] = (reps.get(bits, bits), bits)
        return names

    def describe(self, index: int) -> tuple[str, str | None]:
        return self.feature_names()[index]


@dataclass(frozen=True, eq=False)
class ClassPosterior:
    """Independent one-vs-all probabilities indexed by StanceLabel (no renormalization)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (3,):
            raise ValueError("probs must have shape (3,)")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True, eq=False)
class BinaryModel:
    """One fitted binary GPC: kernel parameters, EP approximation and its Gram."""

    params: OptimizedParams
    approx: EPApproximation
    gram: np.ndarray
    jitter: float
    targets: np.ndarray
    best_log_evidence: float


@dataclass(frozen=True, eq=False)
class OneVsAllModel:
    kernel_family: str
    feature_space: FeatureSpace
    X: sp.csr_matrix
    tasks: np.ndarray
    task_map: dict[str, int] | None
    binary: tuple[BinaryModel, BinaryModel, BinaryModel]

    @property
    def n_train(self) -> int:
        return self.X.shape[0]


def _raw_gram(X, tasks, params: OptimizedParams, X2=None, tasks2=None):
    if params.coreg is None:
        return linear_gram_matrix(X, params.data, X2)
    return icm_gram_matrix(X, tasks, params.data, params.coreg, X2, tasks2)


def _self_kernel(Xs, tasks, params: OptimizedParams) -> np.ndarray:
    sq = Xs.multiply(Xs)
    if params.data.ard_variances is not None:
        k = np.asarray(sq @ params.data.ard_variances).ravel()
    else:
        k = params.data.variance * np.asarray(sq.sum(axis=1)).ravel()
    if params.coreg is not None:
        bdiag = np.diag(coreg_matrix(params.coreg))
        k = k * bdiag[np.asarray(tasks)]
    return k


def train_ova(
    train: list[tuple[SparseFeatureVector, int, StanceLabel]],
    kernel_family: str,
    opt_cfg: OptimizerConfig | None = None,
    ep_cfg: EPConfig | None = None,
    feature_space: FeatureSpace | None = None,
    task_map: dict[str, int] | None = None,
) -> OneVsAllModel:
    """Fit three one-vs-all binary GPCs with independent evidence maximization.

    Labels absent from the training set still get a valid binary model (all
    targets -1).  For ICM families, ``task_map`` gives the rumour -> task
    index correspondence recorded on the model.
    """
    if not train:
        raise ValueError("training set must not be empty")
    if opt_cfg is None:
        opt_cfg = OptimizerConfig()
    if ep_cfg is None:
        ep_cfg = EPConfig()
    xs = [x for x, _, _ in train]
    tasks = np.array([t for _, t, _ in train], dtype=np.int64)
    labels = np.array([int(lab) for _, _, lab in train], dtype=np.int64)
    X = stack_features(xs)
    if feature_space is None:
        feature_space = FeatureSpace(kind="raw", dims=X.shape[1])
    inputs = [TaskedInput(x=x, task=int(t)) for x, t in zip(xs, tasks)]
    n_tasks = int(tasks.max()) + 1 if kernel_family.startswith("icm") else 1

    binaries = []
    for c in range(3):
        y = np.where(labels == c, 1.0, -1.0)
        data = BinaryDataset(inputs=inputs, targets=y)
        params, best = optimize_evidence(
            data, kernel_family, opt_cfg, ep_cfg, n_tasks=n_tasks
        )
        K, jitter = add_jitter(_raw_gram(X, tasks, params))
        approx = ep_fit(K, y, ep_cfg)
        binaries.append(
            BinaryModel(
                params=params,
                approx=approx,
                gram=K,
                jitter=jitter,
                targets=y,
                best_log_evidence=best,
            )
        )
    return OneVsAllModel(
        kernel_family=kernel_family,
        feature_space=feature_space,
        X=X,
        tasks=tasks,
        task_map=dict(task_map) if task_map else None,
        binary=tuple(binaries),
    )


def _resolve_task(model: OneVsAllModel, task) -> int:
    if model.task_map is None:
        return 0
    if isinstance(task, str):
        if task not in model.task_map:
            raise ValueError(f"unknown task {task!r} for this ICM model")
        return model.task_map[task]
    if task is None:
        raise ValueError("ICM model requires a task for prediction")
    task = int(task)
    if not 0 <= task < max(model.task_map.values()) + 1:
        raise ValueError(f"task index {task} out of range")
    return task


def classify_batch(
    model: OneVsAllModel, xs: list[SparseFeatureVector], tasks=None
) -> tuple[list[StanceLabel], np.ndarray]:
    """Classify a batch; returns labels and the (m, 3) one-vs-all probabilities."""
    if not xs:
        return [], np.zeros((0, 3))
    if any(x.dims != model.X.shape[1] for x in xs):
        raise ValueError("feature dimensionality does not match the model")
    if tasks is None:
        tasks = [None] * len(xs)
    task_idx = np.array([_resolve_task(model, t) for t in tasks], dtype=np.int64)
    Xs = stack_features(xs)
    probs = np.zeros((len(xs), 3))
    for c, bm in enumerate(model.binary):
        k_star = _raw_gram(model.X, model.tasks, bm.params, Xs, task_idx)
        k_ss = _self_kernel(Xs, task_idx, bm.params)
        lp = predict_latent(bm.approx, bm.gram, k_star, k_ss)
        probs[:, c] = predict_prob(lp)
    label_codes = np.argmax(probs, axis=1)  # argmax takes the lowest index on ties
    labels = [StanceLabel(int(c)) for c in label_codes]
    return labels, probs


def classify(
    model: OneVsAllModel, x: SparseFeatureVector, task=None
) -> tuple[StanceLabel, ClassPosterior]:
    labels, probs = classify_batch(model, [x], [task])
    return labels[0], ClassPosterior(probs=probs[0])


@dataclass(frozen=True)
class FeatureWeight:
    name: str
    detail: str | None
    weight: float


def ard_relevance(model: OneVsAllModel) -> dict[StanceLabel, list[FeatureWeight]]:
    """Features ranked by descending learned ARD variance, per label."""
    if not model.kernel_family.endswith("-ard"):
        raise ValueError("model was not trained with ARD variances")
    names = model.feature_space.feature_names()
    out: dict[StanceLabel, list[FeatureWeight]] = {}
    for c, bm in enumerate(model.binary):
        ard = bm.params.data.ard_variances
        if ard is None:
            raise ValueError("binary model is missing ARD variances")
        order = np.argsort(-ard, kind="stable")
        ranked = []
        for idx in order:
            name, detail = names[int(idx)]
            ranked.append(FeatureWeight(name=name, detail=detail, weight=float(ard[idx])))
        out[StanceLabel(c)] = ranked
    return out


# ---------------------------------------------------------------------------
# persistence

def save_model(model: OneVsAllModel, path) -> None:
    """Write the model to ``path`` atomically (temp file + rename)."""
    lines: list[str] = []
    w = lines.append
    w(f"format\t{FORMAT_NAME}\t{FORMAT_VERSION}")
    w(f"kernel\t{model.kernel_family}")
    fs = model.feature_space
    w(f"features\t{fs.kind}")
    w(f"feature_hash\t{fs.source_hash}")
    w(f"n_features\t{fs.dims}")
    w(f"n_train\t{model.n_train}")
    if model.task_map is not None:
        w(f"n_tasks\t{max(model.task_map.values()) + 1}")
        for rid, idx in sorted(model.task_map.items(), key=lambda kv: kv[1]):
            w(f"task\t{idx}\t{rid}")
    else:
        w("n_tasks\t0")
    if fs.kind == "bow":
        for token, idx in sorted(fs.vocab.entries.items(), key=lambda kv: kv[1]):
            w(f"feat\t{idx}\t{token}")
    elif fs.kind == "brown":
        for bits, idx in sorted(fs.lexicon.cluster_index.items(), key=lambda kv: kv[1]):
            w(f"feat\t{idx}\t{bits}")
    w("tasks\t" + " ".join(str(int(t)) for t in model.tasks))
    coo = model.X.tocoo()
    w(f"inputs_nnz\t{coo.nnz}")
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        w(f"x\t{int(r)}\t{int(c)}\t{_g17(v)}")
    for c, bm in enumerate(model.binary):
        w(f"binary\t{c}")
        w(f"jitter\t{_g17(bm.jitter)}")
        w(f"converged\t{int(bm.approx.converged)}")
        w(f"sweeps\t{bm.approx.sweeps}")
        w(f"log_evidence\t{_g17(bm.approx.log_evidence)}")
        w(f"best_log_evidence\t{_g17(bm.best_log_evidence)}")
        if bm.params.data.ard_variances is not None:
            w("ard\t" + " ".join(_g17(a) for a in bm.params.data.ard_variances))
        else:
            w(f"variance\t{_g17(bm.params.data.variance)}")
        if bm.params.coreg is not None:
            w("kappa\t" + " ".join(_g17(k) for k in bm.params.coreg.kappa))
            w("v\t" + " ".join(_g17(v) for v in bm.params.coreg.v))
        w("targets\t" + " ".join("1" if t > 0 else "-1" for t in bm.targets))
        w("site_nu\t" + " ".join(_g17(v) for v in bm.approx.site_nu))
        w("site_tau\t" + " ".join(_g17(v) for v in bm.approx.site_tau))
        w("end_binary")
    payload = "\n".join(lines) + "\n"

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next(self, expect: str | None = None) -> list[str]:
        if self.pos >= len(self.lines):
            raise DataFormatError("unexpected end of model file", self.pos + 1)
        parts = self.lines[self.pos].split("\t")
        self.pos += 1
        if expect is not None and parts[0] != expect:
            raise DataFormatError(f"expected {expect!r}, found {parts[0]!r}", self.pos)
        return parts

    def peek_key(self) -> str | None:
        if self.pos >= len(self.lines):
            return None
        return self.lines[self.pos].split("\t", 1)[0]


def _floats(field: str) -> np.ndarray:
    return np.array([float(t) for t in field.split(" ")] if field else [], dtype=np.float64)


def load_model(path, lexicon: BrownLexicon | None = None) -> OneVsAllModel:
    """Load a persisted model.

    Brown-feature models need the source cluster ``lexicon`` to rebuild the
    word -> cluster mapping; its hash must match the one recorded at save
    time.
    """
    r = _Reader(path)
    fmt = r.next("format")
    if fmt[1] != FORMAT_NAME or int(fmt[2]) != FORMAT_VERSION:
        raise DataFormatError(f"unsupported model format {fmt[1:]!r}")
    kernel_family = r.next("kernel")[1]
    kind = r.next("features")[1]
    source_hash = r.next("feature_hash")[1]
    dims = int(r.next("n_features")[1])
    n_train = int(r.next("n_train")[1])
    n_tasks = int(r.next("n_tasks")[1])
    task_map: dict[str, int] | None = None
    if n_tasks > 0:
        task_map = {}
        for _ in range(n_tasks):
            parts = r.next("task")
            task_map[parts[2]] = int(parts[1])

    vocab = None
    restricted = None
    feat_entries: dict[str, int] = {}
    while r.peek_key() == "feat":
        parts = r.next("feat")
        feat_entries[parts[2]] = int(parts[1])
    if kind == "bow":
        vocab = Vocabulary(entries=feat_entries)
        if vocab_hash(vocab) != source_hash:
            raise DataFormatError("stored vocabulary does not match its hash")
    elif kind == "brown":
        if lexicon is None:
            raise DataFormatError("a Brown model needs its source lexicon to load")
        if lexicon_hash(lexicon) != source_hash:
            raise DataFormatError("provided lexicon does not match the recorded hash")
        entries = {w: b for w, b in lexicon.entries.items() if b in feat_entries}
        counts = {w: lexicon.counts.get(w, 0) for w in entries}
        restricted = BrownLexicon(entries=entries, cluster_index=feat_entries, counts=counts)
    feature_space = FeatureSpace(
        kind=kind, dims=dims, vocab=vocab, lexicon=restricted, source_hash=source_hash
    )

    tasks = np.array([int(t) for t in r.next("tasks")[1].split(" ") if t], dtype=np.int64)
    nnz = int(r.next("inputs_nnz")[1])
    rows = np.zeros(nnz, dtype=np.int64)
    cols = np.zeros(nnz, dtype=np.int64)
    vals = np.zeros(nnz)
    for i in range(nnz):
        parts = r.next("x")
        rows[i], cols[i], vals[i] = int(parts[1]), int(parts[2]), float(parts[3])
    X = sp.coo_matrix((vals, (rows, cols)), shape=(n_train, dims)).tocsr()

    binaries = []
    for c in range(3):
        if int(r.next("binary")[1]) != c:
            raise DataFormatError("binary blocks out of order")
        jitter = float(r.next("jitter")[1])
        converged = bool(int(r.next("converged")[1]))
        sweeps = int(r.next("sweeps")[1])
        log_evidence = float(r.next("log_evidence")[1])
        best = float(r.next("best_log_evidence")[1])
        key = r.peek_key()
        if key == "ard":
            data_params = LinearKernelParams(
                variance=1.0, ard_variances=_floats(r.next("ard")[1])
            )
        else:
            data_params = LinearKernelParams(variance=float(r.next("variance")[1]))
        coreg = None
        if r.peek_key() == "kappa":
            kappa = _floats(r.next("kappa")[1])
            v = _floats(r.next("v")[1])
            coreg = CoregionalizationParams(kappa=kappa, v=v)
        params = OptimizedParams(data=data_params, coreg=coreg)
        targets = _floats(r.next("targets")[1])
        site_nu = _floats(r.next("site_nu")[1])
        site_tau = _floats(r.next("site_tau")[1])
        r.next("end_binary")

        K_raw = _raw_gram(X, tasks, params)
        K = K_raw.copy()
        K[np.diag_indices_from(K)] += jitter
        Sigma, mu, _ = _posterior_from_sites(K, site_nu, site_tau)
        approx = EPApproximation(
            site_nu=site_nu,
            site_tau=site_tau,
            post_mean=mu,
            post_cov=Sigma,
            log_evidence=log_evidence,
            converged=converged,
            sweeps=sweeps,
        )
        binaries.append(
            BinaryModel(
                params=params,
                approx=approx,
                gram=K,
                jitter=jitter,
                targets=targets,
                best_log_evidence=best,
            )
        )
    return OneVsAllModel(
        kernel_family=kernel_family,
        feature_space=feature_space,
        X=X,
        tasks=tasks,
        task_map=task_map,
        binary=tuple(binaries),
    )
