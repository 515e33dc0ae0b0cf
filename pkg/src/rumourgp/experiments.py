"""Leave-One-Out / Leave-Part-Out evaluation of the stance classifiers.

One fold per target rumour: LOO trains on all other rumours and tests on the
whole target; LPO additionally moves the first ``k`` target tweets (by
stream position) into training and fixes the test set to positions >= ``l``.
Retweet filtering is applied to training folds only.  Method variants differ
in the training pool and kernel: GP (target prefix only), GPPooled (all
training pooled as one task), GPICM (all training with the rumour as task),
plus the majority baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources as importlib_resources

import numpy as np

from .errors import DataFormatError
from .gpc import EPConfig
from .hyperopt import OptimizerConfig
from .multiclass import (
    FeatureSpace,
    OneVsAllModel,
    ard_relevance,
    classify_batch,
    lexicon_hash,
    train_ova,
    vocab_hash,
)
from .textproc import (
    BrownLexicon,
    StanceLabel,
    TweetRecord,
    build_vocabulary,
    default_emoticons,
    default_stopwords,
    filter_retweets,
    preprocess,
    restrict_lexicon,
)

__all__ = [
    "MODE_LOO",
    "MODE_LPO",
    "Corpus",
    "FoldSpec",
    "MethodSpec",
    "EvalResult",
    "FoldRun",
    "Resources",
    "normalize_records",
    "make_folds",
    "resolve_fold",
    "majority_baseline",
    "majority_baseline_from_counts",
    "load_table2_counts",
    "bundled_table2_counts",
    "run_method",
    "run_eval",
    "run_sweep",
    "ard_report",
    "format_results_table",
    "format_sweep_table",
    "format_ard_report",
]

MODE_LOO = "LOO"
MODE_LPO = "LPO"

_VARIANTS = ("GP", "GPPooled", "GPICM", "Majority")
_FEATURES = ("bow", "brown")


@dataclass(frozen=True)
class Corpus:
    """Records grouped by rumour, rumours ordered lexicographically."""

    records: tuple[TweetRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("corpus must contain at least one record")
        groups: dict[str, list[TweetRecord]] = {}
        for rec in self.records:
            groups.setdefault(rec.rumour_id, []).append(rec)
        for rid, group in groups.items():
            seqs = sorted(r.seq_index for r in group)
            if seqs != list(range(len(group))):
                raise ValueError(
                    f"rumour {rid!r}: seq_index values must be dense 0..{len(group) - 1}"
                )
        object.__setattr__(
            self,
            "_by_rumour",
            {
                rid: tuple(sorted(group, key=lambda r: r.seq_index))
                for rid, group in groups.items()
            },
        )

    @property
    def rumour_ids(self) -> list[str]:
        return sorted(self._by_rumour)

    def by_rumour(self, rumour_id: str) -> tuple[TweetRecord, ...]:
        return self._by_rumour[rumour_id]

    def label_counts(self, rumour_id: str) -> np.ndarray:
        counts = np.zeros(3, dtype=np.int64)
        for rec in self._by_rumour[rumour_id]:
            counts[int(rec.label)] += 1
        return counts


def normalize_records(records: list[TweetRecord]) -> list[TweetRecord]:
    """Re-issue dense 0-based seq_index per rumour (stable by given index, then input order)."""
    order: dict[str, list[tuple[int, int, TweetRecord]]] = {}
    for pos, rec in enumerate(records):
        order.setdefault(rec.rumour_id, []).append((rec.seq_index, pos, rec))
    out: list[tuple[int, TweetRecord]] = []
    for group in order.values():
        group.sort(key=lambda t: (t[0], t[1]))
        for new_seq, (_, pos, rec) in enumerate(group):
            out.append(
                (
                    pos,
                    TweetRecord(
                        tweet_id=rec.tweet_id,
                        rumour_id=rec.rumour_id,
                        seq_index=new_seq,
                        text=rec.text,
                        label=rec.label,
                    ),
                )
            )
    out.sort(key=lambda t: t[0])
    return [rec for _, rec in out]


@dataclass(frozen=True)
class FoldSpec:
    """One evaluation fold: the held-out target rumour and the split parameters."""

    target_rumour: str
    mode: str
    k: int = 0
    l: int = 50

    def __post_init__(self):
        if self.mode not in (MODE_LOO, MODE_LPO):
            raise ValueError(f"mode must be {MODE_LOO} or {MODE_LPO}")
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if self.mode == MODE_LOO and self.k != 0:
            raise ValueError("LOO folds use k=0")
        if self.mode == MODE_LPO and self.l <= self.k:
            raise ValueError("LPO folds require l > k")


@dataclass(frozen=True)
class MethodSpec:
    """Model variant plus feature representation."""

    model_variant: str
    features: str = "bow"

    def __post_init__(self):
        if self.model_variant not in _VARIANTS:
            raise ValueError(f"model_variant must be one of {_VARIANTS}")
        if self.features not in _FEATURES:
            raise ValueError(f"features must be one of {_FEATURES}")

    def check_fold(self, fold: FoldSpec) -> None:
        if self.model_variant == "GPICM" and not (fold.mode == MODE_LPO and fold.k >= 1):
            raise ValueError("GPICM requires mode=LPO with k >= 1")
        if self.model_variant == "GP" and fold.k < 1:
            raise ValueError("GP (target-only) requires k >= 1")


@dataclass(frozen=True)
class Resources:
    """Shared immutable preprocessing resources."""

    stopwords: frozenset[str]
    emoticons: dict[str, str]
    brown: BrownLexicon | None = None

    @classmethod
    def default(cls, brown: BrownLexicon | None = None) -> "Resources":
        return cls(
            stopwords=default_stopwords(), emoticons=default_emoticons(), brown=brown
        )


@dataclass(frozen=True)
class EvalResult:
    """Per-rumour accuracies; the macro accuracy is their unweighted mean."""

    per_rumour_accuracy: dict[str, float]
    counts: dict[str, int]

    @property
    def macro_accuracy(self) -> float:
        values = list(self.per_rumour_accuracy.values())
        return sum(values) / len(values)


@dataclass(frozen=True, eq=False)
class FoldRun:
    """Predictions and accuracy of one method on one fold."""

    fold: FoldSpec
    n_test: int
    n_correct: int
    predictions: list[tuple[str, StanceLabel]]
    probs: np.ndarray | None = None

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_test if self.n_test else 0.0


def make_folds(corpus: Corpus, mode: str, k: int = 0, l: int = 50) -> list[FoldSpec]:
    """One fold per rumour; LPO requires every rumour to have more than ``l`` tweets."""
    folds = []
    for rid in corpus.rumour_ids:
        n = len(corpus.by_rumour(rid))
        if mode == MODE_LPO and n <= l:
            raise ValueError(
                f"rumour {rid!r} has {n} tweets, too small for LPO holdout l={l}"
            )
        folds.append(FoldSpec(target_rumour=rid, mode=mode, k=k, l=l))
    return folds


def resolve_fold(
    corpus: Corpus, fold: FoldSpec, res: Resources
) -> tuple[list[TweetRecord], list[TweetRecord]]:
    """Materialize (train, test) record lists; retweet filtering on train only."""
    target = corpus.by_rumour(fold.target_rumour)
    train_pool = [r for r in corpus.records if r.rumour_id != fold.target_rumour]
    if fold.mode == MODE_LOO:
        test = list(target)
    else:
        train_pool += [r for r in target if r.seq_index < fold.k]
        test = [r for r in target if r.seq_index >= fold.l]
    train = filter_retweets(
        train_pool, emoticon_map=res.emoticons, stopwords=res.stopwords
    )
    return train, test


def majority_baseline(fold: FoldSpec, corpus: Corpus, res: Resources | None = None) -> FoldRun:
    """Predict the most frequent training label for every test tweet (ties: lowest code)."""
    if res is None:
        res = Resources.default()
    train, test = resolve_fold(corpus, fold, res)
    counts = np.zeros(3, dtype=np.int64)
    for rec in train:
        counts[int(rec.label)] += 1
    majority = StanceLabel(int(np.argmax(counts)))
    preds = [(rec.tweet_id, majority) for rec in test]
    n_correct = sum(1 for rec in test if rec.label == majority)
    return FoldRun(fold=fold, n_test=len(test), n_correct=n_correct, predictions=preds)


def load_table2_counts(path) -> dict[str, np.ndarray]:
    """Per-rumour class-count fixture: rumour_id<TAB>supporting<TAB>denying<TAB>questioning."""
    counts: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if parts[0] == "rumour_id":
                continue
            if len(parts) != 4:
                raise DataFormatError("expected 4 tab-separated fields", lineno)
            try:
                counts[parts[0]] = np.array([int(p) for p in parts[1:]], dtype=np.int64)
            except ValueError:
                raise DataFormatError(f"bad counts in {parts[1:]!r}", lineno) from None
    if not counts:
        raise DataFormatError("fixture file contains no rumour rows")
    return counts


def bundled_table2_counts() -> dict[str, np.ndarray]:
    ref = importlib_resources.files("rumourgp.data").joinpath("table2_counts.tsv")
    with importlib_resources.as_file(ref) as p:
        return load_table2_counts(p)


def majority_baseline_from_counts(counts: dict[str, np.ndarray]) -> EvalResult:
    """LOO majority baseline computed from per-rumour class counts alone."""
    total = np.sum(list(counts.values()), axis=0)
    per_rumour: dict[str, float] = {}
    sizes: dict[str, int] = {}
    for rid in sorted(counts):
        train = total - counts[rid]
        majority = int(np.argmax(train))
        n = int(np.sum(counts[rid]))
        per_rumour[rid] = float(counts[rid][majority]) / n
        sizes[rid] = n
    return EvalResult(per_rumour_accuracy=per_rumour, counts=sizes)


def _fit_feature_space(
    method: MethodSpec, token_seqs: list[list[str]], res: Resources
) -> FeatureSpace:
    if method.features == "bow":
        vocab = build_vocabulary(token_seqs)
        return FeatureSpace(
            kind="bow", dims=vocab.size, vocab=vocab, source_hash=vocab_hash(vocab)
        )
    if res.brown is None:
        raise ValueError("brown features need a loaded Brown lexicon")
    restricted = restrict_lexicon(res.brown, token_seqs)
    return FeatureSpace(
        kind="brown",
        dims=restricted.n_clusters,
        lexicon=restricted,
        source_hash=lexicon_hash(res.brown),
    )


def _train_fold_model(
    fold: FoldSpec,
    method: MethodSpec,
    train: list[TweetRecord],
    res: Resources,
    opt_cfg: OptimizerConfig,
    ep_cfg: EPConfig,
    kernel_family: str | None = None,
) -> OneVsAllModel:
    if method.model_variant == "GP":
        model_train = [r for r in train if r.rumour_id == fold.target_rumour]
        if not model_train:
            raise ValueError("GP variant has no target-rumour training tweets")
        task_map = None
        family = kernel_family or "linear"
    elif method.model_variant == "GPPooled":
        model_train = list(train)
        task_map = None
        family = kernel_family or "linear"
    elif method.model_variant == "GPICM":
        model_train = list(train)
        rumours = sorted({r.rumour_id for r in model_train})
        task_map = {rid: i for i, rid in enumerate(rumours)}
        family = kernel_family or "icm"
    else:
        raise ValueError(f"variant {method.model_variant} does not train a model")

    token_seqs = [
        preprocess(r.text, emoticon_map=res.emoticons, stopwords=res.stopwords)
        for r in model_train
    ]
    fs = _fit_feature_space(method, token_seqs, res)
    triples = []
    for rec, tokens in zip(model_train, token_seqs):
        task = task_map[rec.rumour_id] if task_map else 0
        triples.append((fs.featurize(tokens), task, rec.label))
    return train_ova(
        triples, family, opt_cfg, ep_cfg, feature_space=fs, task_map=task_map
    )


def run_method(
    fold: FoldSpec,
    method: MethodSpec,
    corpus: Corpus,
    res: Resources | None = None,
    opt_cfg: OptimizerConfig | None = None,
    ep_cfg: EPConfig | None = None,
) -> FoldRun:
    """Train the method on the fold's training side and score the test side."""
    method.check_fold(fold)
    if res is None:
        res = Resources.default()
    if method.model_variant == "Majority":
        return majority_baseline(fold, corpus, res)
    if opt_cfg is None:
        opt_cfg = OptimizerConfig()
    if ep_cfg is None:
        ep_cfg = EPConfig()

    train, test = resolve_fold(corpus, fold, res)
    model = _train_fold_model(fold, method, train, res, opt_cfg, ep_cfg)
    test_tokens = [
        preprocess(r.text, emoticon_map=res.emoticons, stopwords=res.stopwords)
        for r in test
    ]
    xs = [model.feature_space.featurize(t) for t in test_tokens]
    tasks = None
    if model.task_map is not None:
        tasks = [fold.target_rumour] * len(xs)
    labels, probs = classify_batch(model, xs, tasks)
    n_correct = sum(1 for rec, lab in zip(test, labels) if rec.label == lab)
    preds = [(rec.tweet_id, lab) for rec, lab in zip(test, labels)]
    return FoldRun(
        fold=fold, n_test=len(test), n_correct=n_correct, predictions=preds, probs=probs
    )


def run_eval(
    corpus: Corpus,
    method: MethodSpec,
    mode: str,
    k: int = 0,
    l: int = 50,
    res: Resources | None = None,
    opt_cfg: OptimizerConfig | None = None,
    ep_cfg: EPConfig | None = None,
) -> tuple[EvalResult, list[FoldRun]]:
    """Run one method over every fold and aggregate the per-rumour accuracies."""
    folds = make_folds(corpus, mode, k, l)
    runs = [run_method(f, method, corpus, res, opt_cfg, ep_cfg) for f in folds]
    per_rumour = {run.fold.target_rumour: run.accuracy for run in runs}
    counts = {run.fold.target_rumour: run.n_test for run in runs}
    return EvalResult(per_rumour_accuracy=per_rumour, counts=counts), runs


def run_sweep(
    corpus: Corpus,
    method: MethodSpec,
    k_values: list[int],
    l: int = 50,
    res: Resources | None = None,
    opt_cfg: OptimizerConfig | None = None,
    ep_cfg: EPConfig | None = None,
) -> list[tuple[int, float]]:
    """Macro accuracy for each k on the fixed test split (seq_index >= l)."""
    if any(k >= l for k in k_values):
        raise ValueError("all k values must be below the holdout offset l")
    rows = []
    for k in k_values:
        result, _ = run_eval(corpus, method, MODE_LPO, k, l, res, opt_cfg, ep_cfg)
        rows.append((k, result.macro_accuracy))
    return rows


@dataclass(frozen=True)
class ArdReportRow:
    word: str
    cluster: str
    weight: float


def ard_report(
    corpus: Corpus,
    res: Resources,
    k: int = 10,
    l: int = 50,
    top_n: int = 5,
    opt_cfg: OptimizerConfig | None = None,
    ep_cfg: EPConfig | None = None,
) -> dict[StanceLabel, list[ArdReportRow]]:
    """Average GPICM-Brown ARD relevances across folds; top clusters per label.

    Per-feature weights are aligned across folds by cluster bitstring and
    averaged over the folds whose training data contained the cluster.
    """
    if res.brown is None:
        raise ValueError("ard_report needs a Brown lexicon")
    if opt_cfg is None:
        opt_cfg = OptimizerConfig()
    if ep_cfg is None:
        ep_cfg = EPConfig()
    method = MethodSpec(model_variant="GPICM", features="brown")
    folds = make_folds(corpus, MODE_LPO, k, l)
    sums: dict[StanceLabel, dict[str, float]] = {lab: {} for lab in StanceLabel}
    hits: dict[StanceLabel, dict[str, int]] = {lab: {} for lab in StanceLabel}
    for fold in folds:
        method.check_fold(fold)
        train, _ = resolve_fold(corpus, fold, res)
        model = _train_fold_model(fold, method, train, res, opt_cfg, ep_cfg, "icm-ard")
        relevance = ard_relevance(model)
        for lab, ranked in relevance.items():
            # weights are normalized per fold (geometric mean 1) so that the
            # cross-fold average compares relative relevance, not fold scale
            norm = float(np.exp(np.mean([np.log(fw.weight) for fw in ranked])))
            for fw in ranked:
                if fw.detail is None:
                    continue
                sums[lab][fw.detail] = sums[lab].get(fw.detail, 0.0) + fw.weight / norm
                hits[lab][fw.detail] = hits[lab].get(fw.detail, 0) + 1
    reps = res.brown.representatives()
    report: dict[StanceLabel, list[ArdReportRow]] = {}
    for lab in StanceLabel:
        avg = {bits: sums[lab][bits] / hits[lab][bits] for bits in sums[lab]}
        ranked = sorted(avg.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
        report[lab] = [
            ArdReportRow(word=reps.get(bits, bits), cluster=bits, weight=weight)
            for bits, weight in ranked
        ]
    return report


# ---------------------------------------------------------------------------
# plain-text emitters

def format_results_table(
    entries: list[tuple[MethodSpec, str, int, EvalResult]]
) -> str:
    """TSV with one row per rumour and a MACRO row per (method, features, k)."""
    lines = ["method\tfeatures\tmode\tk\trumour_id\tn_test\taccuracy"]
    for method, mode, k, result in entries:
        for rid in sorted(result.per_rumour_accuracy):
            acc = result.per_rumour_accuracy[rid]
            lines.append(
                f"{method.model_variant}\t{method.features}\t{mode}\t{k}"
                f"\t{rid}\t{result.counts[rid]}\t{acc:.6f}"
            )
        total = sum(result.counts.values())
        lines.append(
            f"{method.model_variant}\t{method.features}\t{mode}\t{k}"
            f"\tMACRO\t{total}\t{result.macro_accuracy:.6f}"
        )
    return "\n".join(lines) + "\n"


def format_sweep_table(method: MethodSpec, rows: list[tuple[int, float]]) -> str:
    lines = ["k\tmacro_accuracy"]
    for k, acc in rows:
        lines.append(f"{k}\t{acc:.6f}")
    return "\n".join(lines) + "\n"


def format_ard_report(report: dict[StanceLabel, list[ArdReportRow]]) -> str:
    """Table-style TSV: one rank per row, (word, cluster) per label column."""
    labels = [StanceLabel.SUPPORTING, StanceLabel.DENYING, StanceLabel.QUESTIONING]
    header = []
    for lab in labels:
        name = lab.name.lower()
        header += [f"{name}_word", f"{name}_cluster"]
    lines = ["rank\t" + "\t".join(header)]
    depth = max((len(report.get(lab, [])) for lab in labels), default=0)
    for i in range(depth):
        cells = [str(i + 1)]
        for lab in labels:
            rows = report.get(lab, [])
            if i < len(rows):
                cells += [rows[i].word, rows[i].cluster]
            else:
                cells += ["", ""]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
