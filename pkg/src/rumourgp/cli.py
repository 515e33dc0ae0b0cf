"""Command-line interface: ingestion, training, prediction, evaluation, reports.

Commands share a flat ``key=value`` config file (section-prefixed keys such
as ``method.variant`` or ``fold.k``); command-line flags override config
values.  Every output artifact starts with comment lines recording the
package version, a hash of the resolved configuration and the seed, and is
written to a temporary file and atomically renamed, so partial outputs are
never left behind.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
from dataclasses import dataclass, field

from . import __version__
from .errors import DataFormatError, NumericalError
from .experiments import (
    MODE_LOO,
    MODE_LPO,
    Corpus,
    EvalResult,
    MethodSpec,
    Resources,
    ard_report,
    bundled_table2_counts,
    format_ard_report,
    format_results_table,
    format_sweep_table,
    load_table2_counts,
    majority_baseline_from_counts,
    normalize_records,
    run_eval,
    run_sweep,
)
from .gpc import EPConfig
from .hyperopt import OptimizerConfig
from .multiclass import classify_batch, load_model, save_model
from .textproc import (
    StanceLabel,
    TweetRecord,
    filter_retweets,
    load_brown_lexicon,
    load_emoticons,
    load_stopwords,
    preprocess,
)

__all__ = ["main", "ingest", "RunConfig"]


class UsageError(ValueError):
    pass


def ingest(path) -> Corpus:
    """Parse a corpus TSV into a Corpus with dense per-rumour seq_index.

    Line format: tweet_id<TAB>rumour_id<TAB>seq_index<TAB>label<TAB>text with
    label in {support, deny, question}; a header line whose first field is
    the literal "tweet_id" is skipped.  The text field may itself contain
    tabs.
    """
    records: list[TweetRecord] = []
    seen: set[tuple[str, str]] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read corpus file: {exc}") from exc
    with fh:
        first_content_line = True
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 4)
            if parts[0] == "tweet_id" and first_content_line:
                first_content_line = False
                continue
            first_content_line = False
            if len(parts) != 5:
                raise DataFormatError("expected 5 tab-separated fields", lineno)
            tweet_id, rumour_id, seq_s, label_s, text = parts
            key = (rumour_id, tweet_id)
            if key in seen:
                raise DataFormatError(
                    f"duplicate (rumour_id, tweet_id) = {key!r}", lineno
                )
            seen.add(key)
            try:
                seq = int(seq_s)
                if seq < 0:
                    raise ValueError
            except ValueError:
                raise DataFormatError(f"bad seq_index {seq_s!r}", lineno) from None
            try:
                label = StanceLabel.from_string(label_s)
            except DataFormatError as exc:
                raise DataFormatError(str(exc), lineno) from None
            records.append(
                TweetRecord(
                    tweet_id=tweet_id,
                    rumour_id=rumour_id,
                    seq_index=seq,
                    text=text,
                    label=label,
                )
            )
    if not records:
        raise DataFormatError("corpus file contains no records")
    return Corpus(records=tuple(normalize_records(records)))


# ---------------------------------------------------------------------------
# configuration

_CONFIG_DEFAULTS = {
    "corpus": "",
    "output": "",
    "model": "",
    "paths.brown": "",
    "paths.stopwords": "",
    "paths.emoticons": "",
    "method.variant": "GPPooled",
    "method.features": "bow",
    "fold.mode": MODE_LOO,
    "fold.k": "0",
    "fold.l": "50",
    "sweep.k_values": "0,10,20,30,40,50",
    "opt.restarts": "3",
    "opt.max_evals": "200",
    "opt.log_lo": "-4",
    "opt.log_hi": "4",
    "opt.v_lo": "-3",
    "opt.v_hi": "3",
    "opt.tolerance": "1e-3",
    "ep.tolerance": "1e-4",
    "ep.max_sweeps": "100",
    "ard.top_n": "5",
    "baseline.fixture": "",
    "seed": "0",
}


def _read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in _CONFIG_DEFAULTS:
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


@dataclass
class RunConfig:
    """Resolved configuration of one CLI invocation."""

    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        values = dict(_CONFIG_DEFAULTS)
        if getattr(args, "config", None):
            values.update(_read_config_file(args.config))
        overrides = {
            "corpus": getattr(args, "corpus", None),
            "output": getattr(args, "output", None),
            "model": getattr(args, "model", None),
            "paths.brown": getattr(args, "brown", None),
            "paths.stopwords": getattr(args, "stopwords", None),
            "paths.emoticons": getattr(args, "emoticons", None),
            "method.variant": getattr(args, "variant", None),
            "method.features": getattr(args, "features", None),
            "fold.mode": getattr(args, "mode", None),
            "fold.k": getattr(args, "k", None),
            "fold.l": getattr(args, "l", None),
            "sweep.k_values": getattr(args, "k_values", None),
            "ard.top_n": getattr(args, "top_n", None),
            "baseline.fixture": getattr(args, "fixture", None),
            "seed": getattr(args, "seed", None),
        }
        for key, val in overrides.items():
            if val is not None:
                values[key] = str(val)
        return cls(values=values)

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise UsageError(f"config {key} must be an integer") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise UsageError(f"config {key} must be a number") from None

    @property
    def seed(self) -> int:
        return self.get_int("seed")

    def config_hash(self) -> str:
        # the output destination does not affect the computation
        canon = "\n".join(
            f"{k}={self.values[k]}" for k in sorted(self.values) if k != "output"
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def require_path(self, key: str, purpose: str) -> str:
        path = self.values[key]
        if not path:
            raise UsageError(f"{purpose} required (set {key})")
        if not os.path.exists(path):
            raise UsageError(f"{purpose} not found: {path}")
        return path

    def resources(self, need_brown: bool) -> Resources:
        stopwords_path = self.values["paths.stopwords"]
        emoticons_path = self.values["paths.emoticons"]
        stopwords = (
            load_stopwords(stopwords_path)
            if stopwords_path
            else Resources.default().stopwords
        )
        emoticons = (
            load_emoticons(emoticons_path)
            if emoticons_path
            else Resources.default().emoticons
        )
        brown = None
        if need_brown or self.values["paths.brown"]:
            if need_brown:
                self.require_path("paths.brown", "Brown lexicon")
            if self.values["paths.brown"]:
                brown = load_brown_lexicon(self.values["paths.brown"])
        return Resources(stopwords=stopwords, emoticons=emoticons, brown=brown)

    def method(self) -> MethodSpec:
        try:
            return MethodSpec(
                model_variant=self.values["method.variant"],
                features=self.values["method.features"],
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            restarts=self.get_int("opt.restarts"),
            max_evals=self.get_int("opt.max_evals"),
            log_bounds=(self.get_float("opt.log_lo"), self.get_float("opt.log_hi")),
            v_bounds=(self.get_float("opt.v_lo"), self.get_float("opt.v_hi")),
            tolerance=self.get_float("opt.tolerance"),
            seed=self.seed,
        )

    def ep(self) -> EPConfig:
        return EPConfig(
            tolerance=self.get_float("ep.tolerance"),
            max_sweeps=self.get_int("ep.max_sweeps"),
        )


def _header(cfg: RunConfig, command: str) -> str:
    return (
        f"# rumourgp {__version__} {command}\n"
        f"# config_hash {cfg.config_hash()}\n"
        f"# seed {cfg.seed}\n"
    )


def _emit(cfg: RunConfig, command: str, body: str) -> None:
    """Write header+body to the configured output atomically, or stdout."""
    text = _header(cfg, command) + body
    out = cfg.values["output"]
    if not out:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(out) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands

def _cmd_ingest_check(cfg: RunConfig) -> int:
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    lines = ["rumour_id\tn\tsupport\tdeny\tquestion"]
    for rid in corpus.rumour_ids:
        c = corpus.label_counts(rid)
        lines.append(f"{rid}\t{int(c.sum())}\t{c[0]}\t{c[1]}\t{c[2]}")
    _emit(cfg, "ingest-check", "\n".join(lines) + "\n")
    return 0


def _train_full_corpus(cfg: RunConfig):
    from .experiments import _fit_feature_space  # shared fitting helper
    from .multiclass import train_ova

    method = cfg.method()
    if method.model_variant not in ("GPPooled", "GPICM"):
        raise UsageError("train supports method.variant GPPooled or GPICM")
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    res = cfg.resources(need_brown=method.features == "brown")
    train = filter_retweets(
        list(corpus.records), emoticon_map=res.emoticons, stopwords=res.stopwords
    )
    token_seqs = [
        preprocess(r.text, emoticon_map=res.emoticons, stopwords=res.stopwords)
        for r in train
    ]
    fs = _fit_feature_space(method, token_seqs, res)
    if method.model_variant == "GPICM":
        rumours = sorted({r.rumour_id for r in train})
        task_map = {rid: i for i, rid in enumerate(rumours)}
        family = "icm"
    else:
        task_map = None
        family = "linear"
    triples = []
    for rec, tokens in zip(train, token_seqs):
        task = task_map[rec.rumour_id] if task_map else 0
        triples.append((fs.featurize(tokens), task, rec.label))
    return train_ova(
        triples, family, cfg.optimizer(), cfg.ep(), feature_space=fs, task_map=task_map
    )


def _cmd_train(cfg: RunConfig) -> int:
    model_path = cfg.values["model"]
    if not model_path:
        raise UsageError("train requires a model output path (set model)")
    model = _train_full_corpus(cfg)
    save_model(model, model_path)
    sys.stderr.write(f"model written to {model_path}\n")
    return 0


def _cmd_predict(cfg: RunConfig) -> int:
    model_path = cfg.require_path("model", "model file")
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    peek = _peek_model_features(model_path)
    res = cfg.resources(need_brown=peek == "brown")
    model = load_model(model_path, lexicon=res.brown)
    records = list(corpus.records)
    tokens = [
        preprocess(r.text, emoticon_map=res.emoticons, stopwords=res.stopwords)
        for r in records
    ]
    xs = [model.feature_space.featurize(t) for t in tokens]
    tasks = [r.rumour_id for r in records] if model.task_map is not None else None
    labels, probs = classify_batch(model, xs, tasks)
    lines = ["tweet_id\tpredicted_label\tp_support\tp_deny\tp_question"]
    for rec, lab, p in zip(records, labels, probs):
        lines.append(
            f"{rec.tweet_id}\t{lab.to_string()}\t{p[0]:.6f}\t{p[1]:.6f}\t{p[2]:.6f}"
        )
    _emit(cfg, "predict", "\n".join(lines) + "\n")
    return 0


def _peek_model_features(path) -> str:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "features":
                return parts[1]
    raise DataFormatError("model file has no features line")


def _cmd_eval(cfg: RunConfig) -> int:
    method = cfg.method()
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    res = cfg.resources(need_brown=method.features == "brown")
    mode = cfg.values["fold.mode"]
    if mode not in (MODE_LOO, MODE_LPO):
        raise UsageError("fold.mode must be LOO or LPO")
    result, _ = run_eval(
        corpus,
        method,
        mode,
        cfg.get_int("fold.k"),
        cfg.get_int("fold.l"),
        res,
        cfg.optimizer(),
        cfg.ep(),
    )
    body = format_results_table([(method, mode, cfg.get_int("fold.k"), result)])
    _emit(cfg, "eval", body)
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    method = cfg.method()
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    res = cfg.resources(need_brown=method.features == "brown")
    try:
        k_values = [int(s) for s in cfg.values["sweep.k_values"].split(",") if s.strip()]
    except ValueError:
        raise UsageError("sweep.k_values must be a comma-separated integer list") from None
    rows = run_sweep(
        corpus, method, k_values, cfg.get_int("fold.l"), res, cfg.optimizer(), cfg.ep()
    )
    _emit(cfg, "sweep", format_sweep_table(method, rows))
    return 0


def _baseline_result(cfg: RunConfig) -> EvalResult:
    fixture = cfg.values["baseline.fixture"]
    if fixture:
        if fixture == "table2":
            counts = bundled_table2_counts()
        else:
            counts = load_table2_counts(fixture)
        return majority_baseline_from_counts(counts)
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    res = cfg.resources(need_brown=False)
    mode = cfg.values["fold.mode"]
    result, _ = run_eval(
        corpus,
        MethodSpec(model_variant="Majority", features=cfg.values["method.features"]),
        mode,
        cfg.get_int("fold.k"),
        cfg.get_int("fold.l"),
        res,
    )
    return result


def _cmd_baseline(cfg: RunConfig) -> int:
    result = _baseline_result(cfg)
    lines = ["rumour_id\tn_test\taccuracy"]
    for rid in sorted(result.per_rumour_accuracy):
        lines.append(
            f"{rid}\t{result.counts[rid]}\t{result.per_rumour_accuracy[rid]:.6f}"
        )
    lines.append(f"macro_accuracy\t\t{result.macro_accuracy:.6f}")
    _emit(cfg, "baseline", "\n".join(lines) + "\n")
    return 0


def _cmd_ard_report(cfg: RunConfig) -> int:
    corpus = ingest(cfg.require_path("corpus", "corpus file"))
    res = cfg.resources(need_brown=True)
    report = ard_report(
        corpus,
        res,
        k=cfg.get_int("fold.k") or 10,
        l=cfg.get_int("fold.l"),
        top_n=cfg.get_int("ard.top_n"),
        opt_cfg=cfg.optimizer(),
        ep_cfg=cfg.ep(),
    )
    _emit(cfg, "ard-report", format_ard_report(report))
    return 0


_COMMANDS = {
    "ingest-check": _cmd_ingest_check,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "baseline": _cmd_baseline,
    "ard-report": _cmd_ard_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's default 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rumourgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--corpus")
        p.add_argument("--output")
        p.add_argument("--brown")
        p.add_argument("--stopwords")
        p.add_argument("--emoticons")
        if name in ("train", "predict"):
            p.add_argument("--model")
        if name in ("train", "eval", "sweep"):
            p.add_argument("--variant")
            p.add_argument("--features")
        if name in ("eval", "baseline", "ard-report", "sweep"):
            p.add_argument("--mode")
            p.add_argument("--k", type=int)
            p.add_argument("--l", type=int)
        if name == "sweep":
            p.add_argument("--k-values", dest="k_values")
        if name == "ard-report":
            p.add_argument("--top-n", dest="top_n", type=int)
        if name == "baseline":
            p.add_argument("--fixture")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig.resolve(args)
        return _COMMANDS[args.command](cfg)
    except SystemExit:
        raise
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except DataFormatError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 3
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
