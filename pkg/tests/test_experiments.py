import numpy as np
import pytest

from rumourgp.errors import DataFormatError
from rumourgp.experiments import (
    MODE_LOO,
    MODE_LPO,
    Corpus,
    FoldSpec,
    MethodSpec,
    Resources,
    bundled_table2_counts,
    format_ard_report,
    format_results_table,
    format_sweep_table,
    load_table2_counts,
    majority_baseline,
    majority_baseline_from_counts,
    make_folds,
    normalize_records,
    resolve_fold,
    run_eval,
    run_method,
    run_sweep,
)
from rumourgp.gpc import EPConfig
from rumourgp.hyperopt import OptimizerConfig
from rumourgp.textproc import StanceLabel, TweetRecord

FAST_EP = EPConfig(tolerance=1e-3, max_sweeps=50)
FAST_OPT = OptimizerConfig(restarts=1, max_evals=15, tolerance=1e-2, seed=5)

S, D, Q = StanceLabel.SUPPORTING, StanceLabel.DENYING, StanceLabel.QUESTIONING


def tiny_corpus():
    """Three small hand-written rumours, retweet-free, seq-dense."""
    rows = [
        ("a", 0, "fire in the zoo", S),
        ("a", 1, "the zoo fire is fake", D),
        ("a", 2, "really a fire at the zoo?", Q),
        ("a", 3, "confirmed fire near zoo", S),
        ("b", 0, "tanks heading to the bank", S),
        ("b", 1, "no tanks anywhere fake story", D),
        ("b", 2, "tanks at the bank?", Q),
        ("b", 3, "tanks confirmed by police", S),
        ("c", 0, "hospital attacked by rioters", S),
        ("c", 1, "hospital attack is fake", D),
        ("c", 2, "was the hospital attacked?", Q),
        ("c", 3, "police confirm hospital attack", S),
    ]
    records = [
        TweetRecord(
            tweet_id=f"{r}-{i}", rumour_id=r, seq_index=i, text=text, label=lab
        )
        for r, i, text, lab in rows
    ]
    return Corpus(records=tuple(records))


class TestCorpus:
    def test_lexicographic_rumour_order(self):
        assert tiny_corpus().rumour_ids == ["a", "b", "c"]

    def test_dense_seq_required(self):
        rec = TweetRecord("x", "r", 5, "hello", S)
        with pytest.raises(ValueError, match="dense"):
            Corpus(records=(rec,))

    def test_label_counts(self):
        np.testing.assert_array_equal(tiny_corpus().label_counts("a"), [2, 1, 1])

    def test_normalize_records(self):
        recs = [
            TweetRecord("x", "r", 10, "one", S),
            TweetRecord("y", "r", 3, "two", D),
        ]
        normalized = normalize_records(recs)
        assert [(r.tweet_id, r.seq_index) for r in normalized] == [("x", 1), ("y", 0)]


class TestFixtureBaseline:
    def test_bundled_counts_match_paper_rows(self):
        counts = bundled_table2_counts()
        np.testing.assert_array_equal(counts["zoo"], [616, 129, 99])
        np.testing.assert_array_equal(counts["hospital"], [796, 487, 132])
        assert len(counts) == 7

    def test_majority_accuracies(self):
        result = majority_baseline_from_counts(bundled_table2_counts())
        assert abs(result.per_rumour_accuracy["hospital"] - 796 / 1415) < 1e-12
        assert abs(result.per_rumour_accuracy["McDonald's"] - 177 / 190) < 1e-12
        assert result.counts["hospital"] == 1415

    def test_macro_matches_paper_after_rounding(self):
        result = majority_baseline_from_counts(bundled_table2_counts())
        assert abs(result.macro_accuracy - 0.6771) < 5e-4
        assert round(result.macro_accuracy, 2) == 0.68

    def test_macro_is_exact_mean(self):
        result = majority_baseline_from_counts(bundled_table2_counts())
        values = list(result.per_rumour_accuracy.values())
        assert result.macro_accuracy == sum(values) / len(values)

    def test_load_rejects_malformed(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("zoo\t1\t2\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_table2_counts(p)


class TestFolds:
    def test_one_fold_per_rumour_loo(self):
        folds = make_folds(tiny_corpus(), MODE_LOO)
        assert [f.target_rumour for f in folds] == ["a", "b", "c"]
        assert all(f.k == 0 for f in folds)

    def test_loo_split(self):
        corpus = tiny_corpus()
        res = Resources.default()
        fold = FoldSpec("b", MODE_LOO)
        train, test = resolve_fold(corpus, fold, res)
        assert {r.rumour_id for r in train} == {"a", "c"}
        assert [r.tweet_id for r in test] == ["b-0", "b-1", "b-2", "b-3"]

    def test_lpo_split_prefix_and_holdout(self):
        corpus = tiny_corpus()
        res = Resources.default()
        fold = FoldSpec("b", MODE_LPO, k=1, l=2)
        train, test = resolve_fold(corpus, fold, res)
        target_train = [r for r in train if r.rumour_id == "b"]
        assert [r.seq_index for r in target_train] == [0]
        assert [r.seq_index for r in test] == [2, 3]

    def test_lpo_k0_has_no_target_tweets(self):
        train, test = resolve_fold(
            tiny_corpus(), FoldSpec("a", MODE_LPO, k=0, l=2), Resources.default()
        )
        assert all(r.rumour_id != "a" for r in train)

    def test_disjoint_train_test(self):
        corpus = tiny_corpus()
        for fold in make_folds(corpus, MODE_LPO, k=1, l=2):
            train, test = resolve_fold(corpus, fold, Resources.default())
            assert not {r.tweet_id for r in train} & {r.tweet_id for r in test}

    def test_rumour_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            make_folds(tiny_corpus(), MODE_LPO, k=1, l=10)

    def test_invariants(self):
        with pytest.raises(ValueError):
            FoldSpec("a", MODE_LOO, k=3)
        with pytest.raises(ValueError):
            FoldSpec("a", MODE_LPO, k=5, l=5)

    def test_loo_test_sizes_from_table2_sized_corpus(self):
        # a corpus with the fixture's per-rumour sizes: LOO fold test sizes
        # equal the row totals (hospital = 796 + 487 + 132 = 1415)
        counts = bundled_table2_counts()
        records = []
        for rid, row in counts.items():
            seq = 0
            for code, n in enumerate(row):
                for j in range(int(n)):
                    records.append(
                        TweetRecord(
                            tweet_id=f"{rid}-{seq}",
                            rumour_id=rid,
                            seq_index=seq,
                            text=f"tweet {seq} about {rid}",
                            label=StanceLabel(code),
                        )
                    )
                    seq += 1
        corpus = Corpus(records=tuple(records))
        folds = make_folds(corpus, MODE_LOO)
        assert len(folds) == 7
        res = Resources.default()
        sizes = {}
        for fold in folds:
            _, test = resolve_fold(corpus, fold, res)
            sizes[fold.target_rumour] = len(test)
        assert sizes["hospital"] == 1415
        assert sizes["McDonald's"] == 190
        assert sizes["zoo"] == 844

    def test_retweets_filtered_from_training_only(self):
        base = list(tiny_corpus().records)
        base.append(TweetRecord("a-4", "a", 4, "RT @x: fire in the zoo", S))
        corpus = Corpus(records=tuple(base))
        res = Resources.default()
        train, test = resolve_fold(corpus, FoldSpec("b", MODE_LOO), res)
        assert all(not r.text.startswith("RT @") for r in train)
        _, test_a = resolve_fold(corpus, FoldSpec("a", MODE_LOO), res)
        assert any(r.text.startswith("RT @") for r in test_a)


class TestMethodSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            MethodSpec(model_variant="SVM")
        with pytest.raises(ValueError):
            MethodSpec(model_variant="GP", features="tfidf")

    def test_gpicm_needs_lpo_with_k(self):
        spec = MethodSpec(model_variant="GPICM", features="bow")
        with pytest.raises(ValueError):
            spec.check_fold(FoldSpec("a", MODE_LOO))
        with pytest.raises(ValueError):
            spec.check_fold(FoldSpec("a", MODE_LPO, k=0, l=2))
        spec.check_fold(FoldSpec("a", MODE_LPO, k=1, l=2))

    def test_gp_needs_prefix(self):
        spec = MethodSpec(model_variant="GP", features="bow")
        with pytest.raises(ValueError):
            spec.check_fold(FoldSpec("a", MODE_LOO))


class TestMajorityBaseline:
    def test_predicts_training_majority(self):
        corpus = tiny_corpus()
        fold = FoldSpec("a", MODE_LOO)
        run = majority_baseline(fold, corpus)
        # training = rumours b, c: supporting is the majority
        assert all(lab == S for _, lab in run.predictions)
        assert run.n_test == 4 and run.n_correct == 2

    def test_variant_consistency(self):
        corpus = tiny_corpus()
        fold = FoldSpec("a", MODE_LOO)
        direct = majority_baseline(fold, corpus)
        via_method = run_method(
            fold, MethodSpec(model_variant="Majority", features="bow"), corpus
        )
        assert direct.predictions == via_method.predictions
        assert direct.accuracy == via_method.accuracy


class TestRunMethod:
    def test_no_leakage_vocab_from_training_only(self):
        from rumourgp.experiments import _fit_feature_space
        from rumourgp.textproc import preprocess

        base = list(tiny_corpus().records)
        base.append(TweetRecord("a-4", "a", 4, "zargle blorp in the zoo", S))
        corpus = Corpus(records=tuple(base))
        fold = FoldSpec("a", MODE_LOO)
        method = MethodSpec(model_variant="GPPooled", features="bow")
        res = Resources.default()
        train, test = resolve_fold(corpus, fold, res)
        fs = _fit_feature_space(method, [preprocess(r.text) for r in train], res)
        # test-only tokens are absent from the fitted vocabulary -> zero features
        assert "zargl" not in fs.vocab.entries and "zargle" not in fs.vocab.entries
        fv = fs.featurize(preprocess("zargle blorp"))
        assert fv.pairs == []

        run = run_method(fold, method, corpus, opt_cfg=FAST_OPT, ep_cfg=FAST_EP)
        assert run.n_test == 5
        assert run.probs.shape == (5, 3)

    def test_pooled_equals_single_task_icm_with_fixed_params(self, monkeypatch):
        from rumourgp import hyperopt as ho
        from rumourgp import multiclass as mc
        from rumourgp.kernels import CoregionalizationParams, LinearKernelParams

        calls = {"family": []}

        def fixed_optimize(data, family, cfg=None, ep_cfg=None, n_tasks=None, trace_path=None):
            calls["family"].append(family)
            if family == "icm":
                return (
                    ho.OptimizedParams(
                        data=LinearKernelParams(variance=0.5),
                        coreg=CoregionalizationParams(
                            kappa=np.array([1.0]), v=np.array([1.0])
                        ),
                    ),
                    0.0,
                )
            # pooled kernel with sigma^2 * (kappa + v^2) = 0.5 * 2 = 1.0
            return ho.OptimizedParams(data=LinearKernelParams(variance=1.0)), 0.0

        monkeypatch.setattr(mc, "optimize_evidence", fixed_optimize)
        # one-rumour corpus: the ICM task map collapses to a single task
        rows = [
            ("confirmed fire at the zoo", S),
            ("the zoo fire is fake", D),
            ("really a fire at the zoo?", Q),
            ("fire crews at the zoo now", S),
            ("zoo fire story is fake", D),
            ("is the zoo on fire?", Q),
        ]
        records = tuple(
            TweetRecord(f"z-{i}", "z", i, text, lab)
            for i, (text, lab) in enumerate(rows)
        )
        corpus = Corpus(records=records)
        fold = FoldSpec("z", MODE_LPO, k=3, l=4)
        pooled = run_method(
            fold, MethodSpec(model_variant="GPPooled", features="bow"), corpus,
            opt_cfg=FAST_OPT, ep_cfg=FAST_EP,
        )
        icm = run_method(
            fold, MethodSpec(model_variant="GPICM", features="bow"), corpus,
            opt_cfg=FAST_OPT, ep_cfg=FAST_EP,
        )
        assert calls["family"] == ["linear"] * 3 + ["icm"] * 3
        assert pooled.predictions == icm.predictions
        np.testing.assert_allclose(pooled.probs, icm.probs, atol=1e-9)

    def test_gp_uses_target_only(self):
        corpus = tiny_corpus()
        fold = FoldSpec("a", MODE_LPO, k=2, l=3)
        run = run_method(
            fold,
            MethodSpec(model_variant="GP", features="bow"),
            corpus,
            opt_cfg=FAST_OPT,
            ep_cfg=FAST_EP,
        )
        assert run.n_test == 1


class TestDeterminism:
    def test_run_eval_byte_identical(self):
        corpus = tiny_corpus()
        method = MethodSpec(model_variant="GPPooled", features="bow")
        tables = []
        for _ in range(2):
            result, _ = run_eval(
                corpus, method, MODE_LOO, opt_cfg=FAST_OPT, ep_cfg=FAST_EP
            )
            tables.append(format_results_table([(method, MODE_LOO, 0, result)]))
        assert tables[0] == tables[1]


class TestSweep:
    def test_row_count_and_k_validation(self):
        corpus = tiny_corpus()
        method = MethodSpec(model_variant="GPPooled", features="bow")
        rows = run_sweep(
            corpus, method, [0, 1], l=2, opt_cfg=FAST_OPT, ep_cfg=FAST_EP
        )
        assert [k for k, _ in rows] == [0, 1]
        with pytest.raises(ValueError):
            run_sweep(corpus, method, [2], l=2, opt_cfg=FAST_OPT, ep_cfg=FAST_EP)

    def test_sweep_table_format(self):
        method = MethodSpec(model_variant="GPPooled", features="bow")
        text = format_sweep_table(method, [(0, 0.5), (10, 0.75)])
        lines = text.splitlines()
        assert lines[0] == "k\tmacro_accuracy"
        assert lines[1] == "0\t0.500000"


class TestTables:
    def test_results_table_macro_row(self):
        from rumourgp.experiments import EvalResult

        method = MethodSpec(model_variant="Majority", features="bow")
        result = EvalResult(
            per_rumour_accuracy={"a": 0.5, "b": 1.0}, counts={"a": 2, "b": 4}
        )
        text = format_results_table([(method, MODE_LOO, 0, result)])
        lines = text.splitlines()
        assert lines[0].startswith("method\tfeatures")
        assert lines[-1] == "Majority\tbow\tLOO\t0\tMACRO\t6\t0.750000"

    def test_ard_report_format(self):
        from rumourgp.experiments import ArdReportRow

        report = {
            S: [ArdReportRow("yes", "01", 2.0)],
            D: [ArdReportRow("fake", "11", 3.0)],
            Q: [ArdReportRow("?", "10", 1.5)],
        }
        text = format_ard_report(report)
        lines = text.splitlines()
        assert lines[0].split("\t") == [
            "rank",
            "supporting_word", "supporting_cluster",
            "denying_word", "denying_cluster",
            "questioning_word", "questioning_cluster",
        ]
        assert lines[1].split("\t") == ["1", "yes", "01", "fake", "11", "?", "10"]
