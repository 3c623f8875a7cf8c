from dataclasses import replace

import numpy as np
import pytest

from bagkit.ensemble import Ensemble, predict_dataset
from bagkit.errors import BagkitError, ConfigError, TrainingDiverged
from bagkit.experiment import (
    DEFAULT_SEARCH_SPACE,
    EnsembleConfig,
    MemberSpec,
    _task_seed,
    equivalence_group,
    grid_search,
    run_config,
    sampling_manifest,
    variance_analysis,
    write_report,
    write_variance_report,
    ConfigResult,
)
from bagkit.metrics import accuracy
from bagkit.predictor import FeatureSpec, Hyperparams, fit, param_count, predict_proba_dataset
from bagkit.prune import PruneSpec, prune_magnitude
from bagkit.resample import bootstrap, derive_seed, materialize
from bagkit.toy import synthetic_task

SPEC = FeatureSpec(dims=256)


@pytest.fixture(scope="module")
def task_acc():
    return synthetic_task("acc2", seed=41, n_train=120, n_val=40, n_test=60)


@pytest.fixture(scope="module")
def task_f1():
    return synthetic_task(
        "f1three", seed=42, num_classes=3, n_train=120, n_val=40, n_test=60, metric="macro_f1"
    )


class TestGridSearch:
    def test_diverging_candidate_skipped(self, task_acc):
        diverging = Hyperparams(learning_rate=1e6, l2=1e-4, epochs=30)
        good = Hyperparams(learning_rate=0.5, epochs=10)
        chosen = grid_search([diverging, good], task_acc.train, task_acc.val,
                             "accuracy", SPEC)
        assert chosen == good

    def test_single_element_returned(self, task_acc):
        only = Hyperparams(epochs=3)
        assert grid_search([only], task_acc.train, task_acc.val, "accuracy", SPEC) == only

    def test_duplicated_best_returns_first(self, task_acc):
        best = Hyperparams(epochs=5)
        space = [best, replace(best)]
        assert grid_search(space, task_acc.train, task_acc.val, "accuracy", SPEC) is space[0]

    def test_empty_space_rejected(self, task_acc):
        with pytest.raises(ConfigError):
            grid_search([], task_acc.train, task_acc.val, "accuracy", SPEC)

    def test_all_diverging_raises(self, task_acc):
        with pytest.raises(TrainingDiverged):
            grid_search(
                [Hyperparams(learning_rate=1e6, l2=1e-4)],
                task_acc.train,
                task_acc.val,
                "accuracy",
                SPEC,
            )

    def test_picks_validation_winner(self, task_acc):
        # One epoch at a tiny rate barely learns; the tuned setting must win.
        weak = Hyperparams(learning_rate=0.001, epochs=1)
        strong = Hyperparams(learning_rate=0.5, epochs=30)
        assert grid_search([weak, strong], task_acc.train, task_acc.val,
                           "accuracy", SPEC) == strong


def member(kind="logreg", bagged=False, prune=0.0, hyper=None, spec=SPEC):
    return MemberSpec(
        model_kind=kind,
        feature_spec=spec,
        hyper_override=hyper,
        prune_fraction=prune,
        bagged=bagged,
    )


class TestStructuralValidation:
    def test_single_requires_one_member(self):
        with pytest.raises(ConfigError, match="exactly 1"):
            EnsembleConfig("c", "single", (member(), member()), ("t",), 0)

    def test_homo_requires_identical_members(self):
        other_spec = FeatureSpec(dims=512)
        with pytest.raises(ConfigError, match="identical"):
            EnsembleConfig(
                "c", "homo", (member(), member(spec=other_spec)), ("t",), 0
            )

    def test_homo_pruned_needs_a_pruned_member(self):
        with pytest.raises(ConfigError, match="prune"):
            EnsembleConfig("c", "homo_pruned", (member(bagged=True), member(bagged=True)), ("t",), 0)

    def test_non_pruned_type_rejects_pruned_member(self):
        with pytest.raises(ConfigError, match="prune_fraction"):
            EnsembleConfig(
                "c", "homo", (member(bagged=True), member(bagged=True, prune=0.1)), ("t",), 0
            )

    def test_same_family_needs_distinct_architectures(self):
        with pytest.raises(ConfigError, match="distinct"):
            EnsembleConfig("c", "hetero_same_family", (member(), member()), ("t",), 0)

    def test_same_family_rejects_mixed_kinds(self):
        mlp = member(kind="mlp")
        with pytest.raises(ConfigError, match="one model kind"):
            EnsembleConfig("c", "hetero_same_family", (member(), mlp), ("t",), 0)

    def test_diff_family_needs_two_kinds(self):
        with pytest.raises(ConfigError, match="model kinds"):
            EnsembleConfig(
                "c",
                "hetero_diff_family",
                (member(), member(spec=FeatureSpec(dims=512))),
                ("t",),
                0,
            )

    def test_unknown_type_rejected(self):
        with pytest.raises(ConfigError, match="config_type"):
            EnsembleConfig("c", "boosted", (member(),), ("t",), 0)

    def test_logreg_override_hidden_must_be_zero(self):
        with pytest.raises(ConfigError):
            member(kind="logreg", hyper=Hyperparams(hidden_size=4))

    def test_mlp_override_hidden_must_be_positive(self):
        with pytest.raises(ConfigError):
            member(kind="mlp", hyper=Hyperparams(hidden_size=0))


class TestRunConfig:
    def test_single_member_matches_direct_evaluation(self, task_acc):
        config = EnsembleConfig("solo", "single", (member(),), ("acc2",), base_seed=5)
        result = run_config(config, {"acc2": task_acc})

        task_seed = _task_seed(5, "acc2")
        chosen = grid_search(
            DEFAULT_SEARCH_SPACE["logreg"], task_acc.train, task_acc.val, "accuracy", SPEC
        )
        model = fit(
            task_acc.train, SPEC, replace(chosen, seed=derive_seed(task_seed, 0, 0))
        )
        preds = np.argmax(predict_proba_dataset(model, task_acc.test), axis=1)
        assert result.task_accuracy["acc2"] == accuracy(preds, task_acc.test.labels())
        assert result.total_params == param_count(model)
        assert result.experiment_type == "Single Model"

    def test_bagged_homogeneous_matches_manual_replay(self, task_acc):
        members = tuple(member(bagged=True, prune=0.05) for _ in range(3))
        config = EnsembleConfig("bag3", "homo_pruned", members, ("acc2",), base_seed=9)
        result = run_config(config, {"acc2": task_acc})

        # Independent replay of the documented pipeline, step by step.
        task_seed = _task_seed(9, "acc2")
        chosen = grid_search(
            DEFAULT_SEARCH_SPACE["logreg"], task_acc.train, task_acc.val, "accuracy", SPEC
        )
        models = []
        for k in range(3):
            sample = bootstrap(len(task_acc.train), derive_seed(task_seed, 1, k))
            train_ds = materialize(task_acc.train, sample)
            model = fit(train_ds, SPEC, replace(chosen, seed=sample.seed))
            models.append(prune_magnitude(model, PruneSpec(0.05)))
        winners, _ = predict_dataset(Ensemble(members=tuple(models), num_classes=2), task_acc.test)
        assert result.task_accuracy["acc2"] == accuracy(winners, task_acc.test.labels())

    def test_multi_task_result_shape(self, task_acc, task_f1):
        members = tuple(member(bagged=True) for _ in range(2))
        config = EnsembleConfig("two", "homo", members, ("acc2", "f1three"), base_seed=1)
        result = run_config(config, {"acc2": task_acc, "f1three": task_f1})
        assert set(result.task_accuracy) == {"acc2", "f1three"}
        assert set(result.task_macro_f1) == {"f1three"}
        assert result.avg_accuracy == pytest.approx(
            np.mean(list(result.task_accuracy.values())), abs=1e-12
        )

    def test_deterministic_across_runs(self, task_acc):
        config = EnsembleConfig(
            "det", "hetero_diff_family",
            (member(), member(kind="mlp", hyper=Hyperparams(hidden_size=4, epochs=5))),
            ("acc2",), base_seed=3,
        )
        r1 = run_config(config, {"acc2": task_acc})
        r2 = run_config(config, {"acc2": task_acc})
        assert r1 == r2

    def test_unknown_task_rejected(self, task_acc):
        config = EnsembleConfig("c", "single", (member(),), ("ghost",), 0)
        with pytest.raises(ConfigError, match="ghost"):
            run_config(config, {"acc2": task_acc})

    def test_full_data_members_share_one_model(self, task_acc):
        # Identical non-bagged members collapse to the same trained model, so
        # the vote equals the single model's answer.
        single = EnsembleConfig("s", "single", (member(),), ("acc2",), 7)
        doubled = EnsembleConfig("d", "homo", (member(), member()), ("acc2",), 7)
        acc_single = run_config(single, {"acc2": task_acc}).task_accuracy["acc2"]
        acc_doubled = run_config(doubled, {"acc2": task_acc}).task_accuracy["acc2"]
        assert acc_single == acc_doubled


class TestVarianceAnalysis:
    def test_m_one_is_well_formed(self, task_acc):
        report = variance_analysis(task_acc, member(bagged=True), n=3, m=1, base_seed=2)
        assert len(report.singles) == 3 and len(report.ensembles) == 3
        assert np.isfinite([report.single_std, report.ensemble_std]).all()

    def test_deterministic(self, task_acc):
        m = member(bagged=True, hyper=Hyperparams(epochs=2))
        r1 = variance_analysis(task_acc, m, n=3, m=2, base_seed=8)
        r2 = variance_analysis(task_acc, m, n=3, m=2, base_seed=8)
        assert r1 == r2

    def test_n_below_two_rejected(self, task_acc):
        with pytest.raises(ConfigError):
            variance_analysis(task_acc, member(bagged=True), n=1, m=2, base_seed=0)

    def test_uses_task_metric(self, task_f1):
        report = variance_analysis(
            task_f1, member(hyper=Hyperparams(epochs=2), bagged=True), n=2, m=1,
            base_seed=0, task_name="f1three",
        )
        assert report.metric == "macro_f1"
        assert report.task == "f1three"


class TestEquivalenceGroup:
    BASELINES = [304, 355, 774, 1558]

    def test_probe_390_maps_to_355(self):
        assert equivalence_group(390, self.BASELINES) == 355

    def test_exact_774(self):
        assert equivalence_group(774, self.BASELINES) == 774

    def test_500_matches_nothing(self):
        assert equivalence_group(500, self.BASELINES) is None

    def test_distance_tie_goes_to_smaller_baseline(self):
        assert equivalence_group(105, [100, 110]) == 100

    def test_bad_baselines_rejected(self):
        with pytest.raises(BagkitError):
            equivalence_group(100, [])
        with pytest.raises(BagkitError):
            equivalence_group(100, [0, 10])


def result_row(config_id, accs, f1s, exp_type="Single Model", models=("logreg-256",), params=514):
    return ConfigResult(
        config_id=config_id,
        task_accuracy=accs,
        task_macro_f1=f1s,
        avg_accuracy=float(np.mean(list(accs.values()))),
        experiment_type=exp_type,
        models=tuple(models),
        total_params=params,
    )


class TestWriteReport:
    def test_sorted_by_avg_accuracy_desc(self, tmp_path):
        rows = [
            result_row("low", {"a": 0.83}, {}),
            result_row("high", {"a": 0.84}, {}),
        ]
        path = tmp_path / "results.csv"
        write_report(rows, path)
        lines = path.read_text().splitlines()
        assert lines[1].startswith("high,")
        assert lines[2].startswith("low,")

    def test_tie_broken_by_config_id(self, tmp_path):
        rows = [
            result_row("zeta", {"a": 0.8}, {}),
            result_row("alpha", {"a": 0.8}, {}),
        ]
        path = tmp_path / "results.csv"
        write_report(rows, path)
        lines = path.read_text().splitlines()
        assert lines[1].startswith("alpha,")
        assert lines[2].startswith("zeta,")

    def test_column_layout_interleaves_macro_f1(self, tmp_path):
        rows = [result_row("c", {"boolq": 0.8, "cb": 0.9}, {"cb": 0.85})]
        path = tmp_path / "results.csv"
        write_report(rows, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == [
            "config_id",
            "boolq_acc",
            "cb_acc",
            "cb_macro_f1",
            "avg_accuracy",
            "experiment_type",
            "models",
            "total_params",
        ]

    def test_avg_column_recomputes(self, tmp_path):
        rows = [
            result_row("x", {"a": 0.8, "b": 0.6}, {}),
            result_row("y", {"a": 0.75, "b": 0.95}, {}),
        ]
        path = tmp_path / "results.csv"
        write_report(rows, path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            cells = line.split(",")
            accs = [float(cells[header.index(f"{t}_acc")]) for t in ("a", "b")]
            assert float(cells[header.index("avg_accuracy")]) == pytest.approx(
                np.mean(accs), abs=1e-6
            )

    def test_rerun_is_byte_identical(self, tmp_path):
        rows = [result_row("a", {"t": 0.7}, {}), result_row("b", {"t": 0.9}, {})]
        p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        write_report(rows, p1)
        write_report(rows, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(BagkitError):
            write_report([], tmp_path / "x.csv")


class TestVarianceReportCsv:
    def test_shape_and_summary_rows(self, tmp_path, task_acc):
        report = variance_analysis(
            task_acc, member(bagged=True, hyper=Hyperparams(epochs=2)), n=4, m=2,
            base_seed=3, task_name="acc2",
        )
        path = tmp_path / "variance.csv"
        write_variance_report(report, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + 4 + 4 + 4  # header, singles, ensembles, summary
        kinds = [line.split(",")[5] for line in lines[1:]]
        assert kinds == (
            ["single"] * 4 + ["ensemble"] * 4
            + ["single_mean", "single_std", "ensemble_mean", "ensemble_std"]
        )

    def test_summary_rows_match_values(self, tmp_path, task_acc):
        report = variance_analysis(
            task_acc, member(bagged=True, hyper=Hyperparams(epochs=2)), n=3, m=1,
            base_seed=4, task_name="acc2",
        )
        path = tmp_path / "variance.csv"
        write_variance_report(report, path)
        rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
        singles = [float(r[7]) for r in rows if r[5] == "single"]
        mean_row = next(float(r[7]) for r in rows if r[5] == "single_mean")
        assert mean_row == pytest.approx(np.mean(singles), abs=1e-6)


class TestSamplingManifest:
    def test_entries_match_derivation(self, task_acc):
        members = (member(bagged=True), member(), member(bagged=True))
        config = EnsembleConfig("m", "hetero_same_family",
                                (member(), member(spec=FeatureSpec(dims=512))), ("acc2",), 11)
        bagged_config = EnsembleConfig("b", "homo", members[::2], ("acc2",), 11)
        doc = sampling_manifest([config, bagged_config], {"acc2": task_acc})
        assert doc["format"] == "bagkit-run-manifest-v1"
        by_id = {(e["config_id"], e["task"]): e for e in doc["entries"]}
        entry = by_id[("b", "acc2")]
        task_seed = _task_seed(11, "acc2")
        assert entry["member_sample_seeds"] == [
            derive_seed(task_seed, 1, 0),
            derive_seed(task_seed, 1, 1),
        ]
        assert entry["dataset_size"] == len(task_acc.train)
        assert by_id[("m", "acc2")]["member_sample_seeds"] == [None, None]
