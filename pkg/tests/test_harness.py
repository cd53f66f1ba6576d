"""Experiment driver tests at toy scale."""

import numpy as np
import pytest

from gridtriplets import (
    CklConfig,
    GridAnswer,
    GridSpec,
    GridTask,
    Triplet,
    TsteConfig,
    emit_curves_csv,
    run_experiment,
    unique_triplet_capacity,
)
from gridtriplets.econ import one_at_a_time_cost, screens_cost
from gridtriplets.embedding import triplet_generalization_error
from gridtriplets.harness import (
    CurvePoint,
    DatasetSpec,
    ExperimentConfig,
    Strategy,
    build_reference_embedding,
    config_from_dict,
    config_to_dict,
    curves_csv_text,
    default_config,
    dump_config,
    parse_curves_csv,
    reproduce_distribution_figure,
)
from gridtriplets.oracle import generate_mixture_dataset


def tiny_config(**overrides):
    base = dict(
        dataset=DatasetSpec(kind="mixture", n_points=40, n_clusters=4, dim=2, spread=1.0, seed=5),
        strategies=(Strategy("random_triplet"), Strategy("grid", grid=GridSpec(8, 2))),
        budget_screens=30,
        checkpoints=(10, 30),
        embed_dim=2,
        tste=TsteConfig(dim=2, max_iters=150, seed=0),
        seeds=(1, 2),
        holdout_triplets=400,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def tiny_results():
    return run_experiment(tiny_config())


class TestRunExperiment:
    def test_zero_budget_gives_empty_curves(self):
        config = tiny_config(budget_screens=0, checkpoints=())
        results = run_experiment(config)
        assert set(results) == {("random_triplet", 1), ("random_triplet", 2),
                                ("grid_8_choose_2", 1), ("grid_8_choose_2", 2)}
        assert all(curve == [] for curve in results.values())

    def test_grid_total_is_expansion_arithmetic(self, tiny_results):
        for (label, _), curve in tiny_results.items():
            if label != "grid_8_choose_2":
                continue
            for point in curve:
                assert point.triplets_total == 12 * point.screens

    def test_counts_monotone_and_bounded(self, tiny_results):
        for curve in tiny_results.values():
            for point in curve:
                assert point.triplets_unique <= point.triplets_total
                assert point.triplets_unique <= unique_triplet_capacity(40)
                assert 0.0 <= point.tge <= 1.0
                assert 0.0 <= point.loo_nn <= 1.0
            for earlier, later in zip(curve, curve[1:]):
                assert later.screens > earlier.screens
                assert later.triplets_total >= earlier.triplets_total
                assert later.triplets_unique >= earlier.triplets_unique

    def test_dollar_conventions(self, tiny_results):
        for (label, _), curve in tiny_results.items():
            for point in curve:
                if label.startswith("grid"):
                    assert point.dollars == screens_cost(point.screens)
                else:
                    assert point.dollars == one_at_a_time_cost(point.screens)

    def test_deterministic_across_runs(self, tiny_results):
        again = run_experiment(tiny_config())
        assert again == tiny_results
        assert curves_csv_text(again) == curves_csv_text(tiny_results)

    def test_holdout_shared_across_strategies_within_seed(self, tiny_results):
        # both strategies of one seed are scored on the same held-out set,
        # so a strategy swap cannot change the other strategy's curve
        swapped = run_experiment(
            tiny_config(strategies=(Strategy("grid", grid=GridSpec(8, 2)), Strategy("random_triplet")))
        )
        assert swapped[("random_triplet", 1)] == tiny_results[("random_triplet", 1)]
        assert swapped[("grid_8_choose_2", 2)] == tiny_results[("grid_8_choose_2", 2)]

    def test_zero_checkpoint_records_sentinel(self):
        config = tiny_config(checkpoints=(0, 10), budget_screens=10)
        results = run_experiment(config)
        for curve in results.values():
            first = curve[0]
            assert first.screens == 0
            assert first.triplets_unique == 0
            assert first.tge == 0.5
            assert first.no_triplets

    def test_ckl_strategy_runs(self):
        config = tiny_config(
            strategies=(Strategy("ckl", ckl=CklConfig(pool_size=5, posterior_samples=4)),),
            budget_screens=12,
            checkpoints=(12,),
            seeds=(1,),
            holdout_triplets=200,
        )
        results = run_experiment(config)
        curve = results[("ckl", 1)]
        assert curve[-1].triplets_total == 12

    def test_checkpoint_validation(self):
        with pytest.raises(ValueError):
            tiny_config(checkpoints=(30, 10))
        with pytest.raises(ValueError):
            tiny_config(checkpoints=(10, 99), budget_screens=30)


class TestCurvesCsv:
    def test_empty_results_is_header_only(self, tmp_path):
        path = tmp_path / "curves.csv"
        emit_curves_csv({}, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        data = [line for line in lines if not line.startswith("#")]
        assert data == ["strategy,seed,screens,triplets_total,triplets_unique,dollars,tge,loo_nn"]

    def test_row_count(self, tmp_path):
        results = {
            ("a", 1): [CurvePoint(1, 1, 1, 0.1, 0.5, 0.5)] * 3,
            ("b", 1): [CurvePoint(1, 1, 1, 0.1, 0.5, 0.5)] * 3,
        }
        path = tmp_path / "curves.csv"
        emit_curves_csv(results, path)
        data = [l for l in path.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
        assert len(data) == 1 + 6

    def test_round_trip_reconstructs_exactly(self, tmp_path, tiny_results):
        path = tmp_path / "curves.csv"
        emit_curves_csv(tiny_results, path)
        assert parse_curves_csv(path) == tiny_results


class TestReferenceEmbedding:
    def test_full_consistent_coverage_violates_nothing(self, rng):
        # answer every unique key of a 5-object set consistently with a
        # hidden 1-D ground truth, via 4-choose-2 grids
        gt = np.array([0.0, 1.0, 2.5, 4.5, 8.0])
        answers = []
        counter = 0
        for probe in range(5):
            others = [o for o in range(5) if o != probe]
            task = GridTask(task_id=f"t{counter}", probe=probe, grid=tuple(others), spec=GridSpec(4, 2))
            order = sorted(range(4), key=lambda pos: abs(gt[others[pos]] - gt[probe]))
            answers.append((task, GridAnswer(task_id=f"t{counter}", selected=tuple(sorted(order[:2])))))
            counter += 1
        emb = build_reference_embedding(answers, TsteConfig(dim=2, seed=0))
        from gridtriplets import dedup_triplets, expand_grid_answer

        all_triplets = []
        for task, answer in answers:
            all_triplets.extend(expand_grid_answer(task, answer))
        unique = list(dedup_triplets(all_triplets).values())
        assert triplet_generalization_error(emb, unique) == 0.0

    def test_single_answer_constraints_satisfied(self):
        task = GridTask(task_id="t", probe=0, grid=(1, 2, 3, 4), spec=GridSpec(4, 2))
        answer = GridAnswer(task_id="t", selected=(0, 1))
        emb = build_reference_embedding([(task, answer)], TsteConfig(dim=2, seed=1))
        from gridtriplets import expand_grid_answer

        assert triplet_generalization_error(emb, expand_grid_answer(task, answer)) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_reference_embedding([], TsteConfig(dim=2))


class TestDistributionReport:
    def test_means_exact(self):
        gt = generate_mixture_dataset(50, 5, 2, 1.0, seed=2)
        report = reproduce_distribution_figure(gt, 960, GridSpec(16, 4), seed=0)
        assert report.grid.mean == report.random.mean == 3 * 960 / 50
        assert report.grid.histogram.sum() == report.random.histogram.sum() == 3 * 960

    def test_zero_request_gives_empty_histograms(self):
        gt = generate_mixture_dataset(50, 5, 2, 1.0, seed=2)
        report = reproduce_distribution_figure(gt, 0, GridSpec(16, 4), seed=0)
        assert np.all(report.grid.histogram == 0)
        assert np.all(report.random.histogram == 0)

    def test_truncates_to_exact_count(self):
        gt = generate_mixture_dataset(50, 5, 2, 1.0, seed=2)
        report = reproduce_distribution_figure(gt, 100, GridSpec(16, 4), seed=0)  # not a multiple of 48
        assert report.grid.histogram.sum() == 300


class TestConfigFile:
    def test_default_round_trip(self):
        config = default_config()
        assert config_from_dict(config_to_dict(config)) == config

    def test_yaml_round_trip(self, tmp_path):
        import yaml

        config = tiny_config(strategies=(Strategy("ckl", ckl=CklConfig(mu=0.1)), Strategy("random_triplet")))
        parsed = config_from_dict(yaml.safe_load(dump_config(config)))
        assert parsed == config

    def test_partial_override(self):
        config = config_from_dict({"budget_screens": 50, "checkpoints": [10, 50], "tste": {"max_iters": 7}})
        assert config.budget_screens == 50
        assert config.tste.max_iters == 7
        assert config.dataset == default_config().dataset
