"""
tests/test_evaluation.py

Unit tests for evaluation: the audited target handle, accuracy, report writers, leave-one-domain-out
orchestration, the K_n sweep guards, embedding export, selection and the self-test suites.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, List
from unittest.mock import patch

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.config import AppConfig, ConfigError, Method
from src.data import DomainDataset
from src.evaluation import (
    GRADIENT_CASES,
    METHOD_OVERRIDES,
    REPORT_COLUMNS,
    CellResult,
    EmbeddingExportError,
    ExperimentCoordinator,
    ExperimentReport,
    TargetHandle,
    TargetLeakError,
    evaluate_accuracy,
    export_embeddings,
    gradient_suite,
    kn_sweep,
    leave_one_domain_out,
    method_config,
    pca_2d,
    run_selftest,
    select_hyperparameters,
    select_sources,
    seeded_config,
    write_report_csv,
    write_report_summary,
)
from src.nets import ClassifierSpec, GeneratorSpec, init_weights
from src.tensor import ShapeError
from src.train import LossWeights, run_training


def _with_eval(cfg: AppConfig, **changes: object) -> AppConfig:
    return cfg.model_copy(update={"eval": cfg.eval.model_copy(update=changes)})


def _read_csv(path: Path) -> List[List[str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


class TestTargetHandle:
    # Only evaluation may open the held-out domain

    def test_evaluation_read_is_counted(self, tiny_domains: List[DomainDataset]) -> None:
        handle = TargetHandle(tiny_domains[3])
        handle.check_untouched()
        assert handle.open("evaluation") is tiny_domains[3]
        assert handle.reads["evaluation"] == 1

    def test_any_other_purpose_is_a_leak(self, tiny_domains: List[DomainDataset]) -> None:
        handle = TargetHandle(tiny_domains[3])
        with pytest.raises(TargetLeakError):
            handle.open("pretraining")
        with pytest.raises(TargetLeakError):
            handle.check_untouched()


class TestAccuracy:
    # Percent of argmax predictions equal to labels

    def test_all_correct_and_all_wrong(self, tiny_domains: List[DomainDataset]) -> None:
        ds = tiny_domains[0]
        weights = init_weights(ClassifierSpec(image_size=16, width=4), 0)
        with patch("src.evaluation.accuracy.classifier_predict", return_value=ds.labels):
            assert evaluate_accuracy(weights, ds) == 100.0
        with patch("src.evaluation.accuracy.classifier_predict", return_value=(ds.labels + 1) % 10):
            assert evaluate_accuracy(weights, ds) == 0.0

    def test_image_size_mismatch(self, tiny_domains: List[DomainDataset]) -> None:
        with pytest.raises(ShapeError):
            evaluate_accuracy(init_weights(ClassifierSpec(image_size=32, width=4), 0), tiny_domains[0])

    def test_empty_dataset(self) -> None:
        empty = DomainDataset(index=0, name="empty", images=np.zeros((0, 3, 16, 16)), labels=np.zeros(0, dtype=np.int64))
        with pytest.raises(ValueError):
            evaluate_accuracy(init_weights(ClassifierSpec(image_size=16, width=4), 0), empty)


class TestReports:
    # Summaries and fixed-column outputs

    @pytest.fixture
    def report(self) -> ExperimentReport:
        cells = [
            CellResult(target_domain="static", method=Method.L2A_OT, seed=0, accuracy=60.0, iterations=3),
            CellResult(target_domain="static", method=Method.L2A_OT, seed=1, accuracy=70.0, iterations=3),
            CellResult(target_domain="ember", method=Method.L2A_OT, seed=0, accuracy=50.0, iterations=3),
            CellResult(target_domain="ember", method=Method.L2A_OT, seed=1, error="RuntimeError: boom"),
        ]
        return ExperimentReport(method=Method.L2A_OT, cells=cells, config_digest="abc")

    def test_summaries_skip_failed_cells(self, report: ExperimentReport) -> None:
        static, ember = report.summaries()
        assert static.target_domain == "static"
        assert static.mean == 65.0
        assert static.std == pytest.approx(np.std([60.0, 70.0], ddof=1))
        assert ember.accuracies == [50.0] and ember.std == 0.0
        assert report.mean_accuracy == pytest.approx(57.5)
        assert [c.seed for c in report.failed] == [1]

    def test_report_csv(self, tmp_path: Path, report: ExperimentReport) -> None:
        rows = _read_csv(write_report_csv(report, tmp_path / "report.csv"))
        assert rows[0] == REPORT_COLUMNS
        assert rows[1] == ["static", "l2a_ot", "0", "60.0", "3", "0.0"]
        assert rows[4][3] == "nan"

    def test_summary_json(self, tmp_path: Path, report: ExperimentReport) -> None:
        payload = json.loads(write_report_summary(report, tmp_path / "report.json").read_text(encoding="utf-8"))
        assert payload["config_digest"] == "abc"
        assert payload["targets"][0]["mean"] == 65.0
        assert payload["failed"][0]["error"] == "RuntimeError: boom"


class TestMethodConfigs:
    # Arms and per-seed offsets

    def test_overrides(self, tiny_config: AppConfig) -> None:
        assert method_config(tiny_config, Method.NO_DIVERSITY).train.use_diversity is False
        semantic = method_config(tiny_config, Method.NO_SEMANTIC).train
        assert semantic.lambda_cycle == 0.0 and semantic.lambda_ce == 0.0
        assert method_config(tiny_config, Method.SEMANTIC_ONLY).train.lambda_domain == 0.0
        assert set(METHOD_OVERRIDES) == set(Method)

    def test_seed_offsets(self, tiny_config: AppConfig) -> None:
        cfg = seeded_config(tiny_config, 2)
        assert cfg.train.seed == tiny_config.train.seed + 2
        assert cfg.pretrain.seed == tiny_config.pretrain.seed + 2

    def test_select_sources(self, tiny_domains: List[DomainDataset]) -> None:
        assert [d.name for d in select_sources(tiny_domains, 1)] == ["plain", "inverse", "static"]
        assert [d.name for d in select_sources(tiny_domains, 1, 2)] == ["plain", "inverse"]


class TestLeaveOneDomainOut:
    # Grid orchestration on tiny domains

    def test_vanilla_grid_writes_report(self, tmp_path: Path, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        cfg = _with_eval(tiny_config, targets=["static"], seeds=[0, 1])
        report = leave_one_domain_out(cfg, Method.VANILLA, tiny_domains, tmp_path)
        assert [(c.target_domain, c.seed) for c in report.cells] == [("static", 0), ("static", 1)]
        assert all(c.ok and 0.0 <= c.accuracy <= 100.0 for c in report.cells)  # type: ignore[operator]
        assert all(c.iterations == 0 for c in report.cells)
        rows = _read_csv(tmp_path / "report_vanilla.csv")
        assert rows[0] == REPORT_COLUMNS and len(rows) == 3
        assert (tmp_path / "report_vanilla.json").exists()

    def test_training_never_sees_the_target(self, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        seen: List[str] = []

        def spy(cfg: AppConfig, sources: List[DomainDataset], *args: Any, **kwargs: Any) -> Any:
            seen.extend(s.name for s in sources)
            return run_training(cfg, sources, *args, **kwargs)

        cfg = _with_eval(tiny_config, targets=["ember"])
        with patch("src.evaluation.lodo.run_training", side_effect=spy):
            report = leave_one_domain_out(cfg, Method.L2A_OT, tiny_domains)
        assert report.cells[0].ok, report.cells[0].error
        assert report.cells[0].iterations == 3
        assert seen and "ember" not in seen

    def test_failed_cell_is_recorded(self, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        cfg = _with_eval(tiny_config, targets=["plain", "static"])
        with patch("src.evaluation.lodo.pretrain_task_classifier", side_effect=RuntimeError("boom")):
            report = leave_one_domain_out(cfg, Method.VANILLA, tiny_domains)
        assert len(report.failed) == 2
        assert report.cells[0].error == "RuntimeError: boom"

    def test_unknown_target(self, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        with pytest.raises(ConfigError):
            ExperimentCoordinator(_with_eval(tiny_config, targets=["sepia"]), tiny_domains).target_indices()

    def test_default_target_is_last_domain(self, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        assert ExperimentCoordinator(tiny_config, tiny_domains).default_target() == 3


class TestKnSweep:
    # Value validation and row aggregation over cell results

    @pytest.mark.parametrize("values", [[0], [7]])
    def test_values_outside_range(self, values: List[int], tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        with pytest.raises(ValueError):
            kn_sweep(tiny_config, values, tiny_domains)

    def test_degenerate_flag_comes_from_training_cells(
        self, tmp_path: Path, tiny_config: AppConfig, tiny_domains: List[DomainDataset]
    ) -> None:
        def fake_cells(tasks: List[Any]) -> List[CellResult]:
            return [
                CellResult(
                    target_domain="static",
                    method=Method.L2A_OT,
                    seed=t.seed,
                    accuracy=40.0 + t.cfg.train.num_novel,
                    iterations=3,
                    diversity_degenerate=t.cfg.train.num_novel == 3,
                )
                for t in tasks
            ]

        with patch.object(ExperimentCoordinator, "run_cells", side_effect=fake_cells):
            rows = kn_sweep(tiny_config, [1, 3], tiny_domains, tmp_path)
        assert [(r.kn, r.mean_acc, r.degenerate_diversity) for r in rows] == [(1, 41.0, False), (3, 43.0, True)]
        assert (tmp_path / "sweep.csv").exists()


class TestEmbeddings:
    # PCA projection and the tagged export

    def test_pca_is_deterministic_and_orthonormal(self) -> None:
        rng = np.random.default_rng(0)
        features = rng.normal(size=(20, 5)) * np.array([5.0, 2.0, 0.5, 0.1, 0.1])
        coords, components, mean = pca_2d(features)
        assert coords.shape == (20, 2)
        assert_allclose(components @ components.T, np.eye(2), atol=1e-12)
        assert_allclose(mean, features.mean(axis=0))
        for row in components:
            assert row[np.argmax(np.abs(row))] > 0
        again, _, _ = pca_2d(features)
        assert np.array_equal(coords, again)

    def test_pca_needs_three_samples(self) -> None:
        with pytest.raises(EmbeddingExportError):
            pca_2d(np.ones((2, 4)))

    def test_export_tags_and_csv(self, tmp_path: Path, tiny_pretrained: Any, tiny_domains: List[DomainDataset]) -> None:
        generator = init_weights(GeneratorSpec(image_channels=3, num_domains=6, widths=[4, 6, 8]), 0)
        dump = export_embeddings(
            tiny_pretrained.critic, generator, tiny_pretrained.val, tiny_domains[3], samples=5, out_path=tmp_path / "e.csv"
        )
        assert len(dump.tags) == 35
        assert dump.tags.count("generated:2") == 5
        assert dump.tags[-1] == "target:static"
        rows = _read_csv(tmp_path / "e.csv")
        assert rows[0][:5] == ["tag", "label", "pc1", "pc2", "f0"]
        assert len(rows[0]) == 4 + tiny_pretrained.cfg.model.embedding_dim

    def test_generator_without_novel_slots(self, tiny_pretrained: Any) -> None:
        generator = init_weights(GeneratorSpec(image_channels=3, num_domains=3, widths=[4, 6, 8]), 0)
        with pytest.raises(EmbeddingExportError):
            export_embeddings(tiny_pretrained.critic, generator, tiny_pretrained.val)


class TestSelection:
    # Grid search scored on source validation

    def test_picks_a_grid_point(self, tmp_path: Path, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        grid = [LossWeights(lambda_domain=0.5), LossWeights(lambda_domain=2.0)]
        result = select_hyperparameters(tiny_config, tiny_domains[:3], grid, tmp_path)
        assert len(result.rows) == 2
        assert result.best in grid
        assert len(_read_csv(tmp_path / "selection.csv")) == 3

    def test_empty_grid(self, tiny_config: AppConfig, tiny_domains: List[DomainDataset]) -> None:
        with pytest.raises(ValueError):
            select_hyperparameters(tiny_config, tiny_domains[:3], [])


class TestSelftest:
    # Gradient and invariant suites

    def test_gradient_suite_passes(self) -> None:
        reports = gradient_suite(seed=0)
        assert set(reports) == set(GRADIENT_CASES) | {"ot_envelope"}
        failing = {name: r.max_error for name, r in reports.items() if not r.passed}
        assert not failing

    def test_run_selftest(self) -> None:
        passed, lines = run_selftest(seed=0)
        assert passed, "\n".join(lines)
        assert all(line.startswith("PASS ") for line in lines)
