"""
tests/test_train.py

Unit tests for training: optimizers, loss terms, novel-domain assignment, the alternating step,
pretraining guards and run-level determinism.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any
from unittest.mock import patch

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.config import AppConfig
from src.nets import (
    ClassifierSpec,
    CriticSpec,
    DomainCode,
    GeneratorSpec,
    critic_embed,
    generator_forward,
    init_weights,
)
from src.ot import SinkhornSettings
from src.tensor import NonFiniteError, ShapeError, Tensor, grad, parameter
from src.train import (
    AdamState,
    CriticSetupError,
    LossWeights,
    TRAIN_LOG_COLUMNS,
    TrainContext,
    TrainingDivergedError,
    adam_step,
    assign_novel_domains,
    combine_task_loss,
    generator_loss,
    global_norm,
    init_state,
    loss_ce_generated,
    loss_cycle,
    loss_diversity,
    loss_novel,
    pretrain_critic,
    pretrain_task_classifier,
    run_training,
    sgd_step,
    step_lr,
    task_loss,
    train_step,
)


def _with_train(cfg: AppConfig, **changes: object) -> AppConfig:
    return cfg.model_copy(update={"train": cfg.train.model_copy(update=changes)})


class TestOptimizers:
    # Functional SGD / Adam and schedule helpers

    def test_plain_sgd(self) -> None:
        params = {"w": np.array([1.0, 2.0])}
        new, _ = sgd_step(params, {"w": np.array([0.5, -1.0])}, lr=0.1)
        assert_allclose(new["w"], [0.95, 2.1])
        assert_array_equal(params["w"], [1.0, 2.0])

    def test_momentum_accumulates(self) -> None:
        params = {"w": np.zeros(1)}
        g = {"w": np.ones(1)}
        p1, state = sgd_step(params, g, lr=1.0, momentum=0.9)
        p2, _ = sgd_step(p1, g, lr=1.0, momentum=0.9, state=state)
        assert_allclose(p2["w"], [-1.0 - 1.9])

    def test_weight_decay_adds_l2_gradient(self) -> None:
        new, _ = sgd_step({"w": np.array([2.0])}, {"w": np.zeros(1)}, lr=0.5, weight_decay=0.1)
        assert_allclose(new["w"], [2.0 - 0.5 * 0.2])

    def test_adam_first_step_moves_by_lr(self) -> None:
        new, state = adam_step({"w": np.array([1.0, 1.0])}, {"w": np.array([3.0, -0.01])}, lr=0.01)
        assert_allclose(new["w"], [0.99, 1.01], rtol=1e-6)
        assert state.step == 1

    def test_adam_state_carries(self) -> None:
        _, state = adam_step({"w": np.zeros(2)}, {"w": np.ones(2)}, lr=0.1, state=AdamState())
        _, state = adam_step({"w": np.zeros(2)}, {"w": np.ones(2)}, lr=0.1, state=state)
        assert state.step == 2

    def test_zero_gradient_changes_nothing(self) -> None:
        params = {"w": np.array([1.5, -2.0])}
        zeros = {"w": np.zeros(2)}
        adam, _ = adam_step(params, zeros, lr=0.1)
        sgd, _ = sgd_step(params, zeros, lr=0.1, momentum=0.9)
        assert_allclose(adam["w"], params["w"], rtol=0.0, atol=1e-12)
        assert_array_equal(sgd["w"], params["w"])

    def test_missing_gradient(self) -> None:
        with pytest.raises(ShapeError):
            sgd_step({"w": np.zeros(2)}, {}, lr=0.1)

    def test_gradient_shape_mismatch(self) -> None:
        with pytest.raises(ShapeError):
            adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, lr=0.1)

    def test_step_lr_decays_at_fraction(self) -> None:
        assert step_lr(0.02, 59, 100, 0.6, 0.1) == 0.02
        assert step_lr(0.02, 60, 100, 0.6, 0.1) == pytest.approx(0.002)

    def test_global_norm(self) -> None:
        assert global_norm({"a": np.array([3.0]), "b": np.array([[4.0]])}) == 5.0


class TestLosses:
    # Generator and task objectives

    def test_generator_loss_signs(self) -> None:
        weights = LossWeights(lambda_domain=1.0, lambda_cycle=10.0, lambda_ce=1.0)
        assert generator_loss(2.0, 3.0, 0.5, 1.0, weights).item() == pytest.approx(1.0)

    def test_combine_task_loss(self) -> None:
        assert combine_task_loss(2.0, 4.0, 0.25).item() == pytest.approx(2.5)

    def test_loss_weights_validation(self) -> None:
        with pytest.raises(ValueError):
            LossWeights(alpha=1.5)
        with pytest.raises(ValueError):
            LossWeights(lambda_cycle=-1.0)

    def test_novelty_zero_for_unchanged_images(self) -> None:
        spec = CriticSpec(image_channels=3, widths=[4, 6, 8], embedding_dim=8)
        critic = init_weights(spec, 0).tensors(trainable=False)
        x = [Tensor(np.random.default_rng(2).uniform(-1, 1, size=(4, 3, 16, 16))) for _ in range(2)]
        assert loss_novel(x, x, critic, SinkhornSettings()).item() == 0.0

    def test_novelty_needs_matching_batches(self) -> None:
        x = [Tensor(np.zeros((2, 3, 16, 16)))]
        with pytest.raises(ValueError):
            loss_novel(x, x + x, {}, SinkhornSettings())

    def test_semantic_ce_reaches_generated_images(self) -> None:
        rng = np.random.default_rng(3)
        yhat = init_weights(ClassifierSpec(image_channels=3, image_size=16, width=4), 0).tensors(trainable=False)
        generated = parameter(rng.uniform(-1, 1, size=(2, 3, 16, 16)))
        value = loss_ce_generated(generated, np.array([2, 5]), yhat)
        assert np.isfinite(value.item()) and value.item() > 0.0
        g = grad(value, {"generated": generated, **yhat})
        assert np.any(g["generated"])
        assert not any(np.any(g[name]) for name in yhat)

    def test_novelty_positive_for_untrained_generator(self, tiny_pretrained: Any) -> None:
        # G starts with a zero output layer, so every generated image is flat
        spec = GeneratorSpec(image_channels=3, num_domains=6, widths=[4, 6, 8])
        g = init_weights(spec, 0).tensors(trainable=False)
        real = [Tensor(ds.images[:8]) for ds in tiny_pretrained.train]
        generated = [generator_forward(g, x, DomainCode(index=3 + k, length=6)) for k, x in enumerate(real)]
        critic = tiny_pretrained.critic.tensors(trainable=False)
        assert loss_novel(real, generated, critic, SinkhornSettings()).item() > 0.0

    def test_diversity_sums_every_distinct_pair(self) -> None:
        x = [Tensor(np.zeros((2, 3, 16, 16))) for _ in range(3)]
        feats = [Tensor(np.ones((2, 4))) for _ in range(3)]
        with patch("src.train.losses.halved_energy", return_value=Tensor(1.0)) as energy:
            value, degenerate = loss_diversity(x, [0, 2, 1], {}, SinkhornSettings(), features=feats)
        assert energy.call_count == 3
        assert value.item() == 3.0
        assert not degenerate

    def test_diversity_zero_for_identical_batches(self) -> None:
        x = [Tensor(np.zeros((4, 3, 16, 16)))] * 2
        f = Tensor(np.random.default_rng(8).normal(size=(4, 5)))
        value, degenerate = loss_diversity(x, [0, 1], {}, SinkhornSettings(), features=[f, f])
        assert value.item() == 0.0
        assert not degenerate

    def test_cycle_gradient_reaches_both_generator_passes(self) -> None:
        w = init_weights(GeneratorSpec(image_channels=3, num_domains=4, widths=[4, 6, 8]), 0)
        arrays = dict(w.arrays)
        arrays["out.weight"] = np.random.default_rng(9).normal(scale=0.1, size=arrays["out.weight"].shape)
        p = w.replace(arrays).tensors(trainable=True)
        x = Tensor(np.random.default_rng(10).uniform(-1, 1, size=(2, 3, 16, 16)))
        source, novel = DomainCode(index=0, length=4), DomainCode(index=3, length=4)
        inner = generator_forward(p, x, novel)
        both = grad(loss_cycle(x, p, source, novel, generated=inner), p)["stem.weight"]
        outer = grad(loss_cycle(x, p, source, novel, generated=inner.detach()), p)["stem.weight"]
        assert np.any(outer)
        assert not np.allclose(both, outer)

    def test_diversity_degenerate_when_labels_collide(self) -> None:
        x = [Tensor(np.zeros((2, 3, 16, 16))) for _ in range(3)]
        value, degenerate = loss_diversity(x, [1, 1, 1], {}, SinkhornSettings())
        assert degenerate
        assert value.item() == 0.0

    def test_cycle_through_untrained_generator(self) -> None:
        # G starts with a zero output layer, so both passes give zeros
        spec = GeneratorSpec(image_channels=3, num_domains=4, widths=[4, 6, 8])
        p = init_weights(spec, 0).tensors(trainable=True)
        x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(2, 3, 16, 16)))
        value = loss_cycle(x, p, DomainCode(index=0, length=4), DomainCode(index=2, length=4))
        assert value.item() == pytest.approx(float(np.mean(np.abs(x.data))))

    def test_task_loss_does_not_reach_generated_images(self) -> None:
        rng = np.random.default_rng(1)
        f = init_weights(ClassifierSpec(image_channels=3, image_size=16, width=4), 0).tensors(trainable=True)
        real = [Tensor(rng.uniform(-1, 1, size=(2, 3, 16, 16)))]
        generated = [parameter(rng.uniform(-1, 1, size=(2, 3, 16, 16)))]
        labels = [np.array([1, 7])]
        l_f, l_real, l_gen = task_loss(real, generated, labels, f, alpha=0.5)
        assert l_f.item() == pytest.approx(0.5 * l_real.item() + 0.5 * l_gen.item())
        g = grad(l_f, {"generated": generated[0]})
        assert not np.any(g["generated"])

    def test_alpha_zero_skips_generated_term(self) -> None:
        f = init_weights(ClassifierSpec(image_channels=3, image_size=16, width=4), 0).tensors(trainable=True)
        x = [Tensor(np.zeros((2, 3, 16, 16)))]
        _, _, l_gen = task_loss(x, x, [np.array([0, 1])], f, alpha=0.0)
        assert l_gen.item() == 0.0


class TestNovelAssignment:
    # Injective when K_n >= K_s; uniform draws otherwise

    def test_injective_when_enough_novel_domains(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = assign_novel_domains(3, 5, rng)
            assert a.injective
            assert all(0 <= t < 5 for t in a.targets)

    def test_collisions_allowed_below_source_count(self) -> None:
        a = assign_novel_domains(4, 1, np.random.default_rng(0))
        assert a.targets == [0, 0, 0, 0]

    def test_code_index_follows_source_slots(self) -> None:
        a = assign_novel_domains(3, 3, np.random.default_rng(2))
        assert sorted(a.code_index(k) for k in range(3)) == [3, 4, 5]

    def test_every_permutation_occurs(self) -> None:
        seen = {tuple(assign_novel_domains(3, 3, np.random.default_rng(s)).targets) for s in range(200)}
        assert len(seen) == 6
        assert all(sorted(p) == [0, 1, 2] for p in seen)

    def test_same_rng_state_same_assignment(self) -> None:
        a = assign_novel_domains(4, 6, np.random.default_rng(9))
        b = assign_novel_domains(4, 6, np.random.default_rng(9))
        assert a.targets == b.targets

    def test_zero_novel_domains(self) -> None:
        with pytest.raises(ValueError):
            assign_novel_domains(3, 0, np.random.default_rng(0))


class TestTrainStep:
    # One alternating G / F update on tiny networks

    def test_step_advances_and_keeps_input_state(self, tiny_pretrained: Any) -> None:
        ctx = TrainContext.build(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        state = init_state(ctx)
        before = {k: v.copy() for k, v in state.generator.arrays.items()}
        new_state, record = train_step(state, ctx)
        assert state.iteration == 0 and new_state.iteration == 1
        assert record.iter == 0
        for name, value in before.items():
            assert_array_equal(state.generator.arrays[name], value)
        assert any(not np.array_equal(new_state.generator.arrays[k], before[k]) for k in before)
        assert np.isfinite([record.l_g, record.l_novel, record.l_cycle, record.grad_norm_g]).all()

    def test_frozen_networks_are_not_updated(self, tiny_pretrained: Any) -> None:
        ctx = TrainContext.build(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        train_step(init_state(ctx), ctx)
        for name, value in tiny_pretrained.yhat.arrays.items():
            assert_array_equal(ctx.yhat[name].data, value)
        assert all(not t.requires_grad for t in ctx.critic.values())

    def test_domain_terms_off(self, tiny_pretrained: Any) -> None:
        cfg = _with_train(tiny_pretrained.cfg, lambda_domain=0.0)
        ctx = TrainContext.build(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        _, record = train_step(init_state(ctx), ctx)
        assert record.l_novel == 0.0 and record.l_diversity == 0.0

    def test_single_novel_domain_flags_degenerate_diversity(self, tiny_pretrained: Any) -> None:
        cfg = _with_train(tiny_pretrained.cfg, num_novel=1)
        ctx = TrainContext.build(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        _, record = train_step(init_state(ctx), ctx)
        assert record.diversity_degenerate
        assert record.l_diversity == 0.0

    def test_generated_batches_embedded_once(self, tiny_pretrained: Any) -> None:
        ctx = TrainContext.build(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        with patch("src.train.trainer.critic_embed", wraps=critic_embed) as step_embed, patch(
            "src.train.losses.critic_embed", wraps=critic_embed
        ) as loss_embed:
            _, record = train_step(init_state(ctx), ctx)
        # one call per generated batch in the step, one per real batch inside loss_novel
        assert step_embed.call_count == 3
        assert loss_embed.call_count == 3
        assert not record.diversity_degenerate

    def test_non_finite_loss_becomes_divergence(self, tiny_pretrained: Any) -> None:
        ctx = TrainContext.build(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        with patch("src.train.trainer.generator_loss", side_effect=NonFiniteError(7, "add")):
            with pytest.raises(TrainingDivergedError) as info:
                train_step(init_state(ctx), ctx)
        assert info.value.iteration == 0
        assert info.value.last_checkpoint is None


class TestPretrain:
    # Critic pretraining guard

    def test_critic_needs_two_sources(self, tiny_pretrained: Any) -> None:
        with pytest.raises(CriticSetupError):
            pretrain_critic(tiny_pretrained.cfg, tiny_pretrained.train[:1], tiny_pretrained.val[:1])

    def test_critic_output_matches_source_count(self, tiny_pretrained: Any) -> None:
        assert tiny_pretrained.critic.spec.num_domains == 3  # type: ignore[union-attr]

    def test_zero_epochs_returns_initialized_classifier(self, tiny_pretrained: Any) -> None:
        cfg = tiny_pretrained.cfg
        cfg = cfg.model_copy(update={"pretrain": cfg.pretrain.model_copy(update={"classifier_epochs": 0})})
        result = pretrain_task_classifier(cfg, tiny_pretrained.train, tiny_pretrained.val)
        spec = ClassifierSpec(
            image_channels=cfg.model.image_channels,
            image_size=cfg.model.image_size,
            width=cfg.model.classifier_width,
            num_classes=cfg.model.num_classes,
        )
        initial = init_weights(spec, cfg.pretrain.seed)
        for name, value in initial.arrays.items():
            assert_array_equal(result.weights.arrays[name], value)

    def test_same_seed_same_classifier(self, tiny_pretrained: Any) -> None:
        again = pretrain_task_classifier(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.val)
        for name, value in tiny_pretrained.yhat.arrays.items():
            assert_array_equal(again.weights.arrays[name], value)


class TestRunTraining:
    # Whole-run outputs and determinism

    def test_identical_runs_write_identical_files(self, tmp_path: Path, tiny_pretrained: Any) -> None:
        cfg = _with_train(tiny_pretrained.cfg, checkpoint_every=2)
        for name in ("a", "b"):
            run_training(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic, tmp_path / name)
        for file in ("train_log.csv", "generator.l2aw", "classifier.l2aw", "checkpoint_000002.l2aw"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()

    def test_log_has_one_row_per_iteration(self, tiny_pretrained: Any) -> None:
        _, _, log = run_training(tiny_pretrained.cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        assert [r.iter for r in log.records] == [0, 1, 2]
        assert log.column("l_g").shape == (3,)
        assert not log.diversity_degenerate

    def test_zero_iterations_return_initial_networks(self, tiny_pretrained: Any) -> None:
        cfg = _with_train(tiny_pretrained.cfg, iterations=0)
        generator, classifier, log = run_training(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        initial = init_state(TrainContext.build(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic))
        for name, value in initial.generator.arrays.items():
            assert_array_equal(generator.arrays[name], value)
        for name, value in initial.classifier.arrays.items():
            assert_array_equal(classifier.arrays[name], value)
        assert log.records == []
        assert not log.diversity_degenerate

    def test_single_novel_domain_run_is_flagged(self, tiny_pretrained: Any) -> None:
        cfg = _with_train(tiny_pretrained.cfg, num_novel=1)
        _, _, log = run_training(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic)
        assert log.diversity_degenerate

    def test_log_csv_column_order(self, tmp_path: Path, tiny_pretrained: Any) -> None:
        expected = [
            "iter", "l_novel", "l_diversity", "l_cycle", "l_ce_gen", "l_g",
            "l_f_real", "l_f_gen", "grad_norm_g", "grad_norm_f", "seconds",
        ]
        assert TRAIN_LOG_COLUMNS == expected
        cfg = _with_train(tiny_pretrained.cfg, iterations=1)
        run_training(cfg, tiny_pretrained.train, tiny_pretrained.yhat, tiny_pretrained.critic, tmp_path)
        header = (tmp_path / "train_log.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header.split(",") == expected
