"""
src/train/trainer.py

The alternating generator / classifier loop. Each iteration samples one batch per source, assigns
novel domains, generates X-tilde once, updates G on the generator objective, then updates F on the
blended task objective using the same (detached) X-tilde.

Top-level declarations:
- TrainContext: Frozen inputs of a run (config, sources, frozen Y-hat and critic, weights)
- assign_novel_domains: Random injection D_s -> D_n when K_n >= K_s, uniform draws otherwise
- init_state: Fresh generator, classifier, optimizer state, rng and samplers
- train_step: One G update followed by one F update
- save_checkpoint: Generator, classifier and iteration in one L2AW container
- run_training: T iterations with logging, checkpoints and output files
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.config import AppConfig
from src.data import BatchSampler, DomainDataset, sample_batch
from src.nets import (
    ClassifierSpec,
    CriticWeights,
    DomainCode,
    GeneratorSpec,
    GeneratorWeights,
    TaskClassifierWeights,
    critic_embed,
    generator_forward,
    init_weights,
    save_weights,
    write_container,
)
from src.ot import SinkhornSettings
from src.tensor import NonFiniteError, Tensor, grad
from src.tensor.ops import add, scale

from .losses import generator_loss, loss_ce_generated, loss_cycle, loss_diversity, loss_novel, task_loss
from .optim import adam_step, global_norm, sgd_step, step_lr
from .types import LossWeights, NovelAssignment, TrainingDivergedError, TrainLog, TrainRecord, TrainState

logger = logging.getLogger(__name__)


class TrainContext(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    cfg: AppConfig
    sources: List[DomainDataset]
    yhat: Dict[str, Tensor]
    critic: Dict[str, Tensor]
    settings: SinkhornSettings
    weights: LossWeights

    @property
    def num_source(self) -> int:
        return len(self.sources)

    @property
    def num_novel(self) -> int:
        return self.cfg.train.num_novel or self.num_source

    @classmethod
    def build(
        cls,
        cfg: AppConfig,
        sources: List[DomainDataset],
        yhat: TaskClassifierWeights,
        critic: CriticWeights,
    ) -> "TrainContext":
        # Y-hat and critic become frozen tensors: their parameter gradients are exactly zero
        return cls(
            cfg=cfg,
            sources=sources,
            yhat=yhat.tensors(trainable=False),
            critic=critic.tensors(trainable=False),
            settings=SinkhornSettings.from_config(cfg.ot),
            weights=LossWeights.from_config(cfg.train),
        )


def assign_novel_domains(num_source: int, num_novel: int, rng: np.random.Generator) -> NovelAssignment:
    if num_novel < 1:
        raise ValueError(f"K_n must be >= 1, got {num_novel}")
    if num_novel >= num_source:
        targets = rng.permutation(num_novel)[:num_source]
    else:
        # fewer novel domains than sources: collisions are unavoidable
        targets = rng.integers(0, num_novel, size=num_source)
    return NovelAssignment(num_novel=num_novel, targets=[int(t) for t in targets])


def init_state(ctx: TrainContext) -> TrainState:
    cfg = ctx.cfg
    gen_spec = GeneratorSpec(
        image_channels=cfg.model.image_channels,
        num_domains=ctx.num_source + ctx.num_novel,
        widths=list(cfg.model.generator_widths),
    )
    cls_spec = ClassifierSpec(
        image_channels=cfg.model.image_channels,
        image_size=cfg.model.image_size,
        width=cfg.model.classifier_width,
        num_classes=cfg.model.num_classes,
    )
    seed = cfg.train.seed
    return TrainState(
        generator=init_weights(gen_spec, seed),
        classifier=init_weights(cls_spec, seed + 1),
        rng=np.random.default_rng(seed),
        samplers=[BatchSampler(len(src), cfg.train.batch_size, [seed, k]) for k, src in enumerate(ctx.sources)],
    )


def _mean(terms: List[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(terms))


def train_step(state: TrainState, ctx: TrainContext) -> Tuple[TrainState, TrainRecord]:
    tc = ctx.cfg.train
    w = ctx.weights
    started = time.perf_counter()
    k_s, k_n = ctx.num_source, ctx.num_novel

    batches = [sample_batch(src, sampler) for src, sampler in zip(ctx.sources, state.samplers)]
    assignment = assign_novel_domains(k_s, k_n, state.rng)
    xs = [Tensor(b.images) for b in batches]
    ys = [b.labels for b in batches]
    source_codes = [DomainCode.for_index(k, k_s, k_n) for k in range(k_s)]
    novel_codes = [DomainCode(index=assignment.code_index(k), length=k_s + k_n) for k in range(k_s)]

    zero = Tensor(0.0)
    try:
        g_params = state.generator.tensors(trainable=True)
        generated = [generator_forward(g_params, x, code) for x, code in zip(xs, novel_codes)]

        l_novel, l_div = zero, zero
        div_degenerate = False
        if w.lambda_domain > 0:
            gen_feats = [critic_embed(ctx.critic, g) for g in generated]
            l_novel = loss_novel(xs, generated, ctx.critic, ctx.settings, generated_features=gen_feats)
            if tc.use_diversity:
                l_div, div_degenerate = loss_diversity(
                    generated, assignment.targets, ctx.critic, ctx.settings, features=gen_feats
                )
        l_cycle = zero
        if w.lambda_cycle > 0:
            l_cycle = _mean(
                [
                    loss_cycle(x, g_params, src, nov, generated=g)
                    for x, src, nov, g in zip(xs, source_codes, novel_codes, generated)
                ]
            )
        l_ce = zero
        if w.lambda_ce > 0:
            l_ce = _mean([loss_ce_generated(g, y, ctx.yhat) for g, y in zip(generated, ys)])

        l_g = generator_loss(l_novel, l_div, l_cycle, l_ce, w)
        grads_g = grad(l_g, g_params)
        g_arrays, adam = adam_step(
            state.generator.arrays, grads_g, tc.g_lr, tc.g_betas, tc.g_eps, state.adam
        )

        f_params = state.classifier.tensors(trainable=True)
        l_f, l_f_real, l_f_gen = task_loss(xs, generated, ys, f_params, w.alpha)
        grads_f = grad(l_f, f_params)
        lr_f = step_lr(tc.f_lr, state.iteration, tc.iterations, tc.f_lr_decay_at, tc.f_lr_decay)
        f_arrays, sgd = sgd_step(
            state.classifier.arrays, grads_f, lr_f, tc.f_momentum, tc.f_weight_decay, state.sgd
        )
    except NonFiniteError as e:
        raise TrainingDivergedError(state.iteration, state.last_checkpoint, str(e))

    norm_g, norm_f = global_norm(grads_g), global_norm(grads_f)
    if not (np.isfinite(norm_g) and np.isfinite(norm_f)):
        raise TrainingDivergedError(state.iteration, state.last_checkpoint, "non-finite gradient")

    record = TrainRecord(
        iter=state.iteration,
        l_novel=l_novel.item(),
        l_diversity=l_div.item(),
        diversity_degenerate=div_degenerate,
        l_cycle=l_cycle.item(),
        l_ce_gen=l_ce.item(),
        l_g=l_g.item(),
        l_f_real=l_f_real.item(),
        l_f_gen=l_f_gen.item(),
        grad_norm_g=norm_g,
        grad_norm_f=norm_f,
        seconds=time.perf_counter() - started if tc.record_wall_time else 0.0,
    )
    new_state = state.model_copy(
        update={
            "iteration": state.iteration + 1,
            "generator": state.generator.replace(g_arrays),
            "classifier": state.classifier.replace(f_arrays),
            "adam": adam,
            "sgd": sgd,
        }
    )
    return new_state, record


def save_checkpoint(state: TrainState, path: str | Path) -> Path:
    target = Path(path)
    tensors = {f"generator/{k}": v for k, v in state.generator.arrays.items()}
    tensors.update({f"classifier/{k}": v for k, v in state.classifier.arrays.items()})
    tensors["state/iteration"] = np.array([float(state.iteration)])
    write_container(target, tensors)
    return target


def run_training(
    cfg: AppConfig,
    sources: List[DomainDataset],
    yhat: TaskClassifierWeights,
    critic: CriticWeights,
    out_dir: Optional[str | Path] = None,
) -> Tuple[GeneratorWeights, TaskClassifierWeights, TrainLog]:
    """
    Run the alternating loop for train.iterations steps.

    Args:
        cfg: Full configuration; the train and ot sections drive the loop
        sources: Source-domain training splits, in domain-code order
        yhat: Pretrained classifier, frozen for the whole run
        critic: Pretrained critic, frozen for the whole run
        out_dir: When set, receives train_log.csv, checkpoints and final weights

    Returns:
        (generator, classifier, log) after the final iteration
    """
    ctx = TrainContext.build(cfg, sources, yhat, critic)
    state = init_state(ctx)
    log = TrainLog()
    tc = cfg.train
    target = Path(out_dir) if out_dir is not None else None
    logger.info(
        f"Training with K_s={ctx.num_source}, K_n={ctx.num_novel}, T={tc.iterations}, "
        f"lambda=({tc.lambda_domain}, {tc.lambda_cycle}, {tc.lambda_ce}), diversity={tc.use_diversity}"
    )

    for _ in range(tc.iterations):
        state, record = train_step(state, ctx)
        log.append(record)
        if tc.log_every and state.iteration % tc.log_every == 0:
            logger.info(
                f"iter {state.iteration}/{tc.iterations} L_G={record.l_g:.4f} L_Novel={record.l_novel:.4f} "
                f"L_Div={record.l_diversity:.4f} L_Cyc={record.l_cycle:.4f} L_F={record.l_f_real:.4f}/{record.l_f_gen:.4f}"
            )
        if target is not None and tc.checkpoint_every and state.iteration % tc.checkpoint_every == 0:
            path = save_checkpoint(state, target / f"checkpoint_{state.iteration:06d}.l2aw")
            state = state.model_copy(update={"last_checkpoint": str(path)})

    if tc.use_diversity and log.diversity_degenerate:
        logger.warning(f"Diversity term was degenerate at every step (K_n={ctx.num_novel}, no distinct novel pairs)")

    if target is not None:
        log.write_csv(target / "train_log.csv")
        save_weights(state.generator, target / "generator.l2aw")
        save_weights(state.classifier, target / "classifier.l2aw")
    return state.generator, state.classifier, log
