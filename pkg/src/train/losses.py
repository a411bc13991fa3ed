"""
src/train/losses.py

Loss terms of the generator objective and the task objective.

Conventions:
- Each per-source batch is split into halves (first, second). Novelty compares generated and real
  critic features with the halved energy estimator; generated half 1 is paired with real half 2, so
  the cross term never couples an image with its own translation.
- L_Novel and L_Diversity are sums (over sources and over source pairs). L_Cycle and L_CE(gen) are
  means over sources.

Top-level declarations:
- loss_novel: Sum over sources of energy distance between generated and real critic features
- loss_diversity: Sum over pairs of sources with distinct novel labels; degenerate flag when none
- loss_cycle: L1 between G(G(x, novel), source) and x through the single shared generator
- loss_ce_generated: Cross-entropy of the frozen Y-hat on generated images against source labels
- generator_loss: -lambda_domain (novel + diversity) + lambda_cycle cycle + lambda_ce ce
- combine_task_loss: (1 - alpha) real + alpha generated
- task_loss: The blended classifier objective on real and (detached) generated batches
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np

from src.nets import DomainCode, Params, classifier_forward, critic_embed, generator_forward
from src.ot import SinkhornSettings, halved_energy
from src.tensor import Tensor
from src.tensor.layers import l1_loss, softmax_cross_entropy
from src.tensor.ops import add, as_tensor, concat, scale

from .types import LossWeights


def _zero() -> Tensor:
    return Tensor(0.0)


def _total(terms: Sequence[Tensor]) -> Tensor:
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    return out


def loss_novel(
    real: Sequence[Tensor],
    generated: Sequence[Tensor],
    critic: Params,
    settings: SinkhornSettings,
    generated_features: Optional[Sequence[Tensor]] = None,
) -> Tensor:
    # sum_k d(phi(G(X_k, novel_k)), phi(X_k)); critic parameters are expected frozen
    if len(real) != len(generated) or not real:
        raise ValueError("loss_novel needs one generated batch per real batch")
    feats = list(generated_features) if generated_features is not None else [critic_embed(critic, x) for x in generated]
    terms = [halved_energy(f_gen, critic_embed(critic, x_real), settings) for x_real, f_gen in zip(real, feats)]
    return _total(terms)


def loss_diversity(
    generated: Sequence[Tensor],
    novel_labels: Sequence[int],
    critic: Params,
    settings: SinkhornSettings,
    features: Optional[Sequence[Tensor]] = None,
) -> Tuple[Tensor, bool]:
    """
    Sum of energy distances between generated batches carrying different novel labels.

    Returns:
        (value, degenerate); degenerate is True when fewer than two distinct novel labels were
        generated, in which case the value is a constant zero.
    """
    pairs = [(i, j) for i, j in combinations(range(len(generated)), 2) if novel_labels[i] != novel_labels[j]]
    if not pairs:
        return _zero(), True
    feats = list(features) if features is not None else [critic_embed(critic, x) for x in generated]
    return _total([halved_energy(feats[i], feats[j], settings) for i, j in pairs]), False


def loss_cycle(
    x: Tensor,
    generator: Params,
    source: DomainCode,
    novel: DomainCode,
    generated: Optional[Tensor] = None,
) -> Tensor:
    # ||G(G(x, novel), source) - x||_1 (mean); pass `generated` to reuse G(x, novel)
    forward = generated if generated is not None else generator_forward(generator, x, novel)
    return l1_loss(generator_forward(generator, forward, source), x)


def loss_ce_generated(generated: Tensor, labels: np.ndarray, yhat: Params) -> Tensor:
    logits, _ = classifier_forward(yhat, generated)
    return softmax_cross_entropy(logits, labels)


def generator_loss(
    novel: Tensor | float,
    diversity: Tensor | float,
    cycle: Tensor | float,
    ce: Tensor | float,
    weights: LossWeights,
) -> Tensor:
    domain = add(as_tensor(novel), as_tensor(diversity))
    out = scale(domain, -weights.lambda_domain)
    out = add(out, scale(as_tensor(cycle), weights.lambda_cycle))
    return add(out, scale(as_tensor(ce), weights.lambda_ce))


def combine_task_loss(real: Tensor | float, generated: Tensor | float, alpha: float) -> Tensor:
    return add(scale(as_tensor(real), 1.0 - alpha), scale(as_tensor(generated), alpha))


def task_loss(
    real: Sequence[Tensor],
    generated: Sequence[Tensor],
    labels: Sequence[np.ndarray],
    classifier: Params,
    alpha: float,
) -> Tuple[Tensor, Tensor, Tensor]:
    # Returns (L_F, CE on pooled real, CE on pooled generated); generated images are detached
    y = np.concatenate(list(labels))
    x_real = concat(list(real), axis=0)
    x_gen = concat([g.detach() for g in generated], axis=0)
    l_real = softmax_cross_entropy(classifier_forward(classifier, x_real)[0], y)
    l_gen = softmax_cross_entropy(classifier_forward(classifier, x_gen)[0], y) if alpha > 0 else _zero()
    return combine_task_loss(l_real, l_gen, alpha), l_real, l_gen
