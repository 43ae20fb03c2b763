"""Adversarial training of a single linear map between two embedding
spaces: the baseline mapping and the initializer for per-subspace
generators.

The generator is the matrix W itself; the discriminator is a small MLP
classifying whether a vector came from the target distribution.  Both
are updated alternately with SGD, W is nudged back toward the
orthogonal manifold after every generator step, and the best epoch
snapshot under the unsupervised selection criterion is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embeddings import EmbeddingSpace
from .errors import ConfigError, NumericError, TrainingFailedError
from .mapping import LinearMap, forward_fn, identity_map
from .numerics import (MlpDiscriminator, bce_input_gradient, bce_loss_from_logits,
                       _dropout_mask, _forward, _backward, init_discriminator)
from .retrieval import selection_criterion


@dataclass(frozen=True)
class GanConfig:
    epochs: int = 5
    steps_per_epoch: int = 1000
    batch_size: int = 32
    lr_generator: float = 0.1
    lr_discriminator: float = 0.1
    lr_decay: float = 0.98
    beta: float = 0.001
    smoothing: float = 0.1
    dis_freq_vocab: int = 75000
    dis_steps_per_gen_step: int = 1
    seed: int = 0
    dis_hidden: int = 2048
    dis_dropout: float = 0.1
    dis_leaky_slope: float = 0.2
    criterion_vocab: int = 10000
    csls_k: int = 10

    def validate(self) -> "GanConfig":
        positive = ["steps_per_epoch", "batch_size", "lr_generator", "lr_discriminator",
                    "dis_freq_vocab", "dis_steps_per_gen_step", "dis_hidden",
                    "criterion_vocab", "csls_k"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if not 0.0 < self.beta:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if not 0.0 <= self.smoothing < 0.5:
            raise ConfigError(f"smoothing must be in [0, 0.5), got {self.smoothing}")
        if not 0.0 <= self.dis_dropout < 1.0:
            raise ConfigError(f"dis_dropout must be in [0, 1), got {self.dis_dropout}")
        return self


def orthogonalize(m: LinearMap, beta: float = 0.001) -> LinearMap:
    """One step of W <- (1 + beta) W - beta (W W^T) W.

    Orthogonal matrices are fixed points; repeated application contracts
    every singular value toward 1 at rate about (1 - 2 beta) per step.
    """
    w = m.w
    return LinearMap((1.0 + beta) * w - beta * (w @ w.T) @ w,
                     orthogonal_hint=m.orthogonal_hint)


def sample_rows(space: EmbeddingSpace, limit: int, batch_size: int,
                rng: np.random.Generator) -> np.ndarray:
    """Uniform batch from the `limit` most frequent rows (with replacement)."""
    top = min(limit, space.n)
    return space.vectors[rng.integers(0, top, size=batch_size)]


def discriminator_loss_and_grads(dis: MlpDiscriminator, real: np.ndarray,
                                 fake: np.ndarray, smoothing: float,
                                 rng: np.random.Generator):
    """Smoothed BCE of the real and fake terms (each batch-averaged) and
    the summed parameter gradients."""
    total_loss = 0.0
    grads = None
    for batch, label in ((real, 1.0 - smoothing), (fake, smoothing)):
        targets = np.full(len(batch), label)
        mask = _dropout_mask(batch.shape, dis.input_dropout, rng)
        cache = _forward(dis, batch, mask)
        total_loss += bce_loss_from_logits(cache[3], targets)
        term = _backward(dis, cache, targets)[:4]
        grads = term if grads is None else tuple(a + b for a, b in zip(grads, term))
    return total_loss, grads


def discriminator_step(dis: MlpDiscriminator, m: LinearMap, source: EmbeddingSpace,
                       target: EmbeddingSpace, cfg: GanConfig,
                       rng: np.random.Generator) -> tuple[MlpDiscriminator, float]:
    """One SGD step on -log D(v_t) - log(1 - D(W v_s)), label-smoothed.

    Returns the updated discriminator and the pre-update loss.
    """
    real = sample_rows(target, cfg.dis_freq_vocab, cfg.batch_size, rng)
    fake = m.apply(sample_rows(source, cfg.dis_freq_vocab, cfg.batch_size, rng))
    loss, (dw1, db1, dw2, db2) = discriminator_loss_and_grads(
        dis, real, fake, cfg.smoothing, rng)
    if not np.isfinite(loss):
        raise NumericError("non-finite discriminator loss")
    lr = cfg.lr_discriminator
    updated = MlpDiscriminator(dis.w1 - lr * dw1, dis.b1 - lr * db1,
                               dis.w2 - lr * dw2, dis.b2 - lr * db2,
                               input_dropout=dis.input_dropout,
                               leaky_slope=dis.leaky_slope)
    for arr in (updated.w1, updated.w2):
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite discriminator parameters after update")
    return updated, loss


def generator_loss_and_grad(m: LinearMap, dis: MlpDiscriminator, src_batch: np.ndarray,
                            tgt_batch: np.ndarray, smoothing: float):
    """Loss -log D(W v_s) - log(1 - D(v_t)) and its gradient in W.

    Only the first term depends on W; the discriminator runs in eval
    mode (no dropout) for the generator update.
    """
    mapped = src_batch @ m.w.T
    loss_fake, dx = bce_input_gradient(dis, mapped, np.full(len(mapped), 1.0 - smoothing))
    logits_real = _forward(dis, tgt_batch, None)[3]
    loss_real = bce_loss_from_logits(logits_real, np.full(len(tgt_batch), smoothing))
    grad_w = dx.T @ src_batch
    return loss_fake + loss_real, grad_w


def generator_step(m: LinearMap, dis: MlpDiscriminator, source: EmbeddingSpace,
                   target: EmbeddingSpace, cfg: GanConfig,
                   rng: np.random.Generator) -> tuple[LinearMap, float]:
    """One SGD step on the generator loss w.r.t. W, then orthogonalize."""
    src = sample_rows(source, cfg.dis_freq_vocab, cfg.batch_size, rng)
    tgt = sample_rows(target, cfg.dis_freq_vocab, cfg.batch_size, rng)
    loss, grad_w = generator_loss_and_grad(m, dis, src, tgt, cfg.smoothing)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad_w)):
        raise NumericError("non-finite generator loss or gradient")
    stepped = LinearMap(m.w - cfg.lr_generator * grad_w)
    return orthogonalize(stepped, cfg.beta), loss


def _criterion(m: LinearMap, source: EmbeddingSpace, target: EmbeddingSpace,
               cfg: GanConfig) -> float:
    return selection_criterion(forward_fn(m), source, target,
                               vocab_limit=cfg.criterion_vocab, k=cfg.csls_k)


def train_single_gan(source: EmbeddingSpace, target: EmbeddingSpace,
                     cfg: GanConfig) -> tuple[LinearMap, float]:
    """Alternating adversarial training from an identity start.

    Runs `epochs` x `steps_per_epoch` generator steps (each preceded by
    `dis_steps_per_gen_step` discriminator steps), evaluates the
    selection criterion after every epoch, decays the learning rates per
    epoch and halves them whenever the criterion drops, and returns the
    best snapshot with its criterion.
    """
    cfg.validate()
    if source.dim != target.dim:
        raise ConfigError(f"dimension mismatch: {source.dim} vs {target.dim}")
    rng = np.random.default_rng(cfg.seed)
    dis = init_discriminator(source.dim, cfg.dis_hidden, cfg.dis_dropout, rng,
                             cfg.dis_leaky_slope)
    current = identity_map(source.dim)
    best_map, best_crit = current, _criterion(current, source, target, cfg)
    prev_crit = best_crit
    lr_g, lr_d = cfg.lr_generator, cfg.lr_discriminator
    for _ in range(cfg.epochs):
        epoch_cfg = replace(cfg, lr_generator=lr_g, lr_discriminator=lr_d)
        for _ in range(cfg.steps_per_epoch):
            for _ in range(cfg.dis_steps_per_gen_step):
                dis, _ = discriminator_step(dis, current, source, target, epoch_cfg, rng)
            current, _ = generator_step(current, dis, source, target, epoch_cfg, rng)
        crit = _criterion(current, source, target, cfg)
        if crit > best_crit:
            best_map, best_crit = current, crit
        if crit < prev_crit:
            lr_g /= 2.0
            lr_d /= 2.0
        lr_g *= cfg.lr_decay
        lr_d *= cfg.lr_decay
        prev_crit = crit
    return best_map, best_crit


def random_restart_train(source: EmbeddingSpace, target: EmbeddingSpace, cfg: GanConfig,
                         restarts: int = 10) -> tuple[LinearMap, float]:
    """Train with seeds seed..seed+restarts-1 and keep the best criterion."""
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")
    best: tuple[LinearMap, float] | None = None
    failures = []
    for i in range(restarts):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        try:
            m, crit = train_single_gan(source, target, run_cfg)
        except NumericError as e:
            failures.append(str(e))
            continue
        if best is None or crit > best[1]:
            best = (m, crit)
    if best is None:
        raise TrainingFailedError(f"all {restarts} restarts failed: {failures}")
    return best
