"""Shared numeric primitives: SVD, covariance spectra, and a small MLP
classifier trained with plain SGD on binary cross-entropy.

Everything here is pure given an explicit numpy Generator, so callers
own all randomness and repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError, TooFewSamplesError

EIGENVALUE_FLOOR = 1e-12


def svd(m: np.ndarray):
    """Full SVD with singular values sorted descending.

    Returns (U, S, Vt) with U [a x a], S [min(a,b)], Vt [b x b].
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise NumericError("svd input contains non-finite entries")
    return np.linalg.svd(m, full_matrices=True)


def covariance_eigenvalues(vectors: np.ndarray) -> np.ndarray:
    """Eigenvalues of the sample covariance of the rows, descending.

    Rows are mean-centered, the covariance uses the 1/(n-1) scaling, and
    every eigenvalue is floored at 1e-12 so downstream logs stay finite.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewSamplesError(f"need at least 2 rows, got shape {x.shape}")
    xc = x - x.mean(axis=0)
    cov = (xc.T @ xc) / (x.shape[0] - 1)
    eig = np.linalg.eigvalsh(cov)[::-1]
    return np.maximum(eig, EIGENVALUE_FLOOR)


@dataclass(frozen=True)
class MlpDiscriminator:
    """Two-layer perceptron with leaky-rectifier hidden units and a
    sigmoid output, plus optional input dropout during training."""

    w1: np.ndarray  # [h x d]
    b1: np.ndarray  # [h]
    w2: np.ndarray  # [1 x h]
    b2: float
    input_dropout: float = 0.1
    leaky_slope: float = 0.2

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]


def init_discriminator(dim: int, hidden: int, dropout: float, rng: np.random.Generator,
                       leaky_slope: float = 0.2) -> MlpDiscriminator:
    w1 = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden, dim))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(1, hidden))
    return MlpDiscriminator(w1, np.zeros(hidden), w2, 0.0,
                            input_dropout=dropout, leaky_slope=leaky_slope)


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0.0, z, slope * z)


def _leaky_grad(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0.0, 1.0, slope)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray | None:
    if p <= 0.0:
        return None
    # inverted dropout: surviving inputs are scaled up so eval needs no change
    return (rng.random(shape) >= p) / (1.0 - p)


def _forward(net: MlpDiscriminator, batch: np.ndarray, mask: np.ndarray | None):
    x = batch if mask is None else batch * mask
    z1 = x @ net.w1.T + net.b1
    a1 = _leaky(z1, net.leaky_slope)
    z2 = a1 @ net.w2.T.ravel() + net.b2
    return x, z1, a1, z2


def mlp_forward(net: MlpDiscriminator, batch: np.ndarray, train_mode: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Probabilities that each row came from the target distribution."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(f"batch shape {batch.shape} does not match input dim {net.input_dim}")
    mask = None
    if train_mode and net.input_dropout > 0.0:
        if rng is None:
            raise ShapeError("train_mode with dropout requires an rng")
        mask = _dropout_mask(batch.shape, net.input_dropout, rng)
    _, _, _, z2 = _forward(net, batch, mask)
    return _sigmoid(z2)


def bce_loss_from_logits(z: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy, computed stably in logit space."""
    return float(np.mean(_softplus(z) - targets * z))


def _backward(net: MlpDiscriminator, cache, targets: np.ndarray):
    """Gradients of mean BCE w.r.t. all parameters and the (pre-dropout) input."""
    x, z1, a1, z2 = cache
    b = z2.shape[0]
    p = _sigmoid(z2)
    g2 = (p - targets) / b                      # dL/dz2, [b]
    dw2 = (g2 @ a1)[None, :]                    # [1 x h]
    db2 = float(g2.sum())
    da1 = np.outer(g2, net.w2.ravel())          # [b x h]
    dz1 = da1 * _leaky_grad(z1, net.leaky_slope)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    dx = dz1 @ net.w1                           # gradient w.r.t. the dropped input
    return dw1, db1, dw2, db2, dx


def bce_input_gradient(net: MlpDiscriminator, batch: np.ndarray, targets: np.ndarray):
    """Loss and dL/dbatch of mean BCE with the net in eval mode (no dropout)."""
    cache = _forward(net, np.asarray(batch, dtype=np.float64), None)
    loss = bce_loss_from_logits(cache[3], targets)
    _, _, _, _, dx = _backward(net, cache, targets)
    return loss, dx


def mlp_sgd_step(net: MlpDiscriminator, batch: np.ndarray, targets: np.ndarray,
                 lr: float, rng: np.random.Generator) -> tuple[MlpDiscriminator, float]:
    """One SGD step on mean BCE; returns the updated net and pre-update loss."""
    batch = np.asarray(batch, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if batch.shape[1] != net.input_dim:
        raise ShapeError(f"batch shape {batch.shape} does not match input dim {net.input_dim}")
    if lr < 0:
        raise ShapeError(f"lr must be >= 0, got {lr}")
    mask = _dropout_mask(batch.shape, net.input_dropout, rng)
    cache = _forward(net, batch, mask)
    loss = bce_loss_from_logits(cache[3], targets)
    dw1, db1, dw2, db2, _ = _backward(net, cache, targets)
    for g in (dw1, db1, dw2):
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient in discriminator update")
    if not np.isfinite(db2) or not np.isfinite(loss):
        raise NumericError("non-finite gradient in discriminator update")
    updated = MlpDiscriminator(
        net.w1 - lr * dw1,
        net.b1 - lr * db1,
        net.w2 - lr * dw2,
        net.b2 - lr * db2,
        input_dropout=net.input_dropout,
        leaky_slope=net.leaky_slope,
    )
    return updated, loss
