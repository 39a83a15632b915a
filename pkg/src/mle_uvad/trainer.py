"""Dual-objective training loop and hyperparameter sweeps.

Each step minimizes ``reconstruction + mle_weight * latent_entropy`` on one
shuffled mini-batch: the reconstruction gradient flows through the whole
autoencoder while the entropy gradient is injected at the latent layer and
shapes only the encoder. Labels, when supplied, are used exclusively for
the per-epoch AUC column; they never influence a gradient, a shuffle, or a
parameter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .detect import pcc_gap, pcc_rows, roc_auc
from .entropy import mle_grad, mle_loss
from .errors import NumericalError
from .linalg import make_rng
from .model import (
    AutoencoderParams,
    backward,
    build_autoencoder,
    decode,
    encode,
    grad_arrays,
    mse_grad,
    mse_loss,
    param_arrays,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "EpochLog",
    "StepMetrics",
    "SweepCell",
    "init_adam",
    "adam_update",
    "train_step",
    "run_training",
    "sweep",
    "write_epoch_log_csv",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on.

    ``layer_sizes`` lists the encoder widths; the last entry is the latent
    dimension. ``mle_weight`` of zero gives the reconstruction-only ablation.
    """

    mle_weight: float = 1.0  # weight of the latent-entropy term
    bandwidth: float = 0.1  # kernel size of the entropy estimator
    kappa: float = 0.5  # detection threshold multiplier
    learning_rate: float = 5e-4
    batch_size: int = 64
    epochs: int = 70
    seed: int = 0
    layer_sizes: tuple[int, ...] = (128, 64, 32)
    mse_variant: str = "norm"

    def validate(self):
        if self.mle_weight < 0.0:
            raise ValueError(f"mle_weight must be nonnegative, got {self.mle_weight}")
        if self.bandwidth <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.mle_weight > 0.0 and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 when mle_weight > 0 "
                             "(a one-sample batch has degenerate entropy)")
        if not self.layer_sizes or any(s < 1 for s in self.layer_sizes):
            raise ValueError(f"layer_sizes must be positive, got {self.layer_sizes}")
        if self.mse_variant not in ("norm", "squared"):
            raise ValueError(f"mse_variant must be 'norm' or 'squared', got {self.mse_variant!r}")


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class StepMetrics:
    mse: float
    mle: float
    total: float


@dataclass(frozen=True)
class EpochLog:
    """One row of the training log; ``auc`` is None when labels were absent."""

    epoch: int
    mse: float
    mle: float
    total: float
    mean_pcc: float
    auc: float | None = None


@dataclass(frozen=True)
class SweepCell:
    """Outcome of one sweep cell; ``status`` is "ok" or an error summary."""

    bandwidth: float
    mle_weight: float
    status: str
    auc: float | None = None
    pcc_gap: float | None = None


def init_adam(params: AutoencoderParams) -> AdamState:
    arrays = param_arrays(params)
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
    )


def adam_update(adam: AdamState, params: AutoencoderParams, grads, learning_rate: float):
    """One bias-corrected Adam step, updating parameters in place."""
    adam.step += 1
    t = adam.step
    b1, b2, eps = adam.beta1, adam.beta2, adam.epsilon
    for i, (p, g) in enumerate(zip(param_arrays(params), grad_arrays(grads))):
        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g
        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g
        m_hat = adam.m[i] / (1.0 - b1**t)
        v_hat = adam.v[i] / (1.0 - b2**t)
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return adam, params


def train_step(params: AutoencoderParams, adam: AdamState, batch: np.ndarray,
               config: TrainConfig):
    """Forward, dual loss, backward, Adam update on one mini-batch."""
    latents, cache_enc = encode(params, batch)
    if not np.isfinite(latents).all():
        raise NumericalError("latent embeddings are non-finite (diverging encoder)")
    recons, cache_dec = decode(params, latents)
    mse = mse_loss(batch, recons, config.mse_variant)
    if not math.isfinite(mse):
        raise NumericalError(f"reconstruction loss is non-finite ({mse})")
    mle = mle_loss(latents, config.bandwidth)
    if not math.isfinite(mle):
        raise NumericalError(f"latent entropy loss is non-finite ({mle})")
    total = mse + config.mle_weight * mle
    grad_recon = mse_grad(batch, recons, config.mse_variant)
    if config.mle_weight > 0.0:
        grad_latent = config.mle_weight * mle_grad(latents, config.bandwidth)
    else:
        grad_latent = np.zeros_like(latents)
    grads = backward(params, cache_enc, cache_dec, grad_recon, grad_latent)
    adam_update(adam, params, grads, config.learning_rate)
    return params, adam, StepMetrics(mse=mse, mle=mle, total=total)


def run_training(frames: np.ndarray, config: TrainConfig, labels=None):
    """Train on the full frame matrix; returns (params, per-epoch logs).

    Frames are reshuffled every epoch with the seeded generator and consumed
    in full batches (a final short batch is dropped). After each epoch the
    whole dataset is scored in its original order: the log records the mean
    correlation and, when labels are given, the AUC of ``1 - pcc``.
    """
    config.validate()
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"training data must be a non-empty (T, D) matrix, got {frames.shape}")
    t, dim = frames.shape
    if t < config.batch_size:
        raise ValueError(f"dataset has {t} frames but batch_size is {config.batch_size}")
    if labels is not None:
        labels = np.asarray(labels, dtype=bool)
        if labels.shape != (t,):
            raise ValueError(f"labels shape {labels.shape} does not match {t} frames")

    rng = make_rng(config.seed)
    params = build_autoencoder(dim, config.layer_sizes, rng)
    adam = init_adam(params)
    logs: list[EpochLog] = []
    batches = t // config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(t)
        mse_sum = mle_sum = 0.0
        for b in range(batches):
            batch = frames[order[b * config.batch_size : (b + 1) * config.batch_size]]
            try:
                params, adam, metrics = train_step(params, adam, batch, config)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, batch {b}: {exc}") from exc
            mse_sum += metrics.mse
            mle_sum += metrics.mle
        mean_mse = mse_sum / batches
        mean_mle = mle_sum / batches
        latents, _ = encode(params, frames)
        recons, _ = decode(params, latents)
        correlations = pcc_rows(frames, recons)
        auc = roc_auc(1.0 - correlations, labels) if labels is not None else None
        logs.append(
            EpochLog(
                epoch=epoch,
                mse=mean_mse,
                mle=mean_mle,
                total=mean_mse + config.mle_weight * mean_mle,
                mean_pcc=float(correlations.mean()),
                auc=auc,
            )
        )
    return params, logs


def sweep(frames: np.ndarray, base_config: TrainConfig, sigma_grid, lambda_grid, labels=None):
    """One full training run per (bandwidth, weight) cell.

    Cell k (row-major over the grid) trains with seed ``base.seed + k`` so
    cells are independent yet reproducible, and a one-cell sweep follows the
    exact seed path of a plain run. A failed cell is recorded with its error
    and the sweep continues.
    """
    sigma_grid = list(sigma_grid)
    lambda_grid = list(lambda_grid)
    if not sigma_grid or not lambda_grid:
        raise ValueError("sweep grids must be nonempty")
    cells: list[SweepCell] = []
    index = 0
    for sigma in sigma_grid:
        for lam in lambda_grid:
            config = replace(
                base_config, bandwidth=sigma, mle_weight=lam, seed=base_config.seed + index
            )
            try:
                params, logs = run_training(frames, config, labels)
                gap = None
                if labels is not None:
                    latents, _ = encode(params, frames)
                    recons, _ = decode(params, latents)
                    gap = pcc_gap(pcc_rows(frames, recons), labels)
                cells.append(
                    SweepCell(
                        bandwidth=float(sigma),
                        mle_weight=float(lam),
                        status="ok",
                        auc=logs[-1].auc,
                        pcc_gap=gap,
                    )
                )
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                cells.append(
                    SweepCell(
                        bandwidth=float(sigma),
                        mle_weight=float(lam),
                        status=f"error: {exc}",
                    )
                )
            index += 1
    return cells


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_epoch_log_csv(path, logs):
    """CSV with one row per epoch: epoch, mse, mle, total, mean_pcc, auc."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mse", "mle", "total", "mean_pcc", "auc"])
        for log in logs:
            writer.writerow(
                [log.epoch, repr(log.mse), repr(log.mle), repr(log.total),
                 repr(log.mean_pcc), _fmt(log.auc)]
            )


def write_sweep_csv(path, cells):
    """CSV with one row per sweep cell."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sigma", "lambda", "auc", "pcc_gap", "status"])
        for cell in cells:
            writer.writerow(
                [repr(cell.bandwidth), repr(cell.mle_weight), _fmt(cell.auc),
                 _fmt(cell.pcc_gap), cell.status]
            )
