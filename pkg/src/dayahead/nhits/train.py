"""Training loop: AdamW with warmup+cosine schedule, gradient clipping,
early stopping with best-weight restore, and MC-dropout ensembling."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..forecasts import EnsembleForecast
from .model import NhitsData, NhitsModel
from .swag import SwagConfig, SwagState, swag_collect

log = logging.getLogger(__name__)


def learning_rate(base: float, epoch: int, warmup: int, n_epochs: int) -> float:
    """Linear ramp from zero over ``warmup`` epochs, then cosine decay that
    reaches zero at ``n_epochs``."""
    if warmup > 0 and epoch < warmup:
        return base * epoch / warmup
    span = max(n_epochs - warmup, 1)
    return base * 0.5 * (1.0 + math.cos(math.pi * (epoch - warmup) / span))


class AdamW:
    """Decoupled weight decay, bias-corrected moments, one flat vector."""

    def __init__(self, n_params: int, betas=(0.9, 0.999), weight_decay=0.01, eps=1e-8):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.b1, self.b2 = betas
        self.wd = weight_decay
        self.eps = eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        params -= lr * self.wd * params
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_gradient(grad: np.ndarray, max_norm: float) -> float:
    """Scales grad in place to the norm budget; returns the pre-clip norm."""
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        grad *= max_norm / norm
    return norm


@dataclass
class TrainReport:
    train_mae: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def nhits_train(
    model: NhitsModel,
    train: NhitsData,
    val: NhitsData | None = None,
    swag_config: SwagConfig | None = None,
) -> tuple[TrainReport, SwagState | None]:
    """Minimize MAE on standardized targets.

    Early stopping watches validation MAE with the configured patience and
    restores the best parameters afterwards, so the returned model is never
    worse than any checkpointed epoch. A NaN loss aborts with diagnostics
    rather than training on garbage. When a SWAG config is given, iterates
    are collected on its schedule.
    """
    cfg = model.config
    if len(train) == 0:
        raise ValueError("empty training set")
    rng_data = np.random.default_rng((cfg.seed, 1))
    rng_drop = np.random.default_rng((cfg.seed, 2))
    opt = AdamW(model.n_params, betas=cfg.betas, weight_decay=cfg.weight_decay)
    swag = SwagState(model.n_params, swag_config) if swag_config and swag_config.enabled else None

    report = TrainReport()
    best = (math.inf, model.clone_params(), -1)
    patience = cfg.patience
    for epoch in range(cfg.n_epochs):
        lr = learning_rate(cfg.lr, epoch, cfg.warmup_epochs, cfg.n_epochs)
        order = rng_data.permutation(len(train))
        epoch_loss, n_batches = 0.0, 0
        for lo in range(0, order.size, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss, grad = model.loss_and_grad(
                train.y_past[idx],
                train.covariates[idx],
                train.targets[idx],
                train=True,
                rng=rng_drop,
            )
            if math.isnan(loss):
                raise FloatingPointError(
                    f"NaN training loss at epoch {epoch}, batch {n_batches}; "
                    f"lr={lr:g}, grad norm so far unavailable"
                )
            clip_gradient(grad, cfg.gradient_clip)
            opt.step(model.params, grad, lr)
            epoch_loss += loss
            n_batches += 1
        report.train_mae.append(epoch_loss / max(n_batches, 1))
        report.lr.append(lr)

        if swag is not None:
            swag_collect(swag, model.params, epoch)

        if val is not None and len(val) > 0:
            val_mae = float(np.abs(model.predict(val) - val.targets).mean())
            report.val_mae.append(val_mae)
            if val_mae < best[0] - 1e-12:
                best = (val_mae, model.clone_params(), epoch)
                patience = cfg.patience
            else:
                patience -= 1
                if patience <= 0:
                    report.stopped_early = True
                    break

    if val is not None and best[2] >= 0:
        model.params[:] = best[1]
        model.best_val_mae = best[0]
        report.best_epoch = best[2]
    model.trained_epochs = len(report.train_mae)
    return report, swag


def mc_dropout_ensemble(
    model: NhitsModel, data: NhitsData, n_samples: int, seed: int = 0
) -> list[EnsembleForecast]:
    """S stochastic forward passes per window with dropout left on.

    Masks are drawn from one seeded stream, so a fixed seed reproduces the
    ensemble bit for bit; p=0 degenerates to S identical samples.
    """
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    rng = np.random.default_rng(seed)
    draws = np.empty((n_samples, len(data), model.horizon))
    for s in range(n_samples):
        draws[s] = model.forward(data.y_past, data.covariates, train=True, rng=rng)
    return [
        EnsembleForecast(int(origin), draws[:, i, :])
        for i, origin in enumerate(data.origins)
    ]
