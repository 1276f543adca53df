"""Training loop: fresh noised copies every batch of every epoch, AMSGrad updates."""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from noise_eval import rng as rngs
from noise_eval.errors import ConfigError, NumericError, ShapeError
from noise_eval.nn import Network, NetworkConfig, init_network, loss_and_grad
from noise_eval.noise import NoiseBatch, NoiseSpec, corrupt_batch
from noise_eval.optim import OptimHyper, OptimState, amsgrad_step, lr_at_epoch

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 0.1


@dataclass(frozen=True)
class TrainConfig:
    net: NetworkConfig
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    optim: OptimHyper = field(default_factory=OptimHyper)
    epochs: int = 500
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"must be >= 1, got {self.epochs}", "train.epochs")
        if self.batch_size < 1:
            raise ConfigError(f"must be >= 1, got {self.batch_size}", "train.batch_size")
        if self.seed < 0:
            raise ConfigError(f"must be non-negative, got {self.seed}", "train.seed")

    def with_seed(self, seed: int) -> "TrainConfig":
        """Copy with the run, network and noise seeds all set to ``seed``."""
        return dataclasses.replace(
            self,
            seed=seed,
            net=dataclasses.replace(self.net, seed=seed),
            noise=dataclasses.replace(self.noise, seed=seed),
        )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["net"] = self.net.to_dict()
        out["noise"]["family"] = self.noise.family.value
        out["noise"]["ratios"] = list(self.noise.ratios)
        return out


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "lr"])
            for epoch, (loss, lr) in enumerate(zip(self.loss, self.lr)):
                w.writerow([epoch, repr(loss), repr(lr)])


BatchHook = Callable[[int, int, list[NoiseBatch]], None]
EpochHook = Callable[[int, Network, float], None]


def train(
    train_X,
    cfg: TrainConfig,
    on_batch: BatchHook | None = None,
    on_epoch: EpochHook | None = None,
) -> tuple[Network, TrainHistory]:
    """Fit a noise evaluator on standardized, anomaly-free rows.

    Every epoch reshuffles the rows; every batch gets freshly generated
    noised copies (one per noise ratio) and contributes one optimizer step
    on the loss over the clean rows and all copies together.

    ``on_batch(epoch, batch, noised)`` sees the generated copies and
    ``on_epoch(epoch, net, mean_loss)`` runs after each epoch.
    """
    X = np.asarray(train_X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeError(f"need a non-empty (n, d) matrix, got shape {X.shape}")
    n, d = X.shape
    if d != cfg.net.input_dim:
        raise ShapeError(f"data has {d} features, network expects {cfg.net.input_dim}")
    if not np.all(np.isfinite(X)):
        raise NumericError("training data contains non-finite values")
    worst = float(np.max(np.abs(X.mean(axis=0))))
    if worst > MEAN_TOLERANCE:
        raise ValueError(
            f"training data does not look standardized (largest column mean {worst:.3g})"
        )
    batch_size = cfg.batch_size
    if batch_size > n:
        logger.warning("batch_size %d exceeds %d rows; using %d", batch_size, n, n)
        batch_size = n

    net = init_network(cfg.net)
    state = OptimState.zeros_like(net.params)
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg.optim, epoch)
        order = rngs.stream(cfg.seed, rngs.SHUFFLE, epoch).permutation(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, batch_size)):
            batch = X[order[start : start + batch_size]]
            noised = corrupt_batch(batch, cfg.noise, rngs.stream(cfg.noise.seed, rngs.NOISE, epoch, bi))
            if on_batch is not None:
                on_batch(epoch, bi, noised)
            loss, grads = loss_and_grad(
                net, batch, [c.corrupted for c in noised], [c.target for c in noised]
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {bi}")
            try:
                params, state = amsgrad_step(net.params, grads, state, cfg.optim, lr)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, batch {bi}: {exc}") from exc
            net = Network(net.config, params)
            total += loss * len(batch)
        history.loss.append(total / n)
        history.lr.append(lr)
        if on_epoch is not None:
            on_epoch(epoch, net, history.loss[-1])
        if logger.isEnabledFor(logging.DEBUG) and (epoch % 50 == 0 or epoch == cfg.epochs - 1):
            logger.debug("epoch %d loss %.6g lr %.3g", epoch, history.loss[-1], lr)
    return net, history
