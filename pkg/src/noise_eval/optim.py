"""AMSGrad with coupled L2 weight decay and a one-step learning-rate decay."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from noise_eval.errors import ConfigError, NumericError, ShapeError


@dataclass(frozen=True)
class OptimHyper:
    lr0: float = 1e-4
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_epoch: int = 100
    decay_factor: float = 0.1

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ConfigError(f"must be > 0, got {self.lr0}", "optim.lr0")
        if not self.weight_decay >= 0:
            raise ConfigError(f"must be >= 0, got {self.weight_decay}", "optim.weight_decay")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"must lie in (0, 1), got {value}", f"optim.{name}")
        if not self.eps > 0:
            raise ConfigError(f"must be > 0, got {self.eps}", "optim.eps")
        if self.decay_epoch < 1:
            raise ConfigError(f"must be >= 1, got {self.decay_epoch}", "optim.decay_epoch")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError(f"must lie in (0, 1], got {self.decay_factor}", "optim.decay_factor")


@dataclass
class OptimState:
    """Moment accumulators, one array per parameter, plus the step count."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    v_max: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "OptimState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            v_max=[np.zeros_like(p) for p in params],
        )


def lr_at_epoch(h: OptimHyper, epoch: int) -> float:
    return h.lr0 if epoch < h.decay_epoch else h.lr0 * h.decay_factor


def amsgrad_step(params, grads, state: OptimState, h: OptimHyper, lr: float):
    """One AMSGrad update.

    The gradient is augmented with ``weight_decay * theta`` before the moment
    updates. The step uses bias-corrected moments and the running maximum of
    the (uncorrected) second moment::

        theta <- theta - lr * m_hat / (sqrt(v_max / (1 - beta2**t)) + eps)

    Returns new ``(params, state)``; the inputs are not modified.
    """
    if not lr > 0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length")
    t = state.t + 1
    bc1 = 1.0 - h.beta1**t
    bc2 = 1.0 - h.beta2**t
    step = lr / bc1
    inv_sqrt_bc2 = 1.0 / math.sqrt(bc2)

    new_params, m_out, v_out, vmax_out = [], [], [], []
    for i, (theta, g) in enumerate(zip(params, grads)):
        if g.shape != theta.shape:
            raise ShapeError(f"gradient {i} has shape {g.shape}, parameter {theta.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"gradient {i} contains non-finite values")
        if h.weight_decay:
            g = g + h.weight_decay * theta
        m = h.beta1 * state.m[i] + (1.0 - h.beta1) * g
        v = h.beta2 * state.v[i] + (1.0 - h.beta2) * (g * g)
        v_max = np.maximum(state.v_max[i], v)
        denom = np.sqrt(v_max) * inv_sqrt_bc2 + h.eps
        new_params.append((theta - step * m / denom).astype(theta.dtype, copy=False))
        m_out.append(m)
        v_out.append(v)
        vmax_out.append(v_max)
    return new_params, OptimState(m_out, v_out, vmax_out, t)
