"""Dense ReLU networks mapping R^d -> R^d with hand-written backpropagation.

Two architectures are provided:

* ``mlp``: ``depth`` fully connected layers, ``d -> h -> ... -> h -> d``,
  ReLU after every layer but the last.
* ``resmlp``: an input projection ``d -> h`` followed by ReLU, ``depth``
  residual blocks ``a <- relu(a + relu(a W1 + b1) W2 + b2)``, and a linear
  output projection ``h -> d``.

Weights are stored as ``(fan_in, fan_out)`` matrices and applied as ``x @ W + b``
so a batch is a row-major ``(b, d)`` array. The output layer is linear.
"""

from __future__ import annotations

import dataclasses
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from noise_eval import rng as rngs
from noise_eval.errors import ConfigError, NumericError, ShapeError

FORMAT_VERSION = 1


class Arch(str, Enum):
    MLP = "mlp"
    RESMLP = "resmlp"


DEFAULT_DEPTH = {Arch.MLP: 4, Arch.RESMLP: 5}
INIT_SCHEMES = ("uniform", "he")


def default_hidden_dim(input_dim: int) -> int:
    return 64 if input_dim <= 64 else 256


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyper-parameters.

    ``hidden_dim`` and ``depth`` default to ``None`` and are resolved on
    construction: width 64 for ``input_dim <= 64`` and 256 above, depth 4 for
    the MLP and 5 residual blocks for the ResMLP.

    ``init`` selects the weight initialisation. ``"uniform"`` draws weights
    and biases from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; ``"he"`` draws
    weights from ``N(0, 2/fan_in)`` with zero biases.
    """

    input_dim: int
    arch: Arch = Arch.MLP
    hidden_dim: int | None = None
    depth: int | None = None
    seed: int = 0
    init: str = "uniform"
    dtype: str = "float32"

    def __post_init__(self):
        arch = Arch(self.arch)
        object.__setattr__(self, "arch", arch)
        if self.hidden_dim is None:
            object.__setattr__(self, "hidden_dim", default_hidden_dim(self.input_dim))
        if self.depth is None:
            object.__setattr__(self, "depth", DEFAULT_DEPTH[arch])
        if self.input_dim < 1:
            raise ConfigError(f"must be >= 1, got {self.input_dim}", "net.input_dim")
        if self.hidden_dim < 1:
            raise ConfigError(f"must be >= 1, got {self.hidden_dim}", "net.hidden_dim")
        if self.depth < 1:
            raise ConfigError(f"must be >= 1, got {self.depth}", "net.depth")
        if self.seed < 0:
            raise ConfigError(f"must be non-negative, got {self.seed}", "net.seed")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"unknown scheme {self.init!r}", "net.init")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}", "net.dtype")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """Weight-matrix shapes in parameter order."""
        d, h = self.input_dim, self.hidden_dim
        if self.arch is Arch.MLP:
            if self.depth == 1:
                return [(d, d)]
            return [(d, h)] + [(h, h)] * (self.depth - 2) + [(h, d)]
        return [(d, h)] + [(h, h), (h, h)] * self.depth + [(h, d)]

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["arch"] = self.arch.value
        return out


@dataclass
class Network:
    """Parameter container. ``params`` alternates weight matrix, bias vector."""

    config: NetworkConfig
    params: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)

    def copy(self) -> "Network":
        return Network(self.config, [p.copy() for p in self.params])

    def astype(self, dtype) -> "Network":
        dtype = np.dtype(dtype)
        cfg = dataclasses.replace(self.config, dtype=dtype.name)
        return Network(cfg, [p.astype(dtype) for p in self.params])

    def n_params(self) -> int:
        return sum(p.size for p in self.params)


@dataclass
class Trace:
    """Values cached by :func:`forward` for :func:`backward`.

    ``inputs[i]`` is the input of linear layer ``i`` and ``pre[i]`` its output
    before any activation, both in parameter order. For the ResMLP,
    ``block_sum[k]`` is the residual sum of block ``k`` before its ReLU.
    """

    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    block_sum: list[np.ndarray] = field(default_factory=list)


def init_network(config: NetworkConfig) -> Network:
    """Draw initial parameters from ``config.seed``."""
    gen = rngs.stream(config.seed, rngs.INIT)
    dtype = np.dtype(config.dtype)
    params = []
    for fan_in, fan_out in config.layer_shapes():
        if config.init == "he":
            w = gen.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            b = np.zeros(fan_out)
        else:
            bound = 1.0 / np.sqrt(fan_in)
            w = gen.uniform(-bound, bound, size=(fan_in, fan_out))
            b = gen.uniform(-bound, bound, size=fan_out)
        params += [w.astype(dtype), b.astype(dtype)]
    return Network(config, params)


def _check_batch(net: Network, batch) -> np.ndarray:
    x = np.asarray(batch)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"expected a (b, {net.input_dim}) batch, got shape {x.shape}")
    x = x.astype(net.dtype, copy=False)
    if not np.all(np.isfinite(x)):
        raise NumericError("batch contains non-finite values")
    return x


def forward(net: Network, batch) -> tuple[np.ndarray, Trace]:
    """Apply the network to a ``(b, d)`` batch.

    Returns the ``(b, d)`` output and the trace needed by :func:`backward`.
    """
    x = _check_batch(net, batch)
    p = net.params
    trace = Trace()

    def linear(a, i):
        z = a @ p[2 * i] + p[2 * i + 1]
        trace.inputs.append(a)
        trace.pre.append(z)
        return z

    if net.config.arch is Arch.MLP:
        a = x
        n = len(p) // 2
        for i in range(n):
            z = linear(a, i)
            a = np.maximum(z, 0) if i < n - 1 else z
        return a, trace

    a = np.maximum(linear(x, 0), 0)
    for k in range(net.config.depth):
        r = np.maximum(linear(a, 1 + 2 * k), 0)
        s = a + linear(r, 2 + 2 * k)
        trace.block_sum.append(s)
        a = np.maximum(s, 0)
    out = linear(a, 1 + 2 * net.config.depth)
    return out, trace


def backward(net: Network, trace: Trace, grad_out: np.ndarray) -> list[np.ndarray]:
    """Back-propagate ``dL/d(output)`` through a cached forward pass.

    Returns gradients in the same order and shapes as ``net.params``.
    """
    p = net.params
    grads: list[np.ndarray] = [None] * len(p)  # type: ignore[list-item]

    def linear_back(g, i):
        grads[2 * i] = trace.inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        return g @ p[2 * i].T

    g = grad_out
    if net.config.arch is Arch.MLP:
        n = len(p) // 2
        for i in range(n - 1, -1, -1):
            if i < n - 1:
                g = g * (trace.pre[i] > 0)
            g = linear_back(g, i)
        return grads

    depth = net.config.depth
    g = linear_back(g, 1 + 2 * depth)
    for k in range(depth - 1, -1, -1):
        g = g * (trace.block_sum[k] > 0)
        g_branch = linear_back(g, 2 + 2 * k)
        g_branch = g_branch * (trace.pre[1 + 2 * k] > 0)
        g = g + linear_back(g_branch, 1 + 2 * k)
    g = g * (trace.pre[0] > 0)
    linear_back(g, 0)
    return grads


def loss_and_grad(
    net: Network,
    clean,
    noised: Sequence,
    targets: Sequence,
) -> tuple[float, list[np.ndarray]]:
    """Noise-regression loss and its exact gradient.

    Clean rows are regressed to zero and each noised copy to its
    element-wise noise magnitude. The summed squared error is divided by the
    total number of rows (clean plus all noised copies).
    """
    if len(noised) != len(targets):
        raise ShapeError(f"{len(noised)} noised batches but {len(targets)} targets")
    clean = np.asarray(clean)
    if clean.ndim != 2 or clean.shape[1] != net.input_dim:
        raise ShapeError(f"expected a (b, {net.input_dim}) batch, got shape {clean.shape}")
    inputs = [clean]
    goals = [np.zeros_like(clean, dtype=net.dtype)]
    for k, (xk, tk) in enumerate(zip(noised, targets)):
        xk, tk = np.asarray(xk), np.asarray(tk)
        if xk.shape != clean.shape or tk.shape != clean.shape:
            raise ShapeError(
                f"noised copy {k}: shapes {xk.shape} and {tk.shape}, expected {clean.shape}"
            )
        if not np.all(np.isfinite(tk)):
            raise NumericError(f"targets of noised copy {k} contain non-finite values")
        if np.any(tk < 0):
            raise ValueError(f"targets of noised copy {k} must be non-negative")
        inputs.append(xk)
        goals.append(tk)

    x = np.concatenate(inputs).astype(net.dtype, copy=False)
    t = np.concatenate(goals).astype(net.dtype, copy=False)
    out, trace = forward(net, x)
    diff = out - t
    rows = x.shape[0]
    loss = float(np.sum(np.square(diff, dtype=np.float64))) / rows
    grads = backward(net, trace, (2.0 / rows) * diff)
    return loss, grads


# -- serialization -------------------------------------------------------------


def save_network(net: Network, path, **metadata) -> Path:
    """Write ``net`` to ``path`` as an uncompressed ``.npz`` container.

    The header entry holds the format version, the config fields and any
    JSON-serializable ``metadata``; parameters follow as ``p0, p1, ...``.
    """
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "config": net.config.to_dict(),
        "metadata": metadata,
    }
    arrays = {f"p{i}": np.ascontiguousarray(a) for i, a in enumerate(net.params)}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def _read(path):
    with open(path, "rb") as fh:
        data = np.load(io.BytesIO(fh.read()), allow_pickle=False)
    header = json.loads(str(data["header"]))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported model format version {header.get('format_version')!r}"
        )
    return header, data


def load_network(path) -> Network:
    header, data = _read(path)
    cfg = NetworkConfig(**header["config"])
    n = len(cfg.layer_shapes()) * 2
    params = [data[f"p{i}"] for i in range(n)]
    return Network(cfg, params)


def read_metadata(path) -> dict:
    header, _ = _read(path)
    return header["metadata"]
