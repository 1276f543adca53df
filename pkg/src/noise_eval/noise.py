"""Synthetic noise for training the noise evaluator.

A feature vector of length ``d`` is cut into ``m`` contiguous parts. Part ``i``
gets a noise level drawn uniformly from ``[i, i + 1] * sigma_max / m`` and is
filled with zero-mean noise of that standard deviation; the positions are
then shuffled so every feature sees every level. A ratio mask keeps noise on
only a fraction of the features. Bernoulli and salt-and-pepper corruption are
not additive: they flip the sign of, or replace, a random subset of entries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from noise_eval.errors import ConfigError, NumericError


class NoiseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"
    RAYLEIGH = "rayleigh"
    GAMMA = "gamma"
    POISSON = "poisson"
    BERNOULLI = "bernoulli"
    SALT_PEPPER = "saltpepper"

    @property
    def additive(self) -> bool:
        return self not in (NoiseFamily.BERNOULLI, NoiseFamily.SALT_PEPPER)


_ALIASES = {
    "normal": NoiseFamily.GAUSSIAN,
    "salt_pepper": NoiseFamily.SALT_PEPPER,
    "salt&pepper": NoiseFamily.SALT_PEPPER,
    "s&p": NoiseFamily.SALT_PEPPER,
}


def parse_family(name: str) -> tuple[NoiseFamily, float | None]:
    """Parse a noise-type name into ``(family, gamma_beta)``.

    Gamma accepts a shape suffix: ``gamma3`` or ``gamma:2.5``. ``gamma_beta``
    is ``None`` when the name does not carry one.
    """
    key = name.strip().lower()
    if key.startswith("gamma") and key != "gamma":
        suffix = key[5:].lstrip(":")
        try:
            beta = float(suffix)
        except ValueError:
            raise ConfigError(f"bad gamma shape in {name!r}", "noise.family") from None
        return NoiseFamily.GAMMA, beta
    if key in _ALIASES:
        return _ALIASES[key], None
    try:
        return NoiseFamily(key), None
    except ValueError:
        known = ", ".join(f.value for f in NoiseFamily)
        raise ConfigError(f"unknown noise type {name!r} (known: {known})", "noise.family") from None


@dataclass(frozen=True)
class NoiseSpec:
    """Everything that determines how noised copies are generated.

    One noised copy per entry of ``ratios`` is produced for every clean batch.
    ``gamma_beta`` is the Gamma shape parameter and is ignored by the other
    families.
    """

    family: NoiseFamily = NoiseFamily.GAUSSIAN
    sigma_max: float = 2.0
    m: int = 3
    ratios: tuple[float, ...] = (0.5, 0.8, 1.0)
    gamma_beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.sigma_max >= 0 or not math.isfinite(self.sigma_max):
            raise ConfigError(f"must be a finite value >= 0, got {self.sigma_max}", "noise.sigma_max")
        if self.m < 1:
            raise ConfigError(f"must be >= 1, got {self.m}", "noise.m")
        if not self.ratios:
            raise ConfigError("must not be empty", "noise.ratios")
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ConfigError(f"each ratio must lie in (0, 1], got {r}", "noise.ratios")
        if not self.gamma_beta > 0:
            raise ConfigError(f"must be > 0, got {self.gamma_beta}", "noise.gamma_beta")
        if self.seed < 0:
            raise ConfigError(f"must be non-negative, got {self.seed}", "noise.seed")

    @property
    def label(self) -> str:
        if self.family is NoiseFamily.GAMMA:
            return f"gamma{self.gamma_beta:g}"
        return self.family.value


@dataclass
class NoiseBatch:
    corrupted: np.ndarray
    target: np.ndarray
    ratio_used: float


def make_intervals(sigma_max: float, m: int) -> np.ndarray:
    """Return the ``m + 1`` interval edges ``i * sigma_max / m``."""
    if m < 1:
        raise ConfigError(f"must be >= 1, got {m}", "noise.m")
    if sigma_max < 0:
        raise ConfigError(f"must be >= 0, got {sigma_max}", "noise.sigma_max")
    return np.arange(m + 1) * (sigma_max / m)


def sample_noise(family, sigma_hat, n: int, rng: np.random.Generator, gamma_beta: float = 1.0):
    """Draw ``n`` values of zero-mean noise with standard deviation ``sigma_hat``.

    ``sigma_hat`` may be a scalar or an array of length ``n`` (one level per
    draw). Poisson noise is ``Poisson(sigma_hat) - sigma_hat`` and so has
    standard deviation ``sqrt(sigma_hat)``. For Bernoulli and salt-and-pepper
    the result is a 0/1 hit mask instead: each position gets a hit
    probability from ``U(0, 1)`` and is hit when a second uniform draw falls
    below it.
    """
    family = NoiseFamily(family)
    sigma = np.asarray(sigma_hat, dtype=np.float64)
    if np.any(sigma < 0):
        raise ConfigError("noise level must be >= 0", "noise.sigma_hat")
    if sigma.ndim:
        sigma = np.broadcast_to(sigma, (n,))

    if family is NoiseFamily.GAUSSIAN:
        return rng.standard_normal(n) * sigma
    if family is NoiseFamily.LAPLACE:
        return rng.laplace(0.0, 1.0, n) * (sigma / math.sqrt(2.0))
    if family is NoiseFamily.UNIFORM:
        return rng.uniform(-1.0, 1.0, n) * (math.sqrt(3.0) * sigma)
    if family is NoiseFamily.RAYLEIGH:
        scale = math.sqrt(2.0 / (4.0 - math.pi)) * sigma
        offset = math.sqrt(math.pi / (4.0 - math.pi)) * sigma
        return rng.rayleigh(1.0, n) * scale - offset
    if family is NoiseFamily.GAMMA:
        root = math.sqrt(gamma_beta)
        return rng.standard_gamma(gamma_beta, n) * (sigma / root) - root * sigma
    if family is NoiseFamily.POISSON:
        return rng.poisson(sigma, n) - sigma
    return hit_mask(1, n, rng)[0].astype(np.float64)


def hit_mask(b: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean ``(b, d)`` mask with a per-feature hit probability drawn from ``U(0, 1)``."""
    p = rng.random(d)
    return rng.random((b, d)) < p


def part_sizes(d: int, m: int) -> np.ndarray:
    """Sizes of ``m`` contiguous parts of ``d`` features; the first ``d % m`` get one extra."""
    sizes = np.full(m, d // m)
    sizes[: d % m] += 1
    return sizes


def stratified_noise(b: int, d: int, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Unshuffled noise: contiguous column part ``i`` has its level drawn from interval ``i``."""
    if not spec.family.additive:
        raise ConfigError(f"{spec.family.value} noise is not additive", "noise.family")
    m = spec.m
    if d < m:
        warnings.warn(f"d={d} is smaller than m={m}; using {d} noise intervals", stacklevel=3)
        m = d
    edges = make_intervals(spec.sigma_max, m)
    levels = rng.uniform(edges[:-1], edges[1:], size=(b, m))
    sigma = np.repeat(levels, part_sizes(d, m), axis=1)
    return sample_noise(spec.family, sigma.ravel(), b * d, rng, spec.gamma_beta).reshape(b, d)


def generate_noise_matrix(b: int, d: int, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Noise for a ``(b, d)`` batch with interval-stratified levels and shuffled positions."""
    return rng.permuted(stratified_noise(b, d, spec, rng), axis=1)


def _keep_count(ratio: float, d: int) -> int:
    if not 0 < ratio <= 1:
        raise ConfigError(f"ratio must lie in (0, 1], got {ratio}", "noise.ratios")
    return max(1, int(math.floor(ratio * d + 0.5)))


def ratio_mask(b: int, d: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask keeping ``max(1, round(ratio * d))`` random positions per row."""
    k = _keep_count(ratio, d)
    mask = np.zeros((b, d), dtype=bool)
    if k >= d:
        mask[:] = True
        return mask
    keep = np.argsort(rng.random((b, d)), axis=1)[:, :k]
    np.put_along_axis(mask, keep, True, axis=1)
    return mask


def apply_ratio_mask(E: np.ndarray, ratio: float, rng: np.random.Generator) -> np.ndarray:
    b, d = E.shape
    if _keep_count(ratio, d) >= d:
        return E.copy()
    return np.where(ratio_mask(b, d, ratio, rng), E, 0.0)


def flip_sign(X: np.ndarray, hits: np.ndarray) -> np.ndarray:
    return np.where(hits, -X, X)


def salt_pepper(X: np.ndarray, hits: np.ndarray, use_max: np.ndarray) -> np.ndarray:
    """Replace hit entries by their column's batch maximum or minimum."""
    hi = X.max(axis=0, keepdims=True)
    lo = X.min(axis=0, keepdims=True)
    return np.where(hits, np.where(use_max, hi, lo), X)


def corrupt_batch(X, spec: NoiseSpec, rng: np.random.Generator) -> list[NoiseBatch]:
    """Build one noised copy of ``X`` per ratio in ``spec.ratios``.

    Each copy draws from its own child of ``rng``. The target is the
    element-wise magnitude of the change, ``|corrupted - X|``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d batch, got shape {X.shape}")
    b, d = X.shape
    if b == 0:
        return []
    if not np.all(np.isfinite(X)):
        raise NumericError("batch contains non-finite values")
    out = []
    for ratio, gen in zip(spec.ratios, rng.spawn(len(spec.ratios))):
        if spec.family.additive:
            E = apply_ratio_mask(generate_noise_matrix(b, d, spec, gen), ratio, gen)
            corrupted = X + E
        else:
            hits = hit_mask(b, d, gen) & ratio_mask(b, d, ratio, gen)
            if spec.family is NoiseFamily.BERNOULLI:
                corrupted = flip_sign(X, hits)
            else:
                corrupted = salt_pepper(X, hits, gen.random((b, d)) < 0.5)
        out.append(NoiseBatch(corrupted, np.abs(corrupted - X), ratio))
    return out
