"""Dense-vector helpers, a counter-based RNG and a central-difference oracle.

Vectors are 1-D ``float64`` numpy arrays. Nothing here clamps non-finite
values; callers decide what to do with them via :func:`is_finite`.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

__all__ = [
    "DimensionError",
    "NumericError",
    "Rng",
    "add_scaled",
    "as_vector",
    "finite_diff_grad",
    "is_finite",
    "norm_sq",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class DimensionError(ValueError):
    """Operands have incompatible lengths or shapes."""


class NumericError(ArithmeticError):
    """A non-finite value showed up where a finite one was required."""

    def __init__(self, message: str, *, index: int | None = None):
        super().__init__(message)
        self.index = index


def as_vector(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).reshape(-1)


def add_scaled(a, b, s: float) -> np.ndarray:
    """Return ``a + s*b`` as a new array."""
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return a + s * b


def norm_sq(a) -> float:
    a = as_vector(a)
    return float(np.dot(a, a))


def is_finite(a) -> bool:
    return bool(np.all(np.isfinite(a)))


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    Raises :class:`NumericError` (with ``index`` set to the coordinate) if
    either probe evaluates to a non-finite value.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = as_vector(x).copy()
    grad = np.empty_like(x)
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + h
        fp = float(f(x.copy()))
        x[j] = orig - h
        fm = float(f(x.copy()))
        x[j] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError(f"non-finite function value probing coordinate {j}", index=j)
        grad[j] = (fp - fm) / (2.0 * h)
    return grad


class Rng:
    """SplitMix64 in counter mode.

    Draw ``i`` (0-based) is ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15)``
    with the standard SplitMix64 finalizer, so any block of draws can be
    produced with vectorised ``uint64`` arithmetic and the stream is the
    same on every platform. Uniforms use the top 53 bits; normals use
    Box-Muller on pairs of uniforms.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def next_u64(self) -> int:
        return int(self._raw(1)[0])

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        """Uniform draws on ``[low, high)``; a float when ``n`` is None."""
        m = 1 if n is None else int(n)
        u = (self._raw(m) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        out = low + (high - low) * u
        return float(out[0]) if n is None else out

    def normal(self, n: int | None = None, mean: float = 0.0, sd: float = 1.0):
        m = 1 if n is None else int(n)
        pairs = (m + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 lies in (0, 1]
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out = mean + sd * z[:m]
        return float(out[0]) if n is None else out

    def integers(self, low: int, high: int, n: int | None = None):
        """Integers in ``[low, high)``."""
        span = high - low
        if span <= 0:
            raise ValueError("empty integer range")
        m = 1 if n is None else int(n)
        vals = low + np.floor(self.uniform(m) * span).astype(np.int64)
        return int(vals[0]) if n is None else vals

    def choice(self, options):
        return options[self.integers(0, len(options))]

    def spawn(self, key: int) -> "Rng":
        """Independent child stream keyed by ``key``."""
        return Rng(int(Rng(self.seed ^ ((int(key) * 0xD1B54A32D192ED03) & _MASK64)).next_u64()))
