"""Pinball (quantile) loss, its subgradient, the multi-horizon total and MSE."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .numeric import DimensionError

__all__ = [
    "QuantileForecast",
    "QuantileSet",
    "mse_loss",
    "pinball_terms",
    "quantile_loss",
    "quantile_loss_subgrad",
    "total_quantile_loss",
]


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")


@dataclass(frozen=True)
class QuantileSet:
    quantiles: tuple[float, ...]

    def __post_init__(self):
        qs = tuple(float(q) for q in self.quantiles)
        if not qs:
            raise ValueError("quantile set is empty")
        for q in qs:
            _check_q(q)
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("quantiles must be strictly increasing")
        object.__setattr__(self, "quantiles", qs)

    def __len__(self) -> int:
        return len(self.quantiles)

    def __iter__(self):
        return iter(self.quantiles)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.quantiles, dtype=np.float64)


@dataclass(frozen=True)
class QuantileForecast:
    """Predictions on the horizon x quantile grid.

    ``values[i, k-1]`` is the forecast for quantile ``quantiles[i]`` at
    horizon ``k``. Indexing with ``forecast[k, q]`` uses the 1-based horizon.
    """

    values: np.ndarray
    quantiles: QuantileSet

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.quantiles):
            raise DimensionError(f"forecast grid shape {v.shape} does not match {len(self.quantiles)} quantiles")
        object.__setattr__(self, "values", v)

    @property
    def horizons(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, key: tuple[int, float]) -> float:
        k, q = key
        if not 1 <= k <= self.horizons:
            raise KeyError(key)
        return float(self.values[self.quantiles.quantiles.index(float(q)), k - 1])


def quantile_loss(y: float, y_hat: float, q: float) -> float:
    _check_q(q)
    return q * max(y - y_hat, 0.0) + (1.0 - q) * max(y_hat - y, 0.0)


def quantile_loss_subgrad(y: float, y_hat: float, q: float) -> float:
    """d/d(y_hat) of the pinball loss; 0 at the kink."""
    _check_q(q)
    if y_hat < y:
        return -q
    if y_hat > y:
        return 1.0 - q
    return 0.0


def pinball_terms(y: np.ndarray, y_hat: np.ndarray, qs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised pinball values and subgradients.

    ``y`` has shape ``(H,)``, ``y_hat`` shape ``(Q, H)`` and ``qs`` shape
    ``(Q,)``; both outputs have the shape of ``y_hat``.
    """
    diff = y[None, :] - y_hat
    q = qs[:, None]
    loss = np.where(diff > 0, q * diff, (q - 1.0) * diff)
    grad = np.where(y_hat < y[None, :], -q, np.where(y_hat > y[None, :], 1.0 - q, 0.0))
    return loss, grad


def _targets_array(targets: Mapping[int, float] | Sequence[float] | np.ndarray, horizons: int) -> np.ndarray:
    if isinstance(targets, Mapping):
        if set(targets) != set(range(1, horizons + 1)):
            raise DimensionError(f"target horizons {sorted(targets)} do not match 1..{horizons}")
        return np.array([targets[k] for k in range(1, horizons + 1)], dtype=np.float64)
    arr = np.asarray(targets, dtype=np.float64).reshape(-1)
    if arr.size != horizons:
        raise DimensionError(f"{arr.size} targets for {horizons} horizons")
    return arr


def total_quantile_loss(targets, forecast: QuantileForecast, qs: QuantileSet | None = None) -> float:
    """Sum of pinball losses over every (horizon, quantile) cell.

    ``targets`` is either a mapping ``{k: y}`` with 1-based horizons or a
    sequence ordered by horizon. No averaging is applied.
    """
    if qs is not None and qs != forecast.quantiles:
        raise DimensionError("quantile set differs from the forecast's")
    y = _targets_array(targets, forecast.horizons)
    loss, _ = pinball_terms(y, forecast.values, forecast.quantiles.as_array())
    return float(loss.sum())


def mse_loss(y: float, y_hat: float) -> tuple[float, float]:
    """Squared error and its derivative with respect to ``y_hat``."""
    d = y_hat - y
    return d * d, 2.0 * d
