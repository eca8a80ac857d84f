"""Small forecasting models over a flat parameter vector.

Three kinds share one interface (:func:`forward`, :func:`loss_and_grad`):

``linear``
    One head per quantile, each an affine map of the flattened input window.
``mlp``
    A shared ``tanh`` hidden layer followed by the per-quantile heads.
``lstm``
    A single LSTM layer run over the window (gate order input, forget,
    candidate, output; zero initial state) with the heads applied to the
    final hidden state.

Flat layouts, all blocks row-major, in this order:

* linear: for each quantile ``W_q (H, L*F)``, ``b_q (H,)``
* mlp: ``W1 (hidden, L*F)``, ``b1 (hidden,)``, then the heads on ``hidden`` inputs
* lstm: ``Wx (4*hidden, F)``, ``Wh (4*hidden, hidden)``, ``b (4*hidden,)``,
  then the heads on ``hidden`` inputs

where ``L`` is the input window, ``F`` the feature count and ``H`` the
number of horizons. Every head emits all horizons at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._backend import kernels as _default_kernels
from .losses import QuantileForecast, QuantileSet
from .numeric import DimensionError, NumericError, Rng, finite_diff_grad

__all__ = [
    "KINDS",
    "LossContext",
    "ModelSpec",
    "ParamVector",
    "forward",
    "grad_check",
    "init_params",
    "loss_and_grad",
    "param_count",
]

KINDS = ("linear", "mlp", "lstm")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_window: int
    feature_dim: int
    horizons: int
    quantile_count: int
    hidden_dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        for name in ("input_window", "feature_dim", "horizons", "quantile_count", "hidden_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_params(self) -> int:
        return param_count(self)

    def blocks(self) -> dict[str, slice]:
        """Named slices of the flat parameter vector."""
        L, F, H, Q, h = self.input_window, self.feature_dim, self.horizons, self.quantile_count, self.hidden_dim
        out: dict[str, slice] = {}
        pos = 0

        def take(name, size):
            nonlocal pos
            out[name] = slice(pos, pos + size)
            pos += size

        if self.kind == "linear":
            n_in = L * F
        elif self.kind == "mlp":
            take("hidden_weight", h * L * F)
            take("hidden_bias", h)
            n_in = h
        else:
            take("input_weight", 4 * h * F)
            take("recurrent_weight", 4 * h * h)
            take("gate_bias", 4 * h)
            n_in = h
        for q in range(Q):
            take(f"head{q}_weight", H * n_in)
            take(f"head{q}_bias", H)
        return out


def param_count(spec: ModelSpec) -> int:
    L, F, H, Q, h = spec.input_window, spec.feature_dim, spec.horizons, spec.quantile_count, spec.hidden_dim
    if spec.kind == "linear":
        return Q * H * (L * F + 1)
    if spec.kind == "mlp":
        return h * (L * F + 1) + Q * H * (h + 1)
    return 4 * h * (F + h + 1) + Q * H * (h + 1)


@dataclass(frozen=True)
class ParamVector:
    spec: ModelSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64).reshape(-1)
        if data.size != param_count(self.spec):
            raise DimensionError(f"{data.size} parameters for a spec that needs {param_count(self.spec)}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def with_data(self, data) -> "ParamVector":
        return ParamVector(self.spec, data)

    def block(self, name: str) -> np.ndarray:
        return self.data[self.spec.blocks()[name]]

    def __len__(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class LossContext:
    """Data defining one step's loss: an input window and its targets."""

    features: np.ndarray
    targets: np.ndarray
    quantiles: QuantileSet
    step_index: int = 0
    _q: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError(f"features must be a (window, feature_dim) matrix, got shape {x.shape}")
        y = self.targets
        if isinstance(y, Mapping):
            y = [y[k] for k in range(1, len(y) + 1)]
        y = np.array(y, dtype=np.float64).reshape(-1)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "_q", self.quantiles.as_array())

    @property
    def horizons(self) -> int:
        return self.targets.size


def init_params(spec: ModelSpec, rng: Rng, scale: float = 0.1) -> ParamVector:
    """Weights uniform on ``[-scale, scale]``; biases zero except LSTM forget gates at 1."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    data = rng.uniform(param_count(spec), -scale, scale)
    blocks = spec.blocks()
    for name, sl in blocks.items():
        if name.endswith("bias"):
            data[sl] = 0.0
    if spec.kind == "lstm":
        h = spec.hidden_dim
        start = blocks["gate_bias"].start
        data[start + h: start + 2 * h] = 1.0
    return ParamVector(spec, data)


def _check(spec: ModelSpec, ctx: LossContext) -> None:
    if ctx.features.shape != (spec.input_window, spec.feature_dim):
        raise DimensionError(
            f"features shape {ctx.features.shape} != ({spec.input_window}, {spec.feature_dim})"
        )
    if ctx.horizons != spec.horizons:
        raise DimensionError(f"{ctx.horizons} targets for a {spec.horizons}-horizon model")
    if len(ctx.quantiles) != spec.quantile_count:
        raise DimensionError(f"{len(ctx.quantiles)} quantiles for a {spec.quantile_count}-head model")


def _raw_forward(spec: ModelSpec, data: np.ndarray, x: np.ndarray, kern) -> np.ndarray:
    if spec.kind == "linear":
        return kern.linear_forward(data, x, spec.horizons, spec.quantile_count)
    if spec.kind == "mlp":
        return kern.mlp_forward(data, x, spec.hidden_dim, spec.horizons, spec.quantile_count)
    return kern.lstm_forward(data, x, spec.hidden_dim, spec.horizons, spec.quantile_count)


def _raw_loss_grad(spec: ModelSpec, data: np.ndarray, ctx: LossContext, kern):
    x, y, qs = ctx.features, ctx.targets, ctx._q
    if spec.kind == "linear":
        return kern.linear_loss_grad(data, x, y, qs)
    if spec.kind == "mlp":
        return kern.mlp_loss_grad(data, x, y, qs, spec.hidden_dim)
    return kern.lstm_loss_grad(data, x, y, qs, spec.hidden_dim)


def forward(params: ParamVector, ctx: LossContext, *, kernels=None) -> QuantileForecast:
    _check(params.spec, ctx)
    kern = kernels or _default_kernels
    return QuantileForecast(_raw_forward(params.spec, params.data, ctx.features, kern), ctx.quantiles)


def loss_and_grad(params: ParamVector, ctx: LossContext, *, kernels=None) -> tuple[float, np.ndarray]:
    """Total pinball loss of the forecast and its exact gradient.

    Raises :class:`~smoothsgd.numeric.NumericError` carrying the context's
    ``step_index`` when the loss or gradient is not finite.
    """
    _check(params.spec, ctx)
    loss, grad = _raw_loss_grad(params.spec, params.data, ctx, kernels or _default_kernels)
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NumericError(f"non-finite loss or gradient at step {ctx.step_index}", index=ctx.step_index)
    return float(loss), grad


def _random_context(spec: ModelSpec, rng: Rng, quantiles: QuantileSet) -> LossContext:
    x = rng.normal(spec.input_window * spec.feature_dim).reshape(spec.input_window, spec.feature_dim)
    return LossContext(x, rng.normal(spec.horizons), quantiles, 0)


def _default_quantiles(n: int) -> QuantileSet:
    return QuantileSet(tuple(np.linspace(0.0, 1.0, n + 2)[1:-1]))


def grad_check(spec: ModelSpec, trials: int, rng: Rng, *, h: float = 1e-5, kink_margin: float = 1e-4,
               scale: float = 0.5, kernels=None) -> float:
    """Worst relative error between :func:`loss_and_grad` and central differences.

    Each trial draws fresh parameters and data. Coordinates whose probes
    bring any prediction within ``kink_margin`` of its target are skipped.
    The per-trial error is ``||a - n|| / max(||a||, ||n||)`` over the kept
    coordinates.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    kern = kernels or _default_kernels
    qs = _default_quantiles(spec.quantile_count)
    worst = 0.0
    for _ in range(trials):
        params = init_params(spec, rng, scale)
        # randomise biases too, so every block is exercised away from its init value
        params = params.with_data(params.data + rng.uniform(params.data.size, -scale, scale))
        ctx = _random_context(spec, rng, qs)
        _, analytic = loss_and_grad(params, ctx, kernels=kern)
        x = params.data.copy()
        y = ctx.targets[None, :]
        keep = np.ones(x.size, dtype=bool)
        numeric = np.zeros(x.size)
        for j in range(x.size):
            orig = x[j]
            x[j] = orig + h
            pp = _raw_forward(spec, x, ctx.features, kern)
            lp = _raw_loss_grad(spec, x, ctx, kern)[0]
            x[j] = orig - h
            pm = _raw_forward(spec, x, ctx.features, kern)
            lm = _raw_loss_grad(spec, x, ctx, kern)[0]
            x[j] = orig
            lo = np.minimum(pp, pm) - kink_margin
            hi = np.maximum(pp, pm) + kink_margin
            if np.any((lo <= y) & (y <= hi)):
                keep[j] = False
                continue
            numeric[j] = (lp - lm) / (2.0 * h)
        a, n = analytic[keep], numeric[keep]
        denom = max(np.linalg.norm(a), np.linalg.norm(n))
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


def numeric_grad(params: ParamVector, ctx: LossContext, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the loss, for spot checks."""
    spec = params.spec
    return finite_diff_grad(lambda v: _raw_loss_grad(spec, v, ctx, _default_kernels)[0], params.data, h)
