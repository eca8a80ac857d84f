"""Online update rules: plain SGD, window-averaged and exponentially smoothed SGD.

All three share a learning-rate schedule and report a :class:`StepReceipt`
per update. The windowed rules treat steps before the first one as having
zero loss, so their normalisers stay at the full-window value from the
start and early updates are proportionally shorter.

* ``sgd``: ``x' = x - eta_t * g_t(x)``
* ``hts``: ``x' = x - eta_t / w * sum_i g_{t-i}(x)`` -- every stored loss is
  re-differentiated at the current iterate, ``min(w, t)`` gradient
  evaluations per step.
* ``pts``: ``x' = x - eta_t / W * sum_i alpha^i g_{t-i}(x_{t-i})`` with
  ``W = sum_{i<w} alpha^i`` -- past gradients are reused as recorded, one
  new gradient evaluation per step.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .models import LossContext, ParamVector, loss_and_grad
from .numeric import NumericError, norm_sq

__all__ = [
    "METHODS",
    "SCHEDULES",
    "ContextBuffer",
    "GradientBuffer",
    "OnlineOptimizer",
    "OptimizerConfig",
    "SequencingError",
    "StepReceipt",
    "hts_step",
    "lr_at",
    "pts_step",
    "push_context",
    "sgd_step",
]

METHODS = ("sgd", "hts", "pts")
SCHEDULES = ("constant", "inverse_sqrt")

GradFn = Callable[[object, LossContext], "tuple[float, np.ndarray]"]


class SequencingError(ValueError):
    """A context arrived out of order."""


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "sgd"
    eta: float = 0.1
    window: int = 1
    alpha: float = 0.99
    schedule: str = "inverse_sqrt"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; expected one of {SCHEDULES}")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if int(self.window) < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


def lr_at(eta: float, t: int, schedule: str = "inverse_sqrt") -> float:
    if t < 1:
        raise ValueError(f"step counter must be >= 1, got {t}")
    if schedule == "constant":
        return eta
    if schedule == "inverse_sqrt":
        return eta / math.sqrt(t)
    raise ValueError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class StepReceipt:
    step_index: int
    eta_t: float
    grad_evals: int
    smoothed_grad_norm_sq: float
    wall_time: float
    diverged: bool
    loss: float = math.nan
    # gradient of this step's loss at the iterate the step started from
    own_grad: np.ndarray | None = field(default=None, repr=False, compare=False)


class ContextBuffer:
    """The last ``capacity`` loss contexts, oldest first. Immutable."""

    __slots__ = ("capacity", "entries")

    def __init__(self, capacity: int, entries: tuple[LossContext, ...] = ()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(entries) > capacity:
            raise ValueError("more entries than capacity")
        self.capacity = int(capacity)
        self.entries = tuple(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def latest(self) -> LossContext:
        return self.entries[-1]

    def push(self, ctx: LossContext) -> "ContextBuffer":
        if self.entries and ctx.step_index != self.entries[-1].step_index + 1:
            raise SequencingError(
                f"context step {ctx.step_index} does not follow {self.entries[-1].step_index}"
            )
        entries = self.entries + (ctx,)
        return ContextBuffer(self.capacity, entries[-self.capacity:])


def push_context(buffer: ContextBuffer, ctx: LossContext) -> ContextBuffer:
    return buffer.push(ctx)


class GradientBuffer:
    """The last ``capacity`` recorded gradients with exponential weights.

    Rows of ``grads`` are newest first, so row ``i`` carries weight
    ``alpha**i``. Immutable; :meth:`push` returns a new buffer.
    """

    __slots__ = ("capacity", "alpha", "grads", "last_step", "_pows")

    def __init__(self, capacity: int, alpha: float, grads: np.ndarray | None = None, last_step: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        self.capacity = int(capacity)
        self.alpha = float(alpha)
        self.grads = grads
        self.last_step = int(last_step)
        self._pows = self.alpha ** np.arange(self.capacity, dtype=np.float64)

    def __len__(self) -> int:
        return 0 if self.grads is None else self.grads.shape[0]

    @property
    def norm(self) -> float:
        """``W = sum_{i<capacity} alpha**i``, summed directly."""
        return float(self._pows.sum())

    def entries(self) -> list[tuple[int, np.ndarray]]:
        """``(step_index, gradient)`` pairs, newest first."""
        return [(self.last_step - i, self.grads[i]) for i in range(len(self))]

    def push(self, step_index: int, grad: np.ndarray) -> "GradientBuffer":
        if step_index < 1:
            raise SequencingError("steps before 1 are never stored")
        if len(self) and step_index != self.last_step + 1:
            raise SequencingError(f"gradient step {step_index} does not follow {self.last_step}")
        grad = np.asarray(grad, dtype=np.float64).reshape(-1)
        n = min(len(self) + 1, self.capacity)
        stacked = np.empty((n, grad.size))
        stacked[0] = grad
        if n > 1:
            stacked[1:] = self.grads[: n - 1]
        stacked.setflags(write=False)
        return GradientBuffer(self.capacity, self.alpha, stacked, step_index)

    def smoothed(self) -> np.ndarray:
        """``(1/W) * sum_i alpha**i g_{t-i}``; absent steps count as zero."""
        if self.grads is None:
            raise ValueError("empty gradient buffer")
        return (self._pows[: len(self)] @ self.grads) / self.norm


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, ParamVector) else np.asarray(x, dtype=np.float64)


def _wrap(x, data: np.ndarray):
    return x.with_data(data) if isinstance(x, ParamVector) else data


def _safe_grad(grad_fn: GradFn, x, ctx: LossContext, size: int) -> tuple[float, np.ndarray]:
    try:
        loss, g = grad_fn(x, ctx)
    except NumericError:
        return math.nan, np.full(size, np.nan)
    return float(loss), np.asarray(g, dtype=np.float64)


def _finish(x, data, direction, eta_t, t, evals, loss, own, start):
    new = data - eta_t * direction
    diverged = not (np.all(np.isfinite(direction)) and np.all(np.isfinite(new)))
    receipt = StepReceipt(
        step_index=t,
        eta_t=eta_t,
        grad_evals=evals,
        smoothed_grad_norm_sq=norm_sq(direction),
        wall_time=time.perf_counter() - start,
        diverged=diverged,
        loss=loss,
        own_grad=own,
    )
    return _wrap(x, new), receipt


def sgd_step(x, ctx: LossContext, eta_t: float, *, grad_fn: GradFn = loss_and_grad):
    """One plain SGD update. Returns ``(x_next, receipt)``."""
    start = time.perf_counter()
    data = _data(x)
    loss, g = _safe_grad(grad_fn, x, ctx, data.size)
    return _finish(x, data, g, eta_t, ctx.step_index, 1, loss, g, start)


def hts_step(x, buffer: ContextBuffer, eta_t: float, *, grad_fn: GradFn = loss_and_grad):
    """Window-averaged update; every buffered loss is differentiated at ``x``.

    The buffer must already hold the current step's context as its newest
    entry. The divisor is the buffer capacity even while it is filling.
    """
    if not len(buffer):
        raise ValueError("hts_step needs at least the current context in the buffer")
    start = time.perf_counter()
    data = _data(x)
    total = np.zeros(data.size)
    loss = math.nan
    own = None
    for ctx in reversed(buffer.entries):
        lo, g = _safe_grad(grad_fn, x, ctx, data.size)
        if own is None:
            loss, own = lo, g
        total = total + g
    direction = total / buffer.capacity
    return _finish(x, data, direction, eta_t, buffer.latest.step_index, len(buffer), loss, own, start)


def pts_step(x, ctx: LossContext, buffer: GradientBuffer, eta_t: float, *, grad_fn: GradFn = loss_and_grad):
    """Exponentially time-smoothed update. Returns ``(x_next, receipt, buffer_next)``.

    Only the new loss is differentiated; older gradients are reused at the
    iterates where they were recorded.
    """
    start = time.perf_counter()
    data = _data(x)
    loss, g = _safe_grad(grad_fn, x, ctx, data.size)
    buffer = buffer.push(ctx.step_index, g)
    x_next, receipt = _finish(x, data, buffer.smoothed(), eta_t, ctx.step_index, 1, loss, g, start)
    return x_next, receipt, buffer


class OnlineOptimizer:
    """Single-owner driver that keeps the step counter and method state.

    Contexts passed to :meth:`step` are renumbered with the optimizer's own
    1-based counter, which also drives the learning-rate schedule.
    """

    def __init__(self, config: OptimizerConfig, grad_fn: GradFn = loss_and_grad, eta_scale: float = 1.0):
        self.config = config
        self.grad_fn = grad_fn
        self.eta_scale = eta_scale
        self.t = 0
        self.contexts = ContextBuffer(config.window)
        self.gradients = GradientBuffer(config.window, config.alpha)

    def step(self, x, ctx: LossContext):
        self.t += 1
        if ctx.step_index != self.t:
            ctx = LossContext(ctx.features, ctx.targets, ctx.quantiles, self.t)
        cfg = self.config
        eta_t = self.eta_scale * lr_at(cfg.eta, self.t, cfg.schedule)
        if cfg.method == "sgd":
            return sgd_step(x, ctx, eta_t, grad_fn=self.grad_fn)
        if cfg.method == "hts":
            self.contexts = self.contexts.push(ctx)
            return hts_step(x, self.contexts, eta_t, grad_fn=self.grad_fn)
        x_next, receipt, self.gradients = pts_step(x, ctx, self.gradients, eta_t, grad_fn=self.grad_fn)
        return x_next, receipt
