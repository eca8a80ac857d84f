"""Local-regret metrics over a logged optimisation trajectory.

``hazan_regret`` averages, at each iterate ``x_t``, the gradients of the last
``w`` losses all re-evaluated at ``x_t``; it must call the gradient function
again. ``proposed_regret`` exponentially averages the gradients each loss had
at its own iterate, which are already in the log, so it never does.
Steps before 1 contribute zero in both.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .models import LossContext, loss_and_grad
from .numeric import NumericError

__all__ = [
    "RegretReport",
    "RegretSeries",
    "Trajectory",
    "TrajectoryRecord",
    "hazan_regret",
    "proposed_regret",
    "regret_report",
]


class TrajectoryRecord(NamedTuple):
    step_index: int
    params: object
    context: LossContext
    grad: np.ndarray


class Trajectory:
    """Ordered ``(t, x_t, f_t, grad f_t(x_t))`` records with ``t = 1, 2, ...``."""

    def __init__(self, records=()):
        self.records: list[TrajectoryRecord] = []
        for rec in records:
            self.append(*rec)

    def append(self, step_index: int, params, context: LossContext, grad) -> None:
        expected = len(self.records) + 1
        if step_index != expected:
            raise ValueError(f"trajectory step {step_index} out of order (expected {expected})")
        grad = np.asarray(grad, dtype=np.float64).reshape(-1)
        if self.records and grad.size != self.records[0].grad.size:
            raise ValueError("gradient length changed within a trajectory")
        self.records.append(TrajectoryRecord(step_index, params, context, grad))

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def prefix(self, n: int) -> "Trajectory":
        out = Trajectory()
        out.records = self.records[:n]
        return out


@dataclass(frozen=True)
class RegretSeries:
    total: float
    terms: np.ndarray
    grad_evals: int


@dataclass(frozen=True)
class RegretReport:
    T: int
    w: int
    alpha: float
    hazan_total: float
    proposed_total: float
    hazan_terms: np.ndarray
    proposed_terms: np.ndarray
    hazan_grad_evals: int

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "w": self.w,
            "alpha": self.alpha,
            "hazan_total": self.hazan_total,
            "proposed_total": self.proposed_total,
            "hazan_grad_evals": self.hazan_grad_evals,
            "hazan_terms": [float(v) for v in self.hazan_terms],
            "proposed_terms": [float(v) for v in self.proposed_terms],
        }


def _check_window(w: int) -> None:
    if w < 1:
        raise ValueError("window must be >= 1")


def hazan_regret(traj: Trajectory, w: int, grad_fn: Callable = loss_and_grad) -> RegretSeries:
    _check_window(w)
    recs = traj.records
    terms = np.zeros(len(recs))
    evals = 0
    for t in range(len(recs)):
        x = recs[t].params
        total = np.zeros(recs[t].grad.size)
        for i in range(min(w, t + 1)):
            try:
                _, g = grad_fn(x, recs[t - i].context)
            except NumericError:
                g = np.full(total.size, np.nan)
            evals += 1
            total = total + g
        avg = total / w
        terms[t] = float(np.dot(avg, avg))
    return RegretSeries(float(terms.sum()), terms, evals)


def proposed_regret(traj: Trajectory, w: int, alpha: float) -> RegretSeries:
    _check_window(w)
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    pows = alpha ** np.arange(w, dtype=np.float64)
    norm = float(pows.sum())
    recs = traj.records
    terms = np.zeros(len(recs))
    for t in range(len(recs)):
        total = np.zeros(recs[t].grad.size)
        for i in range(min(w, t + 1)):
            total = total + pows[i] * recs[t - i].grad
        avg = total / norm
        terms[t] = float(np.dot(avg, avg))
    return RegretSeries(float(terms.sum()), terms, 0)


def regret_report(traj: Trajectory, w: int, alpha: float, grad_fn: Callable = loss_and_grad) -> RegretReport:
    hr = hazan_regret(traj, w, grad_fn)
    pr = proposed_regret(traj, w, alpha)
    return RegretReport(len(traj), w, alpha, hr.total, pr.total, hr.terms, pr.terms, hr.grad_evals)
