"""Timing of the compiled kernels against the pure-Python fallback."""
from __future__ import annotations

import time

from ._backend import available_backends
from .losses import QuantileSet
from .models import KINDS, LossContext, ModelSpec, init_params, loss_and_grad
from .numeric import Rng

__all__ = ["bench_kernels", "format_table"]


def _time_calls(fn, repeat: int) -> float:
    fn()  # warm-up
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - start) / repeat)
    return best


def bench_kernels(input_window: int = 24, horizons: int = 24, hidden_dim: int = 8, repeat: int = 50,
                  kinds=KINDS, seed: int = 0) -> list[dict]:
    """Seconds per ``loss_and_grad`` call for every kind and available backend.

    Uses the full 44-feature input and three quantiles, the shape of one
    training step in the harness.
    """
    rng = Rng(seed)
    qs = QuantileSet((0.1, 0.5, 0.9))
    backends = available_backends()
    results = []
    for kind in kinds:
        spec = ModelSpec(kind, input_window, 44, horizons, len(qs.quantiles), hidden_dim)
        params = init_params(spec, rng, 0.1)
        ctx = LossContext(rng.normal(input_window * 44).reshape(input_window, 44), rng.normal(horizons), qs, 1)
        row = {"kind": kind, "n_params": spec.n_params}
        for name, kern in backends.items():
            row[name] = _time_calls(lambda k=kern: loss_and_grad(params, ctx, kernels=k), repeat)
        if "cython" in row:
            row["speedup"] = row["python"] / row["cython"]
        results.append(row)
    return results


def format_table(results: list[dict]) -> str:
    lines = [f"{'kind':<8}{'params':>8}{'python us':>12}{'cython us':>12}{'speedup':>9}"]
    for r in results:
        cy = f"{r['cython'] * 1e6:12.1f}" if "cython" in r else f"{'n/a':>12}"
        sp = f"{r['speedup']:8.1f}x" if "speedup" in r else f"{'n/a':>9}"
        lines.append(f"{r['kind']:<8}{r['n_params']:>8}{r['python'] * 1e6:12.1f}{cy}{sp}")
    return "\n".join(lines)
