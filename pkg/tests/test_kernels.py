"""The compiled kernels and the pure-Python fallback compute the same thing."""
import numpy as np
import pytest

from smoothsgd import _backend, _kernels_py
from smoothsgd.losses import QuantileSet
from smoothsgd.models import LossContext, ModelSpec, forward, init_params, loss_and_grad
from smoothsgd.numeric import Rng

pytestmark = pytest.mark.skipif("cython" not in _backend.available_backends(),
                                reason="compiled kernels not built")

CASES = [("linear", 3, 5, 4, 3, 1), ("mlp", 4, 6, 3, 2, 7), ("lstm", 5, 4, 2, 3, 6), ("lstm", 1, 44, 1, 1, 1)]


@pytest.mark.parametrize("kind, L, F, H, Q, hidden", CASES)
@pytest.mark.parametrize("seed", range(3))
def test_backends_agree(kind, L, F, H, Q, hidden, seed):
    rng = Rng(seed)
    spec = ModelSpec(kind, L, F, H, Q, hidden)
    qs = QuantileSet(tuple(np.linspace(0, 1, Q + 2)[1:-1]))
    params = init_params(spec, rng, 0.7)
    ctx = LossContext(rng.normal(L * F).reshape(L, F), rng.normal(H), qs, 1)
    cy, py = _backend.available_backends()["cython"], _kernels_py
    np.testing.assert_allclose(forward(params, ctx, kernels=cy).values,
                               forward(params, ctx, kernels=py).values, rtol=1e-12, atol=1e-13)
    l1, g1 = loss_and_grad(params, ctx, kernels=cy)
    l2, g2 = loss_and_grad(params, ctx, kernels=py)
    assert l1 == pytest.approx(l2, rel=1e-12, abs=1e-13)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-12)


def test_backend_selection_names():
    assert _backend.BACKEND in ("cython", "python")
    assert _backend.kernels.BACKEND == _backend.BACKEND
    assert set(_backend.available_backends()) == {"python", "cython"}


def test_env_override_selects_fallback(monkeypatch):
    import importlib

    monkeypatch.setenv("SMOOTHSGD_BACKEND", "python")
    try:
        mod = importlib.reload(_backend)
        assert mod.BACKEND == "python" and mod.kernels is _kernels_py
    finally:
        monkeypatch.delenv("SMOOTHSGD_BACKEND")
        importlib.reload(_backend)
