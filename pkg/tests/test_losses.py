import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothsgd.losses import (QuantileForecast, QuantileSet, mse_loss, quantile_loss, quantile_loss_subgrad,
                              total_quantile_loss)
from smoothsgd.numeric import DimensionError, Rng, finite_diff_grad

reals = st.floats(-100, 100, allow_nan=False)
levels = st.floats(0.01, 0.99)


@pytest.mark.parametrize("y, yh, q, expected", [(5, 5, 0.9, 0.0), (10, 8, 0.9, 1.8), (10, 13, 0.1, 2.7)])
def test_quantile_loss_examples(y, yh, q, expected):
    assert quantile_loss(y, yh, q) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("y, yh, q, expected", [(10, 8, 0.9, -0.9), (10, 13, 0.9, 0.1), (7, 7, 0.3, 0.0)])
def test_quantile_subgrad_examples(y, yh, q, expected):
    assert quantile_loss_subgrad(y, yh, q) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(q):
    with pytest.raises(ValueError):
        quantile_loss(1, 2, q)
    with pytest.raises(ValueError):
        quantile_loss_subgrad(1, 2, q)


def test_quantile_set_validation():
    with pytest.raises(ValueError):
        QuantileSet(())
    with pytest.raises(ValueError):
        QuantileSet((0.5, 0.1))
    with pytest.raises(ValueError):
        QuantileSet((0.1, 1.0))
    assert len(QuantileSet((0.1, 0.5, 0.9))) == 3


@given(reals, reals, reals, levels)
def test_convex_in_prediction(y, a, b, q):
    mid = quantile_loss(y, (a + b) / 2, q)
    assert mid <= (quantile_loss(y, a, q) + quantile_loss(y, b, q)) / 2 + 1e-12


@given(reals, levels, reals)
def test_nonnegative_zero_iff_equal(y, q, yh):
    v = quantile_loss(y, yh, q)
    assert v >= 0
    assert (v == 0) == (y == yh)


@given(reals, reals, levels)
def test_subgrad_matches_finite_difference(y, yh, q):
    if abs(y - yh) < 1e-3:
        yh = y + 1.0
    num = finite_diff_grad(lambda v: quantile_loss(y, v[0], q), [yh], 1e-5)[0]
    assert num == pytest.approx(quantile_loss_subgrad(y, yh, q), abs=1e-6)


def test_quantile_property_grid_oracle():
    rng = Rng(11)
    for q in (0.1, 0.5, 0.9):
        sample = rng.normal(51) * 3.0
        grid = np.linspace(sample.min(), sample.max(), 2001)
        risks = [np.mean([quantile_loss(y, g, q) for y in sample]) for g in grid]
        best = grid[int(np.argmin(risks))]
        # any minimiser has at least q of the mass at or below it, and 1-q at or above
        step = grid[1] - grid[0]
        lo, hi = np.sort(sample)[int(np.floor(q * 50))], np.sort(sample)[int(np.ceil(q * 50))]
        assert lo - step <= best <= hi + step


def _forecast(values, qs):
    return QuantileForecast(np.array(values, dtype=float), QuantileSet(qs))


def test_total_quantile_loss_examples():
    qs = (0.1, 0.5, 0.9)
    assert total_quantile_loss({1: 3.0, 2: 4.0}, _forecast([[3, 4]] * 3, qs)) == 0.0
    assert total_quantile_loss({1: 4.0}, _forecast([[6.0]], (0.5,))) == pytest.approx(1.0)


def test_total_quantile_loss_two_by_two_oracle():
    # term-by-term oracle: q*max(y-yh,0) + (1-q)*max(yh-y,0)
    terms = []
    for y in (10.0, 20.0):
        for q in (0.1, 0.9):
            yh = 15.0
            terms.append(q * max(y - yh, 0) + (1 - q) * max(yh - y, 0))
    oracle = sum(terms)
    assert oracle == pytest.approx(10.0)
    got = total_quantile_loss({1: 10.0, 2: 20.0}, _forecast([[15, 15], [15, 15]], (0.1, 0.9)))
    assert got == pytest.approx(oracle, rel=1e-12)


def test_total_quantile_loss_additive(nprng):
    qs = QuantileSet((0.05, 0.3, 0.7))
    y = nprng.normal(size=4)
    grid = nprng.normal(size=(3, 4))
    fc = QuantileForecast(grid, qs)
    manual = sum(quantile_loss(y[k - 1], fc[k, q], q) for k in range(1, 5) for q in qs)
    assert total_quantile_loss(y, fc, qs) == pytest.approx(manual, rel=1e-12)


def test_total_quantile_loss_horizon_mismatch():
    with pytest.raises(DimensionError):
        total_quantile_loss({1: 1.0, 3: 2.0}, _forecast([[1, 1]], (0.5,)))
    with pytest.raises(DimensionError):
        total_quantile_loss([1.0], _forecast([[1, 1]], (0.5,)))


def test_forecast_grid_shape():
    with pytest.raises(DimensionError):
        _forecast([[1, 2]], (0.1, 0.9))
    fc = _forecast([[1, 2], [3, 4]], (0.1, 0.9))
    assert fc[2, 0.9] == 4.0
    with pytest.raises(KeyError):
        fc[3, 0.1]


@pytest.mark.parametrize("y, yh, loss, grad", [(3, 3, 0, 0), (0, 2, 4, 4), (1, -1, 4, -4)])
def test_mse(y, yh, loss, grad):
    assert mse_loss(y, yh) == (loss, grad)
