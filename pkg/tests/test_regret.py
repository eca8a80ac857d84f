import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothsgd.losses import QuantileSet
from smoothsgd.models import LossContext, ModelSpec, init_params, loss_and_grad
from smoothsgd.numeric import Rng
from smoothsgd.optimizers import OnlineOptimizer, OptimizerConfig
from smoothsgd.regret import Trajectory, hazan_regret, proposed_regret, regret_report

QS = QuantileSet((0.5,))


def quad(x, ctx):
    d = np.asarray(x, dtype=float) - ctx.targets[0]
    return float(0.5 * d @ d), d


def toy_trajectory(cs, xs):
    traj = Trajectory()
    for t, (c, x) in enumerate(zip(cs, xs), start=1):
        ctx = LossContext(np.zeros((1, 1)), [c], QS, t)
        traj.append(t, np.array([x]), ctx, quad(np.array([x]), ctx)[1])
    return traj


def logged(grads):
    traj = Trajectory()
    for t, g in enumerate(grads, start=1):
        traj.append(t, np.zeros(len(g)), LossContext(np.zeros((1, 1)), [0.0], QS, t), g)
    return traj


def model_trajectory(seed, steps=12, method="pts"):
    rng = Rng(seed)
    spec = ModelSpec("linear", 2, 3, 2, 1)
    x = init_params(spec, rng, 0.3)
    opt = OnlineOptimizer(OptimizerConfig(method, 0.2, 3, 0.7))
    traj = Trajectory()
    for _ in range(steps):
        ctx = LossContext(rng.normal(6).reshape(2, 3), rng.normal(2), QS, 0)
        x_next, r = opt.step(x, ctx)
        traj.append(r.step_index, x, ctx, r.own_grad)
        x = x_next
    return traj


def test_hazan_hand_example():
    hr = hazan_regret(toy_trajectory([0.0, 2.0], [1.0, 1.0]), 2, quad)
    np.testing.assert_allclose(hr.terms, [0.25, 0.0], rtol=1e-9)
    assert hr.total == pytest.approx(0.25, rel=1e-9)
    assert hr.grad_evals == 1 + 2


def test_proposed_hand_example():
    pr = proposed_regret(logged([[2.0], [1.0]]), 2, 0.5)
    np.testing.assert_allclose(pr.terms, [(2 / 1.5) ** 2, (4 / 3) ** 2], rtol=1e-9)
    assert pr.total == pytest.approx(32 / 9, rel=1e-9)
    assert pr.grad_evals == 0


def test_zero_gradients_give_zero():
    assert proposed_regret(logged([[0.0, 0.0]] * 4), 3, 0.9).total == 0.0
    assert hazan_regret(toy_trajectory([1.0] * 3, [1.0] * 3), 2, quad).total == 0.0


def test_window_one_uses_logged_gradients():
    traj = model_trajectory(1)
    expected = sum(float(r.grad @ r.grad) for r in traj.records)
    assert hazan_regret(traj, 1).total == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_window_one_equality(seed):
    traj = model_trajectory(seed)
    for alpha in (0.3, 0.99, 1.0):
        hr, pr = hazan_regret(traj, 1), proposed_regret(traj, 1, alpha)
        np.testing.assert_array_equal(hr.terms, pr.terms)
        assert hr.total == pr.total


def test_eval_counts_and_report():
    traj = model_trajectory(2, steps=7)
    rep = regret_report(traj, 3, 0.8)
    assert rep.hazan_grad_evals == sum(min(3, t) for t in range(1, 8))
    assert rep.T == 7
    assert rep.hazan_total == pytest.approx(rep.hazan_terms.sum(), rel=1e-9)
    assert rep.proposed_total == pytest.approx(rep.proposed_terms.sum(), rel=1e-9)
    assert np.all(rep.hazan_terms >= 0) and np.all(rep.proposed_terms >= 0)
    d = rep.to_dict()
    assert len(d["hazan_terms"]) == 7


def test_prefix_property():
    traj = model_trajectory(3, steps=10)
    full = proposed_regret(traj, 4, 0.9)
    hfull = hazan_regret(traj, 4)
    for n in (1, 4, 9):
        np.testing.assert_array_equal(proposed_regret(traj.prefix(n), 4, 0.9).terms, full.terms[:n])
        np.testing.assert_array_equal(hazan_regret(traj.prefix(n), 4).terms, hfull.terms[:n])
    assert np.all(np.diff(np.cumsum(full.terms)) >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(-5, 5), st.integers(1, 6), st.floats(0.05, 1.0))
def test_scaling(seed, c, w, alpha):
    rng = Rng(seed)
    grads = rng.normal(15).reshape(5, 3)
    base = proposed_regret(logged(grads), w, alpha).total
    scaled = proposed_regret(logged(grads * c), w, alpha).total
    assert scaled == pytest.approx(c * c * base, rel=1e-9, abs=1e-300)


def test_domain_errors():
    traj = logged([[1.0]])
    with pytest.raises(ValueError):
        hazan_regret(traj, 0, quad)
    with pytest.raises(ValueError):
        proposed_regret(traj, 0, 0.5)
    with pytest.raises(ValueError):
        proposed_regret(traj, 1, 0.0)


def test_trajectory_ordering():
    traj = Trajectory()
    with pytest.raises(ValueError):
        traj.append(2, None, None, [1.0])
    traj.append(1, None, None, [1.0])
    with pytest.raises(ValueError):
        traj.append(2, None, None, [1.0, 2.0])
