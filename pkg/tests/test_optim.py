import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from demzsl.optim import (SGD, Adam, RMSprop, adam_step, clip_gradients, global_norm,
                          make_optimizer, rmsprop_step)


def scalar_adam(g_seq, lr=0.1, b1=0.9, b2=0.999, eps=1e-8):
    p, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate(g_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return p


def scalar_rmsprop(g_seq, lr=0.1, decay=0.9, eps=1e-8):
    p, s = 1.0, 0.0
    for g in g_seq:
        s = decay * s + (1 - decay) * g * g
        p -= lr * g / (np.sqrt(s) + eps)
    return p


@pytest.mark.parametrize("cls,oracle", [(Adam, scalar_adam), (RMSprop, scalar_rmsprop)])
def test_matches_scalar_recurrence(cls, oracle):
    gs = [0.5, -1.0, 2.0, 0.25, -0.1]
    opt = cls(lr=0.1)
    params = {"w": np.array([1.0])}
    for g in gs:
        opt.step(params, {"w": np.array([g])})
    assert params["w"][0] == pytest.approx(oracle(gs), rel=1e-12)


def test_first_adam_step_moves_by_lr():
    params = {"w": np.array([0.0, 0.0])}
    Adam(lr=0.01).step(params, {"w": np.array([3.0, -0.2])})
    assert_allclose(params["w"], [-0.01, 0.01], rtol=1e-6)


def test_sgd_and_functional_wrappers():
    params = {"w": np.ones(2)}
    SGD(lr=0.5).step(params, {"w": np.array([1.0, 2.0])})
    assert_allclose(params["w"], [0.5, 0.0])
    p2, state = adam_step(Adam(), {"w": np.zeros(1)}, {"w": np.ones(1)})
    assert state.t == 1 and p2["w"][0] < 0
    p3, state = rmsprop_step(RMSprop(), {"w": np.zeros(1)}, {"w": np.ones(1)})
    assert state.t == 1 and p3["w"][0] < 0


def test_clipping():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped = clip_gradients(g, 1.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    assert_allclose(clipped["a"] / clipped["b"], 0.75)
    assert clip_gradients(g, 10.0) is g
    with pytest.raises(ValueError):
        clip_gradients(g, 0.0)


def test_clip_norm_applied_inside_step():
    params = {"w": np.zeros(1)}
    SGD(lr=1.0, clip_norm=5.0).step(params, {"w": np.array([50.0])})
    assert params["w"][0] == pytest.approx(-5.0)


def test_shape_and_name_checks():
    opt = Adam()
    with pytest.raises(ValueError):
        opt.step({"w": np.zeros(2)}, {"w": np.zeros(3)})
    with pytest.raises(ValueError):
        opt.step({"w": np.zeros(2)}, {"v": np.zeros(2)})
    opt.step({"w": np.zeros(2)}, {"w": np.ones(2)})
    with pytest.raises(ValueError):
        opt.step({"w": np.zeros(3)}, {"w": np.ones(3)})


def test_make_optimizer():
    assert isinstance(make_optimizer("rmsprop", 0.1, 5.0), RMSprop)
    assert make_optimizer("adam").lr == 1e-4
    with pytest.raises(ValueError):
        make_optimizer("adagrad")
    with pytest.raises(ValueError):
        Adam(lr=0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_clipped_norm_never_exceeds_bound(values, bound):
    g = {"w": np.array(values)}
    assert global_norm(clip_gradients(g, bound)) <= bound * (1 + 1e-12)
