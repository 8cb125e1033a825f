import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from demzsl import nn
from demzsl.model import DemModel


def test_scaled_tanh_values():
    assert nn.scaled_tanh(0.0) == 0.0
    assert nn.scaled_tanh(1.5) == pytest.approx(1.7159 * np.tanh(1.0))
    assert abs(nn.scaled_tanh(100.0)) <= 1.7159


def test_activation_derivatives_match_differences():
    x = np.linspace(-3, 3, 13) + 0.05  # avoid the ReLU kink
    h = 1e-6
    for name in nn.ACTIVATIONS:
        out = nn.activate(name, x)
        analytic = nn.activation_grad(name, x, out, np.ones_like(x))
        numeric = (nn.activate(name, x + h) - nn.activate(name, x - h)) / (2 * h)
        assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8, err_msg=name)


def test_relu_subgradient_at_zero_is_zero():
    assert nn.activation_grad("relu", np.zeros(3), np.zeros(3), np.ones(3)).sum() == 0.0


def test_dense_layer_forward_backward():
    rng = np.random.default_rng(0)
    layer = nn.DenseLayer(rng.standard_normal((3, 4)), rng.standard_normal(3), "scaled_tanh")
    x = rng.standard_normal((4, 5))
    out, cache = layer.forward(x)
    assert_allclose(out, nn.scaled_tanh(layer.weight @ x + layer.bias[:, None]))
    dx, dw, db = layer.backward(cache, np.ones_like(out))
    assert dx.shape == x.shape and dw.shape == layer.weight.shape and db.shape == (3,)
    with pytest.raises(ValueError):
        layer.forward(np.ones((5, 1)))
    with pytest.raises(ValueError):
        nn.DenseLayer(np.ones((2, 2)), np.ones(3))
    with pytest.raises(ValueError):
        nn.DenseLayer(np.ones((2, 2)), activation="softmax")


def test_embedding_loss_closed_form():
    emb = np.array([[1.0, 0.0], [0.0, 2.0]])
    vis = np.array([[0.0, 0.0], [0.0, 0.0]])
    w = np.array([[1.0, 2.0]])
    # (1 + 4) / 2 + 0.5 * (1 + 4)
    assert nn.embedding_loss(emb, vis, [w], lam=0.5) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        nn.embedding_loss(emb, vis[:, :1])
    with pytest.raises(ValueError):
        nn.embedding_loss(emb, vis, lam=-1.0)


def hinge_loop(protos, visual, labels, margin):
    total = 0.0
    for i in range(visual.shape[1]):
        d_true = np.sum((visual[:, i] - protos[:, labels[i]]) ** 2)
        for c in range(protos.shape[1]):
            if c != labels[i]:
                d = np.sum((visual[:, i] - protos[:, c]) ** 2)
                total += max(0.0, margin + d_true - d)
    return total / visual.shape[1]


def test_hinge_loss_matches_loop_oracle():
    rng = np.random.default_rng(2)
    protos = rng.standard_normal((4, 5))
    visual = rng.standard_normal((4, 9))
    labels = rng.integers(0, 5, 9)
    assert nn.hinge_ranking_loss(protos, visual, labels, 0.3) == pytest.approx(
        hinge_loop(protos, visual, labels, 0.3), rel=1e-12
    )


def test_hinge_loss_zero_when_well_separated():
    protos = np.array([[0.0, 10.0], [0.0, 10.0]])
    visual = np.array([[0.1, 9.9], [0.0, 10.0]])
    assert nn.hinge_ranking_loss(protos, visual, np.array([0, 1])) == 0.0


def test_hinge_input_errors():
    with pytest.raises(ValueError):
        nn.hinge_ranking_loss(np.ones((2, 2)), np.ones((2, 3)), np.array([0, 1]))
    with pytest.raises(ValueError):
        nn.hinge_ranking_loss(np.ones((2, 2)), np.ones((2, 1)), np.array([2]))
    with pytest.raises(ValueError):
        nn.hinge_ranking_loss(np.ones((2, 2)), np.ones((2, 1)), np.array([0]), margin=0.0)


def test_hinge_gradients_numerically():
    rng = np.random.default_rng(4)
    protos = rng.standard_normal((3, 4))
    visual = rng.standard_normal((3, 6))
    labels = rng.integers(0, 4, 6)
    d_p, d_v = nn.hinge_ranking_loss_grads(protos, visual, labels, 0.5)
    h = 1e-6
    for arr, grad in ((protos, d_p), (visual, d_v)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = nn.hinge_ranking_loss(protos, visual, labels, 0.5)
            arr[idx] = old - h
            down = nn.hinge_ranking_loss(protos, visual, labels, 0.5)
            arr[idx] = old
            assert grad[idx] == pytest.approx((up - down) / (2 * h), abs=1e-6)


@pytest.mark.parametrize("loss", ["ls", "hinge"])
@pytest.mark.parametrize("variant", ["single", "fused", "one-layer", "bias"])
def test_model_gradients(loss, variant):
    rng = np.random.default_rng(7)
    dims = {"attribute": 5, "wordvec": 4} if variant == "fused" else {"attribute": 5}
    model = DemModel.create(dims, 6, hidden=7, layers=1 if variant == "one-layer" else 2,
                            bias=variant == "bias", output_activation="identity", seed=3)
    if loss == "ls":
        inputs = {m: rng.standard_normal((l, 8)) for m, l in dims.items()}
        err = nn.grad_check(model, inputs, rng.standard_normal((6, 8)), "ls", lam=0.01)
    else:
        inputs = {m: rng.standard_normal((l, 3)) for m, l in dims.items()}
        err = nn.grad_check(model, inputs, rng.standard_normal((6, 10)), "hinge", lam=0.01,
                            labels=rng.integers(0, 3, 10), margin=0.5)
    assert err < 1e-4


def test_objective_unknown_loss():
    model = DemModel.create({"a": 2}, 2, hidden=2, output_activation="identity")
    with pytest.raises(ValueError):
        nn.objective(model, {"a": np.ones((2, 1))}, np.ones((2, 1)), loss="l1")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_least_square_gradient_is_scaled_residual(seed, n):
    rng = np.random.default_rng(seed)
    emb, vis = rng.standard_normal((2, 3, n))
    assert_allclose(nn.embedding_loss_grad(emb, vis), 2.0 * (emb - vis) / n)
