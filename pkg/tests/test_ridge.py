import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from demzsl.data import SynthSpec, synth_generate
from demzsl.linalg import NotSPDError
from demzsl.ridge import (RidgeModel, fit_direction, fit_ridge, normal_equation_residual,
                          ridge_accuracy, ridge_objective, select_lambda, shrinkage_check,
                          shrinkage_ratio)


def test_identity_design():
    b = np.arange(6.0).reshape(2, 3)
    assert_allclose(fit_ridge(np.eye(3), b, 0.0).weight, b)
    assert_allclose(fit_ridge(np.eye(3), b, 1.0).weight, b / 2)


def test_matches_gradient_descent_oracle():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((10, 50))
    b = rng.standard_normal((20, 50))
    lam = 0.1
    model = fit_ridge(a, b, lam)
    # gradient descent with step 1/L on the strongly convex objective
    lip = 2 * (np.linalg.eigvalsh(a @ a.T).max() + lam)
    w = np.zeros((20, 10))
    for _ in range(5000):
        w -= (2 * ((w @ a - b) @ a.T + lam * w)) / lip
    gap = ridge_objective(w, a, b, lam) - ridge_objective(model.weight, a, b, lam)
    assert 0 <= gap < 1e-6


def test_singular_without_regularisation():
    a = np.ones((3, 5))
    with pytest.raises(NotSPDError):
        fit_ridge(a, np.ones((2, 5)), 0.0)
    with pytest.raises(ValueError):
        fit_ridge(a, np.ones((2, 4)), 1.0)
    with pytest.raises(ValueError):
        fit_ridge(a, np.ones((2, 5)), -1.0)


def test_shrinkage_examples():
    assert shrinkage_ratio(2.0 * np.eye(1), 1.0) == pytest.approx(0.8)
    assert shrinkage_ratio(np.random.default_rng(1).standard_normal((4, 9)), 0.0) == pytest.approx(1.0)
    # rank-deficient at lambda = 0 -> pseudo-limit
    assert shrinkage_ratio(np.ones((3, 5)), 0.0) == 1.0
    assert shrinkage_ratio(np.zeros((3, 5)), 1.0) == 0.0


def test_norm_nonincreasing_in_lambda():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((8, 40))
    b = rng.standard_normal((5, 40))
    norms = [shrinkage_check(fit_ridge(a, b, lam), a, b).norm_wa for lam in (0, 0.1, 1, 10)]
    assert all(x >= y - 1e-12 for x, y in zip(norms, norms[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 30),
       st.floats(1e-3, 1e3), st.integers(0, 2**31 - 1))
def test_normal_equations_and_bound(l, d, n, lam, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((l, n))
    b = rng.standard_normal((d, n))
    model = fit_ridge(a, b, lam)
    assert normal_equation_residual(model, a, b) <= 1e-8
    assert shrinkage_check(model, a, b).satisfied
    assert 0 <= shrinkage_ratio(a, lam) <= 1


def test_zsl_space_directions():
    w = np.array([[2.0]])
    from demzsl.data import PrototypeSet

    protos = PrototypeSet(np.array([0, 1]), {"attr": np.array([[1.0, 3.0]])})
    q, t = RidgeModel(w, "s2v", modality="attr").zsl_space(np.array([[5.0]]), protos)
    assert_allclose(q, [[5.0]]) and assert_allclose(t, [[2.0, 6.0]])
    q, t = RidgeModel(w, "v2s", modality="attr").zsl_space(np.array([[5.0]]), protos)
    assert_allclose(q, [[10.0]]) and assert_allclose(t, [[1.0, 3.0]])


def test_pipeline_on_synthetic_data():
    ds = synth_generate(SynthSpec(seed=0))
    lam, scores = select_lambda(ds, "s2v")
    assert scores.shape == (5,) and lam in (1e-3, 1e-2, 1e-1, 1.0, 10.0)
    model = fit_direction(ds, lam, "s2v")
    assert model.weight.shape == (ds.dim, 20)
    # well above the 10% chance level of 10 unseen classes
    assert ridge_accuracy(model, ds) > 0.2
