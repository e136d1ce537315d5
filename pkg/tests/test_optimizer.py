import numpy as np
import pytest

from usseg.errors import ArgumentError
from usseg.services.optimizer import Adam, AdamState, adam_step


def test_zero_gradient_leaves_params():
    params = np.array([1.0, -2.0, 3.0])
    new, state = adam_step(AdamState.zeros(3), params, np.zeros(3), lr=0.1)
    np.testing.assert_array_equal(new, params)
    assert state.t == 1


def test_first_step_moves_by_lr_against_sign():
    params = np.zeros(4)
    grads = np.array([3.0, -0.01, 250.0, -7.0])
    new, _ = adam_step(AdamState.zeros(4), params, grads, lr=1e-3)
    np.testing.assert_allclose(new, -1e-3 * np.sign(grads), rtol=1e-5)


def test_descends_quadratic():
    opt = Adam(2, lr=0.1)
    theta = np.array([1.0, -1.5])
    start = float(theta @ theta)
    for _ in range(50):
        theta = opt.step(theta, 2 * theta)
    assert float(theta @ theta) < start
    assert opt.state.t == 50


def test_mismatched_dimensions_raise():
    with pytest.raises(ArgumentError):
        adam_step(AdamState.zeros(3), np.zeros(3), np.zeros(2), lr=0.1)
    with pytest.raises(ArgumentError):
        adam_step(AdamState.zeros(2), np.zeros(3), np.zeros(3), lr=0.1)


def test_step_does_not_mutate_inputs():
    state = AdamState.zeros(2)
    params = np.array([1.0, 2.0])
    grads = np.array([0.5, -0.5])
    adam_step(state, params, grads, lr=0.1)
    np.testing.assert_array_equal(params, [1.0, 2.0])
    np.testing.assert_array_equal(state.m, 0.0)
    assert state.t == 0


def test_class_matches_function(rng):
    grads = [rng.standard_normal(5) for _ in range(3)]
    opt = Adam(5, lr=0.01)
    params_a = params_b = np.ones(5)
    state = AdamState.zeros(5)
    for g in grads:
        params_a = opt.step(params_a, g)
        params_b, state = adam_step(state, params_b, g, lr=0.01)
    np.testing.assert_array_equal(params_a, params_b)
