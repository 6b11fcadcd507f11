import numpy as np
import pytest

from apps.nn_core.exceptions import LayoutError
from apps.nn_core.layout import ParamLayout, ParamVector, init_params
from apps.nn_core.network import (
    cross_entropy, elu, elu_grad, evaluate_accuracy, finite_diff_check, forward, loss_and_grad, predict,
)


def _batch(layout, n=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, layout.d_in))
    y = rng.integers(0, layout.n_classes, size=n)
    return X, y


def _reference_logits(layout, flat, x):
    # independent straight-line recomputation, one sample at a time
    a = list(x)
    offset = 0
    for index, (fan_in, fan_out) in enumerate(zip(layout.layer_sizes[:-1], layout.layer_sizes[1:])):
        W = flat[offset:offset + fan_in * fan_out]
        b = flat[offset + fan_in * fan_out:offset + fan_in * fan_out + fan_out]
        offset += fan_in * fan_out + fan_out
        out = []
        for j in range(fan_out):
            s = b[j] + sum(a[i] * W[i * fan_out + j] for i in range(fan_in))
            if index < len(layout.layer_sizes) - 2:
                s = s if s > 0 else np.exp(s) - 1.0
            out.append(s)
        a = out
    return np.array(a)


class TestForward:
    def test_zero_params_give_zero_logits(self):
        layout = ParamLayout.of([3, 4, 2])
        logits, _ = forward(ParamVector(layout, np.zeros(layout.total)), np.ones(3))
        assert np.array_equal(logits, np.zeros((1, 2)))

    def test_single_layer_is_linear(self):
        layout = ParamLayout.of([2, 2])
        params = ParamVector(layout, np.array([1.0, 0.0, 0.0, 1.0, 0.5, -0.5]))
        logits, _ = forward(params, np.array([2.0, 3.0]))
        assert logits.tolist() == [[2.5, 2.5]]

    def test_matches_straight_line_recomputation(self):
        layout = ParamLayout.of([4, 5, 3, 3])
        params = init_params(layout, seed=2)
        X, _ = _batch(layout, n=3, seed=4)
        logits, _ = forward(params, X)
        for row, x in zip(logits, X):
            assert np.allclose(row, _reference_logits(layout, params.data, x), atol=1e-12)

    def test_dimension_mismatch(self):
        layout = ParamLayout.of([3, 2])
        with pytest.raises(LayoutError):
            forward(init_params(layout, 0), np.ones(4))

    def test_head_override_replaces_last_layer(self):
        layout = ParamLayout.of([3, 4, 2])
        params = init_params(layout, seed=1)
        other = init_params(layout, seed=9)
        X, _ = _batch(layout)
        composed = params.copy()
        composed.head[:] = other.head
        assert np.array_equal(forward(params, X, head=other.head)[0], forward(composed, X)[0])


class TestLoss:
    def test_uniform_logits_give_log_classes(self):
        loss, _ = cross_entropy(np.zeros((4, 5)), np.array([0, 1, 2, 3]))
        assert loss == pytest.approx(np.log(5), abs=1e-12)

    def test_saturated_correct_prediction(self):
        loss, _ = cross_entropy(np.array([[50.0, -50.0]]), np.array([0]))
        assert loss < 1e-12

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((5, 4))
        y = rng.integers(0, 4, size=5)
        base, _ = cross_entropy(logits, y)
        shifted, _ = cross_entropy(logits + 123.0, y)
        assert abs(base - shifted) < 1e-12

    def test_empty_batch_rejected(self):
        layout = ParamLayout.of([2, 2])
        with pytest.raises(LayoutError):
            loss_and_grad(init_params(layout, 0), np.zeros((0, 2)), np.array([], dtype=int))

    @pytest.mark.parametrize('sizes', [[2, 2], [3, 4, 2], [5, 6, 4, 3], [4, 3, 3, 3, 2]])
    def test_gradient_matches_finite_differences(self, sizes):
        layout = ParamLayout.of(sizes)
        params = init_params(layout, seed=len(sizes))
        params.data[:] += np.random.default_rng(1).normal(0, 0.1, layout.total)
        X, y = _batch(layout, n=7, seed=5)
        assert finite_diff_check(params, X, y, h=1e-5) < 1e-6

    def test_head_gradient_is_with_respect_to_supplied_head(self):
        layout = ParamLayout.of([3, 4, 3])
        params = init_params(layout, seed=0)
        head = np.random.default_rng(2).standard_normal(layout.head_size)
        X, y = _batch(layout)
        _, grad = loss_and_grad(params, X, y, head=head)
        composed = params.copy()
        composed.head[:] = head
        _, expected = loss_and_grad(composed, X, y)
        assert np.allclose(grad, expected, atol=1e-14)


class TestElu:
    def test_derivative_is_continuous_at_zero(self):
        assert elu_grad(np.array([0.0]))[0] == 1.0
        assert elu_grad(np.array([-1e-12]))[0] == pytest.approx(1.0)

    def test_derivative_bounded_by_one(self):
        x = np.linspace(-20, 20, 401)
        assert (np.abs(elu_grad(x)) <= 1.0).all()

    def test_identity_on_positives(self):
        assert elu(np.array([0.5, 2.0])).tolist() == [0.5, 2.0]


def test_predict_and_accuracy():
    layout = ParamLayout.of([2, 2])
    params = ParamVector(layout, np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
    X = np.array([[2.0, 1.0], [0.0, 3.0]])
    assert predict(params, X).tolist() == [0, 1]
    assert evaluate_accuracy(params, X, np.array([0, 0])) == 0.5
