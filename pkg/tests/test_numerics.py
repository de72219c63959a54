import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from news_metapath.errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    EvaluationError,
    PreconditionError,
)
from news_metapath.model.numerics import (
    Activation,
    GRUParams,
    activation,
    activation_backward,
    affine,
    affine_backward,
    as_tensor,
    conv2d,
    conv2d_backward,
    grad_check,
    gru_cell,
    gru_cell_backward,
    softmax,
    softmax_backward,
)
from news_metapath.model.params import ParamStore

from conftest import check_gradients

finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


def away_from_zero(rng, shape):
    x = rng.normal(size=shape)
    return x + np.sign(x) * 0.1


def test_affine_identity_and_matmul():
    # Arrange
    rng = np.random.default_rng(0)
    W = rng.normal(size=(3, 4))
    x = rng.normal(size=4)
    b = rng.normal(size=3)

    # Act / Assert
    assert np.array_equal(affine(np.eye(4), x), x)
    assert np.array_equal(affine(np.zeros((3, 4)), x), np.zeros(3))
    np.testing.assert_allclose(affine(W, x, b), W @ x + b, rtol=1e-14)


def test_affine_batches_rows():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(2, 3))
    X = rng.normal(size=(5, 3))

    out = affine(W, X)

    assert out.shape == (5, 2)
    np.testing.assert_allclose(out[3], W @ X[3], rtol=1e-14)


def test_affine_dimension_mismatch():
    with pytest.raises(DimensionError, match=r"\(3, 4\).*\(5,\)"):
        affine(np.zeros((3, 4)), np.zeros(5))


def test_as_tensor_rejects_non_finite_and_wrong_shape():
    with pytest.raises(DomainError):
        as_tensor([1.0, np.nan])
    with pytest.raises(DimensionError):
        as_tensor([1.0, 2.0], shape=(3,))


@given(arrays(np.float64, st.integers(1, 12), elements=finite))
def test_softmax_is_probability_vector(v):
    y = softmax(v)

    assert np.all(y >= 0)
    assert abs(y.sum() - 1.0) < 1e-9


@given(arrays(np.float64, st.integers(1, 8), elements=finite), finite)
def test_softmax_shift_invariance(v, c):
    np.testing.assert_allclose(softmax(v + c), softmax(v), atol=1e-12)


def test_softmax_examples_and_empty():
    np.testing.assert_allclose(softmax(np.zeros(4)), np.full(4, 0.25))
    assert softmax(np.array([1000.0, 0.0]))[0] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        softmax(np.array([]))


def test_activation_values():
    x = np.array([-2.0, 0.0, 3.0])

    assert np.allclose(activation(Activation.LEAKY_RELU, x), [-0.02, 0.0, 3.0])
    assert np.allclose(activation("tanh", x), np.tanh(x))
    assert activation(Activation.SIGMOID, np.array([0.0]))[0] == 0.5
    assert np.isfinite(activation(Activation.SIGMOID, np.array([-800.0, 800.0]))).all()


def test_activation_unknown_kind():
    with pytest.raises(ConfigurationError):
        activation("relu6", np.zeros(2))


def test_affine_backward_passes_grad_check():
    # Arrange
    rng = np.random.default_rng(2)
    store = ParamStore()
    store.add("W", rng.normal(size=(3, 4)))
    store.add("x", rng.normal(size=(2, 4)))
    store.add("b", rng.normal(size=3))
    c = rng.normal(size=(2, 3))

    def loss_and_grads(p):
        out = affine(p["W"], p["x"], p["b"])
        dW, dx, db = affine_backward(c, p["W"], p["x"])
        return float(np.sum(c * out)), {"W": dW, "x": dx, "b": db}

    # Act / Assert
    assert check_gradients(store, loss_and_grads) < 1e-5


def test_softmax_backward_passes_grad_check():
    rng = np.random.default_rng(3)
    store = ParamStore()
    store.add("v", rng.normal(size=(2, 5)))
    c = rng.normal(size=(2, 5))

    def loss_and_grads(p):
        y = softmax(p["v"])
        return float(np.sum(c * y)), {"v": softmax_backward(c, y)}

    assert check_gradients(store, loss_and_grads) < 1e-5


@pytest.mark.parametrize("kind", list(Activation))
def test_activation_backward_passes_grad_check(kind):
    rng = np.random.default_rng(4)
    store = ParamStore()
    store.add("x", away_from_zero(rng, (3, 4)))
    c = rng.normal(size=(3, 4))

    def loss_and_grads(p):
        y = activation(kind, p["x"])
        return float(np.sum(c * y)), {"x": activation_backward(kind, c, p["x"], y)}

    assert check_gradients(store, loss_and_grads) < 1e-5


def _random_gru(rng, d):
    return GRUParams(
        **{
            name: rng.normal(scale=0.5, size=d if name.startswith("b") else (d, d))
            for name in GRUParams.names()
        }
    )


def test_gru_cell_backward_passes_grad_check():
    # Arrange
    rng = np.random.default_rng(5)
    d = 3
    store = ParamStore()
    for name, value in vars(_random_gru(rng, d)).items():
        store.add(name, value)
    store.add("x", rng.normal(size=d))
    store.add("h", rng.normal(size=d))
    c = rng.normal(size=d)

    def loss_and_grads(p):
        params = GRUParams(**{name: p[name] for name in GRUParams.names()})
        h, cache = gru_cell(p["x"], p["h"], params)
        grads, dx, dh = gru_cell_backward(c, cache, params)
        return float(c @ h), {**grads, "x": dx, "h": dh}

    # Act / Assert
    assert check_gradients(store, loss_and_grads) < 1e-5


def test_gru_zero_parameters_keep_zero_state():
    params = GRUParams.zeros(4)

    h, _ = gru_cell(np.ones(4), np.zeros(4), params)

    assert np.array_equal(h, np.zeros(4))
    assert GRUParams.names() == [
        "W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h"
    ]


def test_gru_cell_shape_mismatch():
    with pytest.raises(DimensionError):
        gru_cell(np.zeros(3), np.zeros(4), GRUParams.zeros(4))


def test_conv2d_matches_naive_loop():
    # Arrange
    rng = np.random.default_rng(6)
    image = rng.normal(size=(2, 5, 4))
    kernels = rng.normal(size=(3, 2, 2))
    expected = np.zeros((2, 3, 4, 3))
    for n in range(2):
        for c in range(3):
            for i in range(4):
                for j in range(3):
                    window = image[n, i : i + 2, j : j + 2]
                    expected[n, c, i, j] = np.sum(window * kernels[c])

    # Act
    out = conv2d(image, kernels)

    # Assert
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)


def test_conv2d_kernel_larger_than_input():
    with pytest.raises(DimensionError):
        conv2d(np.zeros((2, 2)), np.zeros((1, 3, 3)))


def test_conv2d_backward_passes_grad_check():
    rng = np.random.default_rng(7)
    store = ParamStore()
    store.add("image", rng.normal(size=(2, 5, 4)))
    store.add("kernels", rng.normal(size=(3, 2, 2)))
    c = rng.normal(size=(2, 3, 4, 3))

    def loss_and_grads(p):
        out = conv2d(p["image"], p["kernels"])
        d_image, d_kernels = conv2d_backward(c, p["image"], p["kernels"])
        return float(np.sum(c * out)), {"image": d_image, "kernels": d_kernels}

    assert check_gradients(store, loss_and_grads) < 1e-5


def test_grad_check_detects_wrong_gradient():
    store = ParamStore()
    store.add("w", np.array([1.0, 2.0]))

    def f(params):
        params.accumulate("w", 3.0 * params["w"])
        return float(np.sum(params["w"] ** 2))

    assert grad_check(f, store) > 0.1


def test_grad_check_preconditions():
    store = ParamStore()
    store.add("w", np.zeros(2))

    with pytest.raises(PreconditionError):
        grad_check(lambda p: 0.0, store, eps=0.1)
    with pytest.raises(EvaluationError):
        grad_check(lambda p: float("nan"), store)


@settings(max_examples=25)
@given(st.integers(1, 6), st.integers(1, 4))
def test_conv2d_output_shape(extra, channels):
    image = np.zeros((3, 2 + extra, 3 + extra))

    out = conv2d(image, np.zeros((channels, 2, 3)))

    assert out.shape == (3, channels, 1 + extra, 1 + extra)
