import numpy as np
import pytest

from news_metapath.errors import ConfigurationError, DimensionError
from news_metapath.model.encoders import (
    conve_feature_size,
    conve_stack,
    encode_conve,
    encode_conve_backward,
    encode_rotate,
    encode_rotate_backward,
    encode_transe,
    encode_transe_backward,
)
from news_metapath.model.params import ParamStore

from conftest import check_gradients


@pytest.fixture
def triple():
    rng = np.random.default_rng(0)
    return rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), rng.normal(size=4)


def test_transe_closed_form(triple):
    h_u, h_w, r = triple

    out = encode_transe(h_u, h_w, r)

    np.testing.assert_allclose(out, (h_u + h_w - r) / 2.0, rtol=1e-14)
    np.testing.assert_allclose(
        encode_transe(h_u[0], h_w[0], np.zeros(4)), (h_u[0] + h_w[0]) / 2.0
    )


def test_rotate_closed_form(triple):
    h_u, h_w, r = triple

    out = encode_rotate(h_u, h_w, r)

    np.testing.assert_allclose(out, -(h_u * r * r + h_w * r) / 2.0, rtol=1e-12)
    assert np.array_equal(encode_rotate(h_u, h_w, np.zeros(4)), np.zeros((3, 4)))


def test_encoders_reject_mismatched_inputs():
    with pytest.raises(DimensionError):
        encode_transe(np.zeros(4), np.zeros(3), np.zeros(4))
    with pytest.raises(DimensionError):
        encode_rotate(np.zeros(4), np.zeros(4), np.zeros(5))


def test_conve_stack_layout():
    # Arrange
    h_u = np.arange(4.0)
    h_w = np.arange(4.0) + 10
    r = np.arange(4.0) + 20

    # Act
    stacked = conve_stack(h_u, h_w, r, rows=2)

    # Assert
    assert stacked.shape == (8, 2)
    assert stacked[:2].tolist() == [[0, 1], [2, 3]]
    assert stacked[2:4].tolist() == [[20, 21], [22, 23]]
    assert stacked[4:6].tolist() == [[10, 11], [12, 13]]
    assert stacked[6:].tolist() == [[-20, -21], [-22, -23]]


def test_conve_stack_rows_must_divide_dimension():
    with pytest.raises(ConfigurationError):
        conve_stack(np.zeros(5), np.zeros(5), np.zeros(5), rows=2)


def test_conve_output_shape(triple):
    h_u, h_w, r = triple
    rng = np.random.default_rng(1)
    size = conve_feature_size(4, rows=2, channels=3, kernel=2)
    kernels = rng.normal(size=(3, 2, 2))
    W_proj = rng.normal(size=(4, size))

    out, cache = encode_conve(h_u, h_w, r, kernels, W_proj, np.zeros(4), rows=2)

    assert size == 3 * 7 * 1
    assert out.shape == (3, 4)
    assert cache.stacked.shape == (3, 8, 2)


def test_conve_rejects_wrong_projection(triple):
    h_u, h_w, r = triple

    with pytest.raises(DimensionError):
        encode_conve(h_u, h_w, r, np.ones((3, 2, 2)), np.ones((4, 5)), np.zeros(4), 2)


def _encoder_store(rng, batch):
    store = ParamStore()
    shape = (batch, 4) if batch else (4,)
    store.add("h_u", rng.normal(size=shape))
    store.add("h_w", rng.normal(size=shape))
    store.add("r", rng.normal(size=4))
    return store


@pytest.mark.parametrize("batch", [0, 3])
def test_transe_backward_passes_grad_check(batch):
    rng = np.random.default_rng(2)
    store = _encoder_store(rng, batch)
    g = rng.normal(size=store["h_u"].shape)

    def loss_and_grads(p):
        out = encode_transe(p["h_u"], p["h_w"], p["r"])
        dh_u, dh_w, dr = encode_transe_backward(g)
        return float(np.sum(g * out)), {"h_u": dh_u, "h_w": dh_w, "r": dr}

    assert check_gradients(store, loss_and_grads) < 1e-6


@pytest.mark.parametrize("batch", [0, 3])
def test_rotate_backward_passes_grad_check(batch):
    rng = np.random.default_rng(3)
    store = _encoder_store(rng, batch)
    g = rng.normal(size=store["h_u"].shape)

    def loss_and_grads(p):
        out = encode_rotate(p["h_u"], p["h_w"], p["r"])
        dh_u, dh_w, dr = encode_rotate_backward(g, p["h_u"], p["h_w"], p["r"])
        return float(np.sum(g * out)), {"h_u": dh_u, "h_w": dh_w, "r": dr}

    assert check_gradients(store, loss_and_grads) < 1e-6


@pytest.mark.parametrize("batch", [0, 3])
def test_conve_backward_passes_grad_check(batch):
    # Arrange
    rng = np.random.default_rng(4)
    store = _encoder_store(rng, batch)
    size = conve_feature_size(4, rows=2, channels=2, kernel=2)
    store.add("kernels", rng.normal(size=(2, 2, 2)))
    store.add("W_proj", rng.normal(size=(4, size)))
    store.add("b_proj", rng.normal(size=4))
    g = rng.normal(size=store["h_u"].shape)

    def loss_and_grads(p):
        out, cache = encode_conve(
            p["h_u"], p["h_w"], p["r"], p["kernels"], p["W_proj"], p["b_proj"], 2
        )
        dh_u, dh_w, dr, grads = encode_conve_backward(
            g, cache, p["kernels"], p["W_proj"], 2
        )
        return float(np.sum(g * out)), {"h_u": dh_u, "h_w": dh_w, "r": dr, **grads}

    # Act / Assert
    assert check_gradients(store, loss_and_grads) < 1e-5
