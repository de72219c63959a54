"""
Плотная арифметика float64 и дифференцируемые примитивы с ручными производными
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, fields
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    EvaluationError,
    PreconditionError,
)
from ..seeding import make_rng

if TYPE_CHECKING:
    from .params import ParamStore

Tensor = np.ndarray
"""Плотный тензор float64 в построчном порядке"""

LEAKY_SLOPE = 0.01


class Activation(StrEnum):
    """Поэлементные нелинейности"""

    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"


def as_tensor(values, shape: tuple[int, ...] | None = None) -> Tensor:
    """
    Приведение к тензору float64 с проверкой формы и конечности

    Args:
        values: Массивоподобные данные
        shape: Ожидаемая форма

    Returns:
        Массив float64
    """
    tensor = np.asarray(values, dtype=np.float64)
    if shape is not None and tensor.shape != tuple(shape):
        raise DimensionError(f"expected shape {tuple(shape)}, got {tensor.shape}")
    if not np.all(np.isfinite(tensor)):
        raise DomainError("tensor contains non-finite entries")
    return tensor


def affine(W: Tensor, x: Tensor, b: Tensor | None = None) -> Tensor:
    """
    Аффинное отображение W·x (+ b)

    x может быть вектором (n,) или пачкой строк (N, n).
    """
    if W.ndim != 2 or x.shape[-1] != W.shape[1]:
        raise DimensionError(
            f"cannot multiply W of shape {W.shape} by x of shape {x.shape}"
        )
    out = x @ W.T
    if b is not None:
        if b.shape != (W.shape[0],):
            raise DimensionError(
                f"bias of shape {b.shape} does not match W of shape {W.shape}"
            )
        out = out + b
    return out


def affine_backward(
    g: Tensor, W: Tensor, x: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Производные аффинного отображения

    Returns:
        (dW, dx, db) при dW = g·xᵀ, dx = Wᵀ·g, db = g (суммируются по пачке)
    """
    if x.ndim == 1:
        return np.outer(g, x), W.T @ g, g.copy()
    return g.T @ x, g @ W, g.sum(axis=0)


def softmax(v: Tensor) -> Tensor:
    """Softmax по последней оси с вычитанием максимума"""
    if v.size == 0 or v.shape[-1] == 0:
        raise DomainError("softmax of an empty vector is undefined")
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_backward(g: Tensor, y: Tensor) -> Tensor:
    """Производная softmax по входу при выходе y"""
    return y * (g - np.sum(g * y, axis=-1, keepdims=True))


def _sigmoid(x: Tensor) -> Tensor:
    return expit(np.asarray(x, dtype=np.float64))


def activation(kind: Activation | str, x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    """
    Поэлементная нелинейность

    Args:
        kind: leaky_relu, tanh или sigmoid
        x: Вход
        slope: Наклон LeakyReLU

    Returns:
        Тензор той же формы
    """
    kind = _activation_kind(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.LEAKY_RELU:
        return np.where(x > 0, x, slope * x)
    if kind is Activation.TANH:
        return np.tanh(x)
    return _sigmoid(x)


def activation_backward(
    kind: Activation | str, g: Tensor, x: Tensor, y: Tensor, slope: float = LEAKY_SLOPE
) -> Tensor:
    """Производная нелинейности при входе x и выходе y"""
    kind = _activation_kind(kind)
    if kind is Activation.LEAKY_RELU:
        return g * np.where(x > 0, 1.0, slope)
    if kind is Activation.TANH:
        return g * (1.0 - y * y)
    return g * y * (1.0 - y)


def _activation_kind(kind: Activation | str) -> Activation:
    try:
        return Activation(kind)
    except ValueError as e:
        raise ConfigurationError(f"unknown activation: {kind!r}") from e


@dataclass
class GRUParams:
    """Веса ячейки GRU (скрытая размерность d)"""

    W_z: Tensor
    U_z: Tensor
    b_z: Tensor
    W_r: Tensor
    U_r: Tensor
    b_r: Tensor
    W_h: Tensor
    U_h: Tensor
    b_h: Tensor

    @classmethod
    def names(cls) -> list[str]:
        """Имена девяти тензоров в фиксированном порядке"""
        return [f.name for f in fields(cls)]

    @classmethod
    def zeros(cls, d: int) -> GRUParams:
        """Нулевые параметры (неподвижная точка h = 0)"""
        return cls(
            **{
                name: np.zeros(d if name.startswith("b") else (d, d))
                for name in cls.names()
            }
        )

    @property
    def dim(self) -> int:
        return self.b_z.shape[0]


@dataclass
class GRUCache:
    """Промежуточные значения одного шага GRU"""

    x: Tensor
    h_prev: Tensor
    z: Tensor
    r: Tensor
    h_tilde: Tensor


def gru_cell(x: Tensor, h_prev: Tensor, params: GRUParams) -> tuple[Tensor, GRUCache]:
    """
    Один шаг GRU

    z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    h~ = tanh(W_h x + U_h (r⊙h) + b_h), h' = (1−z)⊙h + z⊙h~

    Args:
        x: Вход (d,)
        h_prev: Предыдущее состояние (d,)
        params: Веса ячейки

    Returns:
        Следующее состояние и кэш для обратного прохода
    """
    d = params.dim
    if x.shape != (d,) or h_prev.shape != (d,):
        raise DimensionError(
            f"GRU of width {d} got x of shape {x.shape} and h of shape {h_prev.shape}"
        )
    z = _sigmoid(params.W_z @ x + params.U_z @ h_prev + params.b_z)
    r = _sigmoid(params.W_r @ x + params.U_r @ h_prev + params.b_r)
    h_tilde = np.tanh(params.W_h @ x + params.U_h @ (r * h_prev) + params.b_h)
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, GRUCache(x=x, h_prev=h_prev, z=z, r=r, h_tilde=h_tilde)


def gru_cell_backward(
    g: Tensor, cache: GRUCache, params: GRUParams
) -> tuple[dict[str, Tensor], Tensor, Tensor]:
    """
    Обратный проход одного шага GRU

    Returns:
        (градиенты девяти тензоров, dx, dh_prev)
    """
    x, h_prev, z, r, h_tilde = cache.x, cache.h_prev, cache.z, cache.r, cache.h_tilde

    dz = g * (h_tilde - h_prev)
    dh_tilde = g * z
    dh_prev = g * (1.0 - z)

    da_h = dh_tilde * (1.0 - h_tilde * h_tilde)
    rh = r * h_prev
    d_rh = params.U_h.T @ da_h
    dr = d_rh * h_prev
    dh_prev = dh_prev + d_rh * r

    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)

    grads = {
        "W_z": np.outer(da_z, x),
        "U_z": np.outer(da_z, h_prev),
        "b_z": da_z,
        "W_r": np.outer(da_r, x),
        "U_r": np.outer(da_r, h_prev),
        "b_r": da_r,
        "W_h": np.outer(da_h, x),
        "U_h": np.outer(da_h, rh),
        "b_h": da_h,
    }
    dx = params.W_z.T @ da_z + params.W_r.T @ da_r + params.W_h.T @ da_h
    dh_prev = dh_prev + params.U_z.T @ da_z + params.U_r.T @ da_r
    return grads, dx, dh_prev


def conv2d(image: Tensor, kernels: Tensor) -> Tensor:
    """
    Взаимная корреляция без дополнения с единичным шагом

    Args:
        image: Вход (..., H, W)
        kernels: Ядра (C, kh, kw)

    Returns:
        Выход (..., C, H-kh+1, W-kw+1)
    """
    if kernels.ndim != 3 or image.ndim < 2:
        raise DimensionError(
            f"conv2d expects (..., H, W) and (C, kh, kw), got {image.shape} "
            f"and {kernels.shape}"
        )
    _, kh, kw = kernels.shape
    if kh > image.shape[-2] or kw > image.shape[-1]:
        raise DimensionError(
            f"kernel of shape {kernels.shape} is larger than input {image.shape}"
        )
    windows = sliding_window_view(image, (kh, kw), axis=(-2, -1))
    return np.einsum("...ijab,cab->...cij", windows, kernels)


def conv2d_backward(
    g: Tensor, image: Tensor, kernels: Tensor
) -> tuple[Tensor, Tensor]:
    """
    Производные conv2d

    Returns:
        (d_image той же формы, что вход; d_kernels, просуммированные по пачке)
    """
    _, kh, kw = kernels.shape
    windows = sliding_window_view(image, (kh, kw), axis=(-2, -1))
    out_shape = g.shape[-3:]
    d_kernels = np.einsum(
        "ncij,nijab->cab",
        g.reshape(-1, *out_shape),
        windows.reshape(-1, *windows.shape[-4:]),
    )
    d_image = np.zeros_like(image, dtype=np.float64)
    out_h, out_w = g.shape[-2], g.shape[-1]
    for a in range(kh):
        for b in range(kw):
            d_image[..., a : a + out_h, b : b + out_w] += np.einsum(
                "...cij,c->...ij", g, kernels[:, a, b]
            )
    return d_image, d_kernels


def grad_check(
    f: Callable[[ParamStore], float],
    params: ParamStore,
    eps: float = 1e-5,
    *,
    max_coords: int = 200,
    seed: int = 0,
) -> float:
    """
    Сравнение аналитического градиента с центральными разностями

    `f(params)` возвращает скаляр и накапливает аналитический градиент
    в хранилище параметров.

    Args:
        f: Детерминированная функция потерь
        params: Хранилище параметров
        eps: Шаг разностной схемы, (0, 1e-2]
        max_coords: Максимум проверяемых координат на тензор
        seed: Зерно выбора координат

    Returns:
        Максимальная относительная ошибка |a−n| / max(1, |n|)
    """
    if not 0.0 < eps <= 1e-2:
        raise PreconditionError(f"eps must lie in (0, 1e-2], got {eps}")

    params.zero_grad()
    base = f(params)
    if not np.isfinite(base):
        raise EvaluationError("loss is not finite")
    analytic = {name: pair.grad.copy() for name, pair in params.items()}

    worst = 0.0
    for name, pair in params.items():
        flat = pair.value.reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            rng = make_rng(seed, "grad_check", name)
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        grad_flat = analytic[name].reshape(-1)
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            plus = f(params)
            flat[i] = original - eps
            minus = f(params)
            flat[i] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise EvaluationError(f"loss is not finite while perturbing {name}")
            numeric = (plus - minus) / (2.0 * eps)
            error = abs(grad_flat[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, error)
    params.zero_grad()
    return float(worst)
