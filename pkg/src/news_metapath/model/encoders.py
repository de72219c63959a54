"""
Кодирование экземпляра мета-пути h_u -r-> h_w -r⁻¹-> h_v в один вектор

Обратное отношение берётся со сменой знака: r⁻¹ = −r. Все функции
принимают как векторы (d,), так и пачки строк (n, d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .numerics import (
    Activation,
    Tensor,
    activation,
    activation_backward,
    conv2d,
    conv2d_backward,
)


def _check(h_u: Tensor, h_w: Tensor, r: Tensor) -> None:
    if h_u.shape != h_w.shape or h_u.shape[-1] != r.shape[-1]:
        raise DimensionError(
            f"encoder inputs disagree: h_u {h_u.shape}, h_w {h_w.shape}, r {r.shape}"
        )


def encode_transe(h_u: Tensor, h_w: Tensor, r: Tensor) -> Tensor:
    """
    MEAN[(h_u + r + r⁻¹), (h_w + r⁻¹)]

    Слагаемые r + r⁻¹ взаимно уничтожаются, остаётся (h_u + h_w − r) / 2.
    """
    _check(h_u, h_w, r)
    r_inv = -r
    return (h_u + h_w + r_inv) / 2.0


def encode_transe_backward(g: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """(dh_u, dh_w, dr) для пачки g"""
    half = g / 2.0
    return half, half, -_sum_rows(half)


def encode_rotate(h_u: Tensor, h_w: Tensor, r: Tensor) -> Tensor:
    """MEAN[(h_u ⊙ r ⊙ r⁻¹), (h_w ⊙ r⁻¹)] при вещественных векторах"""
    _check(h_u, h_w, r)
    r_inv = -r
    return (h_u * r * r_inv + h_w * r_inv) / 2.0


def encode_rotate_backward(
    g: Tensor, h_u: Tensor, h_w: Tensor, r: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """(dh_u, dh_w, dr); выход = −(h_u r² + h_w r) / 2"""
    dh_u = -g * r * r / 2.0
    dh_w = -g * r / 2.0
    dr = _sum_rows(-g * (2.0 * h_u * r + h_w) / 2.0)
    return dh_u, dh_w, dr


def _sum_rows(x: Tensor) -> Tensor:
    return x if x.ndim == 1 else x.sum(axis=0)


@dataclass
class ConvECache:
    """Промежуточные значения ConvE для пачки"""

    stacked: Tensor
    conv: Tensor
    act: Tensor
    flat: Tensor


def conve_stack(h_u: Tensor, h_w: Tensor, r: Tensor, rows: int) -> Tensor:
    """
    Развёртка [h~_u ‖ r~ ‖ h~_w ‖ r~⁻¹] в 2D, форма (..., 4·rows, d/rows)
    """
    d = h_u.shape[-1]
    if d % rows:
        raise ConfigurationError(f"dimension {d} cannot be reshaped into {rows} rows")
    cols = d // rows
    lead = h_u.shape[:-1]
    r_b = np.broadcast_to(r, h_u.shape)
    parts = [h_u, r_b, h_w, -r_b]
    return np.concatenate([p.reshape(*lead, rows, cols) for p in parts], axis=-2)


def encode_conve(
    h_u: Tensor,
    h_w: Tensor,
    r: Tensor,
    kernels: Tensor,
    W_proj: Tensor,
    b_proj: Tensor,
    rows: int,
    slope: float = 0.01,
) -> tuple[Tensor, ConvECache]:
    """
    Свёртка развёрнутой тройки, LeakyReLU, проекция в d'

    Args:
        h_u, h_w: Преобразованные признаки узлов (..., d')
        r: Вектор отношения (d',)
        kernels: Ядра (C, k, k)
        W_proj: Проекция (d', C·H'·W')
        b_proj: Смещение проекции (d',)
        rows: Число строк развёртки
        slope: Наклон LeakyReLU

    Returns:
        Кодировка (..., d') и кэш
    """
    _check(h_u, h_w, r)
    stacked = conve_stack(h_u, h_w, r, rows)
    conv = conv2d(stacked, kernels)
    act = activation(Activation.LEAKY_RELU, conv, slope)
    flat = act.reshape(*act.shape[:-3], -1)
    if flat.shape[-1] != W_proj.shape[1]:
        raise DimensionError(
            f"ConvE features {flat.shape} do not match projection {W_proj.shape}"
        )
    out = flat @ W_proj.T + b_proj
    return out, ConvECache(stacked=stacked, conv=conv, act=act, flat=flat)


def encode_conve_backward(
    g: Tensor,
    cache: ConvECache,
    kernels: Tensor,
    W_proj: Tensor,
    rows: int,
    slope: float = 0.01,
) -> tuple[Tensor, Tensor, Tensor, dict[str, Tensor]]:
    """
    Обратный проход ConvE

    Returns:
        (dh_u, dh_w, dr, {"kernels", "W_proj", "b_proj"})
    """
    batched = g.ndim == 2
    g2 = g if batched else g[None, :]
    flat = cache.flat if batched else cache.flat[None, :]
    d_W_proj = g2.T @ flat
    d_b_proj = g2.sum(axis=0)
    d_flat = g2 @ W_proj
    if not batched:
        d_flat = d_flat[0]
    d_act = d_flat.reshape(cache.act.shape)
    d_conv = activation_backward(
        Activation.LEAKY_RELU, d_act, cache.conv, cache.act, slope
    )
    d_stacked, d_kernels = conv2d_backward(d_conv, cache.stacked, kernels)

    d = g.shape[-1]
    lead = g.shape[:-1]
    blocks = [
        d_stacked[..., i * rows : (i + 1) * rows, :].reshape(*lead, d) for i in range(4)
    ]
    dh_u, d_r, dh_w, d_r_inv = blocks
    dr = _sum_rows(d_r - d_r_inv)
    grads = {"kernels": d_kernels, "W_proj": d_W_proj, "b_proj": d_b_proj}
    return dh_u, dh_w, dr, grads


def conve_feature_size(d: int, rows: int, channels: int, kernel: int) -> int:
    """Длина развёрнутой карты признаков C·H'·W'"""
    cols = d // rows
    return channels * (4 * rows - kernel + 1) * (cols - kernel + 1)
