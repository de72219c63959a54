"""
Агрегация закодированных экземпляров и семантическое слияние путей
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, PreconditionError
from .numerics import (
    Activation,
    GRUCache,
    GRUParams,
    Tensor,
    activation,
    activation_backward,
    gru_cell,
    gru_cell_backward,
    softmax,
    softmax_backward,
)


@dataclass
class AttentionCache:
    """Кэш многоголового внимания для одной новости"""

    H: Tensor
    """Закодированные экземпляры (n, d')"""

    scores: Tensor
    """a_kᵀ·h_p до LeakyReLU, (K, n)"""

    alpha: Tensor
    """Коэффициенты внимания, (K, n)"""

    heads: Tensor
    """tanh(Σ α h) по головам, (K, d')"""


def aggregate_attention(
    H: Tensor, a: Tensor, W_O: Tensor, slope: float = 0.01
) -> tuple[Tensor, AttentionCache]:
    """
    Многоголовое внимание по экземплярам и слияние голов проекцией

    Args:
        H: Экземпляры (n, d'), n >= 1
        a: Векторы внимания голов (K, d')
        W_O: Проекция (d', K·d')
        slope: Наклон LeakyReLU

    Returns:
        Представление пути (d',) и кэш
    """
    if H.ndim != 2 or H.shape[0] == 0:
        raise PreconditionError("attention needs at least one instance")
    if a.shape[1] != H.shape[1] or W_O.shape[1] != a.shape[0] * H.shape[1]:
        raise DimensionError(
            f"attention shapes disagree: H {H.shape}, a {a.shape}, W_O {W_O.shape}"
        )
    scores = a @ H.T
    e = activation(Activation.LEAKY_RELU, scores, slope)
    alpha = softmax(e)
    heads = np.tanh(alpha @ H)
    out = W_O @ heads.reshape(-1)
    return out, AttentionCache(H=H, scores=scores, alpha=alpha, heads=heads)


def aggregate_attention_backward(
    g: Tensor, cache: AttentionCache, a: Tensor, W_O: Tensor, slope: float = 0.01
) -> tuple[Tensor, Tensor, Tensor]:
    """
    Обратный проход внимания

    Returns:
        (dH, da, dW_O)
    """
    H, alpha, heads = cache.H, cache.alpha, cache.heads
    d_W_O = np.outer(g, heads.reshape(-1))
    d_heads = (W_O.T @ g).reshape(heads.shape)
    d_ctx = d_heads * (1.0 - heads * heads)
    d_alpha = d_ctx @ H.T
    dH = alpha.T @ d_ctx
    d_e = softmax_backward(d_alpha, alpha)
    e = activation(Activation.LEAKY_RELU, cache.scores, slope)
    d_scores = activation_backward(Activation.LEAKY_RELU, d_e, cache.scores, e, slope)
    d_a = d_scores @ H
    dH = dH + d_scores.T @ a
    return dH, d_a, d_W_O


def aggregate_gru(H: Tensor, params: GRUParams) -> tuple[Tensor, list[GRUCache]]:
    """
    Прогон GRU по хронологически упорядоченным экземплярам от h_0 = 0

    Returns:
        Последнее скрытое состояние и кэши шагов
    """
    if H.ndim != 2 or H.shape[0] == 0:
        raise PreconditionError("GRU aggregation needs at least one instance")
    h = np.zeros(params.dim)
    caches = []
    for x in H:
        h, cache = gru_cell(x, h, params)
        caches.append(cache)
    return h, caches


def aggregate_gru_backward(
    g: Tensor, caches: list[GRUCache], params: GRUParams
) -> tuple[Tensor, dict[str, Tensor]]:
    """
    Обратный проход во времени

    Returns:
        (dH, градиенты весов GRU)
    """
    grads = {name: np.zeros_like(getattr(params, name)) for name in GRUParams.names()}
    dH = np.zeros((len(caches), params.dim))
    dh = g
    for t in range(len(caches) - 1, -1, -1):
        step, dx, dh = gru_cell_backward(dh, caches[t], params)
        for name, value in step.items():
            grads[name] += value
        dH[t] = dx
    return dH, grads


@dataclass
class FusionCache:
    """Кэш семантического слияния для пачки"""

    HS: Tensor
    HU: Tensor
    TS: Tensor
    TU: Tensor
    s: Tensor
    """Средние tanh(M h + b), (2, d_m)"""

    e: Tensor
    beta: Tensor


def semantic_fuse(
    HS: Tensor, HU: Tensor, M: Tensor, b: Tensor, q: Tensor
) -> tuple[Tensor, FusionCache]:
    """
    Слияние представлений путей с общими по пачке весами β

    Args:
        HS: Представления пути через издателей (B, d')
        HU: Представления пути через пользователей (B, d')
        M: Матрица (d_m, d')
        b: Смещение (d_m,)
        q: Вектор внимания (d_m,)

    Returns:
        Итоговые представления (B, d') и кэш
    """
    if HS.shape != HU.shape or HS.ndim != 2 or HS.shape[0] == 0:
        raise DimensionError(f"path batches disagree: {HS.shape} vs {HU.shape}")
    if M.shape[1] != HS.shape[1] or b.shape != (M.shape[0],) or q.shape != b.shape:
        raise DimensionError(
            f"fusion shapes disagree: M {M.shape}, b {b.shape}, q {q.shape}"
        )
    TS = np.tanh(HS @ M.T + b)
    TU = np.tanh(HU @ M.T + b)
    s = np.stack([TS.mean(axis=0), TU.mean(axis=0)])
    e = np.tanh(s @ q)
    beta = softmax(e)
    out = beta[0] * HS + beta[1] * HU
    return out, FusionCache(HS=HS, HU=HU, TS=TS, TU=TU, s=s, e=e, beta=beta)


def semantic_fuse_backward(
    G: Tensor, cache: FusionCache, M: Tensor, q: Tensor
) -> tuple[Tensor, Tensor, Tensor, Tensor, Tensor]:
    """
    Обратный проход слияния

    Returns:
        (dHS, dHU, dM, db, dq)
    """
    beta = cache.beta
    batch = G.shape[0]
    dHS = beta[0] * G
    dHU = beta[1] * G
    d_beta = np.array([np.sum(G * cache.HS), np.sum(G * cache.HU)])
    d_e = softmax_backward(d_beta, beta)
    d_pre_e = d_e * (1.0 - cache.e * cache.e)
    dq = d_pre_e @ cache.s
    d_s = np.outer(d_pre_e, q)

    dM = np.zeros_like(M)
    db = np.zeros(M.shape[0])
    paths = (
        (cache.TS, cache.HS, dHS, d_s[0]),
        (cache.TU, cache.HU, dHU, d_s[1]),
    )
    for T, H, dH, ds in paths:
        d_pre = (ds / batch) * (1.0 - T * T)
        dM += d_pre.T @ H
        db += d_pre.sum(axis=0)
        dH += d_pre @ M
    return dHS, dHU, dM, db, dq
