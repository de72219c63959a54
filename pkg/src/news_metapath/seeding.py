"""
Иерархическое разбиение корневого зерна на независимые потоки
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *keys: object) -> int:
    """
    Получение дочернего зерна по имени компонента

    Args:
        seed: Родительское зерно
        keys: Путь компонента (имена, индексы эпох, идентификаторы узлов)

    Returns:
        Неотрицательное 63-битное зерно
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(seed)).encode())
    for key in keys:
        digest.update(b"\x1f")
        digest.update(str(key).encode("utf-8"))
    return int.from_bytes(digest.digest(), "big") >> 1


def make_rng(seed: int, *keys: object) -> np.random.Generator:
    """Генератор numpy для потока `keys` корневого зерна"""
    return np.random.default_rng(derive_seed(seed, *keys))
