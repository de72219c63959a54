"""
Хранилище обучаемых тензоров, инициализация и контрольные точки
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DimensionError, IngestionError, NotFoundError
from .numerics import Tensor

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "news-metapath-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class GradPair:
    """Значение параметра и слот его градиента"""

    value: Tensor
    """Текущее значение"""

    grad: Tensor
    """Накопленный градиент той же формы"""

    def __post_init__(self) -> None:
        if self.grad.shape != self.value.shape:
            raise DimensionError(
                f"gradient shape {self.grad.shape} != value shape {self.value.shape}"
            )


class ParamStore:
    """Именованная упорядоченная коллекция параметров"""

    def __init__(self) -> None:
        self._pairs: dict[str, GradPair] = {}
        self.version = 0
        """Счётчик изменений значений (для проверки свежести кэша)"""

    def add(self, name: str, value: Tensor) -> None:
        """Регистрация параметра"""
        if name in self._pairs:
            raise ValueError(f"parameter {name!r} already registered")
        value = np.ascontiguousarray(value, dtype=np.float64)
        self._pairs[name] = GradPair(value=value, grad=np.zeros_like(value))

    def __contains__(self, name: str) -> bool:
        return name in self._pairs

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._pairs[name].value
        except KeyError as e:
            raise NotFoundError(f"unknown parameter {name!r}") from e

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self) -> Iterator[str]:
        return iter(self._pairs)

    def pair(self, name: str) -> GradPair:
        """Пара значение/градиент по имени"""
        if name not in self._pairs:
            raise NotFoundError(f"unknown parameter {name!r}")
        return self._pairs[name]

    def items(self) -> Iterator[tuple[str, GradPair]]:
        return iter(self._pairs.items())

    def names(self) -> list[str]:
        """Имена в порядке регистрации"""
        return list(self._pairs)

    def grad(self, name: str) -> Tensor:
        return self.pair(name).grad

    def accumulate(self, name: str, delta: Tensor) -> None:
        """Прибавление к градиенту параметра"""
        self.pair(name).grad += delta

    def zero_grad(self) -> None:
        for pair in self._pairs.values():
            pair.grad.fill(0.0)

    def bump(self) -> None:
        """Отметка изменения значений"""
        self.version += 1

    def copy(self) -> ParamStore:
        """Глубокая копия значений (градиенты обнуляются)"""
        clone = ParamStore()
        for name, pair in self._pairs.items():
            clone.add(name, pair.value.copy())
        clone.version = self.version
        return clone

    def load_values(self, other: ParamStore) -> None:
        """Копирование значений из другого хранилища той же структуры"""
        for name, pair in self._pairs.items():
            source = other[name]
            if source.shape != pair.value.shape:
                raise DimensionError(
                    f"{name}: shape {source.shape} != {pair.value.shape}"
                )
            pair.value[...] = source
        self.bump()

    def num_values(self) -> int:
        """Общее число скалярных параметров"""
        return sum(pair.value.size for pair in self._pairs.values())


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    """Равномерная инициализация Ксавье"""
    if len(shape) == 2:
        fan_out, fan_in = shape
    else:
        receptive = int(np.prod(shape[1:]))
        fan_in, fan_out = receptive, shape[0] * receptive
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def save_checkpoint(
    path: str | Path, params: ParamStore, meta: dict[str, Any] | None = None
) -> None:
    """
    Запись контрольной точки в JSON

    Числа записываются кратчайшим точным представлением, поэтому
    загрузка восстанавливает значения побитово.

    Args:
        path: Путь к файлу
        params: Параметры
        meta: Конфигурация модели и размерности признаков
    """
    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "tensors": [
            {
                "name": name,
                "shape": list(pair.value.shape),
                "data": pair.value.reshape(-1).tolist(),
            }
            for name, pair in params.items()
        ],
    }
    Path(path).write_text(json.dumps(document, sort_keys=True), encoding="utf-8")
    logger.info(f"Saved checkpoint with {params.num_values()} values to {path}")


def load_checkpoint(path: str | Path) -> tuple[ParamStore, dict[str, Any]]:
    """
    Чтение контрольной точки

    Returns:
        Параметры и метаданные
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IngestionError(f"cannot read checkpoint {path}: {e}") from e
    if document.get("format") != CHECKPOINT_FORMAT:
        raise IngestionError(f"{path} is not a checkpoint file")
    if document.get("version") != CHECKPOINT_VERSION:
        raise IngestionError(
            f"unsupported checkpoint version {document.get('version')}"
        )
    params = ParamStore()
    for entry in document["tensors"]:
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise IngestionError(f"tensor {entry['name']} does not match its shape")
        params.add(entry["name"], data.reshape(shape))
    return params, document.get("meta", {})
