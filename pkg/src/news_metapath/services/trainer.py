"""
Сервис обучения: разбиение выборки, функция потерь, оптимизаторы,
ранняя остановка и эпохальный цикл
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..config.settings import ModelConfig, OptimizerKind, TrainConfig
from ..errors import (
    DataError,
    DomainError,
    PreconditionError,
    TrainingError,
)
from ..graph.featurize import FeatureBundle
from ..graph.hetgraph import HeteroGraph, Label
from ..model.network import MetaPathNetwork, batches, embed
from ..model.numerics import Tensor
from ..model.params import ParamStore
from ..seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass
class Split:
    """Непересекающиеся обучающая, валидационная и тестовая части"""

    train: list[str]
    val: list[str]
    test: list[str]
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def _apportion(sizes: list[int], total: int) -> list[int]:
    """Распределение total пропорционально sizes методом наибольших остатков"""
    n = sum(sizes)
    if n == 0:
        return [0] * len(sizes)
    quotas = [size * total / n for size in sizes]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(labels: Mapping[str, Label], train_frac: float, seed: int) -> Split:
    """
    Стратифицированное перемешанное разбиение размеченных новостей

    Обучающая часть получает ⌊train_frac·n⌋ новостей, остаток делится
    пополам; лишний элемент при нечётном остатке уходит в валидацию или
    тест по зерну.

    Args:
        labels: Метки новостей
        train_frac: Доля обучающей части
        seed: Зерно

    Returns:
        Разбиение
    """
    n = len(labels)
    if n < 3:
        raise PreconditionError(f"need at least 3 labeled news to split, got {n}")
    if not 0.0 < train_frac < 1.0:
        raise PreconditionError(f"train_frac must lie in (0, 1), got {train_frac}")

    rng = make_rng(seed, "split")
    n_train = math.floor(train_frac * n)
    rest = n - n_train
    n_val = rest // 2
    if rest % 2 and rng.random() < 0.5:
        n_val += 1

    classes = sorted({Label(label) for label in labels.values()})
    members = {
        c: [node_id for node_id, label in labels.items() if Label(label) is c]
        for c in classes
    }
    sizes = [len(members[c]) for c in classes]
    train_counts = _apportion(sizes, n_train)
    remaining = [size - k for size, k in zip(sizes, train_counts)]
    val_counts = _apportion(remaining, n_val)

    split = Split(train=[], val=[], test=[], seed=seed)
    for c, k_train, k_val in zip(classes, train_counts, val_counts):
        ids = [members[c][i] for i in rng.permutation(len(members[c]))]
        split.train.extend(ids[:k_train])
        split.val.extend(ids[k_train : k_train + k_val])
        split.test.extend(ids[k_train + k_val :])
    return split


def cross_entropy(probs: Tensor, y: int | Label) -> float:
    """
    −[y·log P_fake + (1−y)·log P_real] с отсечением вероятностей снизу

    Args:
        probs: [P_real, P_fake]
        y: Метка (0 = настоящая, 1 = фейк)

    Returns:
        Значение потерь
    """
    probs = np.asarray(probs, dtype=np.float64)
    if (
        probs.shape != (2,)
        or not np.all(np.isfinite(probs))
        or np.any(probs < 0.0)
        or abs(probs.sum() - 1.0) > 1e-6
    ):
        raise DomainError(f"not a probability pair: {probs}")
    if int(y) not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {y}")
    return float(-np.log(max(probs[int(y)], PROB_FLOOR)))


def batch_loss(probs: Tensor, y: Tensor) -> tuple[float, Tensor]:
    """
    Средние потери пачки и их градиент по логитам

    Returns:
        (средние потери, (probs − onehot(y)) / B)
    """
    batch = probs.shape[0]
    losses = [cross_entropy(p, label) for p, label in zip(probs, y)]
    onehot = np.zeros_like(probs)
    onehot[np.arange(batch), y] = 1.0
    return float(np.mean(losses)), (probs - onehot) / batch


class SGDOptimizer:
    """Стохастический градиентный спуск"""

    def __init__(self, lr: float):
        self.lr = lr

    def apply(self, params: ParamStore) -> None:
        for _, pair in params.items():
            pair.value -= self.lr * pair.grad


class AdamOptimizer:
    """Adam с поправкой смещения моментов"""

    def __init__(
        self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ):
        """
        Args:
            lr: Скорость обучения
            beta1: Коэффициент первого момента
            beta2: Коэффициент второго момента
            eps: Стабилизатор знаменателя
        """
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, Tensor] = {}
        self.v: dict[str, Tensor] = {}

    def apply(self, params: ParamStore) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, pair in params.items():
            m = self.m.setdefault(name, np.zeros_like(pair.value))
            v = self.v.setdefault(name, np.zeros_like(pair.value))
            m *= self.beta1
            m += (1.0 - self.beta1) * pair.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * pair.grad * pair.grad
            m_hat = m / correction1
            v_hat = v / correction2
            pair.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


Optimizer = SGDOptimizer | AdamOptimizer


def build_optimizer(config: TrainConfig) -> Optimizer:
    """Оптимизатор по конфигурации"""
    if config.optimizer is OptimizerKind.SGD:
        return SGDOptimizer(config.lr)
    return AdamOptimizer(config.lr, config.beta1, config.beta2, config.adam_eps)


def optimizer_step(params: ParamStore, optimizer: Optimizer) -> None:
    """
    Шаг оптимизатора в порядке регистрации параметров

    Градиенты обнуляются, версия параметров увеличивается.
    """
    for name, pair in params.items():
        if not np.all(np.isfinite(pair.grad)):
            raise TrainingError(f"non-finite gradient in {name}")
    optimizer.apply(params)
    params.zero_grad()
    params.bump()


class EarlyStopping:
    """Остановка после `patience` эпох без улучшения"""

    def __init__(self, patience: int):
        if patience < 1:
            raise PreconditionError("patience must be at least 1")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def step(self, value: float, epoch: int) -> bool:
        """
        Учёт потерь эпохи

        Returns:
            True, если обучение пора остановить
        """
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    @property
    def improved(self) -> bool:
        """Последний шаг улучшил лучшее значение"""
        return self.bad_epochs == 0


@dataclass
class EpochRecord:
    """Строка истории обучения"""

    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    """Результат обучения"""

    params: ParamStore
    """Параметры лучшей по валидации эпохи"""

    history: list[EpochRecord]
    best_epoch: int
    initial_train_loss: float
    """Потери на обучающей части до первого шага"""

    stopped_early: bool
    network: MetaPathNetwork = field(repr=False)
    """Сеть с лучшими параметрами"""

    @property
    def best_val_loss(self) -> float:
        return self.history[self.best_epoch - 1].val_loss


def eval_seed(seed: int) -> int:
    """Фиксированное зерно выборки экземпляров для оценки"""
    return derive_seed(seed, "eval")


def mean_loss(
    network: MetaPathNetwork,
    graph: HeteroGraph,
    bundle: FeatureBundle,
    ids: list[str],
    seed: int,
    batch_size: int,
) -> float:
    """Средние потери по новостям без накопления градиентов"""
    prediction = embed(network, graph, bundle, ids, seed, batch_size)
    if not prediction.ids:
        raise DataError("no news left to evaluate the loss on")
    losses = [
        cross_entropy(p, graph.label(node_id))
        for node_id, p in zip(prediction.ids, prediction.probs)
    ]
    return float(np.mean(losses))


class Trainer:
    """Эпохальный цикл обучения сети"""

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig):
        """
        Args:
            model_config: Конфигурация сети
            train_config: Конфигурация обучения
        """
        self.model_config = model_config
        self.config = train_config

    def _connected(
        self, network: MetaPathNetwork, graph: HeteroGraph, ids: list[str], part: str
    ) -> list[str]:
        kept = [n for n in ids if not network.is_isolated(graph, n)]
        if len(kept) < len(ids):
            logger.warning(
                f"Skipping {len(ids) - len(kept)} isolated news in the {part} part"
            )
        if not kept:
            raise DataError(f"all {part} news are isolated")
        return kept

    def train(
        self,
        graph: HeteroGraph,
        bundle: FeatureBundle,
        split: Split,
        network: MetaPathNetwork | None = None,
    ) -> TrainResult:
        """
        Обучение с ранней остановкой по валидационным потерям

        Args:
            graph: Размеченный граф
            bundle: Признаки
            split: Разбиение
            network: Начальная сеть (по умолчанию свежая инициализация)

        Returns:
            Лучшие параметры и история
        """
        if not split.train or not split.val:
            raise PreconditionError("training needs nonempty train and val parts")
        config = self.config
        seed = config.seed
        if network is None:
            network = MetaPathNetwork.initialize(self.model_config, bundle.dims(), seed)
        params = network.params

        train_ids = self._connected(network, graph, split.train, "train")
        val_ids = self._connected(network, graph, split.val, "val")
        fixed_seed = eval_seed(seed)
        optimizer = build_optimizer(config)
        stopper = EarlyStopping(config.patience)

        initial = mean_loss(
            network, graph, bundle, train_ids, fixed_seed, config.batch_size
        )
        logger.info(
            f"Training on {len(train_ids)} news, validating on {len(val_ids)}; "
            f"{params.num_values()} parameters, initial loss {initial:.4f}"
        )

        history: list[EpochRecord] = []
        best = params.copy()
        stopped_early = False
        for epoch in range(1, config.max_epochs + 1):
            sample_seed = derive_seed(seed, "epoch", epoch)
            order = make_rng(seed, "shuffle", epoch).permutation(len(train_ids))
            shuffled = [train_ids[i] for i in order]
            total = 0.0
            for batch in batches(shuffled, config.batch_size):
                cache = network.forward_batch(graph, bundle, batch, sample_seed)
                y = np.array([int(graph.label(n)) for n in batch])
                loss, d_logits = batch_loss(cache.probs, y)
                network.backward(d_logits, cache)
                optimizer_step(params, optimizer)
                total += loss * len(batch)
            train_loss = total / len(train_ids)
            val_loss = mean_loss(
                network, graph, bundle, val_ids, fixed_seed, config.batch_size
            )
            history.append(EpochRecord(epoch, train_loss, val_loss))
            logger.info(
                f"Epoch {epoch}: train loss {train_loss:.6f}, val loss {val_loss:.6f}"
            )

            stop = stopper.step(val_loss, epoch)
            if stopper.improved:
                best = params.copy()
            if stop:
                stopped_early = True
                logger.info(
                    f"Early stopping at epoch {epoch}; best epoch {stopper.best_epoch}"
                )
                break

        best_network = MetaPathNetwork(network.config, best, network.dims)
        return TrainResult(
            params=best,
            history=history,
            best_epoch=stopper.best_epoch,
            initial_train_loss=initial,
            stopped_early=stopped_early,
            network=best_network,
        )


def train_model(
    graph: HeteroGraph,
    bundle: FeatureBundle,
    split: Split,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> TrainResult:
    """Обучение свежей сети с заданными конфигурациями"""
    return Trainer(model_config, train_config).train(graph, bundle, split)
