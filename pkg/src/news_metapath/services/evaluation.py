"""
Сервис оценки: метрики обнаружения, логистический зонд, абляции,
развёртка по доле обучающей выборки и экспорт представлений
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.linear_model import LogisticRegression

from ..config.settings import Encoder, ModelConfig, TemporalMode, TrainConfig
from ..errors import (
    AUCUndefinedError,
    CoverageError,
    DataError,
    IngestionError,
    PreconditionError,
)
from ..graph.featurize import FeatureBundle
from ..graph.hetgraph import HeteroGraph, Label
from ..model.network import MetaPathNetwork, embed
from ..model.numerics import Tensor
from ..seeding import derive_seed
from .trainer import EpochRecord, Split, Trainer, eval_seed, split_dataset

logger = logging.getLogger(__name__)

METRIC_NAMES = ("precision", "recall", "f1", "accuracy", "auc")


@dataclass
class MetricsReport:
    """Метрики обнаружения; положительный класс всегда настоящие новости"""

    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float
    n_pos: int
    n_neg: int
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    positive_class: str = "real"

    def metrics(self) -> dict[str, float]:
        """Пять метрик в каноническом порядке"""
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _as_labels(labels: Sequence[Label | int]) -> np.ndarray:
    return np.array([int(Label(label)) for label in labels])


def compute_metrics(
    scores: Sequence[float], labels: Sequence[Label | int], threshold: float = 0.5
) -> MetricsReport:
    """
    Пороговые метрики и AUC по оценкам P_real

    Args:
        scores: Вероятности настоящей новости
        labels: Истинные метки
        threshold: Порог; оценка >= порога означает «настоящая»

    Returns:
        Отчёт с метриками

    Raises:
        AUCUndefinedError: В разметке один класс (отчёт с auc = nan в исключении)
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = _as_labels(labels)
    if scores.shape != y.shape:
        raise PreconditionError(
            f"{scores.size} scores do not match {y.size} labels"
        )
    positive = y == int(Label.REAL)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & positive))
    fp = int(np.sum(predicted & ~positive))
    tn = int(np.sum(~predicted & ~positive))
    fn = int(np.sum(~predicted & positive))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    n_pos, n_neg = int(positive.sum()), int((~positive).sum())
    report = MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=_ratio(tp + tn, y.size),
        auc=math.nan,
        n_pos=n_pos,
        n_neg=n_neg,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )
    if n_pos == 0 or n_neg == 0:
        raise AUCUndefinedError(report)

    # Статистика Манна-Уитни со средними рангами для совпадений
    ranks = stats.rankdata(scores)
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    report.auc = u / (n_pos * n_neg)
    return report


def auc_bruteforce(scores: Sequence[float], labels: Sequence[Label | int]) -> float:
    """Доля пар (настоящая, фейк) с большей оценкой у настоящей; совпадения 1/2"""
    scores = np.asarray(scores, dtype=np.float64)
    y = _as_labels(labels)
    pos = scores[y == int(Label.REAL)]
    neg = scores[y == int(Label.FAKE)]
    if pos.size == 0 or neg.size == 0:
        raise AUCUndefinedError(None)
    diff = pos[:, None] - neg[None, :]
    wins = float(np.sum(diff > 0))
    ties = float(np.sum(diff == 0))
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def _metrics_or_partial(
    scores: Sequence[float], labels: Sequence[Label | int], threshold: float
) -> MetricsReport:
    try:
        return compute_metrics(scores, labels, threshold)
    except AUCUndefinedError as e:
        logger.warning(f"{e}; reporting auc as nan")
        return e.report


def evaluate_network(
    network: MetaPathNetwork,
    graph: HeteroGraph,
    bundle: FeatureBundle,
    ids: list[str],
    seed: int,
    threshold: float = 0.5,
    batch_size: int = 32,
) -> MetricsReport:
    """
    Метрики сети на размеченных новостях

    Изолированные новости пропускаются, AUC при одном классе равен nan.
    """
    prediction = embed(network, graph, bundle, ids, eval_seed(seed), batch_size)
    if not prediction.ids:
        raise DataError("no evaluable news")
    labels = [graph.label(n) for n in prediction.ids]
    return _metrics_or_partial(prediction.p_real(), labels, threshold)


def probe_logreg(
    embeddings: Mapping[str, Tensor],
    labels: Mapping[str, Label],
    split: Split,
    seed: int,
    l2: float = 1e-3,
    threshold: float = 0.5,
) -> MetricsReport:
    """
    Логистическая регрессия с L2 на замороженных представлениях

    Args:
        embeddings: Представления новостей
        labels: Метки
        split: Разбиение; обучение на train, метрики на test
        seed: Зерно решателя
        l2: Коэффициент регуляризации λ
        threshold: Порог P_real

    Returns:
        Метрики на тестовой части
    """
    needed = split.train + split.test
    missing = sorted(n for n in needed if n not in embeddings)
    if missing:
        raise CoverageError(missing[:10], total_missing=len(missing))
    X_train = np.stack([embeddings[n] for n in split.train])
    y_train = np.array([int(labels[n] is Label.REAL) for n in split.train])
    if len(set(y_train.tolist())) < 2:
        raise PreconditionError("probe needs both classes in the train part")

    model = LogisticRegression(
        C=1.0 / (l2 * len(split.train)), random_state=seed, max_iter=1000
    )
    model.fit(X_train, y_train)
    X_test = np.stack([embeddings[n] for n in split.test])
    p_real = model.predict_proba(X_test)[:, list(model.classes_).index(1)]
    return _metrics_or_partial(p_real, [labels[n] for n in split.test], threshold)


@dataclass
class ArmResult:
    """Одна ветка абляции"""

    name: str
    report: MetricsReport
    history: list[EpochRecord]


def _train_and_evaluate(
    name: str,
    graph: HeteroGraph,
    bundle: FeatureBundle,
    split: Split,
    model_config: ModelConfig,
    train_config: TrainConfig,
    threshold: float,
) -> ArmResult:
    result = Trainer(model_config, train_config).train(graph, bundle, split)
    report = evaluate_network(
        result.network,
        graph,
        bundle,
        split.test,
        train_config.seed,
        threshold,
        train_config.batch_size,
    )
    logger.info(f"{name}: auc {report.auc:.4f}, f1 {report.f1:.4f}")
    return ArmResult(name=name, report=report, history=result.history)


@dataclass
class TemporalAblation:
    """Сравнение GRU и внимания на пути через пользователей"""

    gru: ArmResult
    attention: ArmResult

    def arms(self) -> list[ArmResult]:
        return [self.gru, self.attention]

    def validation_curves(self) -> dict[str, list[float]]:
        """Валидационные потери по эпохам для обеих веток"""
        return {
            arm.name: [record.val_loss for record in arm.history] for arm in self.arms()
        }


def ablate_temporal(
    graph: HeteroGraph,
    bundle: FeatureBundle,
    split: Split,
    model_config: ModelConfig,
    train_config: TrainConfig,
    threshold: float = 0.5,
) -> TemporalAblation:
    """
    Две сети, отличающиеся только агрегацией пути через пользователей

    Returns:
        Отчёты и истории обеих веток
    """
    arms = {}
    for mode in (TemporalMode.GRU, TemporalMode.ATTENTION):
        config = dataclasses.replace(model_config, temporal_mode=mode)
        arms[mode] = _train_and_evaluate(
            mode.value, graph, bundle, split, config, train_config, threshold
        )
    return TemporalAblation(
        gru=arms[TemporalMode.GRU], attention=arms[TemporalMode.ATTENTION]
    )


def ablate_encoder(
    graph: HeteroGraph,
    bundle: FeatureBundle,
    split: Split,
    model_config: ModelConfig,
    train_config: TrainConfig,
    threshold: float = 0.5,
) -> list[ArmResult]:
    """Три сети с кодировщиками TransE, RotatE и ConvE при одинаковых зёрнах"""
    return [
        _train_and_evaluate(
            encoder.value,
            graph,
            bundle,
            split,
            dataclasses.replace(model_config, encoder=encoder),
            train_config,
            threshold,
        )
        for encoder in Encoder
    ]


@dataclass
class SweepRow:
    """Строка развёртки по доле обучающей выборки"""

    ratio: float
    n_train: int
    auc: float


def _check_split(split: Split, labels: Mapping[str, Label], ratio: float) -> None:
    if not split.val:
        raise DataError(f"ratio {ratio}: val part is empty")
    for part in ("train", "test"):
        if len({labels[n] for n in getattr(split, part)}) < 2:
            raise DataError(
                f"ratio {ratio}: {part} part does not contain both classes"
            )


def sweep_training_ratio(
    graph: HeteroGraph,
    bundle: FeatureBundle,
    ratios: Sequence[float],
    model_config: ModelConfig,
    train_config: TrainConfig,
    threshold: float = 0.5,
) -> list[SweepRow]:
    """
    Переобучение при разных долях обучающей выборки с фиксированным зерном

    Returns:
        Одна строка на долю в порядке запроса
    """
    labels = graph.labels
    rows = []
    for ratio in ratios:
        split = split_dataset(labels, ratio, train_config.seed)
        _check_split(split, labels, ratio)
        config = dataclasses.replace(train_config, train_frac=ratio)
        arm = _train_and_evaluate(
            f"ratio {ratio}", graph, bundle, split, model_config, config, threshold
        )
        rows.append(SweepRow(ratio=ratio, n_train=len(split.train), auc=arm.report.auc))
    return rows


@dataclass
class RepeatedReport:
    """Повторные запуски с разными зёрнами"""

    runs: list[MetricsReport]
    seeds: list[int]
    mean: dict[str, float]
    half_width: dict[str, float]
    """Полуширина 95% интервала Стьюдента"""


def summarize_runs(reports: list[MetricsReport], seeds: list[int]) -> RepeatedReport:
    """Среднее и полуширина 95% t-интервала по каждой метрике"""
    n = len(reports)
    mean, half = {}, {}
    for name in METRIC_NAMES:
        values = np.array([getattr(r, name) for r in reports])
        mean[name] = float(values.mean())
        if n > 1:
            sem = values.std(ddof=1) / math.sqrt(n)
            half[name] = float(stats.t.ppf(0.975, n - 1) * sem)
        else:
            half[name] = math.nan
    return RepeatedReport(runs=reports, seeds=seeds, mean=mean, half_width=half)


def evaluate_repeated(
    graph: HeteroGraph,
    bundle: FeatureBundle,
    model_config: ModelConfig,
    train_config: TrainConfig,
    runs: int,
    threshold: float = 0.5,
) -> RepeatedReport:
    """
    Цикл разбиение-обучение-оценка по `runs` производным зёрнам

    Returns:
        Отчёты запусков и среднее ± полуширина
    """
    if runs < 1:
        raise PreconditionError("runs must be at least 1")
    reports, seeds = [], []
    for run in range(runs):
        seed = derive_seed(train_config.seed, "run", run)
        config = dataclasses.replace(train_config, seed=seed)
        split = split_dataset(graph.labels, config.train_frac, seed)
        arm = _train_and_evaluate(
            f"run {run}", graph, bundle, split, model_config, config, threshold
        )
        reports.append(arm.report)
        seeds.append(seed)
    return summarize_runs(reports, seeds)


def export_embeddings(
    embeddings: Mapping[str, Tensor],
    path: str | Path,
    labels: Mapping[str, Label] | None = None,
) -> None:
    """
    Запись представлений в CSV: id, метка (пусто, если неизвестна), d' значений

    Args:
        embeddings: Представления новостей
        path: Путь к файлу
        labels: Известные метки
    """
    if not embeddings:
        raise PreconditionError("nothing to export")
    labels = labels or {}
    ids = list(embeddings)
    matrix = np.stack([embeddings[n] for n in ids])
    frame = pd.DataFrame(matrix, columns=[f"e{i}" for i in range(matrix.shape[1])])
    frame.insert(0, "label", [str(int(labels[n])) if n in labels else "" for n in ids])
    frame.insert(0, "id", ids)
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Exported {len(ids)} embeddings to {path}")


def load_embeddings(path: str | Path) -> tuple[dict[str, Tensor], dict[str, Label]]:
    """
    Чтение файла `export_embeddings`

    Returns:
        Представления и известные метки
    """
    try:
        frame = pd.read_csv(
            path,
            dtype={"id": str, "label": str},
            keep_default_na=False,
            float_precision="round_trip",
        )
    except (OSError, ValueError) as e:
        raise IngestionError(f"cannot read embeddings {path}: {e}") from e
    if list(frame.columns[:2]) != ["id", "label"]:
        raise IngestionError(f"{path} is not an embeddings file")
    values = frame.iloc[:, 2:].to_numpy(dtype=np.float64)
    embeddings = {node_id: values[i] for i, node_id in enumerate(frame["id"])}
    labels = {
        node_id: Label(int(label))
        for node_id, label in zip(frame["id"], frame["label"])
        if label != ""
    }
    return embeddings, labels
