"""
CSV-отчёты обучения и оценки
"""

import logging
from pathlib import Path

import pandas as pd

from .evaluation import METRIC_NAMES, ArmResult, MetricsReport, RepeatedReport, SweepRow
from .trainer import EpochRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _write(frame: pd.DataFrame, path: str | Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")


def history_frame(history: list[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.epoch, r.train_loss, r.val_loss) for r in history],
        columns=["epoch", "train_loss", "val_loss"],
    )


def write_history(path: str | Path, history: list[EpochRecord]) -> None:
    """История обучения: epoch, train_loss, val_loss"""
    _write(history_frame(history), path)


def metrics_frame(
    reports: list[MetricsReport], config_hash: str, run_ids: list[str] | None = None
) -> pd.DataFrame:
    """Одна строка на запуск: run_id, config_hash и пять метрик"""
    run_ids = run_ids or [str(i) for i in range(len(reports))]
    rows = [
        {"run_id": run_id, "config_hash": config_hash, **report.metrics()}
        for run_id, report in zip(run_ids, reports)
    ]
    return pd.DataFrame(rows, columns=["run_id", "config_hash", *METRIC_NAMES])


def write_metrics(
    path: str | Path,
    reports: list[MetricsReport],
    config_hash: str,
    run_ids: list[str] | None = None,
) -> None:
    _write(metrics_frame(reports, config_hash, run_ids), path)


def write_arms(path: str | Path, arms: list[ArmResult], config_hash: str) -> None:
    """Таблица абляции: одна строка на ветку"""
    reports = [arm.report for arm in arms]
    write_metrics(path, reports, config_hash, [arm.name for arm in arms])


def write_curves(path: str | Path, arms: list[ArmResult]) -> None:
    """Валидационные потери веток по эпохам в длинном формате"""
    rows = [
        (arm.name, r.epoch, r.train_loss, r.val_loss)
        for arm in arms
        for r in arm.history
    ]
    _write(
        pd.DataFrame(rows, columns=["arm", "epoch", "train_loss", "val_loss"]), path
    )


def write_sweep(path: str | Path, rows: list[SweepRow]) -> None:
    """Таблица развёртки: ratio, n_train, auc"""
    _write(
        pd.DataFrame(
            [(r.ratio, r.n_train, r.auc) for r in rows],
            columns=["ratio", "n_train", "auc"],
        ),
        path,
    )


def write_summary(path: str | Path, summary: RepeatedReport) -> None:
    """Среднее и полуширина интервала по каждой метрике"""
    _write(
        pd.DataFrame(
            [
                (name, summary.mean[name], summary.half_width[name], len(summary.runs))
                for name in METRIC_NAMES
            ],
            columns=["metric", "mean", "half_width_95", "runs"],
        ),
        path,
    )
