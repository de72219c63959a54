"""
Конфигурационные настройки модели, обучения, генератора и оценки
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum, StrEnum
from pathlib import Path
from typing import Any, get_type_hints

from dotenv import dotenv_values

from ..errors import ConfigurationError


class Encoder(StrEnum):
    """Метод кодирования экземпляра мета-пути"""

    TRANSE = "transe"
    ROTATE = "rotate"
    CONVE = "conve"


class TemporalMode(StrEnum):
    """Агрегация экземпляров пользовательского мета-пути"""

    GRU = "gru"
    ATTENTION = "attention"


class OptimizerKind(StrEnum):
    """Оптимизатор"""

    ADAM = "adam"
    SGD = "sgd"


class Regime(StrEnum):
    """Временной режим фейковых новостей в синтетическом корпусе"""

    DISINFORMATION = "disinformation"
    MISINFORMATION = "misinformation"


@dataclass
class ModelConfig:
    """Конфигурация сети"""

    d_hidden: int = 512
    """Размерность d' после типового преобразования"""

    heads: int = 8
    """Число голов внимания K"""

    d_semantic: int = 128
    """Размерность d_m семантического внимания"""

    encoder: Encoder = Encoder.TRANSE
    """Кодировщик экземпляров"""

    temporal_mode: TemporalMode = TemporalMode.GRU
    """GRU или внимание для пути News-User-News"""

    leaky_slope: float = 0.01
    """Наклон LeakyReLU на отрицательной полуоси"""

    conve_kernel: int = 3
    """Сторона квадратного ядра ConvE"""

    conve_channels: int = 8
    """Число каналов ConvE"""

    conve_rows: int = 16
    """Число строк при 2D-развёртке вектора в ConvE"""

    ps_samples: int = 16
    """Размер выборки экземпляров News-Publisher-News"""

    pu_samples: int = 64
    """Размер выборки экземпляров News-User-News"""

    def __post_init__(self) -> None:
        self.encoder = Encoder(self.encoder)
        self.temporal_mode = TemporalMode(self.temporal_mode)
        for name in (
            "d_hidden",
            "heads",
            "d_semantic",
            "conve_kernel",
            "conve_channels",
            "conve_rows",
            "ps_samples",
            "pu_samples",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.d_hidden % self.heads:
            raise ConfigurationError(
                f"d_hidden={self.d_hidden} is not divisible by heads={self.heads}"
            )
        if self.leaky_slope < 0:
            raise ConfigurationError("leaky_slope must be non-negative")
        if self.encoder is Encoder.CONVE:
            if self.d_hidden % self.conve_rows:
                raise ConfigurationError(
                    f"d_hidden={self.d_hidden} cannot be reshaped into "
                    f"{self.conve_rows} rows"
                )
            cols = self.d_hidden // self.conve_rows
            if self.conve_kernel > min(4 * self.conve_rows, cols):
                raise ConfigurationError(
                    f"conve_kernel={self.conve_kernel} does not fit a "
                    f"{4 * self.conve_rows}x{cols} input"
                )


@dataclass
class TrainConfig:
    """Конфигурация обучения"""

    lr: float = 1e-4
    """Скорость обучения"""

    train_frac: float = 0.70
    """Доля обучающей выборки"""

    patience: int = 20
    """Терпение ранней остановки (эпох)"""

    max_epochs: int = 300
    """Максимум эпох"""

    batch_size: int = 32
    """Размер минибатча; 0 означает весь набор"""

    seed: int = 42
    """Корневое зерно"""

    optimizer: OptimizerKind = OptimizerKind.ADAM
    """Оптимизатор"""

    beta1: float = 0.9
    """Adam: коэффициент первого момента"""

    beta2: float = 0.999
    """Adam: коэффициент второго момента"""

    adam_eps: float = 1e-8
    """Adam: стабилизатор знаменателя"""

    def __post_init__(self) -> None:
        self.optimizer = OptimizerKind(self.optimizer)
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigurationError("train_frac must lie in (0, 1)")
        if self.patience < 1:
            raise ConfigurationError("patience must be at least 1")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be at least 1")
        if self.batch_size < 0:
            raise ConfigurationError("batch_size must be non-negative")


@dataclass
class SynthConfig:
    """Конфигурация генератора синтетических графов"""

    n_news: int = 500
    """Число новостей"""

    n_users: int = 5000
    """Число пользователей"""

    n_publishers: int = 20
    """Число издателей"""

    fake_frac: float = 0.4
    """Доля фейковых новостей"""

    regime: Regime = Regime.DISINFORMATION
    """Временной режим фейков"""

    horizon_hours: int = 500
    """Горизонт наблюдения после публикации"""

    spike_period_hours: int = 72
    """Период всплесков вовлечённости"""

    base_rate: float = 40.0
    """Среднее число твитов на новость"""

    decay_hours: float = 12.0
    """Масштаб экспоненциального затухания вовлечённости"""

    spike_width_hours: float = 1.0
    """Разброс времени внутри всплеска"""

    instigator_frac: float = 0.05
    """Доля подстрекателей среди пользователей"""

    instigator_share: float = 0.3
    """Ожидаемая доля твитов подстрекателей на новость"""

    instigator_offset: float = 1.0
    """Сдвиг признаков подстрекателей"""

    publisher_bias_strength: float = 0.0
    """Сила склонности предвзятых издателей к фейкам"""

    signal_strength: float = 0.0
    """Сила классового сигнала в признаках"""

    news_dim: int = 64
    """Размерность признаков новостей"""

    user_dim: int = 96
    """Размерность признаков пользователей"""

    publisher_dim: int = 96
    """Размерность признаков издателей"""

    seed: int = 42
    """Зерно генерации"""

    def __post_init__(self) -> None:
        self.regime = Regime(self.regime)
        if not 0.0 < self.fake_frac < 1.0:
            raise ConfigurationError("fake_frac must lie in (0, 1)")
        for name in ("n_news", "n_users", "n_publishers", "horizon_hours"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_news < 2 or self.n_users < 3:
            raise ConfigurationError("need at least 2 news and 3 users")
        if self.spike_period_hours <= 0:
            raise ConfigurationError("spike_period_hours must be positive")
        if (
            self.regime is Regime.DISINFORMATION
            and self.horizon_hours < 2 * self.spike_period_hours
        ):
            raise ConfigurationError(
                "horizon_hours must be at least twice spike_period_hours"
            )
        if self.base_rate < 1 or self.decay_hours <= 0 or self.spike_width_hours < 0:
            raise ConfigurationError("invalid engagement timing parameters")
        for name in ("instigator_frac", "instigator_share", "publisher_bias_strength"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.signal_strength < 0 or self.instigator_offset < 0:
            raise ConfigurationError("signal and offset strengths must be >= 0")
        if min(self.news_dim, self.user_dim, self.publisher_dim) < 8:
            raise ConfigurationError("feature dimensions must be at least 8")


@dataclass
class EvalConfig:
    """Конфигурация оценки"""

    threshold: float = 0.5
    """Порог P_real для пороговых метрик"""

    runs: int = 5
    """Число зёрен для доверительных интервалов"""

    probe_l2: float = 1e-3
    """L2-регуляризация логистического зонда"""

    ratios: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    """Доли обучающей выборки для развёртки"""

    log_level: str = "INFO"
    """Уровень логирования"""

    def __post_init__(self) -> None:
        self.ratios = tuple(float(r) for r in self.ratios)
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError("threshold must lie in (0, 1)")
        if self.runs < 1:
            raise ConfigurationError("runs must be at least 1")
        if any(not 0.0 < r < 1.0 for r in self.ratios):
            raise ConfigurationError("ratios must lie in (0, 1)")
        self.log_level = self.log_level.upper()


@dataclass
class Settings:
    """Все настройки приложения"""

    model: ModelConfig = field(default_factory=ModelConfig)
    """Настройки сети"""

    train: TrainConfig = field(default_factory=TrainConfig)
    """Настройки обучения"""

    synth: SynthConfig = field(default_factory=SynthConfig)
    """Настройки генератора"""

    eval: EvalConfig = field(default_factory=EvalConfig)
    """Настройки оценки"""

    def to_mapping(self) -> dict[str, dict[str, Any]]:
        """Сериализуемое представление всех секций"""
        return {
            name: section_to_mapping(getattr(self, name))
            for name in ("model", "train", "synth", "eval")
        }

    def config_hash(self) -> str:
        """Короткий SHA-256 канонического JSON настроек"""
        canonical = json.dumps(self.to_mapping(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


_SECTIONS: dict[str, type] = {
    "model": ModelConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
    "eval": EvalConfig,
}


def section_to_mapping(section: Any) -> dict[str, Any]:
    """Плоский словарь полей секции с примитивными значениями"""
    result: dict[str, Any] = {}
    for f in dataclasses.fields(section):
        value = getattr(section, f.name)
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        result[f.name] = value
    return result


def _coerce(key: str, raw: Any, hint: Any) -> Any:
    """Приведение строкового значения к типу поля"""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if hint is bool:
            return text.lower() in {"1", "true", "yes", "on"}
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if isinstance(hint, type) and issubclass(hint, Enum):
            return hint(text.lower())
        if hint == tuple[float, ...]:
            return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise ConfigurationError(f"invalid value for {key}: {raw!r}") from e
    return text


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    Чтение плоского файла key=value

    Args:
        path: Путь к файлу конфигурации

    Returns:
        Словарь строковых значений
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {key: value for key, value in values.items() if value is not None}


def write_config(path: str | Path, mapping: dict[str, Any]) -> None:
    """
    Запись плоского файла key=value, читаемого `read_config_file`

    Args:
        path: Путь к файлу
        mapping: Пары ключ-значение
    """
    lines = []
    for key, value in mapping.items():
        if isinstance(value, Enum):
            value = value.value
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_section(cls: type, values: dict[str, Any]) -> Any:
    """Построение секции из плоских значений (лишние ключи игнорируются)"""
    hints = get_type_hints(cls)
    kwargs = {
        f.name: _coerce(f.name, values[f.name], hints[f.name])
        for f in dataclasses.fields(cls)
        if f.name in values
    }
    return cls(**kwargs)


def get_settings(
    config_path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> Settings:
    """
    Загрузка настроек: значения по умолчанию, затем файл, затем флаги

    Args:
        config_path: Плоский файл конфигурации
        overrides: Значения из флагов командной строки (побеждают файл)

    Returns:
        Проверенные настройки
    """
    values: dict[str, Any] = {}
    if config_path is not None:
        values.update(read_config_file(config_path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    known = {f.name for cls in _SECTIONS.values() for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")

    # Ключ seed общий для обучения и генератора
    return Settings(
        **{name: build_section(cls, values) for name, cls in _SECTIONS.items()}
    )
