"""
Сеть мета-путей: типовые преобразования, кодирование экземпляров,
агрегация по путям, семантическое слияние и классификатор
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..config.settings import Encoder, ModelConfig, TemporalMode, section_to_mapping
from ..errors import DimensionError, IsolationError, StateError
from ..graph.featurize import FeatureBundle
from ..graph.hetgraph import HeteroGraph, NodeType
from ..graph.metapath import (
    MetaPathInstance,
    MetaPathSchema,
    enumerate_instances,
    sample_instances,
    sort_chronological,
)
from ..seeding import derive_seed, make_rng
from . import encoders
from .layers import (
    AttentionCache,
    FusionCache,
    aggregate_attention,
    aggregate_attention_backward,
    aggregate_gru,
    aggregate_gru_backward,
    semantic_fuse,
    semantic_fuse_backward,
)
from .numerics import GRUCache, GRUParams, Tensor, affine, affine_backward, softmax
from .params import ParamStore, load_checkpoint, save_checkpoint, xavier_uniform

logger = logging.getLogger(__name__)

SCHEMAS = (MetaPathSchema.PS, MetaPathSchema.PU)


@dataclass
class PathCache:
    """Промежуточные значения одного пути одной новости"""

    schema: MetaPathSchema
    instances: list[MetaPathInstance]
    X_u: Tensor | None = None
    X_w: Tensor | None = None
    H_u: Tensor | None = None
    H_w: Tensor | None = None
    encoded: Tensor | None = None
    encoder_cache: encoders.ConvECache | None = None
    aggregate_cache: AttentionCache | list[GRUCache] | None = None
    output: Tensor | None = None

    @property
    def uses_default(self) -> bool:
        """Пул пуст и подставлен обучаемый вектор по умолчанию"""
        return not self.instances


@dataclass
class ForwardCache:
    """Состояние прямого прохода пачки для обратного"""

    version: int
    targets: list[str]
    paths: list[dict[MetaPathSchema, PathCache]]
    fusion: FusionCache
    embeddings: Tensor
    """h_v, (B, d')"""

    logits: Tensor
    probs: Tensor
    """[P_real, P_fake] построчно, (B, 2)"""

    consumed: bool = field(default=False)

    @property
    def beta(self) -> Tensor:
        return self.fusion.beta


def _relation_name(schema: MetaPathSchema) -> str:
    return f"r.{schema.value}"


def init_params(
    config: ModelConfig, dims: dict[NodeType, int], seed: int
) -> ParamStore:
    """
    Инициализация всех обучаемых тензоров

    Матрицы по Ксавье, смещения нулями, векторы отношений U(−0.1, 0.1).

    Args:
        config: Конфигурация сети
        dims: Размерности признаков по типам узлов
        seed: Корневое зерно

    Returns:
        Хранилище параметров
    """
    rng = make_rng(seed, "init")
    d, k, dm = config.d_hidden, config.heads, config.d_semantic
    params = ParamStore()
    for node_type in sorted(dims):
        params.add(f"W.{node_type.value}", xavier_uniform(rng, (d, dims[node_type])))
    for schema in SCHEMAS:
        params.add(_relation_name(schema), rng.uniform(-0.1, 0.1, size=d))
    for schema in SCHEMAS:
        params.add(f"default.{schema.value}", rng.uniform(-0.1, 0.1, size=d))

    params.add("att.ps.a", xavier_uniform(rng, (k, d)))
    params.add("att.ps.W_O", xavier_uniform(rng, (d, k * d)))
    if config.temporal_mode is TemporalMode.GRU:
        for name in GRUParams.names():
            shape = (d,) if name.startswith("b") else (d, d)
            value = np.zeros(d) if len(shape) == 1 else xavier_uniform(rng, shape)
            params.add(f"gru.{name}", value)
    else:
        params.add("att.pu.a", xavier_uniform(rng, (k, d)))
        params.add("att.pu.W_O", xavier_uniform(rng, (d, k * d)))

    if config.encoder is Encoder.CONVE:
        c, kernel = config.conve_channels, config.conve_kernel
        size = encoders.conve_feature_size(d, config.conve_rows, c, kernel)
        params.add("conve.kernels", xavier_uniform(rng, (c, kernel, kernel)))
        params.add("conve.W_proj", xavier_uniform(rng, (d, size)))
        params.add("conve.b_proj", np.zeros(d))

    params.add("sem.M", xavier_uniform(rng, (dm, d)))
    params.add("sem.b", np.zeros(dm))
    params.add("sem.q", xavier_uniform(rng, (1, dm)).reshape(dm))
    params.add("cls.W", xavier_uniform(rng, (2, d)))
    params.add("cls.b", np.zeros(2))
    return params


class MetaPathNetwork:
    """Классификатор новостей по мета-путям"""

    def __init__(
        self, config: ModelConfig, params: ParamStore, dims: dict[NodeType, int]
    ):
        """
        Args:
            config: Конфигурация сети
            params: Обучаемые тензоры
            dims: Размерности признаков по типам узлов
        """
        self.config = config
        self.params = params
        self.dims = dict(dims)

    @classmethod
    def initialize(
        cls, config: ModelConfig, dims: dict[NodeType, int], seed: int
    ) -> MetaPathNetwork:
        """Новая сеть со свежей инициализацией"""
        return cls(config, init_params(config, dims, seed), dims)

    # --- контрольные точки

    def meta(self) -> dict[str, Any]:
        """Метаданные для контрольной точки"""
        return {
            "model": section_to_mapping(self.config),
            "dims": {t.value: d for t, d in sorted(self.dims.items())},
        }

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.params, self.meta())

    @classmethod
    def load(cls, path: str | Path) -> MetaPathNetwork:
        """Восстановление сети из контрольной точки"""
        params, meta = load_checkpoint(path)
        config = ModelConfig(**meta["model"])
        dims = {NodeType(t): int(d) for t, d in meta["dims"].items()}
        return cls(config, params, dims)

    # --- элементарные шаги

    @property
    def slope(self) -> float:
        return self.config.leaky_slope

    def gru_params(self) -> GRUParams:
        names = GRUParams.names()
        return GRUParams(**{name: self.params[f"gru.{name}"] for name in names})

    def transform_node(self, x: Tensor, node_type: NodeType) -> Tensor:
        """h = W_A·x без смещения и нелинейности"""
        expected = self.dims.get(node_type)
        if expected is None or x.shape[-1] != expected:
            raise DimensionError(
                f"{node_type.value} features of shape {x.shape} do not match "
                f"bound dim {expected}"
            )
        return affine(self.params[f"W.{node_type.value}"], x)

    def encode(
        self, h_u: Tensor, h_w: Tensor, schema: MetaPathSchema
    ) -> tuple[Tensor, encoders.ConvECache | None]:
        """Кодирование пачки экземпляров выбранным методом"""
        r = self.params[_relation_name(schema)]
        encoder = self.config.encoder
        if encoder is Encoder.TRANSE:
            return encoders.encode_transe(h_u, h_w, r), None
        if encoder is Encoder.ROTATE:
            return encoders.encode_rotate(h_u, h_w, r), None
        return encoders.encode_conve(
            h_u,
            h_w,
            r,
            self.params["conve.kernels"],
            self.params["conve.W_proj"],
            self.params["conve.b_proj"],
            self.config.conve_rows,
            self.slope,
        )

    def aggregate_publisher(self, encoded: Tensor) -> tuple[Tensor, AttentionCache]:
        """Многоголовое внимание по экземплярам News-Publisher-News"""
        return aggregate_attention(
            encoded, self.params["att.ps.a"], self.params["att.ps.W_O"], self.slope
        )

    def aggregate_user_temporal(self, encoded: Tensor) -> tuple[Tensor, list[GRUCache]]:
        """Последнее состояние GRU по хронологическим экземплярам"""
        return aggregate_gru(encoded, self.gru_params())

    def aggregate_user_attention(
        self, encoded: Tensor
    ) -> tuple[Tensor, AttentionCache]:
        """Внимание без учёта порядка для пути через пользователей"""
        return aggregate_attention(
            encoded, self.params["att.pu.a"], self.params["att.pu.W_O"], self.slope
        )

    def semantic_fuse(
        self, HS: Tensor, HU: Tensor
    ) -> tuple[Tensor, FusionCache]:
        """Слияние путей с общими по пачке весами β"""
        return semantic_fuse(
            HS, HU, self.params["sem.M"], self.params["sem.b"], self.params["sem.q"]
        )

    # --- извлечение экземпляров

    def extract(
        self, graph: HeteroGraph, target: str, schema: MetaPathSchema, seed: int
    ) -> list[MetaPathInstance]:
        """Перечисление, выборка и (для PU) хронологическая сортировка"""
        pool = enumerate_instances(graph, target, schema)
        config = self.config
        n = config.ps_samples if schema is MetaPathSchema.PS else config.pu_samples
        sample = sample_instances(
            pool, n, derive_seed(seed, "sample", schema.value, target)
        )
        if schema is MetaPathSchema.PU:
            sample = sort_chronological(sample)
        return sample

    def is_isolated(self, graph: HeteroGraph, target: str) -> bool:
        """Нет экземпляров ни одной схемы"""
        return all(not enumerate_instances(graph, target, s) for s in SCHEMAS)

    # --- прямой проход

    def _forward_path(
        self,
        graph: HeteroGraph,
        bundle: FeatureBundle,
        target: str,
        schema: MetaPathSchema,
        seed: int,
    ) -> PathCache:
        instances = self.extract(graph, target, schema, seed)
        cache = PathCache(schema=schema, instances=instances)
        if not instances:
            cache.output = self.params[f"default.{schema.value}"].copy()
            return cache

        cache.X_u = bundle.matrix([p.u for p in instances], NodeType.NEWS)
        cache.X_w = bundle.matrix([p.w for p in instances], schema.middle_type)
        cache.H_u = self.transform_node(cache.X_u, NodeType.NEWS)
        cache.H_w = self.transform_node(cache.X_w, schema.middle_type)
        cache.encoded, cache.encoder_cache = self.encode(cache.H_u, cache.H_w, schema)

        if schema is MetaPathSchema.PS:
            cache.output, cache.aggregate_cache = self.aggregate_publisher(
                cache.encoded
            )
        elif self.config.temporal_mode is TemporalMode.GRU:
            cache.output, cache.aggregate_cache = self.aggregate_user_temporal(
                cache.encoded
            )
        else:
            cache.output, cache.aggregate_cache = self.aggregate_user_attention(
                cache.encoded
            )
        return cache

    def forward_batch(
        self,
        graph: HeteroGraph,
        bundle: FeatureBundle,
        targets: list[str],
        seed: int,
    ) -> ForwardCache:
        """
        Прямой проход по пачке целевых новостей

        Args:
            graph: Граф
            bundle: Признаки узлов
            targets: Новости пачки (контекст средних для β)
            seed: Зерно выборки экземпляров

        Returns:
            Кэш с представлениями и вероятностями [P_real, P_fake]
        """
        paths = []
        for target in targets:
            bundle.lookup(target, NodeType.NEWS)
            per_path = {
                schema: self._forward_path(graph, bundle, target, schema, seed)
                for schema in SCHEMAS
            }
            if all(cache.uses_default for cache in per_path.values()):
                raise IsolationError(f"news {target!r} has no meta-path instances")
            paths.append(per_path)

        HS = np.stack([p[MetaPathSchema.PS].output for p in paths])
        HU = np.stack([p[MetaPathSchema.PU].output for p in paths])
        embeddings, fusion = self.semantic_fuse(HS, HU)
        logits = affine(self.params["cls.W"], embeddings, self.params["cls.b"])
        probs = softmax(logits)
        return ForwardCache(
            version=self.params.version,
            targets=list(targets),
            paths=paths,
            fusion=fusion,
            embeddings=embeddings,
            logits=logits,
            probs=probs,
        )

    def forward(
        self, graph: HeteroGraph, bundle: FeatureBundle, target: str, seed: int
    ) -> tuple[Tensor, Tensor]:
        """Представление и вероятности одной новости (пачка из одной)"""
        cache = self.forward_batch(graph, bundle, [target], seed)
        return cache.embeddings[0], cache.probs[0]

    # --- обратный проход

    def backward(self, d_logits: Tensor, cache: ForwardCache) -> None:
        """
        Накопление градиентов всех параметров

        Args:
            d_logits: Градиент потерь по логитам, (B, 2)
            cache: Кэш прямого прохода при текущих параметрах
        """
        if cache.version != self.params.version:
            raise StateError("forward cache is stale: parameters changed since forward")
        if d_logits.shape != cache.logits.shape:
            raise DimensionError(
                f"upstream gradient {d_logits.shape} != logits {cache.logits.shape}"
            )
        p = self.params
        dW_c, d_emb, db_c = affine_backward(d_logits, p["cls.W"], cache.embeddings)
        p.accumulate("cls.W", dW_c)
        p.accumulate("cls.b", db_c)

        dHS, dHU, dM, db, dq = semantic_fuse_backward(
            d_emb, cache.fusion, p["sem.M"], p["sem.q"]
        )
        p.accumulate("sem.M", dM)
        p.accumulate("sem.b", db)
        p.accumulate("sem.q", dq)

        for i, per_path in enumerate(cache.paths):
            self._backward_path(dHS[i], per_path[MetaPathSchema.PS])
            self._backward_path(dHU[i], per_path[MetaPathSchema.PU])
        cache.consumed = True

    def _backward_path(self, g: Tensor, cache: PathCache) -> None:
        p = self.params
        schema = cache.schema
        if cache.uses_default:
            p.accumulate(f"default.{schema.value}", g)
            return

        if schema is MetaPathSchema.PS:
            d_enc, d_a, d_W_O = aggregate_attention_backward(
                g, cache.aggregate_cache, p["att.ps.a"], p["att.ps.W_O"], self.slope
            )
            p.accumulate("att.ps.a", d_a)
            p.accumulate("att.ps.W_O", d_W_O)
        elif self.config.temporal_mode is TemporalMode.GRU:
            d_enc, grads = aggregate_gru_backward(
                g, cache.aggregate_cache, self.gru_params()
            )
            for name, value in grads.items():
                p.accumulate(f"gru.{name}", value)
        else:
            d_enc, d_a, d_W_O = aggregate_attention_backward(
                g, cache.aggregate_cache, p["att.pu.a"], p["att.pu.W_O"], self.slope
            )
            p.accumulate("att.pu.a", d_a)
            p.accumulate("att.pu.W_O", d_W_O)

        r = p[_relation_name(schema)]
        encoder = self.config.encoder
        if encoder is Encoder.TRANSE:
            dH_u, dH_w, dr = encoders.encode_transe_backward(d_enc)
        elif encoder is Encoder.ROTATE:
            dH_u, dH_w, dr = encoders.encode_rotate_backward(
                d_enc, cache.H_u, cache.H_w, r
            )
        else:
            dH_u, dH_w, dr, conv_grads = encoders.encode_conve_backward(
                d_enc,
                cache.encoder_cache,
                p["conve.kernels"],
                p["conve.W_proj"],
                self.config.conve_rows,
                self.slope,
            )
            for name, value in conv_grads.items():
                p.accumulate(f"conve.{name}", value)
        p.accumulate(_relation_name(schema), dr)
        p.accumulate(f"W.{NodeType.NEWS.value}", dH_u.T @ cache.X_u)
        p.accumulate(f"W.{schema.middle_type.value}", dH_w.T @ cache.X_w)


@dataclass
class Prediction:
    """Представления и вероятности набора новостей"""

    ids: list[str]
    embeddings: Tensor
    probs: Tensor
    skipped: list[str] = field(default_factory=list)
    """Изолированные новости без экземпляров"""

    def p_real(self) -> Tensor:
        return self.probs[:, 0]

    def as_dict(self) -> dict[str, Tensor]:
        return {node_id: self.embeddings[i] for i, node_id in enumerate(self.ids)}


def batches(ids: list[str], batch_size: int) -> list[list[str]]:
    """Разбиение на минибатчи; 0 означает один батч"""
    if batch_size <= 0 or batch_size >= len(ids):
        return [list(ids)] if ids else []
    return [ids[i : i + batch_size] for i in range(0, len(ids), batch_size)]


def embed(
    network: MetaPathNetwork,
    graph: HeteroGraph,
    bundle: FeatureBundle,
    ids: list[str],
    seed: int,
    batch_size: int = 32,
) -> Prediction:
    """
    Представления новостей без обучения (оценка, экспорт, индуктивный вывод)

    Args:
        network: Сеть с замороженными параметрами
        graph: Граф (может содержать новости, не виденные при обучении)
        bundle: Признаки
        ids: Новости
        seed: Зерно выборки экземпляров
        batch_size: Размер батча для средних β

    Returns:
        Предсказания; изолированные новости пропускаются
    """
    kept, skipped = [], []
    for node_id in ids:
        (skipped if network.is_isolated(graph, node_id) else kept).append(node_id)
    if skipped:
        logger.warning(f"Skipping {len(skipped)} isolated news: {skipped[:5]}")
    d = network.config.d_hidden
    embeddings = np.zeros((len(kept), d))
    probs = np.zeros((len(kept), 2))
    offset = 0
    for batch in batches(kept, batch_size):
        cache = network.forward_batch(graph, bundle, batch, seed)
        embeddings[offset : offset + len(batch)] = cache.embeddings
        probs[offset : offset + len(batch)] = cache.probs
        offset += len(batch)
    return Prediction(ids=kept, embeddings=embeddings, probs=probs, skipped=skipped)
