"""
Схемы мета-путей и извлечение их экземпляров для целевой новости
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from ..errors import NodeTypeError, PreconditionError, SchemaError
from .hetgraph import EdgeType, HeteroGraph, NodeType, project_subgraph


class MetaPathSchema(StrEnum):
    """News -> Publisher -> News и News -> User -> News"""

    PS = "ps"
    PU = "pu"

    @property
    def middle_type(self) -> NodeType:
        return NodeType.PUBLISHER if self is MetaPathSchema.PS else NodeType.USER

    @property
    def relation(self) -> EdgeType:
        return EdgeType.PUBLICATION if self is MetaPathSchema.PS else EdgeType.TWEET

    @property
    def node_types(self) -> frozenset[NodeType]:
        return frozenset({NodeType.NEWS, self.middle_type})


@dataclass(frozen=True)
class MetaPathInstance:
    """Экземпляр (u, w, v): другая новость, средний узел, целевая новость"""

    u: str
    """Другая новость"""

    w: str
    """Издатель или пользователь"""

    v: str
    """Целевая новость"""

    schema: MetaPathSchema
    """Схема"""

    timestamp: int | None = None
    """Время твита w -> v (только для PU)"""


def enumerate_instances(
    graph: HeteroGraph, target: str, schema: MetaPathSchema
) -> list[MetaPathInstance]:
    """
    Все экземпляры схемы, оканчивающиеся в целевой новости

    Args:
        graph: Граф
        target: Целевая новость
        schema: Схема мета-пути

    Returns:
        Экземпляры, отсортированные по (w, u)
    """
    if graph.node_type(target) is not NodeType.NEWS:
        raise NodeTypeError(f"target {target!r} is not a news node")
    key = ("instances", target, schema)
    if graph.frozen and key in graph.memo:
        return list(graph.memo[key])
    sub = project_subgraph(graph, schema.node_types)
    relation = schema.relation

    # Самый ранний твит определяет время экземпляра
    engaged: dict[str, int | None] = {}
    for edge in sub.incident(target, relation):
        w = edge.src
        if schema is MetaPathSchema.PU:
            previous = engaged.get(w)
            if previous is None or edge.timestamp < previous:
                engaged[w] = edge.timestamp
        else:
            engaged[w] = None

    instances = []
    for w in sorted(engaged):
        others = {edge.dst for edge in sub.incident(w, relation) if edge.src == w}
        for u in sorted(others - {target}):
            instances.append(MetaPathInstance(u, w, target, schema, engaged[w]))
    if graph.frozen:
        graph.memo[key] = tuple(instances)
    return instances


def sample_instances(
    instances: list[MetaPathInstance], n: int, seed: int
) -> list[MetaPathInstance]:
    """
    Равномерная выборка без возвращения

    Args:
        instances: Пул экземпляров
        n: Размер выборки
        seed: Зерно (выводится из корневого зерна и целевой новости)

    Returns:
        Не более n экземпляров в порядке перечисления
    """
    if n < 1:
        raise PreconditionError(f"sample size must be positive, got {n}")
    if len(instances) <= n:
        return list(instances)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(instances), size=n, replace=False))
    return [instances[i] for i in chosen]


def sort_chronological(instances: list[MetaPathInstance]) -> list[MetaPathInstance]:
    """Устойчивая сортировка экземпляров PU по времени"""
    for instance in instances:
        if instance.schema is not MetaPathSchema.PU:
            raise SchemaError("only News-User-News instances carry engagement time")
        if instance.timestamp is None:
            raise SchemaError(f"instance {instance} has no timestamp")
    return sorted(instances, key=lambda instance: instance.timestamp)


def validate_instance(graph: HeteroGraph, instance: MetaPathInstance) -> bool:
    """Проверка типов узлов и существования рёбер (w,u) и (w,v)"""
    schema = instance.schema
    if (
        graph.node_type(instance.u) is not NodeType.NEWS
        or graph.node_type(instance.v) is not NodeType.NEWS
        or graph.node_type(instance.w) is not schema.middle_type
    ):
        return False
    targets = {
        edge.dst for edge in graph.incident(instance.w, schema.relation)
        if edge.src == instance.w
    }
    return instance.u in targets and instance.v in targets
