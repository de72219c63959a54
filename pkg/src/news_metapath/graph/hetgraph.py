"""
Гетерогенный граф издателей, новостей и пользователей
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import IntEnum, StrEnum
from pathlib import Path

from ..errors import (
    ConflictError,
    DataError,
    IngestionError,
    NotFoundError,
    PreconditionError,
    SchemaError,
)

logger = logging.getLogger(__name__)


class NodeType(StrEnum):
    """Типы узлов"""

    PUBLISHER = "publisher"
    NEWS = "news"
    USER = "user"


class EdgeType(StrEnum):
    """Типы рёбер"""

    CITATION = "citation"
    PUBLICATION = "publication"
    TWEET = "tweet"
    FOLLOWING = "following"

    @property
    def signature(self) -> tuple[NodeType, NodeType]:
        """Типы (источник, приёмник)"""
        return _SIGNATURES[self]

    @property
    def timed(self) -> bool:
        """Несёт ли ребро метку времени"""
        return self is EdgeType.TWEET


_SIGNATURES = {
    EdgeType.CITATION: (NodeType.PUBLISHER, NodeType.PUBLISHER),
    EdgeType.PUBLICATION: (NodeType.PUBLISHER, NodeType.NEWS),
    EdgeType.TWEET: (NodeType.USER, NodeType.NEWS),
    EdgeType.FOLLOWING: (NodeType.USER, NodeType.USER),
}


class Label(IntEnum):
    """Метка новости"""

    REAL = 0
    FAKE = 1


@dataclass(frozen=True)
class Edge:
    """Направленное типизированное ребро"""

    src: str
    dst: str
    type: EdgeType
    timestamp: int | None = None


class HeteroGraph:
    """Типизированный граф с метками времени на твитах"""

    def __init__(self) -> None:
        self._nodes: dict[str, NodeType] = {}
        self._index: dict[str, int] = {}
        self._edges: list[Edge] = []
        self._incidence: dict[tuple[str, EdgeType], list[int]] = defaultdict(list)
        self._labels: dict[str, Label] = {}
        self._frozen = False
        self._memo: dict = {}

    # --- построение

    def add_node(self, node_id: str, node_type: NodeType | str) -> None:
        """
        Регистрация узла

        Args:
            node_id: Непрозрачный строковый идентификатор
            node_type: Тип узла
        """
        self._check_mutable()
        if node_id in self._nodes:
            raise ConflictError(f"node {node_id!r} already exists")
        self._nodes[node_id] = NodeType(node_type)
        self._index[node_id] = len(self._index)

    def add_edge(
        self,
        src: str,
        dst: str,
        edge_type: EdgeType | str,
        timestamp: int | None = None,
    ) -> None:
        """
        Добавление ребра с проверкой сигнатуры и правила меток времени

        Args:
            src: Источник
            dst: Приёмник
            edge_type: Тип отношения
            timestamp: Секунды от эпохи (только для твитов)
        """
        self._check_mutable()
        edge_type = EdgeType(edge_type)
        for endpoint in (src, dst):
            if endpoint not in self._nodes:
                raise NotFoundError(f"edge endpoint {endpoint!r} does not exist")
        expected = edge_type.signature
        actual = (self._nodes[src], self._nodes[dst])
        if actual != expected:
            raise SchemaError(
                f"{edge_type.value} edge needs {expected[0].value}->"
                f"{expected[1].value}, got {actual[0].value}->{actual[1].value}"
            )
        if edge_type.timed and timestamp is None:
            raise SchemaError(f"{edge_type.value} edge {src}->{dst} needs a timestamp")
        if not edge_type.timed and timestamp is not None:
            raise SchemaError(
                f"{edge_type.value} edge {src}->{dst} must not carry a timestamp"
            )
        edge = Edge(src, dst, edge_type, None if timestamp is None else int(timestamp))
        position = len(self._edges)
        self._edges.append(edge)
        self._incidence[(src, edge_type)].append(position)
        if dst != src:
            self._incidence[(dst, edge_type)].append(position)

    def set_label(self, news_id: str, label: Label | int) -> None:
        """Метка реальности для новостного узла"""
        self._check_mutable()
        if self.node_type(news_id) is not NodeType.NEWS:
            raise SchemaError(f"labels attach only to news nodes, got {news_id!r}")
        self._labels[news_id] = Label(label)

    def freeze(self) -> HeteroGraph:
        """Запрет дальнейших изменений"""
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def memo(self) -> dict:
        """Кэш производных структур; пополняется только у замороженного графа"""
        return self._memo

    def copy(self) -> HeteroGraph:
        """Изменяемая копия графа"""
        clone = HeteroGraph()
        for node_id, node_type in self._nodes.items():
            clone.add_node(node_id, node_type)
        for edge in self._edges:
            clone.add_edge(edge.src, edge.dst, edge.type, edge.timestamp)
        for news_id, label in self._labels.items():
            clone.set_label(news_id, label)
        return clone

    def _check_mutable(self) -> None:
        if self._frozen:
            raise PreconditionError("graph is frozen")

    # --- запросы

    def node_type(self, node_id: str) -> NodeType:
        try:
            return self._nodes[node_id]
        except KeyError as e:
            raise NotFoundError(f"node {node_id!r} does not exist") from e

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def index_of(self, node_id: str) -> int:
        """Плотный индекс узла в порядке добавления"""
        if node_id not in self._index:
            raise NotFoundError(f"node {node_id!r} does not exist")
        return self._index[node_id]

    def nodes(self, node_type: NodeType | None = None) -> list[str]:
        """Идентификаторы узлов (в порядке добавления)"""
        return [
            node_id
            for node_id, t in self._nodes.items()
            if node_type is None or t is node_type
        ]

    @property
    def edges(self) -> list[Edge]:
        return list(self._edges)

    def incident(self, node_id: str, edge_type: EdgeType) -> list[Edge]:
        """Рёбра типа `edge_type`, касающиеся узла"""
        return [self._edges[i] for i in self._incidence.get((node_id, edge_type), [])]

    def neighbors(self, node_id: str, edge_type: EdgeType) -> list[str]:
        """Соседи узла по отношению (без учёта направления)"""
        return [
            edge.dst if edge.src == node_id else edge.src
            for edge in self.incident(node_id, edge_type)
        ]

    @property
    def labels(self) -> dict[str, Label]:
        return dict(self._labels)

    def label(self, news_id: str) -> Label | None:
        return self._labels.get(news_id)

    def labeled_news(self) -> list[str]:
        """Размеченные новости в порядке добавления"""
        return [n for n in self._nodes if n in self._labels]

    def node_types_present(self) -> set[NodeType]:
        return set(self._nodes.values())

    def edge_types_present(self) -> set[EdgeType]:
        return {edge.type for edge in self._edges}

    def counts(self) -> tuple[int, int]:
        """(число узлов, число рёбер)"""
        return len(self._nodes), len(self._edges)

    def validate(self) -> list[str]:
        """
        Повторная проверка всех инвариантов

        Returns:
            Список нарушений (пустой для корректного графа)
        """
        violations = []
        for i, edge in enumerate(self._edges):
            if edge.src not in self._nodes or edge.dst not in self._nodes:
                violations.append(f"edge {i}: missing endpoint")
                continue
            if (self._nodes[edge.src], self._nodes[edge.dst]) != edge.type.signature:
                violations.append(f"edge {i}: signature violation")
            if edge.type.timed != (edge.timestamp is not None):
                violations.append(f"edge {i}: timestamp rule violation")
        for news_id in self._labels:
            if self._nodes.get(news_id) is not NodeType.NEWS:
                violations.append(f"label on non-news node {news_id}")
        if self._nodes and (
            len(self.node_types_present()) + len(self.edge_types_present()) <= 2
        ):
            violations.append("graph is not heterogeneous (|A| + |R| <= 2)")
        return violations

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HeteroGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and sorted(self._edges, key=_edge_key)
            == sorted(other._edges, key=_edge_key)
            and self._labels == other._labels
        )

    __hash__ = None  # type: ignore[assignment]


def _edge_key(edge: Edge) -> tuple:
    return (edge.src, edge.dst, edge.type.value, edge.timestamp or 0)


def project_subgraph(
    graph: HeteroGraph, types: set[NodeType] | frozenset[NodeType]
) -> HeteroGraph:
    """
    Подграф на узлах заданных типов

    Args:
        graph: Исходный граф
        types: Сохраняемые типы узлов

    Returns:
        Замороженный подграф с рёбрами между сохранёнными узлами и их метками
    """
    if not types:
        raise PreconditionError("projection needs at least one node type")
    key = frozenset(NodeType(t) for t in types)
    if graph.frozen and key in graph.memo:
        return graph.memo[key]

    sub = HeteroGraph()
    for node_id in graph.nodes():
        if graph.node_type(node_id) in key:
            sub.add_node(node_id, graph.node_type(node_id))
    for edge in graph.edges:
        if sub.has_node(edge.src) and sub.has_node(edge.dst):
            sub.add_edge(edge.src, edge.dst, edge.type, edge.timestamp)
    for news_id, label in graph.labels.items():
        if sub.has_node(news_id):
            sub.set_label(news_id, label)
    sub.freeze()
    if graph.frozen:
        graph.memo[key] = sub
    return sub


# --- формат JSON-lines

_NODE_KEYS = {"kind", "id", "type", "label"}
_EDGE_KEYS = {"kind", "src", "dst", "type", "ts", "bidirectional"}


def load_graph(path: str | Path) -> HeteroGraph:
    """
    Чтение графа из файла JSON-lines

    Args:
        path: Путь к файлу

    Returns:
        Замороженный граф
    """
    graph = HeteroGraph()
    try:
        handle = open(path, "rb")
    except OSError as e:
        raise IngestionError(f"cannot open {path}: {e}") from e
    with handle:
        for line_no, raw in enumerate(handle, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise IngestionError(f"invalid UTF-8: {e.reason}", line=line_no) from e
            if not line.strip():
                continue
            try:
                _ingest_record(graph, json.loads(line))
            except json.JSONDecodeError as e:
                raise IngestionError(f"invalid JSON: {e.msg}", line=line_no) from e
            except (DataError, KeyError, TypeError, ValueError) as e:
                raise IngestionError(str(e), line=line_no) from e
    violations = graph.validate()
    if violations:
        raise IngestionError(f"graph invariants violated: {violations[0]}")
    nodes, edges = graph.counts()
    logger.info(f"Loaded graph from {path}: {nodes} nodes, {edges} edges")
    return graph.freeze()


def _integral(value: object, name: str) -> int:
    numeric = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not numeric or not float(value).is_integer():
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _ingest_record(graph: HeteroGraph, record: dict) -> None:
    if not isinstance(record, dict):
        raise ValueError("record must be a JSON object")
    kind = record.get("kind")
    if kind == "node":
        unknown = set(record) - _NODE_KEYS
        if unknown:
            raise ValueError(f"unknown keys: {sorted(unknown)}")
        try:
            node_type = NodeType(record["type"])
        except (KeyError, ValueError) as e:
            raise SchemaError(f"unknown node type {record.get('type')!r}") from e
        graph.add_node(str(record["id"]), node_type)
        if record.get("label") is not None:
            graph.set_label(str(record["id"]), _integral(record["label"], "label"))
    elif kind == "edge":
        unknown = set(record) - _EDGE_KEYS
        if unknown:
            raise ValueError(f"unknown keys: {sorted(unknown)}")
        try:
            edge_type = EdgeType(record["type"])
        except (KeyError, ValueError) as e:
            raise SchemaError(f"unknown edge type {record.get('type')!r}") from e
        src, dst, ts = str(record["src"]), str(record["dst"]), record.get("ts")
        if ts is not None:
            ts = _integral(ts, "ts")
        graph.add_edge(src, dst, edge_type, ts)
        if record.get("bidirectional"):
            graph.add_edge(dst, src, edge_type, ts)
    else:
        raise ValueError(f"unknown record kind {kind!r}")


def save_graph(graph: HeteroGraph, path: str | Path) -> None:
    """
    Запись графа в JSON-lines (узлы, затем рёбра)

    Args:
        graph: Граф
        path: Путь к файлу
    """
    with open(path, "w", encoding="utf-8") as handle:
        for record in iter_records(graph):
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def iter_records(graph: HeteroGraph):
    """Канонические записи графа в порядке файла"""
    for node_id in graph.nodes():
        record = {"kind": "node", "id": node_id, "type": graph.node_type(node_id).value}
        label = graph.label(node_id)
        if label is not None:
            record["label"] = int(label)
        yield record
    for edge in graph.edges:
        record = {
            "kind": "edge",
            "src": edge.src,
            "dst": edge.dst,
            "type": edge.type.value,
        }
        if edge.timestamp is not None:
            record["ts"] = edge.timestamp
        yield record
