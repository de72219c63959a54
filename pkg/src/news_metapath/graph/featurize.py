"""
Начальные признаки узлов: файлы эмбеддингов или хэшированный текст
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import ConflictError, CoverageError, IngestionError, PreconditionError
from ..model.numerics import Tensor
from .hetgraph import HeteroGraph, NodeType

logger = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[\W_]+")
_PARSER_LINE = re.compile(r"line (\d+)")
MAX_LISTED_MISSING = 10


@dataclass
class FeatureTable:
    """Векторы признаков одного типа узлов"""

    node_type: NodeType
    """Тип узлов"""

    dim: int
    """Размерность d_A"""

    vectors: dict[str, Tensor] = field(default_factory=dict)
    """Идентификатор узла -> вектор"""

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise PreconditionError("feature dimension must be positive")
        for node_id, vector in self.vectors.items():
            if vector.shape != (self.dim,):
                raise IngestionError(
                    f"vector of {node_id!r} has shape {vector.shape}, "
                    f"expected ({self.dim},)"
                )

    def __len__(self) -> int:
        return len(self.vectors)


def _parser_line(error: Exception) -> int | None:
    match = _PARSER_LINE.search(str(error))
    return int(match.group(1)) if match else None


def load_features(path: str | Path, node_type: NodeType | str) -> FeatureTable:
    """
    Чтение CSV без заголовка: идентификатор, затем значения

    Args:
        path: Путь к файлу
        node_type: Тип узлов в файле

    Returns:
        Таблица признаков
    """
    node_type = NodeType(node_type)
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as e:
        raise IngestionError(f"{path} contains no rows") from e
    except pd.errors.ParserError as e:
        raise IngestionError(f"ragged row: {e}", line=_parser_line(e)) from e
    except OSError as e:
        raise IngestionError(f"cannot open {path}: {e}") from e

    missing = frame.isna() | frame.eq("")
    blank = missing.all(axis=1)
    frame, missing = frame[~blank], missing[~blank]
    if frame.empty:
        raise IngestionError(f"{path} contains no rows")
    if frame.shape[1] < 2:
        raise IngestionError("row has no feature values", line=int(frame.index[0]) + 1)
    dim = frame.shape[1] - 1
    if missing.any(axis=None):
        row_no = int(missing.any(axis=1).idxmax()) + 1
        raise IngestionError(f"ragged or empty row, expected {dim} values", line=row_no)

    ids = frame[0]
    duplicated = ids.duplicated()
    if duplicated.any():
        row_no = int(duplicated.idxmax()) + 1
        raise ConflictError(f"duplicate node id {ids[row_no - 1]!r} at row {row_no}")

    vectors: dict[str, Tensor] = {}
    for row_no, node_id, values in zip(
        frame.index + 1, ids, frame.iloc[:, 1:].to_numpy()
    ):
        try:
            vectors[node_id] = np.array(values, dtype=np.float64)
        except ValueError as e:
            raise IngestionError(f"non-numeric value: {e}", line=int(row_no)) from e
    logger.info(f"Loaded {len(vectors)} {node_type.value} vectors of dim {dim}")
    return FeatureTable(node_type=node_type, dim=dim, vectors=vectors)


def save_features(table: FeatureTable, path: str | Path) -> None:
    """
    Запись таблицы в CSV (17 значащих цифр, точный обратный разбор)

    Args:
        table: Таблица признаков
        path: Путь к файлу
    """
    frame = pd.DataFrame.from_dict(table.vectors, orient="index")
    frame.to_csv(
        path, header=False, float_format="%.17g", lineterminator="\n", encoding="utf-8"
    )


def _token_hash(token: str, seed: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{token}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def hash_text(text: str, dim: int, seed: int) -> Tensor:
    """Хэшированный мешок слов с L2-нормировкой"""
    vector = np.zeros(dim)
    for token in _TOKEN_SPLIT.split(text.lower()):
        if not token:
            continue
        h = _token_hash(token, seed)
        sign = 1.0 if (h >> 63) & 1 else -1.0
        vector[h % dim] += sign
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return vector


def hash_features(
    texts: dict[str, str],
    dim: int,
    seed: int,
    node_type: NodeType | str = NodeType.NEWS,
) -> FeatureTable:
    """
    Детерминированные признаки из текстов

    Args:
        texts: Идентификатор узла -> текст
        dim: Размерность (не меньше 8)
        seed: Зерно хэширования
        node_type: Тип узлов

    Returns:
        Таблица признаков
    """
    if dim < 8:
        raise PreconditionError(f"hashed feature dimension must be >= 8, got {dim}")
    return FeatureTable(
        node_type=NodeType(node_type),
        dim=dim,
        vectors={
            node_id: hash_text(text, dim, seed) for node_id, text in texts.items()
        },
    )


@dataclass
class FeatureBundle:
    """Признаки всех узлов графа, сгруппированные по типам"""

    tables: dict[NodeType, FeatureTable]
    """Таблица на каждый присутствующий тип"""

    def dims(self) -> dict[NodeType, int]:
        """Размерность признаков каждого типа"""
        return {node_type: table.dim for node_type, table in self.tables.items()}

    def dim(self, node_type: NodeType) -> int:
        return self.tables[node_type].dim

    def lookup(self, node_id: str, node_type: NodeType | None = None) -> Tensor:
        """Вектор узла"""
        types = [node_type] if node_type is not None else list(self.tables)
        for t in types:
            table = self.tables.get(t)
            if table is not None and node_id in table.vectors:
                return table.vectors[node_id]
        raise CoverageError([node_id])

    def matrix(self, node_ids: list[str], node_type: NodeType) -> Tensor:
        """Признаки узлов одного типа построчно, (n, d_A)"""
        table = self.tables[node_type]
        if not node_ids:
            return np.zeros((0, table.dim))
        try:
            return np.stack([table.vectors[n] for n in node_ids])
        except KeyError as e:
            raise CoverageError([str(e.args[0])]) from e

    def extended(self, table: FeatureTable) -> FeatureBundle:
        """Новый набор с дополнительными векторами (для индуктивного вывода)"""
        tables = dict(self.tables)
        base = tables.get(table.node_type)
        if base is not None:
            if base.dim != table.dim:
                raise CoverageError([f"{table.node_type.value} dim {table.dim}"])
            merged = dict(base.vectors)
            merged.update(table.vectors)
            table = FeatureTable(table.node_type, base.dim, merged)
        tables[table.node_type] = table
        return FeatureBundle(tables)


def bind(graph: HeteroGraph, tables: list[FeatureTable] | dict) -> FeatureBundle:
    """
    Привязка таблиц признаков к графу с проверкой полноты покрытия

    Args:
        graph: Граф
        tables: По одной таблице на каждый присутствующий тип

    Returns:
        Набор признаков
    """
    if isinstance(tables, dict):
        tables = list(tables.values())
    by_type: dict[NodeType, FeatureTable] = {}
    for table in tables:
        if table.node_type in by_type:
            raise ConflictError(f"two feature tables for {table.node_type.value}")
        by_type[table.node_type] = table

    missing: list[str] = []
    for node_type in sorted(graph.node_types_present()):
        table = by_type.get(node_type)
        vectors = table.vectors if table is not None else {}
        missing.extend(n for n in graph.nodes(node_type) if n not in vectors)
    if missing:
        missing.sort()
        raise CoverageError(missing[:MAX_LISTED_MISSING], total_missing=len(missing))
    bundle = FeatureBundle(
        {t: by_type[t] for t in sorted(graph.node_types_present()) if t in by_type}
    )
    logger.info(
        "Bound features: "
        + ", ".join(f"{t.value}={d}" for t, d in bundle.dims().items())
    )
    return bundle
