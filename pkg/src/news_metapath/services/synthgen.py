"""
Генератор размеченных синтетических графов новостей

Фейки режима дезинформации отличаются от настоящих новостей только
временем вовлечённости подстрекателей: те приходят всплесками, кратными
периоду. Без классового сигнала состав вовлечённых пользователей
распределён одинаково в обоих классах. В режиме мисинформации время
вовлечённости у классов одинаково.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np

from ..config.settings import Regime, SynthConfig, section_to_mapping
from ..graph.featurize import (
    FeatureBundle,
    FeatureTable,
    bind,
    hash_features,
    save_features,
)
from ..graph.hetgraph import EdgeType, HeteroGraph, Label, NodeType, save_graph
from ..seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

VOCABULARY_SIZE = 500
PROFILE_TOKENS = 16
SECONDS_PER_HOUR = 3600


def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def fake_count(config: SynthConfig) -> int:
    """round(fake_frac·n_news) с округлением половин вверх"""
    return math.floor(config.fake_frac * config.n_news + 0.5)


def instigator_count(config: SynthConfig) -> int:
    if config.instigator_frac == 0.0:
        return 0
    return max(1, math.floor(config.instigator_frac * config.n_users + 0.5))


def spike_count(config: SynthConfig) -> int:
    """Число всплесков внутри горизонта"""
    return config.horizon_hours // config.spike_period_hours


def instigator_share(config: SynthConfig, is_fake: bool) -> float:
    """
    Ожидаемая доля твитов подстрекателей на новость

    Без классового сигнала доля одинакова для обоих классов, так что
    состав вовлечённых пользователей не зависит от метки.
    """
    s = config.signal_strength
    if s == 0.0:
        return config.instigator_share
    if is_fake:
        return min(1.0, config.instigator_share * (1.0 + s))
    return config.instigator_share / (1.0 + s)


def publication_hours(config: SynthConfig) -> dict[str, float]:
    """Час публикации каждой новости"""
    rng = make_rng(config.seed, "publish")
    news = _ids("n", config.n_news)
    hours = rng.uniform(0.0, float(config.horizon_hours), size=len(news))
    return dict(zip(news, hours.tolist()))


def _profiles(rng: np.random.Generator, ids: list[str], kind: str) -> dict[str, str]:
    tokens = rng.integers(0, VOCABULARY_SIZE, size=(len(ids), PROFILE_TOKENS))
    return {
        node_id: " ".join([kind, *(f"w{t}" for t in row)])
        for node_id, row in zip(ids, tokens)
    }


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _preferential_edges(ids: list[str], m: int, seed: int) -> list[tuple[str, str]]:
    """Рёбра «новый узел -> старый» графа Барабаши-Альберт"""
    if len(ids) <= m:
        return []
    social = nx.barabasi_albert_graph(len(ids), m, seed=seed)
    edges = sorted((max(a, b), min(a, b)) for a, b in social.edges())
    return [(ids[src], ids[dst]) for src, dst in edges]


class SyntheticNewsGenerator:
    """Построение графа и признаков по конфигурации"""

    def __init__(self, config: SynthConfig):
        self.config = config

    def _assign_publishers(
        self, news: list[str], publishers: list[str], fake: set[str]
    ) -> dict[str, str]:
        config = self.config
        rng = make_rng(config.seed, "publishers")
        biased = publishers[: len(publishers) // 2]
        unbiased = publishers[len(publishers) // 2 :]
        strength = config.publisher_bias_strength
        assignment = {}
        for n in news:
            if not biased or strength == 0.0:
                pool = publishers
            else:
                p_biased = 0.5 + strength / 2 if n in fake else 0.5 - strength / 2
                pool = biased if rng.random() < p_biased else unbiased
            assignment[n] = pool[rng.integers(len(pool))]
        return assignment

    def _engagements(
        self,
        news: list[str],
        fake: set[str],
        instigators: list[str],
        regular: list[str],
    ) -> list[tuple[str, str, int]]:
        """Твиты (пользователь, новость, время в секундах)"""
        config = self.config
        rng = make_rng(config.seed, "engagement")
        published = publication_hours(config)
        spikes = spike_count(config)
        tweets = []
        for n in news:
            is_fake = n in fake
            share = instigator_share(config, is_fake)
            total = 1 + int(rng.poisson(config.base_rate - 1.0))
            k = int(rng.binomial(total, share)) if instigators else 0
            k = min(k, len(instigators))
            engaged_inst = (
                rng.choice(len(instigators), size=k, replace=False) if k else []
            )
            n_reg = min(total - k, len(regular))
            engaged_reg = rng.choice(len(regular), size=n_reg, replace=False)

            spiking = is_fake and config.regime is Regime.DISINFORMATION
            for i in engaged_inst:
                if spiking:
                    spike = int(rng.integers(1, spikes + 1))
                    delay = spike * config.spike_period_hours + abs(
                        rng.normal(0.0, config.spike_width_hours)
                    )
                else:
                    delay = rng.exponential(config.decay_hours)
                tweets.append((instigators[i], n, delay))
            for i in engaged_reg:
                tweets.append((regular[i], n, rng.exponential(config.decay_hours)))

        horizon = config.horizon_hours
        result = []
        for user, n, delay in tweets:
            hours = published[n] + min(delay, horizon)
            result.append((user, n, int(round(hours * SECONDS_PER_HOUR))))
        return result

    def _features(
        self,
        publishers: list[str],
        news: list[str],
        users: list[str],
        fake: set[str],
        instigators: list[str],
    ) -> list[FeatureTable]:
        config = self.config
        rng = make_rng(config.seed, "profiles")
        hash_seed = derive_seed(config.seed, "hash")
        publisher_table = hash_features(
            _profiles(rng, publishers, "publisher"),
            config.publisher_dim,
            hash_seed,
            NodeType.PUBLISHER,
        )
        news_table = hash_features(
            _profiles(rng, news, "news"), config.news_dim, hash_seed, NodeType.NEWS
        )
        user_table = hash_features(
            _profiles(rng, users, "user"), config.user_dim, hash_seed, NodeType.USER
        )

        if config.signal_strength > 0:
            direction = _unit(make_rng(config.seed, "signal"), config.news_dim)
            for n in news:
                sign = 1.0 if n in fake else -1.0
                news_table.vectors[n] = (
                    news_table.vectors[n] + sign * config.signal_strength * direction
                )
        offset = _unit(make_rng(config.seed, "instigator"), config.user_dim)
        for u in instigators:
            user_table.vectors[u] = (
                user_table.vectors[u] + config.instigator_offset * offset
            )
        return [publisher_table, news_table, user_table]

    def generate(self) -> tuple[HeteroGraph, FeatureBundle]:
        """
        Граф и признаки

        Returns:
            Замороженный граф и привязанный к нему набор признаков
        """
        config = self.config
        publishers = _ids("p", config.n_publishers)
        news = _ids("n", config.n_news)
        users = _ids("u", config.n_users)

        graph = HeteroGraph()
        for node_type, ids in (
            (NodeType.PUBLISHER, publishers),
            (NodeType.NEWS, news),
            (NodeType.USER, users),
        ):
            for node_id in ids:
                graph.add_node(node_id, node_type)

        order = make_rng(config.seed, "labels").permutation(len(news))
        fake = {news[i] for i in order[: fake_count(config)]}
        for n in news:
            graph.set_label(n, Label.FAKE if n in fake else Label.REAL)

        for n, p in self._assign_publishers(news, publishers, fake).items():
            graph.add_edge(p, n, EdgeType.PUBLICATION)
        for src, dst in _preferential_edges(
            publishers, 1, derive_seed(config.seed, "citation")
        ):
            graph.add_edge(src, dst, EdgeType.CITATION)

        following = _preferential_edges(users, 2, derive_seed(config.seed, "following"))
        for src, dst in following:
            graph.add_edge(src, dst, EdgeType.FOLLOWING)
        degree = {u: 0 for u in users}
        for src, dst in following:
            degree[src] += 1
            degree[dst] += 1
        ranked = sorted(users, key=lambda u: (-degree[u], u))
        instigators = sorted(ranked[: instigator_count(config)])
        chosen = set(instigators)
        regular = [u for u in users if u not in chosen]

        for user, n, ts in self._engagements(news, fake, instigators, regular):
            graph.add_edge(user, n, EdgeType.TWEET, ts)
        graph.freeze()

        bundle = bind(
            graph, self._features(publishers, news, users, fake, instigators)
        )
        nodes, edges = graph.counts()
        logger.info(
            f"Generated {config.regime.value} corpus: {nodes} nodes, {edges} edges, "
            f"{len(fake)} fake of {len(news)} news"
        )
        return graph, bundle


def generate(config: SynthConfig) -> tuple[HeteroGraph, FeatureBundle]:
    """Синтетический граф и признаки; полностью определяется конфигурацией"""
    return SyntheticNewsGenerator(config).generate()


def describe(config: SynthConfig) -> dict[str, Any]:
    """Параметры генератора и ожидаемые размеры корпуса"""
    n_fake = fake_count(config)
    return {
        **section_to_mapping(config),
        "n_fake": n_fake,
        "n_real": config.n_news - n_fake,
        "n_instigators": instigator_count(config),
        "n_spikes": spike_count(config),
        "expected_tweets": config.n_news * config.base_rate,
    }


def write_synthetic(
    out_dir: str | Path, graph: HeteroGraph, bundle: FeatureBundle
) -> list[Path]:
    """
    Запись graph.jsonl и features/{publisher,news,user}.csv

    Returns:
        Пути записанных файлов
    """
    out_dir = Path(out_dir)
    features_dir = out_dir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    graph_path = out_dir / "graph.jsonl"
    save_graph(graph, graph_path)
    written = [graph_path]
    for node_type, table in bundle.tables.items():
        path = features_dir / f"{node_type.value}.csv"
        save_features(table, path)
        written.append(path)
    return written
