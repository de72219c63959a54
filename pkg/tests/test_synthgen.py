import dataclasses

import numpy as np
import pytest
from scipy import stats

from news_metapath.config.settings import (
    Regime,
    SynthConfig,
    build_section,
    read_config_file,
    write_config,
)
from news_metapath.errors import ConfigurationError
from news_metapath.graph.featurize import load_features
from news_metapath.graph.hetgraph import EdgeType, Label, NodeType, load_graph
from news_metapath.services.synthgen import (
    SECONDS_PER_HOUR,
    describe,
    generate,
    instigator_count,
    instigator_share,
    publication_hours,
    write_synthetic,
)


@pytest.fixture
def timing_config(tiny_synth_config):
    return dataclasses.replace(
        tiny_synth_config, n_users=120, base_rate=15.0, instigator_frac=0.1
    )


def instigators_of(graph, config):
    users = graph.nodes(NodeType.USER)
    degree = {u: len(graph.neighbors(u, EdgeType.FOLLOWING)) for u in users}
    ranked = sorted(users, key=lambda u: (-degree[u], u))
    return set(ranked[: instigator_count(config)])


def instigator_delays(graph, config, label):
    published = publication_hours(config)
    instigators = instigators_of(graph, config)
    return np.array(
        [
            edge.timestamp / SECONDS_PER_HOUR - published[edge.dst]
            for edge in graph.edges
            if edge.type is EdgeType.TWEET
            and edge.src in instigators
            and graph.label(edge.dst) is label
        ]
    )


def test_generation_is_deterministic(tiny_synth_config):
    graph_a, bundle_a = generate(tiny_synth_config)
    graph_b, bundle_b = generate(tiny_synth_config)

    assert graph_a == graph_b
    for node_type, table in bundle_a.tables.items():
        other = bundle_b.tables[node_type].vectors
        for node_id, vector in table.vectors.items():
            assert np.array_equal(other[node_id], vector)


def test_corpus_shape(tiny_synth_config):
    # Act
    graph, bundle = generate(tiny_synth_config)

    # Assert
    assert graph.validate() == []
    assert len(graph.nodes(NodeType.NEWS)) == 40
    assert len(graph.nodes(NodeType.USER)) == 60
    assert len(graph.nodes(NodeType.PUBLISHER)) == 4
    assert sum(label is Label.FAKE for label in graph.labels.values()) == 16
    for news_id in graph.nodes(NodeType.NEWS):
        assert len(graph.incident(news_id, EdgeType.PUBLICATION)) == 1
    assert EdgeType.CITATION in graph.edge_types_present()
    assert bundle.dims() == {
        NodeType.PUBLISHER: 8,
        NodeType.NEWS: 8,
        NodeType.USER: 8,
    }


def test_tweets_follow_publication(tiny_synth_config):
    graph, _ = generate(tiny_synth_config)
    published = publication_hours(tiny_synth_config)
    horizon = tiny_synth_config.horizon_hours

    for edge in graph.edges:
        if edge.type is EdgeType.TWEET:
            delay = edge.timestamp / SECONDS_PER_HOUR - published[edge.dst]
            assert -1e-3 <= delay <= horizon + 1e-3


def test_fake_news_draw_instigators_in_spikes(timing_config):
    # Arrange
    graph, _ = generate(timing_config)
    period = timing_config.spike_period_hours

    # Act
    fake = instigator_delays(graph, timing_config, Label.FAKE)
    real = instigator_delays(graph, timing_config, Label.REAL)

    # Assert
    assert fake.size > 20
    assert np.all(fake >= period - 1e-3)
    assert np.all(np.mod(fake + 1e-3, period) < 5.0)
    assert np.mean(real >= period) < 0.2


def test_misinformation_timing_does_not_depend_on_class(timing_config):
    config = dataclasses.replace(timing_config, regime=Regime.MISINFORMATION)
    graph, _ = generate(config)

    fake = instigator_delays(graph, config, Label.FAKE)
    real = instigator_delays(graph, config, Label.REAL)

    assert stats.ks_2samp(fake, real).pvalue > 1e-4


def instigator_shares(graph, config, label):
    instigators = instigators_of(graph, config)
    shares = []
    for news_id, y in graph.labels.items():
        if y is not label:
            continue
        users = [
            e.src
            for e in graph.edges
            if e.type is EdgeType.TWEET and e.dst == news_id
        ]
        if users:
            shares.append(np.mean([u in instigators for u in users]))
    return np.array(shares)


def test_instigator_share_depends_on_class_only_with_signal(tiny_synth_config):
    # Arrange
    signal = dataclasses.replace(tiny_synth_config, signal_strength=1.0)

    # Act
    silent = {instigator_share(tiny_synth_config, fake) for fake in (True, False)}
    loud = [instigator_share(signal, fake) for fake in (True, False)]

    # Assert
    assert silent == {tiny_synth_config.instigator_share}
    assert loud[0] > tiny_synth_config.instigator_share > loud[1]


def test_misinformation_engagers_do_not_depend_on_class(timing_config):
    config = dataclasses.replace(timing_config, regime=Regime.MISINFORMATION)
    graph, _ = generate(config)

    fake = instigator_shares(graph, config, Label.FAKE)
    real = instigator_shares(graph, config, Label.REAL)

    assert stats.ks_2samp(fake, real).pvalue > 1e-4


def test_biased_publishers_take_every_fake(tiny_synth_config):
    config = dataclasses.replace(tiny_synth_config, publisher_bias_strength=1.0)
    graph, _ = generate(config)
    biased = {"p0", "p1"}

    for news_id, label in graph.labels.items():
        (publisher,) = graph.neighbors(news_id, EdgeType.PUBLICATION)
        assert (publisher in biased) == (label is Label.FAKE)


def test_signal_strength_separates_news_features(tiny_synth_config):
    config = dataclasses.replace(tiny_synth_config, signal_strength=1.0)
    graph, bundle = generate(config)
    vectors = bundle.tables[NodeType.NEWS].vectors

    fake = np.mean([vectors[n] for n, y in graph.labels.items() if y is Label.FAKE], 0)
    real = np.mean([vectors[n] for n, y in graph.labels.items() if y is Label.REAL], 0)

    assert np.linalg.norm(fake - real) > 1.0


def test_description_round_trips_through_config_file(tmp_path, tiny_synth_config):
    # Arrange
    path = tmp_path / "synth.cfg"
    description = describe(tiny_synth_config)

    # Act
    write_config(path, description)
    restored = build_section(SynthConfig, read_config_file(path))

    # Assert
    assert restored == tiny_synth_config
    assert description["n_fake"] == 16
    assert description["n_real"] == 24
    assert description["n_spikes"] == 4
    assert description["expected_tweets"] == 320.0


def test_written_corpus_reloads_exactly(tmp_path, tiny_synth_config):
    graph, bundle = generate(tiny_synth_config)

    written = write_synthetic(tmp_path, graph, bundle)

    assert [p.relative_to(tmp_path).as_posix() for p in written] == [
        "graph.jsonl",
        "features/news.csv",
        "features/publisher.csv",
        "features/user.csv",
    ]
    assert load_graph(tmp_path / "graph.jsonl") == graph
    for node_type, table in bundle.tables.items():
        loaded = load_features(tmp_path / "features" / f"{node_type}.csv", node_type)
        for node_id, vector in table.vectors.items():
            assert np.array_equal(loaded.vectors[node_id], vector)


def test_horizon_must_cover_two_periods():
    with pytest.raises(ConfigurationError):
        SynthConfig(horizon_hours=100, spike_period_hours=72)
