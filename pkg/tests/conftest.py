import numpy as np
import pytest

from news_metapath.config.settings import (
    Encoder,
    ModelConfig,
    SynthConfig,
    TemporalMode,
    TrainConfig,
)
from news_metapath.graph.featurize import FeatureTable, bind
from news_metapath.graph.hetgraph import EdgeType, HeteroGraph, Label, NodeType
from news_metapath.model.network import MetaPathNetwork
from news_metapath.model.numerics import grad_check
from news_metapath.model.params import ParamStore
from news_metapath.services.synthgen import generate
from news_metapath.services.trainer import split_dataset

FEATURE_DIMS = {NodeType.PUBLISHER: 5, NodeType.NEWS: 6, NodeType.USER: 4}


def build_toy_graph() -> HeteroGraph:
    """
    Two publishers, four news, three users

    Target n2 has News-Publisher-News instances through p1 (n1, n3) and
    News-User-News instances through u1 (n4, t=100) and u2 (n3, t=300).
    """
    graph = HeteroGraph()
    for p in ("p1", "p2"):
        graph.add_node(p, NodeType.PUBLISHER)
    for n in ("n1", "n2", "n3", "n4"):
        graph.add_node(n, NodeType.NEWS)
    for u in ("u1", "u2", "u3"):
        graph.add_node(u, NodeType.USER)

    for p, n in (("p1", "n1"), ("p1", "n2"), ("p1", "n3"), ("p2", "n4")):
        graph.add_edge(p, n, EdgeType.PUBLICATION)
    graph.add_edge("p1", "p2", EdgeType.CITATION)
    for u, n, ts in (
        ("u1", "n2", 100),
        ("u1", "n4", 50),
        ("u2", "n2", 300),
        ("u2", "n3", 120),
        ("u3", "n1", 10),
        ("u3", "n4", 20),
    ):
        graph.add_edge(u, n, EdgeType.TWEET, ts)
    graph.add_edge("u1", "u2", EdgeType.FOLLOWING)
    graph.add_edge("u3", "u1", EdgeType.FOLLOWING)

    for n, label in (
        ("n1", Label.REAL),
        ("n2", Label.FAKE),
        ("n3", Label.REAL),
        ("n4", Label.FAKE),
    ):
        graph.set_label(n, label)
    return graph


def check_gradients(store: ParamStore, loss_and_grads, eps: float = 1e-5) -> float:
    """
    Run grad_check on a function returning (loss, {name: gradient})
    """

    def f(params: ParamStore) -> float:
        loss, grads = loss_and_grads(params)
        for name, grad in grads.items():
            params.accumulate(name, grad)
        return loss

    return grad_check(f, store, eps=eps)


def random_tables(graph: HeteroGraph, seed: int = 0) -> list[FeatureTable]:
    rng = np.random.default_rng(seed)
    return [
        FeatureTable(
            node_type=node_type,
            dim=dim,
            vectors={n: rng.normal(size=dim) for n in graph.nodes(node_type)},
        )
        for node_type, dim in FEATURE_DIMS.items()
    ]


@pytest.fixture
def toy_graph():
    """
    Fixture for the frozen four-news example graph
    """
    return build_toy_graph().freeze()


@pytest.fixture
def toy_bundle(toy_graph):
    """
    Fixture for random features bound to the example graph
    """
    return bind(toy_graph, random_tables(toy_graph))


def small_model_config(**changes) -> ModelConfig:
    values = dict(
        d_hidden=4,
        heads=2,
        d_semantic=3,
        conve_rows=2,
        conve_kernel=2,
        conve_channels=2,
        ps_samples=4,
        pu_samples=8,
    )
    values.update(changes)
    return ModelConfig(**values)


@pytest.fixture
def small_config():
    """
    Fixture for a tiny network configuration
    """
    return small_model_config()


@pytest.fixture
def make_network(toy_bundle):
    """
    Fixture for building freshly initialized networks on the example graph
    """

    def factory(
        encoder: Encoder = Encoder.TRANSE,
        temporal_mode: TemporalMode = TemporalMode.GRU,
        seed: int = 7,
    ) -> MetaPathNetwork:
        config = small_model_config(encoder=encoder, temporal_mode=temporal_mode)
        return MetaPathNetwork.initialize(config, toy_bundle.dims(), seed)

    return factory


@pytest.fixture
def tiny_synth_config():
    """
    Fixture for a small synthetic corpus that trains in seconds
    """
    return SynthConfig(
        n_news=40,
        n_users=60,
        n_publishers=4,
        base_rate=8.0,
        horizon_hours=200,
        spike_period_hours=48,
        news_dim=8,
        user_dim=8,
        publisher_dim=8,
        seed=3,
    )


@pytest.fixture
def tiny_train_config():
    """
    Fixture for a short training run
    """
    return TrainConfig(lr=1e-2, max_epochs=3, patience=2, batch_size=8, seed=5)


@pytest.fixture
def tiny_model_config():
    """
    Fixture for the network used on the small synthetic corpus
    """
    return ModelConfig(
        d_hidden=8,
        heads=2,
        d_semantic=4,
        conve_rows=2,
        conve_kernel=2,
        conve_channels=2,
        ps_samples=4,
        pu_samples=8,
    )


@pytest.fixture
def tiny_corpus(tiny_synth_config):
    """
    Fixture for the small synthetic graph, its features and a 70/15/15 split
    """
    graph, bundle = generate(tiny_synth_config)
    return graph, bundle, split_dataset(graph.labels, 0.7, seed=5)
