import dataclasses
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from news_metapath.errors import (
    AUCUndefinedError,
    CoverageError,
    DataError,
    IngestionError,
    PreconditionError,
)
from news_metapath.graph.hetgraph import Label
from news_metapath.services.evaluation import (
    MetricsReport,
    ablate_encoder,
    ablate_temporal,
    auc_bruteforce,
    compute_metrics,
    evaluate_network,
    evaluate_repeated,
    export_embeddings,
    load_embeddings,
    probe_logreg,
    summarize_runs,
    sweep_training_ratio,
)
from news_metapath.services.trainer import Split, split_dataset, train_model

R, F = Label.REAL, Label.FAKE


def test_metrics_of_three_scores():
    # Act
    report = compute_metrics([0.9, 0.8, 0.3], [R, F, F])

    # Assert
    assert (report.tp, report.fp, report.tn, report.fn) == (1, 1, 1, 0)
    assert report.precision == pytest.approx(0.5)
    assert report.recall == pytest.approx(1.0)
    assert report.f1 == pytest.approx(2 / 3)
    assert report.accuracy == pytest.approx(2 / 3)
    assert report.auc == 1.0
    assert report.positive_class == "real"


def test_score_at_threshold_counts_as_real():
    report = compute_metrics([0.5, 0.2], [R, F], threshold=0.5)

    assert report.tp == 1
    assert report.accuracy == 1.0


def test_no_predicted_positives_gives_zero_precision():
    report = compute_metrics([0.1, 0.2], [R, F])

    assert report.precision == 0.0
    assert report.f1 == 0.0


labelled_scores = st.lists(
    st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), st.sampled_from([R, F])),
    min_size=2,
    max_size=40,
)


@settings(max_examples=100)
@given(labelled_scores)
def test_rank_auc_matches_pairwise_count(pairs):
    # Arrange
    scores = [s for s, _ in pairs]
    labels = [y for _, y in pairs]
    assume(R in labels and F in labels)

    # Act
    report = compute_metrics(scores, labels)

    # Assert
    assert report.auc == pytest.approx(auc_bruteforce(scores, labels), abs=1e-12)
    assert 0.0 <= report.auc <= 1.0


@settings(max_examples=50)
@given(labelled_scores)
def test_auc_is_symmetric_under_label_swap(pairs):
    scores = np.array([s for s, _ in pairs])
    labels = [y for _, y in pairs]
    assume(R in labels and F in labels)
    swapped = [F if y is R else R for y in labels]

    auc = compute_metrics(scores, labels).auc

    assert compute_metrics(-scores, swapped).auc == pytest.approx(auc, abs=1e-12)
    assert compute_metrics(scores, swapped).auc == pytest.approx(1 - auc, abs=1e-12)


def test_single_class_auc_is_undefined():
    with pytest.raises(AUCUndefinedError) as info:
        compute_metrics([0.9, 0.4], [R, R])

    report = info.value.report
    assert math.isnan(report.auc)
    assert report.recall == 0.5
    assert (report.n_pos, report.n_neg) == (2, 0)


def test_scores_and_labels_must_align():
    with pytest.raises(PreconditionError):
        compute_metrics([0.1, 0.2, 0.3], [R, F])


def separable_embeddings(n=30, seed=0):
    rng = np.random.default_rng(seed)
    embeddings, labels = {}, {}
    for i in range(n):
        label = R if i % 2 else F
        center = 3.0 if label is R else -3.0
        embeddings[f"n{i}"] = center + rng.normal(scale=0.5, size=4)
        labels[f"n{i}"] = label
    return embeddings, labels


def test_probe_separates_separable_embeddings():
    # Arrange
    embeddings, labels = separable_embeddings()
    split = split_dataset(labels, 0.6, seed=1)

    # Act
    report = probe_logreg(embeddings, labels, split, seed=1)

    # Assert
    assert report.auc == 1.0
    assert report.accuracy == 1.0
    assert report.n_pos + report.n_neg == len(split.test)


def test_logreg_on_shuffled_labels_is_at_chance():
    # Arrange
    embeddings, labels = separable_embeddings(n=400)
    aucs = []

    for seed in range(10):
        rng = np.random.default_rng(seed)
        values = rng.permutation([int(y) for y in labels.values()])
        shuffled = {n: Label(int(y)) for n, y in zip(labels, values)}
        split = split_dataset(shuffled, 0.6, seed=seed)

        # Act
        aucs.append(probe_logreg(embeddings, shuffled, split, seed=seed).auc)

    # Assert
    assert np.mean(aucs) == pytest.approx(0.5, abs=0.1)


def test_probe_needs_every_split_embedding():
    embeddings, labels = separable_embeddings()
    split = split_dataset(labels, 0.6, seed=1)
    del embeddings[split.test[0]]

    with pytest.raises(CoverageError) as info:
        probe_logreg(embeddings, labels, split, seed=1)
    assert info.value.missing == [split.test[0]]


def test_probe_needs_both_classes_in_training():
    embeddings, labels = separable_embeddings()
    reals = [n for n in labels if labels[n] is R]
    fakes = [n for n in labels if labels[n] is F]
    split = Split(train=reals[:5], val=[], test=reals[5:8] + fakes[:3], seed=0)

    with pytest.raises(PreconditionError):
        probe_logreg(embeddings, labels, split, seed=0)


def test_embedding_export_survives_reload(tmp_path):
    # Arrange
    rng = np.random.default_rng(4)
    embeddings = {"n1": rng.normal(size=3), "x,2": rng.normal(size=3) * 1e-200}
    path = tmp_path / "embeddings.csv"

    # Act
    export_embeddings(embeddings, path, {"n1": F})
    loaded, labels = load_embeddings(path)

    # Assert
    assert list(loaded) == ["n1", "x,2"]
    for node_id, vector in embeddings.items():
        assert np.array_equal(loaded[node_id], vector)
    assert labels == {"n1": F}
    assert path.read_text().splitlines()[0] == "id,label,e0,e1,e2"


def test_load_embeddings_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("name,value\na,1\n")

    with pytest.raises(IngestionError):
        load_embeddings(path)


def test_export_needs_embeddings(tmp_path):
    with pytest.raises(PreconditionError):
        export_embeddings({}, tmp_path / "e.csv")


def report_with_auc(auc):
    return MetricsReport(
        precision=auc, recall=auc, f1=auc, accuracy=auc, auc=auc, n_pos=5, n_neg=5
    )


def test_summary_of_three_runs():
    summary = summarize_runs([report_with_auc(a) for a in (0.8, 0.9, 1.0)], [1, 2, 3])

    assert summary.mean["auc"] == pytest.approx(0.9)
    # t(0.975, 2) * 0.1 / sqrt(3)
    assert summary.half_width["auc"] == pytest.approx(0.2484138, rel=1e-6)
    assert summary.seeds == [1, 2, 3]


def test_summary_of_one_run_has_no_interval():
    summary = summarize_runs([report_with_auc(0.7)], [9])

    assert summary.mean["f1"] == 0.7
    assert math.isnan(summary.half_width["f1"])


def test_evaluate_network_reports_on_test_news(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    graph, bundle, split = tiny_corpus
    result = train_model(graph, bundle, split, tiny_model_config, tiny_train_config)

    report = evaluate_network(result.network, graph, bundle, split.test, seed=5)

    assert report.n_pos + report.n_neg <= len(split.test)
    assert 0.0 <= report.accuracy <= 1.0


def test_temporal_ablation_trains_both_arms(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    # Arrange
    graph, bundle, split = tiny_corpus

    # Act
    ablation = ablate_temporal(
        graph, bundle, split, tiny_model_config, tiny_train_config
    )

    # Assert
    assert [arm.name for arm in ablation.arms()] == ["gru", "attention"]
    curves = ablation.validation_curves()
    assert len(curves["gru"]) == len(ablation.gru.history)
    assert len(curves["attention"]) == len(ablation.attention.history)


def test_encoder_ablation_covers_every_encoder(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    graph, bundle, split = tiny_corpus
    config = dataclasses.replace(tiny_train_config, max_epochs=1)

    arms = ablate_encoder(graph, bundle, split, tiny_model_config, config)

    assert [arm.name for arm in arms] == ["transe", "rotate", "conve"]
    assert all(len(arm.history) == 1 for arm in arms)


def test_ratio_sweep_keeps_requested_order(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    graph, bundle, _ = tiny_corpus
    config = dataclasses.replace(tiny_train_config, max_epochs=1)

    rows = sweep_training_ratio(graph, bundle, [0.7, 0.5], tiny_model_config, config)

    assert [row.ratio for row in rows] == [0.7, 0.5]
    assert [row.n_train for row in rows] == [28, 20]


def test_ratio_sweep_rejects_degenerate_split(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    graph, bundle, _ = tiny_corpus

    with pytest.raises(DataError, match="0.95"):
        sweep_training_ratio(
            graph, bundle, [0.95], tiny_model_config, tiny_train_config
        )


def test_repeated_evaluation_uses_derived_seeds(
    tiny_corpus, tiny_model_config, tiny_train_config
):
    graph, bundle, _ = tiny_corpus
    config = dataclasses.replace(tiny_train_config, max_epochs=1)

    summary = evaluate_repeated(graph, bundle, tiny_model_config, config, runs=2)

    assert len(summary.runs) == 2
    assert len(set(summary.seeds)) == 2
    assert set(summary.mean) == {"precision", "recall", "f1", "accuracy", "auc"}
