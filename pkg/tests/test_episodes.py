"""Episode sampling, per-trial pipeline, aggregation, determinism."""

import json

import numpy as np
import pytest
from scipy.stats import chi2

from vcfewshot.episodes import (
    EpisodeSpec,
    ci95_halfwidth,
    eligible_categories,
    report_to_json,
    run_benchmark,
    run_episode,
    sample_trial,
    write_report_csv,
)
from vcfewshot.errors import InputError
from vcfewshot.mixture import FitConfig, fit_vmfm
from vcfewshot.store import FeatureGrid, FeatureStore, collect_vectors
from vcfewshot.synthetic import make_planted_store, make_random_store


def _twin_store() -> FeatureStore:
    """Two categories, two identical images each, orthogonal directions."""
    grids = []
    for cat in range(2):
        data = np.zeros((2, 2, 4), dtype=np.float32)
        data[:, :, cat] = 1.0
        for copy in range(2):
            grids.append(FeatureGrid(
                image_id=f"c{cat}i{copy}", category_id=cat, data=data,
                rf_stride=1, rf_size=1, rf_offset=0))
    return FeatureStore(layer_name="twin", categories={0: "a", 1: "b"},
                        grids=tuple(grids))


def test_duplicate_query_scores_perfectly():
    store = _twin_store()
    for classifier in ("nn", "likelihood"):
        spec = EpisodeSpec(ways=2, shots=1, trials=1, seed=3, num_vcs=2,
                           queries=1, classifier=classifier)
        result = run_episode(store, spec, 0)
        assert result.accuracy == 1.0


def test_ci_halfwidth_formula():
    assert ci95_halfwidth([0.4, 0.6]) == pytest.approx(0.196, abs=1e-12)
    assert ci95_halfwidth([0.7]) == 0.0
    assert ci95_halfwidth([0.5, 0.5, 0.5]) == 0.0


def test_report_aggregates_and_serializes():
    store = _twin_store()
    spec = EpisodeSpec(ways=2, shots=1, trials=2, seed=1, num_vcs=2, queries=1)
    report = run_benchmark(store, spec)
    assert report.mean_accuracy == pytest.approx(
        float(np.mean(report.accuracies)))
    assert report.ci95_halfwidth == ci95_halfwidth(report.accuracies)
    payload = json.loads(report_to_json(report))
    assert payload["spec"]["ways"] == 2
    assert len(payload["per_trial"]) == 2
    assert {"accuracy", "threshold"} == set(payload["per_trial"][0])
    import io
    buf = io.StringIO()
    write_report_csv(report, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "trial,accuracy,threshold"
    assert len(lines) == 3


def test_benchmark_deterministic():
    store = make_planted_store(n_categories=4, images_per_category=6,
                               height=3, width=3, channels=8,
                               parts_per_category=2, seed=0)
    spec = EpisodeSpec(ways=3, shots=2, trials=3, seed=9, num_vcs=6, queries=2)
    first = run_benchmark(store, spec)
    second = run_benchmark(store, spec)
    assert first.accuracies == second.accuracies
    assert first.thresholds == second.thresholds
    assert report_to_json(first) == report_to_json(second)


def test_worker_count_does_not_change_results(monkeypatch):
    store = make_planted_store(n_categories=4, images_per_category=6,
                               height=3, width=3, channels=8,
                               parts_per_category=2, seed=0)
    spec = EpisodeSpec(ways=3, shots=2, trials=4, seed=9, num_vcs=6, queries=2)
    monkeypatch.setenv("VC_THREADS", "1")
    serial = run_benchmark(store, spec)
    monkeypatch.setenv("VC_THREADS", "3")
    threaded = run_benchmark(store, spec)
    assert serial.accuracies == threaded.accuracies
    assert serial.thresholds == threaded.thresholds


def test_trial_sampling_disjoint_and_exhaustive():
    store = make_random_store(n_categories=3, images_per_category=4, seed=1)
    spec = EpisodeSpec(ways=2, shots=3, trials=1, seed=0, num_vcs=4, queries=1)
    sample = sample_trial(store, spec, np.random.default_rng(5))
    assert not set(sample.support_ids) & set(sample.query_ids)
    assert len(sample.support_ids) == 6
    assert len(sample.query_ids) == 2
    for cid in sample.categories:
        member = [i for i in sample.support_ids if i.startswith(f"r{cid:02d}")]
        assert len(member) == 3


def test_category_sampling_is_uniform():
    store = make_random_store(n_categories=8, images_per_category=3,
                              height=1, width=1, channels=2, seed=2)
    spec = EpisodeSpec(ways=2, shots=1, trials=1, seed=0, num_vcs=1, queries=1)
    rng = np.random.default_rng(123)
    counts = np.zeros(8)
    draws = 400
    for _ in range(draws):
        sample = sample_trial(store, spec, rng)
        for cid in sample.categories:
            counts[cid] += 1
    expected = draws * 2 / 8
    statistic = float(((counts - expected) ** 2 / expected).sum())
    assert chi2.sf(statistic, df=7) > 1e-4


def test_shuffle_flag_permutes_support_labels():
    store = make_random_store(n_categories=4, images_per_category=5, seed=3)
    base = EpisodeSpec(ways=3, shots=2, trials=1, seed=0, num_vcs=4, queries=1)
    shuffled_spec = EpisodeSpec(ways=3, shots=2, trials=1, seed=0, num_vcs=4,
                                queries=1, shuffle_support_labels=True)
    plain = sample_trial(store, base, np.random.default_rng(7))
    shuffled = sample_trial(store, shuffled_spec, np.random.default_rng(7))
    assert plain.support_ids == shuffled.support_ids
    assert sorted(plain.support_labels) == sorted(shuffled.support_labels)
    diffs = [
        sample_trial(store, shuffled_spec, np.random.default_rng(s)).support_labels
        for s in range(10)
    ]
    assert any(d != plain.support_labels for d in diffs)


def test_chance_level_on_structureless_store():
    store = make_random_store(n_categories=5, images_per_category=8,
                              height=3, width=3, channels=6, seed=4)
    spec = EpisodeSpec(ways=4, shots=1, trials=30, seed=11, num_vcs=6,
                       queries=5, classifier="nn")
    report = run_benchmark(store, spec)
    se = max(np.std(report.accuracies, ddof=1) / np.sqrt(spec.trials), 1e-9)
    assert abs(report.mean_accuracy - 0.25) <= 3 * se + 1e-9


def test_queries_never_touch_concept_learning():
    store = make_planted_store(n_categories=4, images_per_category=6,
                               height=3, width=3, channels=8,
                               parts_per_category=2, seed=5)
    spec = EpisodeSpec(ways=2, shots=2, trials=1, seed=0, num_vcs=5, queries=2)
    seed_material = 77
    baseline = run_episode(store, spec, seed_material)

    sample = sample_trial(store, spec, np.random.default_rng(seed_material))
    support = set(sample.support_ids)
    rng = np.random.default_rng(999)
    mutated_grids = []
    for grid in store.grids:
        if grid.image_id in support:
            mutated_grids.append(grid)
        else:
            mutated_grids.append(FeatureGrid(
                image_id=grid.image_id, category_id=grid.category_id,
                data=rng.standard_normal(grid.data.shape).astype(np.float32),
                rf_stride=grid.rf_stride, rf_size=grid.rf_size,
                rf_offset=grid.rf_offset))
    mutated = FeatureStore(layer_name=store.layer_name,
                           categories=store.categories,
                           grids=tuple(mutated_grids))
    other = run_episode(mutated, spec, seed_material)
    assert other.dictionary == baseline.dictionary
    assert other.threshold == baseline.threshold


def test_shared_dictionary_reused():
    store = make_planted_store(n_categories=4, images_per_category=6,
                               height=3, width=3, channels=8,
                               parts_per_category=2, seed=6)
    pooled = collect_vectors(store)
    shared = fit_vmfm(pooled.vectors, FitConfig(num_vcs=6, seed=0))
    spec = EpisodeSpec(ways=2, shots=2, trials=1, seed=0, num_vcs=6, queries=2)
    result = run_episode(store, spec, 5, dictionary=shared)
    assert result.dictionary is shared
    flagged = EpisodeSpec(ways=2, shots=2, trials=2, seed=0, num_vcs=6,
                          queries=2, shared_vcs=True)
    report = run_benchmark(store, flagged)
    assert len(report.accuracies) == 2


def test_insufficient_categories_is_input_error():
    store = make_random_store(n_categories=3, images_per_category=4, seed=7)
    spec = EpisodeSpec(ways=5, shots=2, trials=1, seed=0, num_vcs=4, queries=2)
    with pytest.raises(InputError):
        run_episode(store, spec, 0)
    assert eligible_categories(store, spec) == [0, 1, 2]
    thin = EpisodeSpec(ways=3, shots=3, trials=1, seed=0, num_vcs=4, queries=2)
    with pytest.raises(InputError):
        run_episode(store, thin, 0)


def test_spec_validation():
    with pytest.raises(InputError):
        EpisodeSpec(ways=0, shots=1, trials=1, seed=0, num_vcs=1).validate()
    with pytest.raises(InputError):
        EpisodeSpec(ways=2, shots=1, trials=1, seed=0, num_vcs=1,
                    classifier="svm").validate()
