"""N-way K-shot episode sampling, per-trial pipeline, and benchmark reports.

Each trial: sample N categories and disjoint support/query images from a
seeded stream; learn the concept dictionary from the pooled *support*
feature vectors only; grid-search the encoding threshold on the support
distance tensors; encode everything; classify every query with the chosen
model. Per-trial seeds come from a splittable scheme
(``SeedSequence(seed).spawn(trials)``), so trials are reproducible and
independent of how many workers execute them.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import TextIO

import numpy as np

from .classifiers import (
    NeighborhoodSpec,
    classify_lh,
    fit_likelihood,
    similarity,
)
from .encoding import compute_distances, encode, search_threshold
from .errors import InputError
from .mixture import FitConfig, VcDictionary, fit_vmfm
from .store import FeatureStore, collect_vectors

CLASSIFIERS = ("nn", "likelihood")


@dataclass(frozen=True)
class EpisodeSpec:
    """Everything that defines a benchmark run."""

    ways: int
    shots: int
    trials: int
    seed: int
    num_vcs: int
    queries: int = 15
    coverage_target: float = 0.8
    threshold_step: float = 0.001
    sigma: float = 1.2
    nbhd_radius: int = 1
    classifier: str = "nn"
    shared_vcs: bool = False
    shuffle_support_labels: bool = False

    def validate(self) -> None:
        for name in ("ways", "shots", "trials", "num_vcs", "queries"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.classifier not in CLASSIFIERS:
            raise InputError(
                f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.nbhd_radius < 0:
            raise InputError("nbhd_radius must be non-negative")


@dataclass(frozen=True)
class TrialResult:
    accuracy: float
    threshold: float
    dictionary: VcDictionary


@dataclass(frozen=True)
class EpisodeReport:
    """Per-trial accuracies plus the normal-approximation 95% interval."""

    spec: EpisodeSpec
    accuracies: tuple[float, ...]
    thresholds: tuple[float, ...]
    mean_accuracy: float
    ci95_halfwidth: float


def eligible_categories(store: FeatureStore, spec: EpisodeSpec) -> list[int]:
    """Sorted ids of categories holding at least shots + queries images."""
    needed = spec.shots + spec.queries
    counts = store.image_counts()
    return sorted(cid for cid, n in counts.items() if n >= needed)


def ci95_halfwidth(values) -> float:
    """1.96 * sample std / sqrt(n); a singleton's std is defined as 0."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    return float(1.96 * arr.std(ddof=1) / np.sqrt(arr.size))


@dataclass(frozen=True)
class TrialSample:
    """One trial's category draw and support/query split."""

    categories: tuple[int, ...]
    support_ids: tuple[str, ...]
    support_labels: tuple[int, ...]
    query_ids: tuple[str, ...]
    query_labels: tuple[int, ...]


def sample_trial(store: FeatureStore, spec: EpisodeSpec,
                 rng: np.random.Generator) -> TrialSample:
    """Draw N categories uniformly, then disjoint support/query images.

    Picks are made from id-sorted per-category lists, so the split depends
    only on the seed and the set of image ids, never on grid order or data.
    """
    eligible = eligible_categories(store, spec)
    if len(eligible) < spec.ways:
        raise InputError(
            f"need {spec.ways} categories with >= {spec.shots + spec.queries} "
            f"images, store has {len(eligible)}")
    chosen = rng.choice(np.array(eligible), size=spec.ways, replace=False)

    by_category: dict[int, list[str]] = {int(c): [] for c in chosen}
    for grid in store.grids:
        if grid.category_id in by_category:
            by_category[grid.category_id].append(grid.image_id)

    support_ids: list[str] = []
    support_labels: list[int] = []
    query_ids: list[str] = []
    query_labels: list[int] = []
    for cid in chosen:
        ids = sorted(by_category[int(cid)])
        picks = rng.choice(len(ids), size=spec.shots + spec.queries,
                           replace=False)
        support_ids.extend(ids[i] for i in picks[:spec.shots])
        support_labels.extend([int(cid)] * spec.shots)
        query_ids.extend(ids[i] for i in picks[spec.shots:])
        query_labels.extend([int(cid)] * spec.queries)
    assert not set(support_ids) & set(query_ids)

    if spec.shuffle_support_labels:
        perm = rng.permutation(len(support_labels))
        support_labels = [support_labels[i] for i in perm]

    return TrialSample(
        categories=tuple(int(c) for c in chosen),
        support_ids=tuple(support_ids),
        support_labels=tuple(support_labels),
        query_ids=tuple(query_ids),
        query_labels=tuple(query_labels),
    )


def _nn_predict(query, support_encodings, labels, nbhd) -> int:
    """Nearest-neighbor vote tolerating all-zero encodings.

    The kernel is undefined on empty encodings; an empty query (or an
    episode whose supports are all empty) falls back to the earliest
    support's label, matching the kernel's own tie rule.
    """
    if query.num_set == 0:
        return labels[0]
    scores = [
        similarity(query, enc, nbhd) if enc.num_set > 0 else 0.0
        for enc in support_encodings
    ]
    return labels[int(np.argmax(scores))]


def run_episode(
    store: FeatureStore,
    spec: EpisodeSpec,
    trial_seed,
    dictionary: VcDictionary | None = None,
) -> TrialResult:
    """Run one N-way K-shot trial and return its accuracy and threshold.

    Args:
        store: Feature store to sample from.
        spec: Episode configuration.
        trial_seed: Seed material for this trial (int or SeedSequence).
        dictionary: Pre-fitted concept dictionary; None (the default) fits
            one from this trial's pooled support vectors, so queries never
            influence concept learning.
    """
    spec.validate()
    rng = np.random.default_rng(trial_seed)
    sample = sample_trial(store, spec, rng)
    support_labels = list(sample.support_labels)

    em_seed = int(rng.integers(0, 2 ** 63 - 1))
    if dictionary is None:
        support_set = set(sample.support_ids)
        pooled = collect_vectors(store, lambda image_id: image_id in support_set)
        dictionary = fit_vmfm(
            pooled.vectors, FitConfig(num_vcs=spec.num_vcs, seed=em_seed))

    support_grids = [store.grid(i) for i in sample.support_ids]
    query_grids = [store.grid(i) for i in sample.query_ids]
    support_tensors = [compute_distances(g, dictionary) for g in support_grids]
    threshold = search_threshold(
        support_tensors, spec.coverage_target, spec.threshold_step)
    support_encodings = [encode(t, threshold) for t in support_tensors]
    query_encodings = [
        encode(compute_distances(g, dictionary), threshold) for g in query_grids]

    nbhd = NeighborhoodSpec(spec.nbhd_radius)
    if spec.classifier == "nn":
        predictions = [
            _nn_predict(q, support_encodings, support_labels, nbhd)
            for q in query_encodings
        ]
    else:
        model = fit_likelihood(
            zip(support_encodings, support_labels), sigma=spec.sigma)
        predictions = [classify_lh(q, model) for q in query_encodings]

    accuracy = float(np.mean(
        np.array(predictions) == np.array(sample.query_labels)))
    return TrialResult(accuracy=accuracy, threshold=threshold,
                       dictionary=dictionary)


def _worker_count(trials: int) -> int:
    # Trials are numpy-light enough that the GIL makes threads a net loss
    # by default; VC_THREADS opts in and caps the pool size.
    env = os.environ.get("VC_THREADS", "").strip()
    if env:
        return max(1, min(trials, int(env)))
    return 1


def run_benchmark(store: FeatureStore, spec: EpisodeSpec) -> EpisodeReport:
    """Run ``spec.trials`` independent episodes and aggregate accuracy.

    Deterministic for a fixed (store, spec): per-trial seeds are spawned
    from the spec seed, results are assembled in trial order, and the
    worker count (capped by the VC_THREADS env var) affects speed only.
    """
    spec.validate()
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trials)

    shared = None
    if spec.shared_vcs:
        pooled = collect_vectors(store)
        shared = fit_vmfm(
            pooled.vectors, FitConfig(num_vcs=spec.num_vcs, seed=spec.seed))

    def one(index: int) -> TrialResult:
        return run_episode(store, spec, seeds[index], dictionary=shared)

    workers = _worker_count(spec.trials)
    if workers == 1:
        results = [one(i) for i in range(spec.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(spec.trials)))

    accuracies = np.array([r.accuracy for r in results])
    return EpisodeReport(
        spec=spec,
        accuracies=tuple(float(a) for a in accuracies),
        thresholds=tuple(r.threshold for r in results),
        mean_accuracy=float(accuracies.mean()),
        ci95_halfwidth=ci95_halfwidth(accuracies),
    )


def report_to_json(report: EpisodeReport) -> str:
    payload = {
        "spec": asdict(report.spec),
        "per_trial": [
            {"accuracy": a, "threshold": t}
            for a, t in zip(report.accuracies, report.thresholds)
        ],
        "mean_accuracy": report.mean_accuracy,
        "ci95_halfwidth": report.ci95_halfwidth,
    }
    return json.dumps(payload, indent=2) + "\n"


def write_report_csv(report: EpisodeReport, destination: TextIO) -> None:
    destination.write("trial,accuracy,threshold\n")
    for i, (a, t) in enumerate(zip(report.accuracies, report.thresholds)):
        destination.write(f"{i},{a!r},{t!r}\n")
