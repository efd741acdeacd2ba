"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime bounds are pinned here; helper oracles live in
conftest. Everything is seeded, so these are deterministic.
"""

import json
import os
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import (
    make_dictionary,
    make_encoding,
    make_grid,
    naive_distances,
    random_encoding,
)
from vcfewshot.classifiers import NeighborhoodSpec, classify_lh, fit_likelihood, similarity
from vcfewshot.encoding import compute_distances, encode, search_threshold, threshold_grid
from vcfewshot.episodes import EpisodeSpec, run_benchmark
from vcfewshot.errors import StoreFormatError
from vcfewshot.mixture import FitConfig, assign_hard, fit_vmfm
from vcfewshot.store import FeatureStore, read_store, save_store, write_store
from vcfewshot.synthetic import (
    make_planted_store,
    sample_uniform_sphere,
    sample_vmf,
)
from vcfewshot.vmf import vmf_log_density


@pytest.fixture()
def announce(capsys):
    @contextmanager
    def _announce(name: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"[FAIL] {name}")
            raise
        with capsys.disabled():
            print(f"[PASS] {name} ({time.perf_counter() - start:.1f}s)")

    return _announce


def test_c1_em_monotonicity(announce):
    with announce("1 EM monotonicity (54 randomized fits, slack 1e-8)"):
        start = time.perf_counter()
        fits = 0
        for dim in (4, 16, 64):
            for num_vcs in (2, 5, 20):
                for seed in range(6):
                    rng = np.random.default_rng(1000 * dim + 10 * num_vcs + seed)
                    x = sample_uniform_sphere(15 * num_vcs + 40, dim, rng)
                    fitted = fit_vmfm(x, FitConfig(num_vcs=num_vcs, seed=seed))
                    trace = fitted.ll_trace
                    slack = 1e-8 * np.maximum(1.0, np.abs(trace[:-1]))
                    assert np.all(np.diff(trace) >= -slack), (dim, num_vcs, seed)
                    fits += 1
        assert fits == 54
        assert time.perf_counter() - start < 30.0


def test_c2_vmf_recovery(announce):
    with announce("2 vMF recovery (d=16, kappa=50, 3x300)"):
        start = time.perf_counter()
        rng = np.random.default_rng(42)
        true_means = sample_uniform_sphere(3, 16, rng)
        samples = np.concatenate([
            sample_vmf(mu, 50.0, 300, rng) for mu in true_means])
        labels = np.repeat(np.arange(3), 300)
        fitted = fit_vmfm(samples, FitConfig(num_vcs=3, seed=0))
        cost = 1.0 - fitted.means @ true_means.T
        rows, cols = linear_sum_assignment(cost)
        assert np.all(cost[rows, cols] < 0.05)
        remap = np.empty(3, dtype=int)
        remap[rows] = cols
        accuracy = float((remap[assign_hard(samples, fitted)] == labels).mean())
        assert accuracy >= 0.95
        assert time.perf_counter() - start < 10.0


def test_c3_density_closed_form_and_normalization(announce):
    with announce("3 log-Bessel density: d=3 closed form 1e-10, MC 1.0+-0.02"):
        mu = np.array([0.0, 0.0, 1.0])
        for kappa in (0.1, 1.0, 10.0, 100.0, 1e4):
            log_sinh = kappa + np.log1p(-np.exp(-2.0 * kappa)) - np.log(2.0)
            want = np.log(kappa) - np.log(4.0 * np.pi) - log_sinh + kappa
            got = vmf_log_density(mu, mu, kappa)
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want)), kappa
        rng = np.random.default_rng(12345)
        samples = sample_uniform_sphere(100_000, 3, rng)
        estimate = np.exp(vmf_log_density(samples, mu, 1.0)).mean() * 4 * np.pi
        assert abs(estimate - 1.0) <= 0.02


def test_c4_encoding_oracle_equivalence(announce):
    with announce("4 encoding vs naive oracles (200 instances, 1e-6)"):
        rng = np.random.default_rng(7)
        grid_points = threshold_grid(0.001)
        for _ in range(200):
            h, w = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            c, v = int(rng.integers(2, 6)), int(rng.integers(2, 5))
            dictionary = make_dictionary(sample_uniform_sphere(v, c, rng))
            grid = make_grid(rng.standard_normal((h, w, c)))
            tensor = compute_distances(grid, dictionary)
            want = naive_distances(grid, dictionary)
            assert np.max(np.abs(tensor.values.astype(np.float64) - want)) < 1e-6

            threshold = float(rng.uniform(0, 2))
            enc = encode(tensor, threshold)
            bits = np.empty((h, w, v), dtype=bool)
            fire_sum = 0
            covered = 0
            for r in range(h):
                for col in range(w):
                    any_fire = 0
                    for k in range(v):
                        bits[r, col, k] = float(tensor.values[r, col, k]) < threshold
                        fire_sum += int(bits[r, col, k])
                        any_fire = max(any_fire, int(bits[r, col, k]))
                    covered += any_fire
            assert np.array_equal(enc.bits, bits)
            assert abs(enc.coverage - covered / (h * w)) < 1e-6
            assert abs(enc.firerate - fire_sum / (h * w)) < 1e-6

            tensors = [tensor] + [
                compute_distances(make_grid(rng.standard_normal((h, w, c))),
                                  dictionary)
                for _ in range(int(rng.integers(0, 2)))
            ]
            found = search_threshold(tensors, coverage_target=0.8, step=0.001)
            coverages = [np.mean((t.values.astype(np.float64) < found).any(axis=2))
                         for t in tensors]
            assert np.mean(coverages) >= 0.8
            idx = int(np.searchsorted(grid_points, found))
            assert grid_points[idx] == found
            if idx > 0:
                prev = grid_points[idx - 1]
                coverages = [
                    np.mean((t.values.astype(np.float64) < prev).any(axis=2))
                    for t in tensors]
                assert np.mean(coverages) < 0.8


def test_c5_kernel_properties(announce):
    with announce("5 kernel: symmetry/self/bounds/radius on 500 cases"):
        rng = np.random.default_rng(11)
        for _ in range(500):
            a = random_encoding(rng, h=4, w=4, v=3,
                                density=float(rng.uniform(0.05, 0.5)))
            b = random_encoding(rng, h=4, w=4, v=3,
                                density=float(rng.uniform(0.05, 0.5)))
            radius = int(rng.integers(0, 3))
            ab = similarity(a, b, NeighborhoodSpec(radius))
            assert ab == similarity(b, a, NeighborhoodSpec(radius))
            assert 0.0 <= ab <= 1.0
            assert similarity(a, a, NeighborhoodSpec(radius)) == 1.0
            by_radius = [similarity(a, b, NeighborhoodSpec(r)) for r in range(4)]
            assert all(y >= x for x, y in zip(by_radius, by_radius[1:]))

        base = np.zeros((3, 3, 1), dtype=bool)
        base[0, 0, 0] = base[1, 1, 0] = True
        shifted = np.zeros((3, 3, 1), dtype=bool)
        shifted[0, 1, 0] = shifted[1, 2, 0] = True
        a, b = make_encoding(base), make_encoding(shifted)
        assert similarity(a, b, NeighborhoodSpec(0)) < 1.0
        assert similarity(a, b, NeighborhoodSpec(1)) == 1.0


def test_c6_likelihood_exhaustive_equivalence(announce):
    with announce("6 likelihood classifier: 256/256 queries match direct form"):
        rng = np.random.default_rng(23)
        support = [(random_encoding(rng, h=2, w=2, v=2, density=0.4), cat)
                   for cat in (2, 0, 9) for _ in range(2)]
        model = fit_likelihood(support, sigma=1.2)
        mismatches = 0
        for code in range(256):
            bits = np.array([(code >> i) & 1 for i in range(8)],
                            dtype=bool).reshape(2, 2, 2)
            query = make_encoding(bits)
            best_cat, best_score = None, -np.inf
            for cat in sorted({c for _, c in support}):
                theta = model.theta_for(cat)
                score = float(np.prod(np.where(bits, theta, 1 - theta)))
                if score > best_score:
                    best_cat, best_score = cat, score
            if classify_lh(query, model) != best_cat:
                mismatches += 1
        assert mismatches == 0


def test_c7_planted_parts_end_to_end(announce):
    with announce("7 planted-parts end-to-end (5w5s >=0.90, control ~0.20)"):
        start = time.perf_counter()
        store = make_planted_store(n_categories=10, images_per_category=20,
                                   height=6, width=6, channels=16,
                                   parts_per_category=4, kappa=30.0, seed=1)
        for classifier in ("nn", "likelihood"):
            spec = EpisodeSpec(ways=5, shots=5, trials=20, seed=42, num_vcs=20,
                               queries=15, classifier=classifier)
            report = run_benchmark(store, spec)
            assert report.mean_accuracy >= 0.90, classifier

            control_spec = EpisodeSpec(ways=5, shots=5, trials=20, seed=42,
                                       num_vcs=20, queries=15,
                                       classifier=classifier,
                                       shuffle_support_labels=True)
            control = run_benchmark(store, control_spec)
            se = max(np.std(control.accuracies, ddof=1) / np.sqrt(20), 1e-9)
            assert abs(control.mean_accuracy - 0.20) <= 3 * se, (
                classifier, control.mean_accuracy, se)

        # same store, different ways/shots, no retraining of anything
        for ways, shots in ((6, 3), (8, 4)):
            for classifier in ("nn", "likelihood"):
                spec = EpisodeSpec(ways=ways, shots=shots, trials=5, seed=7,
                                   num_vcs=20, queries=15,
                                   classifier=classifier)
                report = run_benchmark(store, spec)
                assert report.mean_accuracy >= 0.5, (ways, shots, classifier)
        assert time.perf_counter() - start < 120.0


def test_c8_cli_determinism(announce, tmp_path):
    with announce("8 cmd_eval determinism: bytes equal, VC_THREADS irrelevant"):
        store = make_planted_store(n_categories=5, images_per_category=8,
                                   height=4, width=4, channels=8,
                                   parts_per_category=3, seed=3)
        store_path = tmp_path / "store.vcfs"
        save_store(store, store_path)
        outputs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "8")):
            out = tmp_path / f"report_{name}.json"
            env = dict(os.environ, VC_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "vcfewshot", "eval", str(store_path),
                 "--ways", "3", "--shots", "2", "--queries", "3",
                 "--trials", "4", "--num-vcs", "8", "--seed", "5",
                 "--classifier", "likelihood", "--out", str(out)],
                capture_output=True, env=env)
            assert proc.returncode == 0, proc.stderr.decode()
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0] == outputs[2]
        json.loads(outputs[0])


def test_c9_store_round_trip_and_corruption(announce):
    with announce("9 VCFS: random round trips bit-exact, corruption is named"):
        import io

        rng = np.random.default_rng(31)
        for i in range(30):
            grids = []
            n_cats = int(rng.integers(1, 4))
            cats = {int(c): f"c{c}" for c in range(n_cats)}
            for g in range(int(rng.integers(0, 5))):
                h, w, c = (int(rng.integers(1, 4)) for _ in range(3))
                grids.append(make_grid(
                    rng.standard_normal((h, w, c)) * 10.0 ** float(rng.integers(-3, 4)),
                    image_id=f"s{i}g{g}",
                    category_id=int(rng.integers(0, n_cats))))
            store = FeatureStore(layer_name=f"layer{i}", categories=cats,
                                 grids=tuple(grids))
            buf = io.BytesIO()
            write_store(store, buf)
            raw = buf.getvalue()
            back = read_store(raw)
            assert back == store
            for a, b in zip(back.grids, store.grids):
                assert a.data.tobytes() == b.data.tobytes()

            for _ in range(20):
                kind = rng.integers(0, 3)
                if kind == 0 and len(raw) > 1:
                    corrupted = raw[:int(rng.integers(0, len(raw)))]
                elif kind == 1:
                    pos = int(rng.integers(0, len(raw)))
                    corrupted = (raw[:pos]
                                 + bytes([raw[pos] ^ (1 << rng.integers(0, 8))])
                                 + raw[pos + 1:])
                else:
                    corrupted = raw + bytes(rng.integers(0, 256,
                                                         size=3).tolist())
                try:
                    read_store(corrupted)
                except StoreFormatError:
                    pass  # named failure is the contract
