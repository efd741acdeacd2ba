"""Shared fixtures and naive reference implementations (oracles)."""

import numpy as np

from vcfewshot.encoding import VcEncoding, coverage_of, firerate_of
from vcfewshot.mixture import VcDictionary
from vcfewshot.store import FeatureGrid


def make_dictionary(means: np.ndarray) -> VcDictionary:
    """Dictionary with given unit means and bland kappas/weights."""
    means = np.asarray(means, dtype=np.float64)
    v = means.shape[0]
    return VcDictionary(
        means=means,
        concentrations=np.full(v, 10.0),
        weights=np.full(v, 1.0 / v),
        fitted_log_likelihood=0.0,
        iterations_run=1,
        ll_trace=np.zeros(1),
    )


def make_grid(data: np.ndarray, image_id: str = "g", category_id: int = 0) -> FeatureGrid:
    return FeatureGrid(image_id=image_id, category_id=category_id,
                       data=np.asarray(data, dtype=np.float32),
                       rf_stride=8, rf_size=36, rf_offset=4)


def make_encoding(bits: np.ndarray, threshold: float = 0.5) -> VcEncoding:
    bits = np.asarray(bits, dtype=bool)
    return VcEncoding(bits=bits, threshold=threshold,
                      coverage=coverage_of(bits), firerate=firerate_of(bits))


def random_encoding(rng: np.random.Generator, h: int = 4, w: int = 4,
                    v: int = 3, density: float = 0.25,
                    ensure_nonzero: bool = True) -> VcEncoding:
    bits = rng.random((h, w, v)) < density
    if ensure_nonzero and not bits.any():
        bits[rng.integers(h), rng.integers(w), rng.integers(v)] = True
    return make_encoding(bits)


def naive_distances(grid: FeatureGrid, dictionary: VcDictionary) -> np.ndarray:
    """Double-loop cosine distances with the degenerate-position sentinel."""
    h, w, c = grid.data.shape
    v = dictionary.num_vcs
    out = np.empty((h, w, v))
    for r in range(h):
        for col in range(w):
            f = grid.data[r, col].astype(np.float64)
            fn = np.linalg.norm(f)
            for k in range(v):
                if fn < 1e-8:
                    out[r, col, k] = 1.0
                else:
                    mu = dictionary.means[k]
                    cos = float(f @ mu) / (fn * np.linalg.norm(mu))
                    out[r, col, k] = min(max(1.0 - cos, 0.0), 2.0)
    return out


def naive_similarity(a: np.ndarray, b: np.ndarray, radius: int) -> float:
    """Loop evaluation of the fuzzy matching kernel on raw bit tensors."""
    h, w, v = a.shape

    def term(x, y):
        num = 0
        for r in range(h):
            for c in range(w):
                for k in range(v):
                    if not x[r, c, k]:
                        continue
                    hit = 0
                    for qr in range(max(0, r - radius), min(h, r + radius + 1)):
                        for qc in range(max(0, c - radius), min(w, c + radius + 1)):
                            if y[qr, qc, k]:
                                hit = 1
                    num += hit
        return num / x.sum()

    return 0.5 * (term(a, b) + term(b, a))


def naive_blur_renormalized(plane: np.ndarray, kernel1d: np.ndarray) -> np.ndarray:
    """Dense full-kernel convolution with border renormalization."""
    h, w = plane.shape
    radius = len(kernel1d) // 2
    kernel2d = np.outer(kernel1d, kernel1d)
    out = np.empty_like(plane, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            weight = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    rr, cc = r + dy, c + dx
                    if 0 <= rr < h and 0 <= cc < w:
                        k = kernel2d[dy + radius, dx + radius]
                        acc += k * plane[rr, cc]
                        weight += k
            out[r, c] = acc / weight
    return out
