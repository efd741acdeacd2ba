"""Seeded synthetic data: vMF sampling and planted feature stores.

Used by the demos and the test suite to build inputs with known structure:
stores whose categories are separable by construction (so end-to-end
accuracy has a known target) and stores with no structure at all (so
accuracy has a known chance level).
"""

import numpy as np

from .store import FeatureGrid, FeatureStore


def sample_uniform_sphere(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n unit vectors drawn uniformly from the (dim-1)-sphere."""
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sample_vmf(mu: np.ndarray, kappa: float, n: int,
               rng: np.random.Generator) -> np.ndarray:
    """Draw n samples from vMF(mu, kappa) via Wood's rejection scheme.

    The cosine w of the angle to ``mu`` is sampled by rejection from its
    marginal; the tangential part is uniform on the orthogonal subsphere.
    """
    mu = np.asarray(mu, dtype=np.float64)
    dim = mu.shape[0]
    if kappa <= 0:
        return sample_uniform_sphere(n, dim, rng)

    b = (-2.0 * kappa + np.sqrt(4.0 * kappa ** 2 + (dim - 1.0) ** 2)) / (dim - 1.0)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (dim - 1.0) * np.log(1.0 - x0 ** 2)

    w = np.empty(n)
    filled = 0
    while filled < n:
        todo = n - filled
        z = rng.beta((dim - 1.0) / 2.0, (dim - 1.0) / 2.0, size=todo)
        u = rng.random(todo)
        cand = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        accept = kappa * cand + (dim - 1.0) * np.log(1.0 - x0 * cand) - c >= np.log(u)
        got = cand[accept]
        w[filled:filled + got.size] = got
        filled += got.size

    tangent = rng.standard_normal((n, dim))
    tangent -= (tangent @ mu)[:, None] * mu[None, :]
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    return w[:, None] * mu[None, :] + np.sqrt(1.0 - w ** 2)[:, None] * tangent


def make_cluster_store(
    n_clusters: int = 3,
    points_per_cluster: int = 300,
    dim: int = 16,
    kappa: float = 50.0,
    seed: int = 0,
) -> tuple[FeatureStore, np.ndarray]:
    """Store of 1x1 grids drawn from well-separated vMF clusters.

    Each cluster becomes one category; each sample one single-position
    grid. Returns (store, true mean directions).
    """
    rng = np.random.default_rng(seed)
    means = sample_uniform_sphere(n_clusters, dim, rng)
    grids = []
    for k in range(n_clusters):
        samples = sample_vmf(means[k], kappa, points_per_cluster, rng)
        scales = rng.lognormal(mean=1.0, sigma=0.25, size=points_per_cluster)
        for i in range(points_per_cluster):
            grids.append(FeatureGrid(
                image_id=f"c{k:02d}_{i:04d}",
                category_id=k,
                data=(samples[i] * scales[i]).reshape(1, 1, dim).astype(np.float32),
                rf_stride=8, rf_size=36, rf_offset=4,
            ))
    categories = {k: f"cluster_{k}" for k in range(n_clusters)}
    return FeatureStore(layer_name="synthetic", categories=categories,
                        grids=tuple(grids)), means


def make_planted_store(
    n_categories: int = 10,
    images_per_category: int = 20,
    height: int = 6,
    width: int = 6,
    channels: int = 16,
    parts_per_category: int = 4,
    kappa: float = 30.0,
    seed: int = 0,
) -> FeatureStore:
    """Store with category-specific part directions at fixed positions.

    Each category gets its own palette of unit "part" directions and a
    fixed spatial layout assigning one palette entry to every lattice
    position; every image samples each position from a vMF around its
    assigned direction, scaled by a random positive magnitude. Categories
    are therefore separable both by which directions occur and by where.
    """
    rng = np.random.default_rng(seed)
    grids = []
    for cat in range(n_categories):
        palette = sample_uniform_sphere(parts_per_category, channels, rng)
        layout = rng.integers(parts_per_category, size=(height, width))
        for i in range(images_per_category):
            directions = palette[layout.reshape(-1)]
            noisy = np.empty((height * width, channels))
            for p in range(height * width):
                noisy[p] = sample_vmf(directions[p], kappa, 1, rng)[0]
            scales = rng.lognormal(mean=1.0, sigma=0.25, size=(height * width, 1))
            data = (noisy * scales).reshape(height, width, channels)
            grids.append(FeatureGrid(
                image_id=f"cat{cat:02d}_img{i:03d}",
                category_id=cat,
                data=data.astype(np.float32),
                rf_stride=8, rf_size=36, rf_offset=4,
            ))
    categories = {c: f"category_{c}" for c in range(n_categories)}
    return FeatureStore(layer_name="planted", categories=categories,
                        grids=tuple(grids))


def make_random_store(
    n_categories: int = 5,
    images_per_category: int = 20,
    height: int = 4,
    width: int = 4,
    channels: int = 8,
    seed: int = 0,
) -> FeatureStore:
    """Structureless store: every feature vector is an independent draw."""
    rng = np.random.default_rng(seed)
    grids = []
    for cat in range(n_categories):
        for i in range(images_per_category):
            data = rng.standard_normal((height, width, channels))
            grids.append(FeatureGrid(
                image_id=f"r{cat:02d}_{i:03d}",
                category_id=cat,
                data=data.astype(np.float32),
                rf_stride=8, rf_size=36, rf_offset=4,
            ))
    categories = {c: f"noise_{c}" for c in range(n_categories)}
    return FeatureStore(layer_name="random", categories=categories,
                        grids=tuple(grids))
