"""Few-shot classifiers over binary visual-concept encodings.

Two interpretable models:

* a nearest-neighbor matcher whose similarity kernel is spatially fuzzy --
  each set bit may match a set bit of the same concept anywhere within a
  Chebyshev neighborhood, so small part shifts do not break the match:

      K(b, b') = 1/2 * ( sum_{p,v} b[p,v] * max_{q in n(p)} b'[q,v] / sum b
                       + sum_{p,v} b'[p,v] * max_{q in n(p)} b[q,v] / sum b' )

* a factorizable likelihood model: every (position, concept) bit is an
  independent Bernoulli with per-category probability theta[p, v],
  estimated as the support frequency, spatially smoothed with a Gaussian
  (concept axis untouched: it has no metric structure), then clamped away
  from 0 and 1 so log-likelihoods stay finite.
"""

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .encoding import VcEncoding
from .errors import InputError, ZeroEncodingError
from .smoothing import gaussian_blur

THETA_EPSILON = 1e-3


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Chebyshev radius of the fuzzy-match neighborhood n(p)."""

    radius: int = 1

    def __post_init__(self):
        if self.radius < 0:
            raise InputError(f"radius must be non-negative, got {self.radius}")


def dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    """Per-concept binary dilation by a (2r+1)^2 square, clipped at borders.

    The square structuring element is separable: dilate rows, then columns.
    """
    if radius == 0:
        return bits
    h, w, v = bits.shape
    tall = np.zeros((h + 2 * radius, w, v), dtype=bool)
    tall[radius:radius + h] = bits
    rows = np.zeros_like(bits)
    for dy in range(2 * radius + 1):
        rows |= tall[dy:dy + h]
    wide = np.zeros((h, w + 2 * radius, v), dtype=bool)
    wide[:, radius:radius + w] = rows
    out = np.zeros_like(bits)
    for dx in range(2 * radius + 1):
        out |= wide[:, dx:dx + w]
    return out


def _check_same_shape(a: VcEncoding, b: VcEncoding) -> None:
    if a.bits.shape != b.bits.shape:
        raise InputError(
            f"encoding shape mismatch: {a.bits.shape} vs {b.bits.shape}")


def similarity(b: VcEncoding, b_prime: VcEncoding,
               nbhd: NeighborhoodSpec = NeighborhoodSpec()) -> float:
    """Fuzzy matching kernel in [0, 1]; exactly symmetric; K(b, b) = 1.

    Raises:
        ZeroEncodingError: If either encoding has no set bits (the kernel
            normalizes by the bit count).
    """
    _check_same_shape(b, b_prime)
    count = b.num_set
    count_prime = b_prime.num_set
    if count == 0 or count_prime == 0:
        raise ZeroEncodingError("similarity is undefined for all-zero encodings")
    if nbhd.radius > min(b.height, b.width):
        raise InputError(
            f"neighborhood radius {nbhd.radius} exceeds lattice extent "
            f"{min(b.height, b.width)}")
    forward = int((b.bits & dilate(b_prime.bits, nbhd.radius)).sum()) / count
    backward = int((b_prime.bits & dilate(b.bits, nbhd.radius)).sum()) / count_prime
    return 0.5 * (forward + backward)


def classify_nn(query: VcEncoding,
                support: Sequence[tuple[VcEncoding, int]],
                nbhd: NeighborhoodSpec = NeighborhoodSpec()) -> int:
    """Category of the most similar support encoding (earliest one on ties)."""
    if not support:
        raise InputError("support set must be non-empty")
    scores = np.array([similarity(query, enc, nbhd) for enc, _ in support])
    return support[int(np.argmax(scores))][1]


@dataclass(frozen=True, eq=False)
class LikelihoodModel:
    """Per-category Bernoulli parameter maps theta, shape (Y, H, W, V)."""

    categories: np.ndarray
    theta: np.ndarray
    sigma: float
    epsilon: float

    def __post_init__(self):
        cats = np.asarray(self.categories, dtype=np.int64)
        theta = np.asarray(self.theta, dtype=np.float64)
        cats.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "theta", theta)

    def theta_for(self, category_id: int) -> np.ndarray:
        idx = np.flatnonzero(self.categories == category_id)
        if idx.size == 0:
            raise InputError(f"model has no category {category_id}")
        return self.theta[idx[0]]


def fit_likelihood(support: Iterable[tuple[VcEncoding, int]],
                   sigma: float = 1.2,
                   epsilon: float = THETA_EPSILON) -> LikelihoodModel:
    """Estimate per-category bit probabilities from support encodings.

    Per category: theta is the mean of the support bit tensors, each
    spatial slice smoothed with a border-renormalized Gaussian of width
    ``sigma`` (radius ceil(3 sigma)), then clamped to [epsilon, 1-epsilon].
    Categories are ordered ascending so argmax ties resolve to the smallest
    category id.
    """
    if not 0.0 < epsilon < 0.5:
        raise InputError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    grouped: dict[int, list[np.ndarray]] = {}
    shape = None
    for enc, category_id in support:
        if shape is None:
            shape = enc.bits.shape
        elif enc.bits.shape != shape:
            raise InputError(
                f"encoding shape mismatch: {enc.bits.shape} vs {shape}")
        grouped.setdefault(int(category_id), []).append(enc.bits)
    if not grouped:
        raise InputError("support set must be non-empty")

    categories = sorted(grouped)
    theta = np.empty((len(categories),) + shape)
    for i, category_id in enumerate(categories):
        raw = np.mean(np.asarray(grouped[category_id], dtype=np.float64), axis=0)
        theta[i] = gaussian_blur(raw, sigma)
    theta = np.clip(theta, epsilon, 1.0 - epsilon)
    return LikelihoodModel(categories=np.array(categories), theta=theta,
                           sigma=float(sigma), epsilon=float(epsilon))


def log_likelihood(b: VcEncoding, theta_map: np.ndarray) -> float:
    """Factorized Bernoulli log-likelihood sum_{p,v} log P(b[p,v] | theta)."""
    if theta_map.shape != b.bits.shape:
        raise InputError(
            f"shape mismatch: encoding {b.bits.shape} vs theta {theta_map.shape}")
    per_bit = np.where(b.bits, np.log(theta_map), np.log1p(-theta_map))
    return float(per_bit.sum())


def classify_lh(query: VcEncoding, model: LikelihoodModel) -> int:
    """Maximum-likelihood category (smallest category id on ties)."""
    scores = np.array([log_likelihood(query, theta) for theta in model.theta])
    return int(model.categories[int(np.argmax(scores))])


def contribution_maps(query: VcEncoding, model: LikelihoodModel) -> np.ndarray:
    """Per-bit log-likelihood contributions, shape (Y, H, W, V).

    Summing a category's slice reproduces its total log-likelihood; slicing
    one concept gives the spatial evidence map behind a decision.
    """
    if model.theta.shape[1:] != query.bits.shape:
        raise InputError(
            f"shape mismatch: encoding {query.bits.shape} vs theta "
            f"{model.theta.shape[1:]}")
    bits = query.bits[None, ...]
    return np.where(bits, np.log(model.theta), np.log1p(-model.theta))


def export_contributions_csv(query: VcEncoding, model: LikelihoodModel,
                             destination: TextIO) -> None:
    """Write contribution maps as CSV rows (category, row, col, vc, value)."""
    maps = contribution_maps(query, model)
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(["category_id", "row", "col", "vc", "contribution"])
    y_count, h, w, v_count = maps.shape
    for yi in range(y_count):
        category_id = int(model.categories[yi])
        for row in range(h):
            for col in range(w):
                for v in range(v_count):
                    writer.writerow(
                        [category_id, row, col, v, repr(float(maps[yi, row, col, v]))])
