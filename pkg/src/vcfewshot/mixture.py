"""Mixture-of-von-Mises-Fisher clustering of pooled unit feature vectors.

:func:`fit_vmfm` learns a dictionary of unit mean directions ("visual
concepts") with per-component concentrations and mixing weights by EM:

* E-step: responsibilities proportional to weight * vMF density;
* M-step: means are normalized responsibility-weighted sums; concentrations
  solve the mean-resultant-length equation A_d(kappa) = r_bar with
  r_bar = |sum_m gamma_m f_m| / sum_m gamma_m, via a short Newton
  iteration seeded by the classic moment approximation
  kappa ~= (r_bar * d - r_bar^3) / (1 - r_bar^2). Solving the equation
  (rather than stopping at the approximation) keeps the per-iteration
  log-likelihood monotone to float precision.

Initialization is a cosine-distance k-means++ seeding followed by a few
spherical k-means rounds, all driven by one seeded generator, so a fit is
a pure function of (vectors, config). Input vectors are re-ordered into a
canonical lexicographic order before any reduction, which makes the fitted
parameters invariant to the arrival order of the pool.

The dictionary serializes to a small binary companion format (magic
"VCDC"): version u16, V u32, C u32, V*C float32 means, V float32
concentrations, V float32 weights, float64 fitted log-likelihood; all
little-endian.
"""

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .bessel import log_bessel_iv
from .errors import (
    BadMagicError,
    InputError,
    NumericalError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .vmf import KAPPA_MAX_DEFAULT, UNIT_NORM_TOL, log_vmf_normalizer

DICT_MAGIC = b"VCDC"
DICT_VERSION = 1

_KAPPA_FLOOR = 1e-8
_RBAR_MAX = 1.0 - 1e-9
_STARVED_RESPONSIBILITY = 1e-6
_INIT_KMEANS_ITERS = 10


@dataclass(frozen=True)
class FitConfig:
    """Clustering configuration; everything that influences the fit."""

    num_vcs: int
    seed: int
    max_iters: int = 200
    rel_tol: float = 1e-6
    kappa_max: float = KAPPA_MAX_DEFAULT

    def validate(self) -> None:
        if self.num_vcs < 1:
            raise InputError("num_vcs must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be positive")
        if self.rel_tol <= 0:
            raise InputError("rel_tol must be positive")
        if self.kappa_max <= 0:
            raise InputError("kappa_max must be positive")


@dataclass(frozen=True, eq=False)
class VcDictionary:
    """Fitted mixture: V unit mean directions with kappas and weights.

    ``ll_trace`` holds the data log-likelihood recorded at each E-step
    (diagnostic only; not part of the serialized format).
    """

    means: np.ndarray
    concentrations: np.ndarray
    weights: np.ndarray
    fitted_log_likelihood: float
    iterations_run: int
    ll_trace: np.ndarray

    def __post_init__(self):
        for name in ("means", "concentrations", "weights", "ll_trace"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vcs(self) -> int:
        return self.means.shape[0]

    @property
    def channels(self) -> int:
        return self.means.shape[1]

    def validate(self, kappa_max: float = KAPPA_MAX_DEFAULT) -> None:
        norms = np.linalg.norm(self.means, axis=1)
        if not np.all(np.abs(norms - 1.0) < UNIT_NORM_TOL):
            raise InputError("dictionary means must be unit-norm")
        if (self.weights < 0).any() or abs(self.weights.sum() - 1.0) > 1e-9:
            raise InputError("weights must be non-negative and sum to 1")
        if (self.concentrations <= 0).any() or (self.concentrations > kappa_max).any():
            raise InputError(f"concentrations must lie in (0, {kappa_max:g}]")

    def __eq__(self, other) -> bool:
        if not isinstance(other, VcDictionary):
            return NotImplemented
        return (self.fitted_log_likelihood == other.fitted_log_likelihood
                and self.iterations_run == other.iterations_run
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.concentrations, other.concentrations)
                and np.array_equal(self.weights, other.weights))


def _kappa_from_rbar(rbar, dim: int, kappa_max: float):
    """Moment approximation kappa = (r d - r^3) / (1 - r^2)."""
    rbar = np.clip(rbar, 0.0, _RBAR_MAX)
    kappa = (rbar * dim - rbar ** 3) / (1.0 - rbar ** 2)
    return np.clip(kappa, _KAPPA_FLOOR, kappa_max)


def _solve_kappa(rbar, dim: int, kappa_max: float):
    """Concentrations solving A_d(kappa) = r_bar, elementwise.

    A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa) is the mean resultant
    length of a vMF draw; it is strictly increasing, so the maximizing
    kappa is the unique root (clipped to the admissible range). The moment
    approximation seeds a short Newton iteration; solving exactly keeps the
    EM objective monotone to float precision, which the approximation alone
    does not quite achieve near convergence.
    """
    rbar = np.clip(np.atleast_1d(rbar), 0.0, _RBAR_MAX)
    kappa = _kappa_from_rbar(rbar, dim, kappa_max)
    nu = dim / 2.0 - 1.0
    for _ in range(4):
        ratio = np.exp(log_bessel_iv(nu + 1.0, kappa) - log_bessel_iv(nu, kappa))
        slope = 1.0 - ratio ** 2 - (dim - 1.0) / kappa * ratio
        step = np.where(slope > 0, (ratio - rbar) / np.where(slope > 0, slope, 1.0), 0.0)
        kappa = np.clip(kappa - step, _KAPPA_FLOOR, kappa_max)
    return kappa


def _canonical_order(vectors: np.ndarray) -> np.ndarray:
    """Lexicographic row order (first column most significant), stable."""
    return np.lexsort(vectors.T[::-1])


def initialize_parameters(
    vectors: np.ndarray,
    num_vcs: int,
    rng: np.random.Generator,
    kappa_max: float = KAPPA_MAX_DEFAULT,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded k-means++ (cosine) plus spherical k-means warm start.

    Returns (means, concentrations, weights) ready for the first E-step.
    For unit vectors, 1 - cosine equals half the squared Euclidean
    distance, so weighting draws by cosine distance reproduces the classic
    k-means++ D^2 sampling; like the stock implementations, each step draws
    a few candidates and keeps the one minimizing the total potential.
    """
    m, dim = vectors.shape
    n_candidates = 2 + int(np.log(num_vcs))
    centers = np.empty((num_vcs, dim))
    centers[0] = vectors[rng.integers(m)]
    closest = 1.0 - vectors @ centers[0]
    for v in range(1, num_vcs):
        weights = np.clip(closest, 0.0, None)
        total = weights.sum()
        probs = weights / total if total > 0 else np.full(m, 1.0 / m)
        candidates = rng.choice(m, size=n_candidates, p=probs)
        cand_closest = np.minimum(
            closest[:, None], 1.0 - vectors @ vectors[candidates].T)
        best = int(np.argmin(cand_closest.sum(axis=0)))
        centers[v] = vectors[candidates[best]]
        closest = cand_closest[:, best]

    labels = np.argmax(vectors @ centers.T, axis=1)
    for _ in range(_INIT_KMEANS_ITERS):
        sums = np.zeros((num_vcs, dim))
        np.add.at(sums, labels, vectors)
        norms = np.linalg.norm(sums, axis=1)
        empty = norms < _KAPPA_FLOOR
        if empty.any():
            # Re-seed dead clusters on the worst-matched vectors.
            worst = np.argsort(np.max(vectors @ centers.T, axis=1))
            for slot, vec_idx in zip(np.flatnonzero(empty), worst):
                sums[slot] = vectors[vec_idx]
                norms[slot] = 1.0
        centers = sums / norms[:, None]
        new_labels = np.argmax(vectors @ centers.T, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    counts = np.bincount(labels, minlength=num_vcs).astype(np.float64)
    resultants = np.zeros((num_vcs, dim))
    np.add.at(resultants, labels, vectors)
    rbar_global = min(float(np.linalg.norm(vectors.sum(0)) / m), _RBAR_MAX)
    rbar = np.where(counts > 0,
                    np.linalg.norm(resultants, axis=1) / np.maximum(counts, 1.0),
                    rbar_global)
    kappas = _solve_kappa(rbar, dim, kappa_max)
    weights = np.maximum(counts, 1.0) / np.maximum(counts, 1.0).sum()
    return centers, kappas, weights


def _log_joint(vectors, means, kappas, weights, dim):
    """log(alpha_v) + log vMF_v(f_m) for every (m, v)."""
    log_c = log_vmf_normalizer(dim, kappas)
    return np.log(weights)[None, :] + log_c[None, :] + (vectors @ means.T) * kappas[None, :]


def _log_norm_rows(log_joint):
    row_max = log_joint.max(axis=1, keepdims=True)
    shifted = np.exp(log_joint - row_max)
    row_sum = shifted.sum(axis=1, keepdims=True)
    return row_max[:, 0] + np.log(row_sum[:, 0]), shifted / row_sum


def fit_vmfm(vectors: np.ndarray, config: FitConfig) -> VcDictionary:
    """Fit a V-component vMF mixture to unit vectors by EM.

    Args:
        vectors: (M, C) array of unit-norm rows, M >= config.num_vcs, C >= 2.
        config: Fit configuration; the seed fully determines the result.

    Returns:
        The fitted dictionary. The recorded per-iteration log-likelihood is
        non-decreasing (up to tiny slack from the moment kappa update).

    Raises:
        InputError: Too few vectors, non-unit rows, or C < 2.
        NumericalError: Non-finite log-likelihood (never silently clamped).
    """
    config.validate()
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"vectors must be 2-D, got shape {x.shape}")
    m, dim = x.shape
    if m < config.num_vcs:
        raise InputError(
            f"need at least {config.num_vcs} vectors, got {m}")
    if dim < 2:
        raise InputError(f"vector dimension must be >= 2, got {dim}")
    norms = np.linalg.norm(x, axis=1)
    if not np.all(np.abs(norms - 1.0) < UNIT_NORM_TOL):
        raise InputError("input vectors must be unit-norm")

    x = x[_canonical_order(x)]
    rng = np.random.default_rng(config.seed)
    means, kappas, weights = initialize_parameters(
        x, config.num_vcs, rng, config.kappa_max)

    rbar_global = min(float(np.linalg.norm(x.sum(0)) / m), _RBAR_MAX)
    kappa_global = float(_solve_kappa(rbar_global, dim, config.kappa_max)[0])

    trace: list[float] = []
    for _ in range(config.max_iters):
        log_joint = _log_joint(x, means, kappas, weights, dim)
        ll_rows, resp = _log_norm_rows(log_joint)
        ll = float(ll_rows.sum())
        if not np.isfinite(ll):
            raise NumericalError(
                f"non-finite log-likelihood after {len(trace)} iterations")
        trace.append(ll)
        if len(trace) >= 2:
            prev = trace[-2]
            if ll - prev < config.rel_tol * max(abs(prev), 1e-12):
                break
        if len(trace) == config.max_iters:
            break

        totals = resp.sum(axis=0)
        sums = resp.T @ x
        starved = np.flatnonzero(totals < _STARVED_RESPONSIBILITY)
        if starved.size:
            loners = np.argsort(resp.max(axis=1), kind="stable")
            for slot, vec_idx in zip(starved, loners):
                sums[slot] = x[vec_idx]
                totals[slot] = 1.0
                kappas[slot] = kappa_global
        sum_norms = np.linalg.norm(sums, axis=1)
        means = sums / sum_norms[:, None]
        rbar = sum_norms / totals
        fresh = _solve_kappa(rbar, dim, config.kappa_max)
        keep_old = np.zeros(len(fresh), dtype=bool)
        keep_old[starved] = True
        kappas = np.where(keep_old, kappas, fresh)
        weights = totals / totals.sum()

    dictionary = VcDictionary(
        means=means,
        concentrations=kappas,
        weights=weights,
        fitted_log_likelihood=trace[-1],
        iterations_run=len(trace),
        ll_trace=np.array(trace),
    )
    dictionary.validate(config.kappa_max)
    return dictionary


def responsibilities(vectors: np.ndarray, dictionary: VcDictionary) -> np.ndarray:
    """Posterior component probabilities, one row (summing to 1) per vector."""
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if x.shape[1] != dictionary.channels:
        raise InputError(
            f"dimension mismatch: vectors have {x.shape[1]} channels, "
            f"dictionary has {dictionary.channels}")
    log_joint = _log_joint(x, dictionary.means, dictionary.concentrations,
                           dictionary.weights, dictionary.channels)
    _, resp = _log_norm_rows(log_joint)
    return resp


def assign_hard(vectors: np.ndarray, dictionary: VcDictionary) -> np.ndarray:
    """Most-responsible component per vector; ties go to the smaller index."""
    return np.argmax(responsibilities(vectors, dictionary), axis=1)


def write_dictionary(dictionary: VcDictionary, destination: BinaryIO) -> None:
    """Serialize to the VCDC binary layout (little-endian)."""
    v, c = dictionary.means.shape
    parts = [
        DICT_MAGIC,
        struct.pack("<HII", DICT_VERSION, v, c),
        dictionary.means.astype("<f4").tobytes(),
        dictionary.concentrations.astype("<f4").tobytes(),
        dictionary.weights.astype("<f4").tobytes(),
        struct.pack("<d", dictionary.fitted_log_likelihood),
    ]
    destination.write(b"".join(parts))


def read_dictionary(source: BinaryIO | bytes) -> VcDictionary:
    """Parse a VCDC stream; means are renormalized to undo float32 rounding."""
    data = source if isinstance(source, bytes) else source.read()
    if len(data) < 4 or data[:4] != DICT_MAGIC:
        raise BadMagicError(
            f"bad magic {data[:4]!r}, expected {DICT_MAGIC!r}", offset=0)
    if len(data) < 14:
        raise TruncatedPayloadError("truncated dictionary header", offset=4)
    version, v, c = struct.unpack("<HII", data[4:14])
    if version != DICT_VERSION:
        raise UnsupportedVersionError(f"unsupported dictionary version {version}",
                                      offset=4)
    need = 14 + 4 * v * c + 4 * v + 4 * v + 8
    if len(data) < need:
        raise TruncatedPayloadError(
            f"truncated dictionary payload: need {need} bytes, have {len(data)}",
            offset=len(data))
    if len(data) > need:
        raise TrailingDataError(
            f"{len(data) - need} trailing bytes after dictionary", offset=need)
    pos = 14
    means = np.frombuffer(data[pos:pos + 4 * v * c], dtype="<f4").reshape(v, c)
    pos += 4 * v * c
    kappas = np.frombuffer(data[pos:pos + 4 * v], dtype="<f4").astype(np.float64)
    pos += 4 * v
    weights = np.frombuffer(data[pos:pos + 4 * v], dtype="<f4").astype(np.float64)
    pos += 4 * v
    (fitted_ll,) = struct.unpack("<d", data[pos:pos + 8])
    means64 = means.astype(np.float64)
    means64 /= np.linalg.norm(means64, axis=1)[:, None]
    dictionary = VcDictionary(
        means=means64,
        concentrations=np.clip(kappas, _KAPPA_FLOOR, None),
        weights=weights / weights.sum(),
        fitted_log_likelihood=fitted_ll,
        iterations_run=0,
        ll_trace=np.empty(0),
    )
    dictionary.validate(kappa_max=float(max(KAPPA_MAX_DEFAULT, kappas.max() if v else 1.0)))
    return dictionary


def save_dictionary(dictionary: VcDictionary, path) -> None:
    with open(path, "wb") as fh:
        write_dictionary(dictionary, fh)


def load_dictionary(path) -> VcDictionary:
    with open(path, "rb") as fh:
        return read_dictionary(fh)
