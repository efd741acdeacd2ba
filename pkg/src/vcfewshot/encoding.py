"""Distance tensors and binary visual-concept encodings.

A distance tensor holds, per lattice position p and concept v, the cosine
distance d[p, v] = 1 - cos(f_p, mu_v) in [0, 2]. Thresholding it strictly
(bit set iff d < T) yields a binary encoding; its quality is summarized by

    coverage = (1/|L|) sum_p max_v b[p, v]   (positions with any bit set)
    firerate = (1/|L|) sum_p sum_v b[p, v]   (bits set per position)

and T is chosen by the smallest grid point {0, step, 2 step, ..., 2} whose
mean coverage over a set of training tensors reaches a target.

Encodings round-trip through a compact bitset file (magic "VCBE"): u32 H,
W, V, then ceil(H*W*V / 8) bytes, position-major with the concept index
fastest, LSB-first within each byte.
"""

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    InputError,
    NoFeasibleThresholdError,
    TrailingDataError,
    TruncatedPayloadError,
)
from .mixture import VcDictionary
from .store import NEAR_ZERO_NORM, FeatureGrid

#: Distance recorded for positions whose feature vector is degenerate
#: (norm below NEAR_ZERO_NORM): neutral mid-range, so they neither fire at
#: small thresholds nor block coverage targets.
SENTINEL_DISTANCE = 1.0


@dataclass(frozen=True, eq=False)
class DistanceTensor:
    """Cosine distances, shape (H, W, V), float32, every value in [0, 2]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_vcs(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class VcEncoding:
    """Binary encoding with the threshold that produced it and its stats."""

    bits: np.ndarray
    threshold: float
    coverage: float
    firerate: float

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def num_vcs(self) -> int:
        return self.bits.shape[2]

    @property
    def num_set(self) -> int:
        return int(self.bits.sum())


def coverage_of(bits: np.ndarray) -> float:
    """Fraction of lattice positions with at least one concept firing."""
    return float(bits.any(axis=2).sum() / (bits.shape[0] * bits.shape[1]))


def firerate_of(bits: np.ndarray) -> float:
    """Average number of firing concepts per lattice position."""
    return float(bits.sum() / (bits.shape[0] * bits.shape[1]))


def compute_distances(grid: FeatureGrid, dictionary: VcDictionary) -> DistanceTensor:
    """Cosine distances from every grid position to every dictionary mean.

    Positions with near-zero feature norm get the sentinel distance for all
    concepts. The result is invariant to positive rescaling of any feature
    vector.
    """
    if grid.channels != dictionary.channels:
        raise InputError(
            f"channel mismatch: grid has {grid.channels}, dictionary has "
            f"{dictionary.channels}")
    flat = grid.data.reshape(-1, grid.channels).astype(np.float64)
    norms = np.linalg.norm(flat, axis=1)
    ok = norms >= NEAR_ZERO_NORM
    unit = np.zeros_like(flat)
    unit[ok] = flat[ok] / norms[ok, None]
    mean_norms = np.linalg.norm(dictionary.means, axis=1)
    distances = 1.0 - (unit @ dictionary.means.T) / mean_norms[None, :]
    distances[~ok] = SENTINEL_DISTANCE
    distances = np.clip(distances, 0.0, 2.0)
    return DistanceTensor(distances.reshape(grid.height, grid.width, -1))


def encode(distances: DistanceTensor, threshold: float) -> VcEncoding:
    """Strict thresholding: bit set iff distance < threshold, T in [0, 2]."""
    if not 0.0 <= threshold <= 2.0:
        raise InputError(f"threshold must lie in [0, 2], got {threshold}")
    bits = distances.values < np.float64(threshold)
    return VcEncoding(
        bits=bits,
        threshold=float(threshold),
        coverage=coverage_of(bits),
        firerate=firerate_of(bits),
    )


def threshold_grid(step: float) -> np.ndarray:
    """The search grid {0, step, 2 step, ...} up to and including 2."""
    if step <= 0:
        raise InputError(f"step must be positive, got {step}")
    count = int(math.floor(2.0 / step + 1e-6)) + 1
    grid = np.arange(count) * step
    grid = grid[grid <= 2.0]
    if grid[-1] < 2.0 - 1e-12:
        grid = np.append(grid, 2.0)
    return grid


def mean_coverage_curve(
    tensors: Sequence[DistanceTensor], grid: np.ndarray
) -> np.ndarray:
    """Mean per-image coverage at each candidate threshold.

    Images contribute equally regardless of lattice size (per-image
    coverages are averaged unweighted).
    """
    curves = np.empty((len(tensors), len(grid)))
    for i, tensor in enumerate(tensors):
        nearest = np.sort(
            tensor.values.min(axis=2).ravel().astype(np.float64))
        below = np.searchsorted(nearest, grid, side="left")
        curves[i] = below / nearest.size
    return curves.mean(axis=0)


def search_threshold(
    training_distances: Iterable[DistanceTensor],
    coverage_target: float = 0.8,
    step: float = 0.001,
) -> float:
    """Smallest grid threshold whose mean training coverage meets the target.

    Args:
        training_distances: Non-empty collection of distance tensors.
        coverage_target: Required mean coverage, in (0, 1].
        step: Grid spacing (> 0).

    Returns:
        The minimal feasible T; for T > 0 the preceding grid point fails
        the target.

    Raises:
        NoFeasibleThresholdError: If even T = 2 misses the target (possible
            when some positions sit at distance exactly 2 from every
            concept).
    """
    tensors = list(training_distances)
    if not tensors:
        raise InputError("need at least one training distance tensor")
    if not 0.0 < coverage_target <= 1.0:
        raise InputError(
            f"coverage_target must lie in (0, 1], got {coverage_target}")
    grid = threshold_grid(step)
    curve = mean_coverage_curve(tensors, grid)
    feasible = np.flatnonzero(curve >= coverage_target)
    if feasible.size == 0:
        raise NoFeasibleThresholdError(
            f"no threshold on the grid reaches coverage {coverage_target}")
    return float(grid[feasible[0]])


BITSET_MAGIC = b"VCBE"


def write_bitset(bits: np.ndarray, destination: BinaryIO) -> None:
    """Pack an (H, W, V) boolean array into the VCBE layout."""
    arr = np.ascontiguousarray(bits, dtype=bool)
    if arr.ndim != 3:
        raise InputError(f"bits must be (H, W, V), got shape {arr.shape}")
    h, w, v = arr.shape
    packed = np.packbits(arr.reshape(-1), bitorder="little")
    destination.write(BITSET_MAGIC + struct.pack("<III", h, w, v) + packed.tobytes())


def read_bitset(source: BinaryIO | bytes) -> np.ndarray:
    """Inverse of :func:`write_bitset`; returns the (H, W, V) boolean array."""
    data = source if isinstance(source, bytes) else source.read()
    if len(data) < 4 or data[:4] != BITSET_MAGIC:
        raise BadMagicError(
            f"bad magic {data[:4]!r}, expected {BITSET_MAGIC!r}", offset=0)
    if len(data) < 16:
        raise TruncatedPayloadError("truncated bitset header", offset=4)
    h, w, v = struct.unpack("<III", data[4:16])
    n_bits = h * w * v
    n_bytes = (n_bits + 7) // 8
    if len(data) < 16 + n_bytes:
        raise TruncatedPayloadError(
            f"truncated bitset payload: need {n_bytes} bytes, have {len(data) - 16}",
            offset=len(data))
    if len(data) > 16 + n_bytes:
        raise TrailingDataError(
            f"{len(data) - 16 - n_bytes} trailing bytes after bitset",
            offset=16 + n_bytes)
    flat = np.unpackbits(
        np.frombuffer(data[16:16 + n_bytes], dtype=np.uint8),
        count=n_bits, bitorder="little")
    return flat.reshape(h, w, v).astype(bool)
