"""Feature-grid container: the VCFS binary format plus pooled-vector access.

A :class:`FeatureGrid` holds one image's H x W lattice of C-dimensional
feature vectors together with the receptive-field mapping back to input
pixels (``pixel = rf_offset + rf_stride * lattice_coordinate`` per axis,
over an ``rf_size`` x ``rf_size`` patch). A :class:`FeatureStore` is an
ordered collection of grids plus a category table, serialized to the
single-file VCFS layout below (all integers little-endian):

    magic "VCFS" | version u16 | layer_name (u16 len + UTF-8)
    | category count u32, per category: id u32, name (u16 len + UTF-8)
    | grid count u32, per grid:
        image_id (u16 len + UTF-8), category_id u32,
        H u32, W u32, C u32, rf_offset i32, rf_stride u32, rf_size u32,
        H*W*C float32 values, position-major (row, then column),
        channels contiguous per position.

Categories are written sorted by id so equal stores serialize to equal
bytes. Parsing is total: any byte stream either yields a validated store or
raises a named :class:`~vcfewshot.errors.StoreFormatError` subclass carrying
the failing byte offset.
"""

import struct
from dataclasses import dataclass
from typing import BinaryIO, Callable

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateImageIdError,
    InputError,
    InvalidFieldError,
    NonFiniteDataError,
    StoreFormatError,
    TrailingDataError,
    TruncatedPayloadError,
    UnknownCategoryError,
    UnsupportedVersionError,
)

MAGIC = b"VCFS"
FORMAT_VERSION = 1

#: Positions whose feature vector has L2 norm below this are treated as
#: degenerate: cosine distance is undefined at zero, so they are excluded
#: from clustering input and carry a sentinel distance downstream.
NEAR_ZERO_NORM = 1e-8


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """One image's feature lattice with receptive-field metadata.

    ``data`` has shape (H, W, C), float32, C-contiguous, so the stored byte
    order (position-major, channels contiguous) is exactly ``data.tobytes()``.
    """

    image_id: str
    category_id: int
    data: np.ndarray
    rf_stride: int
    rf_size: int
    rf_offset: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def rf_center(self, row: int, col: int) -> tuple[int, int]:
        """Input-pixel (y, x) coordinates of the lattice cell's patch center."""
        return (self.rf_offset + self.rf_stride * row,
                self.rf_offset + self.rf_stride * col)

    def validate(self) -> None:
        if not isinstance(self.image_id, str):
            raise InvalidFieldError("image_id must be a string")
        if self.category_id < 0:
            raise InvalidFieldError(
                f"grid {self.image_id!r}: category_id must be non-negative")
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise InvalidFieldError(
                f"grid {self.image_id!r}: data must be (H, W, C) with positive dims, "
                f"got shape {self.data.shape}")
        if self.rf_stride < 1 or self.rf_size < 1:
            raise InvalidFieldError(
                f"grid {self.image_id!r}: rf_stride and rf_size must be positive")
        if not np.isfinite(self.data).all():
            raise NonFiniteDataError(
                f"grid {self.image_id!r}: data contains NaN or Inf")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureGrid):
            return NotImplemented
        return (self.image_id == other.image_id
                and self.category_id == other.category_id
                and self.rf_stride == other.rf_stride
                and self.rf_size == other.rf_size
                and self.rf_offset == other.rf_offset
                and self.data.shape == other.data.shape
                and np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class FeatureStore:
    """Immutable collection of feature grids plus a category-id table."""

    layer_name: str
    categories: dict[int, str]
    grids: tuple[FeatureGrid, ...] = ()
    version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "grids", tuple(self.grids))
        object.__setattr__(self, "categories", dict(self.categories))

    def validate(self) -> None:
        if self.version != FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"unsupported store version {self.version}")
        seen: set[str] = set()
        for grid in self.grids:
            grid.validate()
            if grid.image_id in seen:
                raise DuplicateImageIdError(
                    f"duplicate image_id {grid.image_id!r}")
            seen.add(grid.image_id)
            if grid.category_id not in self.categories:
                raise UnknownCategoryError(
                    f"grid {grid.image_id!r} references unknown category id "
                    f"{grid.category_id}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureStore):
            return NotImplemented
        return (self.version == other.version
                and self.layer_name == other.layer_name
                and self.categories == other.categories
                and self.grids == other.grids)

    def __len__(self) -> int:
        return len(self.grids)

    def grid(self, image_id: str) -> FeatureGrid:
        for g in self.grids:
            if g.image_id == image_id:
                return g
        raise InputError(f"no grid with image_id {image_id!r}")

    def image_counts(self) -> dict[int, int]:
        """Number of grids per category id."""
        counts: dict[int, int] = {cid: 0 for cid in self.categories}
        for g in self.grids:
            counts[g.category_id] += 1
        return counts


@dataclass(frozen=True)
class PooledVectors:
    """L2-normalized feature vectors pooled across grids.

    ``vectors`` is (M, C) float64 with unit rows; the parallel arrays record
    where each vector came from, which is only used for visualization and
    diagnostics (clustering itself ignores position and image identity).
    """

    vectors: np.ndarray
    image_ids: np.ndarray
    category_ids: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    excluded_count: int = 0

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _encode_str(text: str, what: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise InvalidFieldError(f"{what} longer than 65535 UTF-8 bytes")
    return struct.pack("<H", len(raw)) + raw


def write_store(store: FeatureStore, destination: BinaryIO) -> None:
    """Serialize ``store`` to the VCFS layout.

    The store is validated first; nothing is written if any invariant fails.
    """
    store.validate()
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    parts.append(_encode_str(store.layer_name, "layer_name"))
    parts.append(struct.pack("<I", len(store.categories)))
    for cid in sorted(store.categories):
        parts.append(struct.pack("<I", cid))
        parts.append(_encode_str(store.categories[cid], f"category {cid} name"))
    parts.append(struct.pack("<I", len(store.grids)))
    for grid in store.grids:
        parts.append(_encode_str(grid.image_id, "image_id"))
        parts.append(struct.pack(
            "<IIIIiII",
            grid.category_id,
            grid.height, grid.width, grid.channels,
            grid.rf_offset, grid.rf_stride, grid.rf_size,
        ))
        parts.append(grid.data.astype("<f4", copy=False).tobytes())
    destination.write(b"".join(parts))


class _Cursor:
    """Byte cursor that raises TruncatedPayloadError with the failing offset."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayloadError(
                f"truncated payload at offset {self.pos}: "
                f"need {n} bytes for {what}, have {len(self.data) - self.pos}",
                offset=self.pos,
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def i32(self, what: str) -> int:
        return struct.unpack("<i", self.take(4, what))[0]

    def string(self, what: str) -> str:
        length = self.u16(f"{what} length")
        at = self.pos
        raw = self.take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidFieldError(
                f"invalid UTF-8 in {what} at offset {at}", offset=at) from exc


def read_store(source: BinaryIO | bytes) -> FeatureStore:
    """Parse a complete VCFS stream into a validated :class:`FeatureStore`.

    Raises a named :class:`StoreFormatError` subclass on any malformation;
    a partially-parsed store is never returned.
    """
    data = source if isinstance(source, bytes) else source.read()
    cur = _Cursor(data)

    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(
            f"bad magic {magic!r} at offset 0, expected {MAGIC!r}", offset=0)
    version = cur.u16("version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported version {version} at offset 4", offset=4)

    layer_name = cur.string("layer_name")

    categories: dict[int, str] = {}
    n_categories = cur.u32("category count")
    for _ in range(n_categories):
        cid = cur.u32("category id")
        categories[cid] = cur.string("category name")

    grids: list[FeatureGrid] = []
    n_grids = cur.u32("grid count")
    for k in range(n_grids):
        image_id = cur.string("image_id")
        at = cur.pos
        category_id = cur.u32("category_id")
        h = cur.u32("H")
        w = cur.u32("W")
        c = cur.u32("C")
        rf_offset = cur.i32("rf_offset")
        rf_stride = cur.u32("rf_stride")
        rf_size = cur.u32("rf_size")
        if h < 1 or w < 1 or c < 1:
            raise InvalidFieldError(
                f"grid {image_id!r}: zero dimension in (H, W, C) = "
                f"({h}, {w}, {c}) at offset {at}", offset=at)
        if rf_stride < 1 or rf_size < 1:
            raise InvalidFieldError(
                f"grid {image_id!r}: rf_stride and rf_size must be positive "
                f"(offset {at})", offset=at)
        at = cur.pos
        raw = cur.take(4 * h * w * c, f"grid {image_id!r} data")
        values = np.frombuffer(raw, dtype="<f4").reshape(h, w, c)
        if not np.isfinite(values).all():
            raise NonFiniteDataError(
                f"grid {image_id!r}: non-finite value in data block at "
                f"offset {at}", offset=at)
        grids.append(FeatureGrid(
            image_id=image_id, category_id=category_id, data=values,
            rf_stride=rf_stride, rf_size=rf_size, rf_offset=rf_offset))

    if cur.pos != len(data):
        raise TrailingDataError(
            f"{len(data) - cur.pos} trailing bytes after store at offset "
            f"{cur.pos}", offset=cur.pos)

    store = FeatureStore(layer_name=layer_name, categories=categories,
                         grids=tuple(grids), version=version)
    try:
        store.validate()
    except StoreFormatError:
        raise
    return store


def save_store(store: FeatureStore, path) -> None:
    with open(path, "wb") as fh:
        write_store(store, fh)


def load_store(path) -> FeatureStore:
    with open(path, "rb") as fh:
        return read_store(fh)


def collect_vectors(
    store: FeatureStore,
    image_filter: Callable[[str], bool] | None = None,
) -> PooledVectors:
    """Pool and L2-normalize feature vectors from (a subset of) the store.

    Every lattice position contributes one unit vector; positions with
    L2 norm below ``NEAR_ZERO_NORM`` are excluded and counted. Spatial and
    image identity are kept only as side metadata.

    Args:
        store: Source store; all selected grids must share C.
        image_filter: Optional predicate on image_id; None selects all grids.

    Raises:
        InputError: If the selected grids have mixed channel counts.
    """
    selected = [g for g in store.grids
                if image_filter is None or image_filter(g.image_id)]
    channel_counts = {g.channels for g in selected}
    if len(channel_counts) > 1:
        raise InputError(
            f"mixed channel counts across grids: {sorted(channel_counts)}")

    chunks = []
    image_ids: list[str] = []
    category_ids: list[int] = []
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    excluded = 0
    for g in selected:
        flat = g.data.reshape(-1, g.channels).astype(np.float64)
        norms = np.linalg.norm(flat, axis=1)
        keep = norms >= NEAR_ZERO_NORM
        excluded += int((~keep).sum())
        unit = flat[keep] / norms[keep, None]
        chunks.append(unit)
        r, c = np.divmod(np.flatnonzero(keep), g.width)
        rows.append(r)
        cols.append(c)
        image_ids.extend([g.image_id] * int(keep.sum()))
        category_ids.extend([g.category_id] * int(keep.sum()))

    if chunks:
        vectors = np.concatenate(chunks, axis=0)
        all_rows = np.concatenate(rows).astype(np.int32)
        all_cols = np.concatenate(cols).astype(np.int32)
    else:
        vectors = np.empty((0, 0), dtype=np.float64)
        all_rows = np.empty(0, dtype=np.int32)
        all_cols = np.empty(0, dtype=np.int32)
    return PooledVectors(
        vectors=vectors,
        image_ids=np.asarray(image_ids, dtype=object),
        category_ids=np.asarray(category_ids, dtype=np.int64),
        rows=all_rows,
        cols=all_cols,
        excluded_count=excluded,
    )
