"""Gridded spatio-temporal fields: noise injection, subsampling, file I/O.

A `Field` is a scalar sampled on a tensor-product grid with named axes; by
package convention the last axis is time.  Fields are immutable after
construction (the data buffer is marked read-only) so they can be shared
freely between workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .rng import make_rng

__all__ = [
    "Axis",
    "Field",
    "SampleSet",
    "FieldFormatError",
    "add_noise",
    "sample_points",
    "write_field",
    "read_field",
]

_MAGIC = b"PDEF"
_VERSION = 1


class FieldFormatError(ValueError):
    """Raised when a field file is corrupt or structurally inconsistent."""


@dataclass(frozen=True, eq=False)
class Axis:
    """One grid axis: a short name and strictly increasing coordinates."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError(f"axis {self.name!r} needs >= 3 coordinates, got {vals.size}")
        if not np.all(np.diff(vals) > 0):
            raise ValueError(f"axis {self.name!r} coordinates must be strictly increasing")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        """Grid spacing; axes are expected to be uniform where it matters."""
        return float(self.values[1] - self.values[0])


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar samples on the tensor-product grid of `axes`, row-major."""

    axes: tuple[Axis, ...]
    data: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        data = np.asarray(self.data, dtype=np.float64)
        shape = tuple(len(a) for a in axes)
        if data.shape != shape:
            if data.size == int(np.prod(shape)):
                data = data.reshape(shape)
            else:
                raise ValueError(f"data size {data.size} != grid size {np.prod(shape)}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field data contains non-finite samples")
        data = np.ascontiguousarray(data)
        data.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def axis_names(self) -> list[str]:
        return [a.name for a in self.axes]

    def with_data(self, data: np.ndarray) -> "Field":
        """New field on the same grid with replacement samples."""
        return Field(self.axes, data)

    def coordinates(self, flat_indices: np.ndarray) -> np.ndarray:
        """(n, ndim) coordinate rows for the given flat grid indices."""
        idx = np.unravel_index(np.asarray(flat_indices, dtype=np.int64), self.shape)
        return np.stack([ax.values[i] for ax, i in zip(self.axes, idx)], axis=1)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """A subset of grid points, stored as unique flat indices."""

    indices: np.ndarray
    ratio: float
    grid_size: int = dc_field(default=0)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        n = self.grid_size if self.grid_size else int(idx.max()) + 1 if idx.size else 0
        object.__setattr__(self, "grid_size", n)
        if idx.size != np.unique(idx).size:
            raise ValueError("sample indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError("sample indices out of range")

    def __len__(self) -> int:
        return int(self.indices.size)

    def take(self, k: int) -> "SampleSet":
        """First `k` indices as a new SampleSet (deterministic truncation)."""
        k = min(k, len(self))
        return SampleSet(self.indices[:k], ratio=k / self.grid_size, grid_size=self.grid_size)


def add_noise(field: Field, level: float, seed: int) -> Field:
    """Perturb every sample by `level * std(u)` times unit Gaussian draws.

    `std(u)` is the population (1/N) standard deviation over the whole
    field, so a constant field is returned unchanged at any level.  The
    input field is never modified.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return field
    scale = level * float(np.std(field.data))
    if scale == 0.0:
        return field
    g = make_rng(seed).standard_normal(field.shape)
    return field.with_data(field.data + scale * g)


def sample_points(field: Field, ratio: float, seed: int) -> SampleSet:
    """Uniform random subset of grid points, without replacement.

    The subset size is round(ratio * N); the same (field shape, ratio,
    seed) always yields the same index list.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {ratio}")
    n = field.size
    k = int(round(ratio * n))
    if ratio == 1.0:
        idx = np.arange(n, dtype=np.int64)
    else:
        idx = make_rng(seed).choice(n, size=k, replace=False).astype(np.int64)
        idx.sort()
    return SampleSet(idx, ratio=ratio, grid_size=n)


def write_field(field: Field, path) -> None:
    """Serialize to the PDEF v1 container.

    Layout, all little-endian, no padding: magic ``PDEF``, u32 version=1,
    u32 ndim, then per axis (u32 name length, UTF-8 name, u32 count,
    count f64 coordinates), then the row-major f64 payload.
    """
    buf = bytearray()
    buf += _MAGIC
    buf += struct.pack("<II", _VERSION, len(field.axes))
    for ax in field.axes:
        name = ax.name.encode("utf-8")
        buf += struct.pack("<I", len(name))
        buf += name
        buf += struct.pack("<I", len(ax))
        buf += ax.values.astype("<f8").tobytes()
    buf += field.data.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_field(path) -> Field:
    """Read a PDEF v1 file; raises FieldFormatError on any inconsistency."""
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    pos = 0

    def need(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(raw):
            raise FieldFormatError(f"truncated field file: needed {n} bytes at offset {pos}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(need(4)) != _MAGIC:
        raise FieldFormatError("bad magic; not a PDEF file")
    version, ndim = struct.unpack("<II", need(8))
    if version != _VERSION:
        raise FieldFormatError(f"unsupported PDEF version {version}")
    if not 1 <= ndim <= 16:
        raise FieldFormatError(f"implausible axis count {ndim}")
    axes = []
    for _ in range(ndim):
        (name_len,) = struct.unpack("<I", need(4))
        name = bytes(need(name_len)).decode("utf-8")
        (count,) = struct.unpack("<I", need(4))
        values = np.frombuffer(need(8 * count), dtype="<f8").copy()
        axes.append(Axis(name, values))
    total = int(np.prod([len(a) for a in axes]))
    payload = np.frombuffer(need(8 * total), dtype="<f8").copy()
    if pos != len(raw):
        raise FieldFormatError(f"{len(raw) - pos} trailing bytes after payload")
    try:
        return Field(tuple(axes), payload)
    except ValueError as exc:
        raise FieldFormatError(str(exc)) from exc
