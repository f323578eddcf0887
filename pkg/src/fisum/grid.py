"""Dense order-p grids: feature tensors, semiring scalar fields, file I/O.

Grid points are 0-based, an axis of extent ``T`` holds points ``0..T-1``.
Feature tensors are stored channels-last, ``values.shape == (*extents, d)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .semiring import Semiring, decode_value, encode_value, get_semiring

__all__ = [
    "DataTensor",
    "ScalarField",
    "check_shape",
    "linear_offset",
    "field_reduce",
    "load_tensor",
    "save_field",
    "load_field",
]


def check_shape(extents) -> tuple[int, ...]:
    extents = tuple(int(t) for t in extents)
    if len(extents) < 1:
        raise ValueError("grid order must be >= 1")
    if any(t < 1 for t in extents):
        raise ValueError(f"grid extents must be positive, got {extents}")
    return extents


def linear_offset(point, extents) -> int:
    """Row-major offset of a grid point."""
    extents = check_shape(extents)
    point = tuple(int(c) for c in point)
    if len(point) != len(extents) or any(not 0 <= c < t for c, t in zip(point, extents)):
        raise IndexError(f"point {point} out of bounds for grid {extents}")
    return int(np.ravel_multi_index(point, extents))


@dataclass(frozen=True, eq=False)
class DataTensor:
    """Order-p grid of d-dimensional feature vectors (channels-last)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, order="C")
        if v.ndim < 2:
            raise IngestionError("DataTensor needs at least one grid axis and a channel axis",
                                 field="shape")
        check_shape(v.shape[:-1])
        if v.shape[-1] < 1:
            raise IngestionError("channel count must be positive", field="channels")
        if not np.isfinite(v).all():
            raise IngestionError("tensor contains non-finite values", field="values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_grid(cls, grid) -> "DataTensor":
        """Wrap a single-channel grid of shape ``extents``."""
        return cls(np.asarray(grid, dtype=np.float64)[..., None])

    @classmethod
    def from_channels_first(cls, arr) -> "DataTensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(np.moveaxis(arr, 0, -1))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def order(self) -> int:
        return self.values.ndim - 1

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def __eq__(self, other):
        return isinstance(other, DataTensor) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One semiring value per grid point."""

    values: np.ndarray
    semiring: Semiring

    def __post_init__(self):
        sr = get_semiring(self.semiring)
        v = np.array(self.values, dtype=np.float64, order="C")
        if v.ndim < 1:
            raise ValueError("ScalarField needs at least one axis")
        check_shape(v.shape)
        sr.check(v, "field")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "semiring", sr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def order(self) -> int:
        return self.values.ndim

    def __eq__(self, other):
        # bitwise, so -inf == -inf and 0.0 != -0.0
        return (
            isinstance(other, ScalarField)
            and other.semiring == self.semiring
            and other.values.shape == self.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )


def field_reduce(f: ScalarField) -> float:
    """Semiring sum of every entry (row-major; pairwise summation for Real)."""
    return float(f.semiring.reduce(f.values.ravel()))


# --- ingestion -------------------------------------------------------------

def _read_npy(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            version = np.lib.format.read_magic(fh)
        except ValueError as exc:
            raise IngestionError(f"{path}: bad NPY magic ({exc})", field="magic") from None
        try:
            if version == (1, 0):
                shape, fortran, dtype = np.lib.format.read_array_header_1_0(fh)
            elif version == (2, 0):
                shape, fortran, dtype = np.lib.format.read_array_header_2_0(fh)
            else:
                raise IngestionError(f"{path}: unsupported NPY version {version}", field="version")
        except ValueError as exc:
            raise IngestionError(f"{path}: malformed NPY header ({exc})", field="header") from None
        if dtype.kind != "f" or dtype.itemsize not in (4, 8):
            raise IngestionError(f"{path}: unsupported dtype {dtype.str}", field="descr")
        if dtype.byteorder == ">":
            raise IngestionError(f"{path}: big-endian data not supported", field="descr")
        if fortran:
            raise IngestionError(f"{path}: Fortran-ordered arrays not supported",
                                 field="fortran_order")
        count = int(np.prod(shape)) if shape else 1
        data = np.fromfile(fh, dtype=dtype, count=count)
        if data.size != count:
            raise IngestionError(f"{path}: truncated data", field="data")
    return data.reshape(shape)


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            raise IngestionError(f"{path}: PNG mode {img.mode} not supported (need L or RGB)",
                                 field="mode")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr


def load_tensor(path, format: str | None = None) -> DataTensor:
    """Load a feature tensor from ``npy``, ``png`` or ``csv``.

    NPY arrays are channels-first on disk: ``(T1,)``, ``(T1, T2)``,
    ``(d, T1, T2)`` or ``(d, T1, T2, T3)``.  PNG pixels are scaled by 1/255.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "npy":
        arr = _read_npy(path)
        if arr.ndim in (1, 2):
            arr = arr[..., None]
        elif arr.ndim in (3, 4):
            arr = np.moveaxis(arr, 0, -1)
        else:
            raise IngestionError(f"{path}: unsupported NPY shape {arr.shape}", field="shape")
    elif fmt == "png":
        arr = _read_png(path)
    elif fmt == "csv":
        try:
            with open(path, newline="") as fh:
                rows = [[float(c) for c in row] for row in csv.reader(fh) if row]
        except ValueError as exc:
            raise IngestionError(f"{path}: bad CSV entry ({exc})", field="values") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise IngestionError(f"{path}: CSV must be a non-empty rectangular grid",
                                 field="shape")
        arr = np.asarray(rows, dtype=np.float64)[..., None]
    else:
        raise IngestionError(f"unknown tensor format {fmt!r}", field="format")
    arr = np.asarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise IngestionError(f"{path}: non-finite values", field="values")
    return DataTensor(arr)


# --- emission --------------------------------------------------------------

def save_field(f: ScalarField, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "npy":
        with open(path, "wb") as fh:
            np.lib.format.write_array(fh, f.values, version=(1, 0), allow_pickle=False)
    elif fmt == "json":
        flat = [encode_value(v) for v in f.values.ravel().tolist()]
        doc = {
            "semiring": f.semiring.name,
            "shape": list(f.shape),
            "values": np.array(flat, dtype=object).reshape(f.shape).tolist(),
        }
        path.write_text(json.dumps(doc))
    elif fmt == "csv":
        if f.order > 2:
            raise ValueError("CSV output supports order-1 and order-2 fields only")
        rows = np.atleast_2d(f.values)
        with open(path, "w", newline="") as fh:
            for row in rows:
                fh.write(",".join("%.17g" % v for v in row) + "\n")
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def load_field(path, format: str | None = None, semiring="real") -> ScalarField:
    """Inverse of :func:`save_field`. JSON carries its own semiring tag."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "npy":
        return ScalarField(_read_npy(path), semiring)
    if fmt == "json":
        doc = json.loads(path.read_text())
        shape = tuple(doc["shape"])
        vals = np.array(doc["values"], dtype=object).reshape(-1)
        arr = np.array([decode_value(v) for v in vals], dtype=np.float64).reshape(shape)
        return ScalarField(arr, doc["semiring"])
    if fmt == "csv":
        return ScalarField(np.loadtxt(path, delimiter=",", ndmin=2), semiring)
    raise ValueError(f"unknown field format {fmt!r}")
