"""Commutative semirings used as the scalar type of every corner-tree sum.

A semiring here is a small object bundling two numpy ufuncs (``add`` and
``mul``) and their units.  Everything downstream (scans, the CTPS recursion,
the brute-force oracle) only talks to this interface, so a new semiring is
added by subclassing :class:`Semiring` and calling :func:`register`.

Scalar helpers ``szero``/``sone``/``sadd``/``smul`` take a tag (a
:class:`Semiring` instance or its string name) and work on plain floats.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import IngestionError

__all__ = [
    "Semiring",
    "Real",
    "MaxPlus",
    "REAL",
    "MAX_PLUS",
    "register",
    "get_semiring",
    "szero",
    "sone",
    "sadd",
    "smul",
    "encode_value",
    "decode_value",
]


class Semiring:
    """Base class. Subclasses set ``name``, ``zero``, ``one``, ``add``, ``mul``.

    ``add`` and ``mul`` must be binary numpy ufuncs so that ``reduce`` and
    ``accumulate`` are available for folds and scans.
    """

    name: str = ""
    zero: float = 0.0
    one: float = 1.0
    add: np.ufunc = np.add
    mul: np.ufunc = np.multiply

    def reduce(self, x, axis=None):
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            return self.zero
        return self.add.reduce(x, axis=axis)

    def accumulate(self, x, axis=-1, out=None):
        return self.add.accumulate(x, axis=axis, out=out)

    def prod(self, x, axis=None):
        return self.mul.reduce(np.asarray(x, dtype=np.float64), axis=axis)

    def check(self, values, what="values"):
        """Raise :class:`IngestionError` unless every entry is a valid element."""
        values = np.asarray(values, dtype=np.float64)
        if np.isnan(values).any():
            raise IngestionError(f"{what}: NaN is not a valid {self.name} value", field=what)
        return values

    def zeros(self, shape):
        return np.full(shape, self.zero, dtype=np.float64)

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __str__(self):
        return self.name

    def __eq__(self, other):
        return isinstance(other, Semiring) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


class Real(Semiring):
    """(R, +, *, 0, 1)."""

    name = "real"
    zero = 0.0
    one = 1.0
    add = np.add
    mul = np.multiply

    def reduce(self, x, axis=None):
        # np.add.reduce uses pairwise summation on contiguous data
        return super().reduce(np.ascontiguousarray(x, dtype=np.float64), axis=axis)

    def check(self, values, what="values"):
        values = super().check(values, what)
        if not np.isfinite(values).all():
            raise IngestionError(f"{what}: real semiring values must be finite", field=what)
        return values


class MaxPlus(Semiring):
    """(R u {-inf}, max, +, -inf, 0).

    -inf is IEEE negative infinity; ``np.add`` already makes it absorbing
    as long as +inf never enters, which :meth:`check` guarantees.
    """

    name = "max-plus"
    zero = -math.inf
    one = 0.0
    add = np.maximum
    mul = np.add

    def check(self, values, what="values"):
        values = super().check(values, what)
        if np.isposinf(values).any():
            raise IngestionError(f"{what}: +inf is not a valid max-plus value", field=what)
        return values


REAL = Real()
MAX_PLUS = MaxPlus()

_REGISTRY: dict[str, Semiring] = {}


def register(semiring: Semiring) -> Semiring:
    _REGISTRY[semiring.name] = semiring
    return semiring


register(REAL)
register(MAX_PLUS)


def get_semiring(tag) -> Semiring:
    """Resolve a tag (``"real"``, ``"max-plus"`` or an instance)."""
    if isinstance(tag, Semiring):
        return tag
    try:
        return _REGISTRY[tag]
    except KeyError:
        raise ValueError(
            f"unknown semiring {tag!r}; expected one of {sorted(_REGISTRY)}"
        ) from None


def szero(tag) -> float:
    return float(get_semiring(tag).zero)


def sone(tag) -> float:
    return float(get_semiring(tag).one)


def sadd(tag, a, b) -> float:
    return float(get_semiring(tag).add(a, b))


def smul(tag, a, b) -> float:
    return float(get_semiring(tag).mul(a, b))


def encode_value(v: float):
    """JSON-safe encoding: non-finite values become ``"-inf"``/``"inf"``."""
    v = float(v)
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    if math.isnan(v):
        raise IngestionError("NaN cannot be encoded", field="value")
    return v


def decode_value(v) -> float:
    if isinstance(v, str):
        if v not in ("-inf", "inf"):
            raise IngestionError(f"bad encoded value {v!r}", field="value")
        return float(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise IngestionError(f"bad encoded value {v!r}", field="value")
    return float(v)
