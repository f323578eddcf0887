"""Directional semiring cumulative sums.

For a direction ``D`` and field ``x``, ``cumsum_dir`` returns at every point
``t`` the semiring sum of ``x[r]`` over the points ``r`` lying strictly in
direction ``D`` from ``t`` (axes with sign 0 must match exactly).  It is a
composition of one exclusive 1-D scan per non-zero axis, so its cost is
linear in the number of grid points.

The array-level functions act on the *trailing* ``len(direction)`` axes, so
leading batch axes come for free.
"""
from __future__ import annotations

import numpy as np

from .errors import OrderMismatchError
from .grid import ScalarField
from .semiring import REAL, Semiring, get_semiring
from .tree import flip

__all__ = [
    "exclusive_scan",
    "scan_array",
    "scan_array_argmax",
    "cumsum_dir",
    "cumsum_dir_vjp",
    "cumsum_dir_bruteforce",
]

# inner slice size from which a non-trailing axis is scanned slice by slice
_ROW_LOOP_MIN = 256


def exclusive_scan(sr: Semiring, x: np.ndarray, axis: int, sign: int,
                   out: np.ndarray | None = None) -> np.ndarray:
    """Exclusive prefix (sign -1) or suffix (sign +1) scan along ``axis``.

    ``out`` (C-contiguous, not overlapping ``x``) receives the result if given.
    """
    if sign == 0:
        return x
    axis = axis % x.ndim
    if out is None:
        out = np.empty(x.shape)
    src, dst = (x, out) if sign < 0 else (np.flip(x, axis), np.flip(out, axis))

    def sl(a, b):
        return (slice(None),) * axis + (slice(a, b),)

    dst[sl(0, 1)] = sr.zero
    n = x.shape[axis]
    if n < 2:
        return out
    if int(np.prod(x.shape[axis + 1:])) >= _ROW_LOOP_MIN:
        # ufunc.accumulate walks non-trailing axes element by element, which
        # falls off a cliff once a field outgrows cache; slice-wise adds don't
        pre = (slice(None),) * axis
        sr.add(dst[pre + (0,)], src[pre + (0,)], out=dst[pre + (1,)])
        for i in range(2, n):
            sr.add(dst[pre + (i - 1,)], src[pre + (i - 1,)], out=dst[pre + (i,)])
    else:
        sr.accumulate(src[sl(0, -1)], axis=axis, out=dst[sl(1, None)])
    return out


def scan_array(sr: Semiring, direction, x: np.ndarray, axis_order=None,
               out: np.ndarray | None = None, work: np.ndarray | None = None) -> np.ndarray:
    """Apply the directional scan to the trailing axes of ``x``.

    ``axis_order`` permutes the per-axis processing order; the result does
    not depend on it (up to rounding for Real).  ``out`` and ``work`` are
    optional C-contiguous buffers shaped like ``x``; passes alternate between
    them so the last one lands in ``out``.
    """
    p = len(direction)
    if x.ndim < p:
        raise OrderMismatchError(f"direction of length {p} on an array with {x.ndim} axes")
    src = np.asarray(x, dtype=np.float64)
    lead = x.ndim - p
    axes = [k for k in (range(p) if axis_order is None else axis_order) if direction[k]]
    if out is None:
        out = np.empty(src.shape)
    if not axes:
        np.copyto(out, src)
        return out
    if len(axes) > 1 and work is None:
        work = np.empty(src.shape)
    for i, k in enumerate(axes):
        dst = out if (len(axes) - 1 - i) % 2 == 0 else work
        exclusive_scan(sr, src, lead + k, direction[k], out=dst)
        src = dst
    return out


def _argmax_scan_last(v: np.ndarray, src: np.ndarray, sign: int):
    """Exclusive max-scan along the last axis that also carries source indices.

    Ties keep the element met first in scan order.  Empty prefixes get
    value -inf and source -1.
    """
    if sign > 0:
        v, src = v[..., ::-1], src[..., ::-1]
    n = v.shape[-1]
    run = np.maximum.accumulate(v, axis=-1)
    prev = np.concatenate([np.full(v.shape[:-1] + (1,), -np.inf), run[..., :-1]], axis=-1)
    is_new = v > prev
    is_new[..., 0] = True
    pos = np.maximum.accumulate(np.where(is_new, np.arange(n), 0), axis=-1)
    best_src = np.take_along_axis(src, pos, axis=-1)
    out_v = np.empty_like(v)
    out_s = np.empty_like(src)
    out_v[..., 0] = -np.inf
    out_s[..., 0] = -1
    out_v[..., 1:] = run[..., :-1]
    out_s[..., 1:] = best_src[..., :-1]
    if sign > 0:
        out_v, out_s = out_v[..., ::-1], out_s[..., ::-1]
    return out_v, out_s


def scan_array_argmax(direction, x: np.ndarray):
    """Max-plus directional scan plus, per output point, the flat index
    (within the trailing grid) of the selected maximiser, or -1 when the
    constraint set is empty or all of it is -inf.
    """
    p = len(direction)
    grid = x.shape[x.ndim - p:]
    v = np.asarray(x, dtype=np.float64)
    src = np.broadcast_to(np.arange(int(np.prod(grid))).reshape(grid), v.shape).copy()
    lead = x.ndim - p
    for k in range(p):
        s = direction[k]
        if not s:
            continue
        v = np.moveaxis(v, lead + k, -1)
        src = np.moveaxis(src, lead + k, -1)
        v, src = _argmax_scan_last(v, src, s)
        v = np.moveaxis(v, -1, lead + k)
        src = np.moveaxis(src, -1, lead + k)
    src = np.where(np.isneginf(v), -1, src)
    return np.ascontiguousarray(v), np.ascontiguousarray(src)


def _field_values(x, sr):
    if isinstance(x, ScalarField):
        if x.semiring != sr:
            raise ValueError(f"field is {x.semiring.name}, scan requested {sr.name}")
        return x.values
    return sr.check(np.asarray(x, dtype=np.float64), "field")


def cumsum_dir(tag, direction, x) -> ScalarField:
    """Directional cumulative sum of a field (see module docstring)."""
    sr = get_semiring(tag)
    vals = _field_values(x, sr)
    if len(direction) != vals.ndim:
        raise OrderMismatchError(
            f"direction has length {len(direction)} but field has order {vals.ndim}")
    return ScalarField(scan_array(sr, direction, vals), sr)


def cumsum_dir_vjp(tag, direction, cotangent) -> ScalarField:
    """Adjoint of the Real directional scan: the scan in the flipped direction."""
    sr = get_semiring(tag)
    if sr != REAL:
        raise ValueError("cumsum_dir_vjp is defined for the real semiring only")
    return cumsum_dir(sr, flip(direction), cotangent)


def cumsum_dir_bruteforce(tag, direction, x) -> np.ndarray:
    """O(N^2) reference: loop over every (t, r) pair."""
    sr = get_semiring(tag)
    x = np.asarray(x, dtype=np.float64)
    if len(direction) != x.ndim:
        raise OrderMismatchError("direction length differs from field order")
    out = sr.zeros(x.shape)
    pts = list(np.ndindex(x.shape))
    for t in pts:
        acc = sr.zero
        for r in pts:
            if all((s > 0 and rk > tk) or (s < 0 and rk < tk) or (s == 0 and rk == tk)
                   for s, rk, tk in zip(direction, r, t)):
                acc = sr.add(acc, x[r])
        out[t] = acc
    return out
