"""Corner-tree sums: the linear-time CTPS recursion and its brute-force oracle.

``ctps`` returns the per-point pre-sum field; ``cts`` folds it over the grid.
``cts_bruteforce`` enumerates every placement of the tree's vertices and is
exponential in the vertex count; it exists to check the fast path.
"""
from __future__ import annotations

import numpy as np

from .errors import EnumerationCapError, OrderMismatchError, TreeValidationError
from .grid import DataTensor, ScalarField, field_reduce
from .scan import scan_array
from .semiring import get_semiring
from .tree import CornerTree, Identity, LinearProjection, Monomial, validate

__all__ = [
    "DEFAULT_ENUMERATION_CAP",
    "eval_node",
    "node_array",
    "satisfies",
    "allowed",
    "ctps_array",
    "ctps",
    "cts",
    "cts_bruteforce",
    "iterated_sum_1d",
    "mixed_difference",
]

DEFAULT_ENUMERATION_CAP = 10**8


def eval_node(f, z_point, tag=None) -> float:
    """Evaluate one node function at one grid point's feature vector.

    The result is a real number, reinterpreted as an element of whatever
    semiring the caller works in (``tag`` is accepted for symmetry only).
    """
    z = np.asarray(z_point, dtype=np.float64).reshape(-1)
    if isinstance(f, (Identity, Monomial)):
        if not 0 <= f.channel < z.shape[0]:
            raise TreeValidationError(f"channel {f.channel} out of range for d={z.shape[0]}")
        x = float(z[f.channel])
        return x if isinstance(f, Identity) else x ** int(f.exponent)
    if isinstance(f, LinearProjection):
        if f.weights.shape[0] != z.shape[0]:
            raise TreeValidationError(
                f"projection has {f.weights.shape[0]} weights, data has d={z.shape[0]}")
        out = float(np.dot(f.weights, z))
        return out + f.bias if f.bias_enabled else out
    raise TypeError(f"unknown node function {f!r}")


def project(values: np.ndarray, w: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """``values @ w`` over the channel axis, as one BLAS matrix-vector product."""
    d = values.shape[-1]
    if out is None:
        return np.dot(values.reshape(-1, d), w).reshape(values.shape[:-1])
    np.dot(values.reshape(-1, d), w, out=out.reshape(-1))
    return out


def node_array(f, values: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Vectorised :func:`eval_node` over a channels-last array ``(..., d)``.

    ``out``, if given, is a C-contiguous float64 buffer of the grid shape.
    """
    if isinstance(f, Identity):
        if out is None:
            return values[..., f.channel].copy()
        np.copyto(out, values[..., f.channel])
        return out
    if isinstance(f, Monomial):
        return np.power(values[..., f.channel], int(f.exponent), out=out)
    out = project(values, f.weights, out)
    if f.bias_enabled:
        out += f.bias
    return out


def satisfies(direction, parent_point, child_point) -> bool:
    for s, a, b in zip(direction, parent_point, child_point):
        if (s > 0 and not b > a) or (s < 0 and not b < a) or (s == 0 and a != b):
            return False
    return True


def allowed(t: CornerTree, placement) -> bool:
    """True iff every edge's direction holds between its placed endpoints.

    ``placement`` maps vertex index to grid point (a dict or a sequence).
    """
    return all(satisfies(d, placement[p], placement[c]) for p, c, d in t.edges())


def _check(t: CornerTree, z: DataTensor):
    if not isinstance(z, DataTensor):
        z = DataTensor(z)
    validate(t, z.channels)
    if t.order != z.order:
        raise OrderMismatchError(f"tree order {t.order} differs from tensor order {z.order}")
    return z


def ctps_array(t: CornerTree, values: np.ndarray, sr) -> np.ndarray:
    """CTPS of ``t`` over the trailing grid axes of ``values`` (shape ``(..., *grid, d)``).

    Vertices are visited in decreasing index order, which is a post-order
    because parents precede children.  Each finished subtree is scanned and
    folded into its parent's accumulator right away, then dropped.
    """
    sr = get_semiring(sr)
    shape = values.shape[:-1]
    # Field buffers are recycled: on large grids, freeing and reallocating them
    # makes the allocator hand pages back to the OS and fault them in again.
    pool: list[np.ndarray] = []

    def take():
        return pool.pop() if pool else np.empty(shape)

    acc: dict[int, np.ndarray] = {}
    for v in range(t.n_nodes - 1, -1, -1):
        field = node_array(t.nodes[v], values, out=take())
        pending = acc.pop(v, None)
        if pending is not None:
            sr.mul(field, pending, out=field)
            pool.append(pending)
        if v == 0:
            return field
        parent = t.parents[v - 1]
        direction = t.directions[v - 1]
        work = take() if sum(1 for s in direction if s) > 1 else None
        s = scan_array(sr, direction, field, out=take(), work=work)
        pool.append(field)
        if work is not None:
            pool.append(work)
        if parent in acc:
            sr.mul(acc[parent], s, out=acc[parent])
            pool.append(s)
        else:
            acc[parent] = s
    raise AssertionError("unreachable")


def ctps(t: CornerTree, z, tag) -> ScalarField:
    """Corner-tree pre-sum field of ``t`` on the data tensor ``z``."""
    sr = get_semiring(tag)
    z = _check(t, z)
    return ScalarField(ctps_array(t, z.values, sr), sr)


def cts(t: CornerTree, z, tag) -> float:
    return field_reduce(ctps(t, z, tag))


def cts_bruteforce(t: CornerTree, z, tag, cap: int = DEFAULT_ENUMERATION_CAP,
                   chunk: int = 1 << 16) -> float:
    """Corner-tree sum by exhaustive enumeration of all vertex placements."""
    sr = get_semiring(tag)
    z = _check(t, z)
    grid = z.shape
    npts = int(np.prod(grid))
    n = t.n_nodes
    total = npts**n
    if total > cap:
        raise EnumerationCapError(f"{total} placements exceed the cap of {cap}")
    pts = list(np.ndindex(*grid))
    node_vals = np.array([[eval_node(f, z.values[pt]) for pt in pts] for f in t.nodes])
    coords = np.array(pts, dtype=np.int64).reshape(npts, len(grid))
    edges = list(t.edges())
    result = sr.zero
    for start in range(0, total, chunk):
        k = np.arange(start, min(start + chunk, total), dtype=np.int64)
        assign = []
        for _ in range(n):
            k, digit = np.divmod(k, npts)
            assign.append(digit)
        mask = np.ones(assign[0].shape, dtype=bool)
        for p, c, d in edges:
            cp, cc = coords[assign[p]], coords[assign[c]]
            for axis, s in enumerate(d):
                if s > 0:
                    mask &= cc[:, axis] > cp[:, axis]
                elif s < 0:
                    mask &= cc[:, axis] < cp[:, axis]
                else:
                    mask &= cc[:, axis] == cp[:, axis]
        if not mask.any():
            continue
        prod = np.full(int(mask.sum()), sr.one)
        for v in range(n):
            prod = sr.mul(prod, node_vals[v][assign[v][mask]])
        result = sr.add(result, sr.reduce(prod))
    return float(result)


def iterated_sum_1d(x, exponents, tag="real") -> np.ndarray:
    """``y_t`` = semiring sum over ``i_1 < ... < i_k <= t`` of prod_j x[i_j]**a_j.

    Dynamic programme with k running states, O(k T).
    """
    sr = get_semiring(tag)
    exponents = tuple(int(a) for a in exponents)
    if not exponents:
        raise ValueError("need at least one exponent")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    k = len(exponents)
    # states[j] = sum over increasing j-tuples ending at or before t
    states = [sr.one] + [sr.zero] * k
    out = np.empty(x.shape[0])
    for t, xt in enumerate(x):
        for j in range(k, 0, -1):
            states[j] = sr.add(states[j], sr.mul(states[j - 1], xt ** exponents[j - 1]))
        out[t] = states[k]
    return out


def mixed_difference(x) -> DataTensor:
    """Per-channel discrete mixed second difference of an order-2 tensor."""
    if not isinstance(x, DataTensor):
        x = DataTensor(x)
    if x.order != 2:
        raise OrderMismatchError("mixed_difference needs an order-2 tensor")
    if min(x.shape) < 2:
        raise ValueError(f"both extents must be >= 2, got {x.shape}")
    v = x.values
    return DataTensor(v[1:, 1:] - v[:-1, 1:] - v[1:, :-1] + v[:-1, :-1])
