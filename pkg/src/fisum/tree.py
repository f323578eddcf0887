"""Corner trees: structure, validation, seeded generation and JSON I/O.

A direction is a tuple of signs, one per tensor axis, each in ``{-1, 0, +1}``.
Sign ``+1`` on axis ``k`` means the child's coordinate ``k`` is strictly
greater than the parent's, ``-1`` strictly smaller, ``0`` equal.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TreeSchemaError, TreeValidationError

__all__ = [
    "PLUS",
    "MINUS",
    "EQUAL",
    "COMPASS",
    "compass_alias",
    "parse_direction",
    "format_direction",
    "all_directions",
    "flip",
    "Identity",
    "Monomial",
    "LinearProjection",
    "CornerTree",
    "FAMILIES",
    "SplitMix64",
    "generate",
    "validate",
    "to_json",
    "from_json",
    "tree_to_dict",
    "tree_from_dict",
]

PLUS, EQUAL, MINUS = 1, 0, -1
_SIGN_CHARS = {"+": PLUS, "=": EQUAL, "-": MINUS}
_CHAR_OF = {v: k for k, v in _SIGN_CHARS.items()}

# position k constrains axis k
COMPASS = {
    "N": (EQUAL, PLUS),
    "NE": (PLUS, PLUS),
    "E": (PLUS, EQUAL),
    "SE": (PLUS, MINUS),
    "S": (EQUAL, MINUS),
    "SW": (MINUS, MINUS),
    "W": (MINUS, EQUAL),
    "NW": (MINUS, PLUS),
}


def compass_alias(name: str) -> tuple[int, ...]:
    try:
        return COMPASS[name]
    except KeyError:
        raise ValueError(f"unknown compass direction {name!r}") from None


def parse_direction(text: str, order: int | None = None) -> tuple[int, ...]:
    """Parse ``"+-="``-style strings, or a compass name when ``order == 2``."""
    if text in COMPASS and order in (None, 2):
        return COMPASS[text]
    try:
        return tuple(_SIGN_CHARS[c] for c in text)
    except KeyError:
        raise ValueError(f"bad direction string {text!r}") from None


def format_direction(d) -> str:
    return "".join(_CHAR_OF[s] for s in d)


def all_directions(p: int) -> list[tuple[int, ...]]:
    """The 3**p - 1 admissible sign patterns in lexicographic (-,=,+) order."""
    return [d for d in itertools.product((MINUS, EQUAL, PLUS), repeat=p) if any(d)]


def flip(d) -> tuple[int, ...]:
    return tuple(-s for s in d)


# --- node functions --------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    channel: int


@dataclass(frozen=True)
class Monomial:
    channel: int
    exponent: int


@dataclass(frozen=True, eq=False)
class LinearProjection:
    weights: np.ndarray
    bias: float = 0.0
    bias_enabled: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def __eq__(self, other):
        return (
            isinstance(other, LinearProjection)
            and self.weights.tobytes() == other.weights.tobytes()
            and self.bias == other.bias
            and self.bias_enabled == other.bias_enabled
        )


NodeFunction = Identity | Monomial | LinearProjection


@dataclass(frozen=True)
class CornerTree:
    """Rooted tree, vertex 0 is the root and ``parents[i-1] < i`` for vertex i.

    ``parents`` and ``directions`` are indexed by ``child - 1``.
    """

    order: int
    nodes: tuple
    parents: tuple = ()
    directions: tuple = ()
    _children: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(self, "directions", tuple(tuple(int(s) for s in d)
                                                     for d in self.directions))
        kids = [[] for _ in self.nodes]
        for i, p in enumerate(self.parents, start=1):
            if 0 <= p < len(kids):
                kids[p].append(i)
        object.__setattr__(self, "_children", tuple(tuple(k) for k in kids))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def edges(self):
        """Yield ``(parent, child, direction)``."""
        for i, (p, d) in enumerate(zip(self.parents, self.directions), start=1):
            yield p, i, d

    def with_nodes(self, nodes) -> "CornerTree":
        return CornerTree(self.order, tuple(nodes), self.parents, self.directions)


def validate(t: CornerTree, d: int | None = None) -> None:
    """Raise :class:`TreeValidationError` if ``t`` is not a valid corner tree.

    Channel references are only checked when ``d`` is given.
    """
    n = len(t.nodes)
    if t.order < 1:
        raise TreeValidationError(f"order must be >= 1, got {t.order}")
    if n < 1:
        raise TreeValidationError("tree has no vertices")
    if len(t.parents) != n - 1 or len(t.directions) != n - 1:
        raise TreeValidationError("need exactly one parent and direction per non-root vertex")
    for i, (p, dr) in enumerate(zip(t.parents, t.directions), start=1):
        if not 0 <= p < i:
            raise TreeValidationError(
                f"not a tree: parent {p} must precede the vertex (forward or self parent)",
                vertex=i)
        if len(dr) != t.order:
            raise TreeValidationError(
                f"direction {dr} has length {len(dr)}, tree order is {t.order}", vertex=i)
        if any(s not in (MINUS, EQUAL, PLUS) for s in dr):
            raise TreeValidationError(f"direction {dr} has signs outside -1/0/+1", vertex=i)
        if not any(dr):
            raise TreeValidationError("degenerate direction (all axes '=')", vertex=i)
    for i, f in enumerate(t.nodes):
        if isinstance(f, (Identity, Monomial)):
            if f.channel < 0 or (d is not None and f.channel >= d):
                raise TreeValidationError(f"channel {f.channel} out of range for d={d}", vertex=i)
            if isinstance(f, Monomial) and (int(f.exponent) != f.exponent or f.exponent < 1):
                raise TreeValidationError(f"exponent must be a positive integer, got {f.exponent}",
                                          vertex=i)
        elif isinstance(f, LinearProjection):
            if d is not None and f.weights.shape[0] != d:
                raise TreeValidationError(
                    f"projection has {f.weights.shape[0]} weights, data has d={d}", vertex=i)
            if not np.isfinite(f.weights).all():
                raise TreeValidationError("non-finite projection weights", vertex=i)
        else:
            raise TreeValidationError(f"unknown node function {f!r}", vertex=i)


# --- seeded generation -----------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny portable PRNG (Steele, Lea and Flood's splitmix64)."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Integer in [0, n) via multiply-shift."""
        return (self.next_u64() * n) >> 64


FAMILIES = ("random", "linear", "linear-ne")


def generate(family: str, n_nodes: int, p: int, d: int, seed: int) -> CornerTree:
    """Draw a corner tree with LinearProjection nodes.

    Draw order: parents (vertices 1..n-1), then edge directions (same order),
    then weights vertex-major, channel-minor. ``random`` attaches vertex i to
    a uniform earlier vertex; ``linear`` and ``linear-ne`` form a chain.
    Directions are uniform over the 3**p - 1 patterns except for
    ``linear-ne``, which uses all-plus edges.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown tree family {family!r}; expected one of {FAMILIES}")
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if p < 1 or d < 1:
        raise ValueError("order and channel count must be >= 1")
    rng = SplitMix64(seed)
    if family == "random":
        parents = [rng.below(i) for i in range(1, n_nodes)]
    else:
        parents = list(range(n_nodes - 1))
    if family == "linear-ne":
        dirs = [(PLUS,) * p] * (n_nodes - 1)
    else:
        pats = all_directions(p)
        dirs = [pats[rng.below(len(pats))] for _ in range(n_nodes - 1)]
    bound = 1.0 / math.sqrt(d)
    nodes = []
    for _ in range(n_nodes):
        w = [(2.0 * rng.uniform() - 1.0) * bound for _ in range(d)]
        nodes.append(LinearProjection(np.array(w)))
    return CornerTree(p, tuple(nodes), tuple(parents), tuple(dirs))


# --- JSON ------------------------------------------------------------------

def _node_to_dict(f) -> dict:
    if isinstance(f, Identity):
        return {"kind": "identity", "channel": f.channel}
    if isinstance(f, Monomial):
        return {"kind": "monomial", "channel": f.channel, "exponent": f.exponent}
    out = {"kind": "linear", "weights": f.weights.tolist()}
    if f.bias_enabled:
        out["bias"] = f.bias
    return out


def tree_to_dict(t: CornerTree) -> dict:
    return {
        "order": t.order,
        "nodes": [_node_to_dict(f) for f in t.nodes],
        "edges": [
            {"parent": p, "child": c, "dir": format_direction(d)} for p, c, d in t.edges()
        ],
    }


def to_json(t: CornerTree) -> str:
    return json.dumps(tree_to_dict(t))


def _req(obj, key, types, path):
    if key not in obj:
        raise TreeSchemaError(f"missing required key {key!r}", path)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, types):
        raise TreeSchemaError(f"wrong type {type(v).__name__}", f"{path}/{key}")
    return v


def _node_from_dict(obj, path):
    if not isinstance(obj, dict):
        raise TreeSchemaError("node must be an object", path)
    kind = _req(obj, "kind", str, path)
    if kind == "identity":
        return Identity(_req(obj, "channel", int, path))
    if kind == "monomial":
        return Monomial(_req(obj, "channel", int, path), _req(obj, "exponent", int, path))
    if kind == "linear":
        w = _req(obj, "weights", list, path)
        for j, x in enumerate(w):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise TreeSchemaError("weight must be a number", f"{path}/weights/{j}")
        if "bias" in obj:
            b = _req(obj, "bias", (int, float), path)
            return LinearProjection(np.array(w, dtype=np.float64), b, True)
        return LinearProjection(np.array(w, dtype=np.float64))
    raise TreeSchemaError(f"unknown node kind {kind!r}", f"{path}/kind")


def tree_from_dict(doc) -> CornerTree:
    if not isinstance(doc, dict):
        raise TreeSchemaError("document must be an object", "")
    order = _req(doc, "order", int, "")
    nodes_raw = _req(doc, "nodes", list, "")
    edges_raw = doc.get("edges", [])
    if not isinstance(edges_raw, list):
        raise TreeSchemaError("wrong type", "/edges")
    nodes = [_node_from_dict(o, f"/nodes/{i}") for i, o in enumerate(nodes_raw)]
    n = len(nodes)
    parents = [None] * n
    dirs = [None] * n
    for j, e in enumerate(edges_raw):
        path = f"/edges/{j}"
        if not isinstance(e, dict):
            raise TreeSchemaError("edge must be an object", path)
        p = _req(e, "parent", int, path)
        c = _req(e, "child", int, path)
        ds = _req(e, "dir", str, path)
        if not 0 <= c < n:
            raise TreeSchemaError(f"child {c} is not a vertex", f"{path}/child")
        if not 0 <= p < n:
            raise TreeSchemaError(f"parent {p} is not a vertex", f"{path}/parent")
        if c == 0:
            raise TreeSchemaError("the root (vertex 0) cannot be a child", f"{path}/child")
        if parents[c] is not None:
            raise TreeSchemaError(f"vertex {c} has two parents", f"{path}/child")
        try:
            dr = parse_direction(ds, order)
        except ValueError as exc:
            raise TreeSchemaError(str(exc), f"{path}/dir") from None
        parents[c], dirs[c] = p, dr
    for c in range(1, n):
        if parents[c] is None:
            raise TreeSchemaError(f"vertex {c} has no incoming edge", "/edges")
    t = CornerTree(order, tuple(nodes), tuple(parents[1:]), tuple(dirs[1:]))
    validate(t)
    return t


def from_json(text: str) -> CornerTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeSchemaError(f"invalid JSON: {exc}", "") from None
    return tree_from_dict(doc)
