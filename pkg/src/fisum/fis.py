"""The FIS layer: a shape-preserving feature map built from a bank of corner trees.

Input ``(B, C, *grid)`` -> output ``(B, N_T, *grid)``, where channel ``t`` of
the output is the CTPS field of tree ``t``.  Every node of every tree is a
linear projection of the ``C`` input channels; those weights are the
layer's parameters and are stored as one array of shape
``(N_T, nodes_per_tree, C)``.

Gradients are computed by hand (reverse mode over the CTPS recursion), so
the layer needs nothing beyond numpy.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .engine import project
from .scan import scan_array, scan_array_argmax
from .semiring import MAX_PLUS, REAL, get_semiring
from .tree import CornerTree, LinearProjection, SplitMix64, flip, generate, tree_from_dict, tree_to_dict

__all__ = [
    "FisLayerConfig",
    "FisLayer",
    "FisBlock",
    "fis_forward",
    "fis_vjp",
    "fis_block_forward",
    "adaptive_pool",
    "make_textures",
    "demo_train",
]


def max_workers() -> int:
    env = os.environ.get("FISUM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class FisLayerConfig:
    n_trees: int
    nodes_per_tree: int
    in_channels: int
    family: str = "random"
    semiring: str = "real"
    seed: int = 0
    order: int = 2
    # "field-min" or a float constant
    maxplus_floor: str | float = "field-min"
    bias: bool = False

    def __post_init__(self):
        for name in ("n_trees", "nodes_per_tree", "in_channels", "order"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        get_semiring(self.semiring)
        if isinstance(self.maxplus_floor, str) and self.maxplus_floor != "field-min":
            raise ValueError("maxplus_floor must be 'field-min' or a number")


class _Tape:
    """Per-tree intermediates kept for the backward pass."""

    __slots__ = ("own", "scans", "argmax", "finite", "root")

    def __init__(self, n):
        self.own = [None] * n
        self.scans = [None] * n      # scans[c]: scanned field of child c
        self.argmax = [None] * n     # max-plus only: maximiser indices for child c
        self.finite = [None] * n     # max-plus only: where P_v is finite
        self.root = None


def _tree_forward(tree: CornerTree, W, bias, x_cl, sr, keep: bool):
    """CTPS of one tree over a channels-last batch, optionally recording a tape."""
    n = tree.n_nodes
    tape = _Tape(n) if keep else None
    acc: dict[int, np.ndarray] = {}
    for v in range(n - 1, -1, -1):
        own = project(x_cl, W[v])
        if bias is not None:
            own = own + bias[v]
        pending = acc.pop(v, None)
        field = own if pending is None else sr.mul(own, pending)
        if keep:
            tape.own[v] = own
            if sr == MAX_PLUS:
                tape.finite[v] = np.isfinite(field)
        if v == 0:
            if keep:
                tape.root = field
            return field, tape
        d = tree.directions[v - 1]
        if keep and sr == MAX_PLUS:
            s, src = scan_array_argmax(d, field)
            tape.argmax[v] = src
        else:
            s = scan_array(sr, d, field)
        if keep:
            tape.scans[v] = s
        parent = tree.parents[v - 1]
        acc[parent] = s if parent not in acc else sr.mul(acc[parent], s)
    raise AssertionError("unreachable")


def _scatter_add(g, src):
    """Route ``g`` (shape ``(B, *grid)``) to the grid positions ``src`` per batch item."""
    B = g.shape[0]
    npts = int(np.prod(g.shape[1:]))
    ok = src >= 0
    flat = (np.arange(B).reshape((B,) + (1,) * (g.ndim - 1)) * npts + src)[ok]
    out = np.bincount(flat, weights=g[ok], minlength=B * npts)
    return out.reshape(g.shape)


def _tree_backward(tree, W, x_cl, sr, tape, g_root):
    """Gradients of <CTPS, g_root> w.r.t. node outputs, then weights and input."""
    n = tree.n_nodes
    G = [None] * n
    G[0] = g_root
    gW = np.zeros_like(W)
    gb = np.zeros(n)
    gx = np.zeros_like(x_cl)
    grid_axes = tuple(range(x_cl.ndim - 1))
    for v in range(n):
        g = G[v]
        kids = tree.children(v)
        if sr == REAL:
            factors = [tape.own[v]] + [tape.scans[c] for c in kids]
            # products of all factors but one, via prefix and suffix products
            m = len(factors)
            pre = [None] * m
            suf = [None] * m
            run = None
            for i in range(m):
                pre[i] = run
                run = factors[i] if run is None else run * factors[i]
            run = None
            for i in range(m - 1, -1, -1):
                suf[i] = run
                run = factors[i] if run is None else run * factors[i]
            others = []
            for i in range(m):
                if pre[i] is None and suf[i] is None:
                    others.append(None)
                elif pre[i] is None:
                    others.append(suf[i])
                elif suf[i] is None:
                    others.append(pre[i])
                else:
                    others.append(pre[i] * suf[i])
            d_own = g if others[0] is None else g * others[0]
            for c, o in zip(kids, others[1:]):
                d_scan = g if o is None else g * o
                G[c] = scan_array(sr, flip(tree.directions[c - 1]), d_scan)
        else:
            gm = np.where(tape.finite[v], g, 0.0)
            d_own = gm
            for c in kids:
                G[c] = _scatter_add(gm, tape.argmax[c])
        gW[v] = np.tensordot(d_own, x_cl, axes=(grid_axes, grid_axes))
        gb[v] = d_own.sum()
        gx += d_own[..., None] * W[v]
        G[v] = None
    return gW, gb, gx


class FisLayer:
    """Bank of ``n_trees`` random corner trees with learnable node projections."""

    def __init__(self, config: FisLayerConfig, weights=None, bias=None, structures=None):
        self.config = config
        self.semiring = get_semiring(config.semiring)
        if structures is None:
            seeds = SplitMix64(config.seed)
            trees = [
                generate(config.family, config.nodes_per_tree, config.order,
                         config.in_channels, seeds.next_u64())
                for _ in range(config.n_trees)
            ]
            structures = [t.with_nodes([None] * t.n_nodes) for t in trees]
            if weights is None:
                weights = np.stack([np.stack([f.weights for f in t.nodes]) for t in trees])
        self.structures = list(structures)
        shape = (config.n_trees, config.nodes_per_tree, config.in_channels)
        self.weights = np.array(weights, dtype=np.float64).reshape(shape)
        if config.bias:
            self.bias = (np.zeros(shape[:2]) if bias is None
                         else np.array(bias, dtype=np.float64).reshape(shape[:2]))
        else:
            self.bias = None

    @property
    def n_params(self) -> int:
        return self.weights.size + (0 if self.bias is None else self.bias.size)

    @property
    def trees(self) -> list[CornerTree]:
        out = []
        for t, s in enumerate(self.structures):
            nodes = [
                LinearProjection(self.weights[t, v],
                                 0.0 if self.bias is None else self.bias[t, v],
                                 self.bias is not None)
                for v in range(s.n_nodes)
            ]
            out.append(s.with_nodes(nodes))
        return out

    def _prepare(self, batch):
        x = np.asarray(batch, dtype=np.float64)
        cfg = self.config
        if x.ndim != cfg.order + 2:
            raise ValueError(f"expected input of shape (B, C, grid of order {cfg.order}), "
                             f"got {x.shape}")
        if x.shape[1] != cfg.in_channels:
            raise ValueError(f"expected {cfg.in_channels} channels, got {x.shape[1]}")
        if not np.isfinite(x).all():
            raise ValueError("input contains non-finite values")
        return np.ascontiguousarray(np.moveaxis(x, 1, -1))

    def _map_trees(self, fn):
        k = min(max_workers(), len(self.structures))
        if k <= 1:
            return [fn(t) for t in range(len(self.structures))]
        with ThreadPoolExecutor(max_workers=k) as pool:
            return list(pool.map(fn, range(len(self.structures))))

    def _floor(self, field):
        """Replace max-plus -inf entries (per batch item) by the configured floor.

        Returns the floored field and, for "field-min", the flat index of the
        minimum finite entry per batch item (-1 if none), for the backward pass.
        """
        B = field.shape[0]
        flat = field.reshape(B, -1)
        neg = np.isneginf(flat)
        floor = self.config.maxplus_floor
        if floor == "field-min":
            masked = np.where(neg, np.inf, flat)
            idx = np.argmin(masked, axis=1)
            has = ~neg.all(axis=1)
            fill = np.where(has, masked[np.arange(B), idx], 0.0)
            idx = np.where(has, idx, -1)
        else:
            fill = np.full(B, float(floor))
            idx = np.full(B, -1)
        out = np.where(neg, fill[:, None], flat).reshape(field.shape)
        return out, idx

    def forward(self, batch, return_tape: bool = False):
        x_cl = self._prepare(batch)
        sr = self.semiring
        W, b = self.weights, self.bias

        def one(t):
            field, tape = _tree_forward(self.structures[t], W[t],
                                        None if b is None else b[t], x_cl, sr, return_tape)
            floor_idx = None
            if sr == MAX_PLUS:
                field, floor_idx = self._floor(field)
            return field, tape, floor_idx

        res = self._map_trees(one)
        out = np.stack([r[0] for r in res], axis=1)
        if return_tape:
            return out, [(r[1], r[2]) for r in res]
        return out

    __call__ = forward

    def vjp(self, batch, cotangent, tape=None):
        """Gradients of ``<forward(batch), cotangent>``.

        Returns ``(grad_input, grad_weights)``, plus ``grad_bias`` when biases
        are enabled.  ``tape`` (from ``forward(..., return_tape=True)``) avoids
        recomputing the forward pass; without it the intermediates are
        recomputed.  Max-plus gradients follow the selected maximisers, with
        ties resolved toward the first element in scan order.
        """
        x_cl = self._prepare(batch)
        cot = np.asarray(cotangent, dtype=np.float64)
        B = x_cl.shape[0]
        expected = (B, self.config.n_trees) + x_cl.shape[1:-1]
        if cot.shape != expected:
            raise ValueError(f"cotangent shape {cot.shape} != output shape {expected}")
        if tape is None:
            _, tape = self.forward(batch, return_tape=True)
        sr = self.semiring

        def one(t):
            tree_tape, floor_idx = tape[t]
            g = cot[:, t].copy()
            if sr == MAX_PLUS:
                flat_g = g.reshape(B, -1)
                neg = np.isneginf(tree_tape.root.reshape(B, -1))
                routed = np.where(neg, flat_g, 0.0).sum(axis=1)
                flat_g[neg] = 0.0
                for bi in np.nonzero(floor_idx >= 0)[0]:
                    flat_g[bi, floor_idx[bi]] += routed[bi]
            return _tree_backward(self.structures[t], self.weights[t], x_cl, sr, tree_tape, g)

        res = self._map_trees(one)
        gW = np.stack([r[0] for r in res])
        gx = np.zeros_like(x_cl)
        for r in res:
            gx += r[2]
        gx = np.moveaxis(gx, -1, 1)
        if self.bias is not None:
            return gx, gW, np.stack([r[1] for r in res])
        return gx, gW

    # --- checkpoints ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {"config": asdict(self.config),
                "trees": [tree_to_dict(t) for t in self.trees]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc) -> "FisLayer":
        config = FisLayerConfig(**doc["config"])
        trees = [tree_from_dict(t) for t in doc["trees"]]
        weights = np.stack([np.stack([f.weights for f in t.nodes]) for t in trees])
        bias = None
        if config.bias:
            bias = np.array([[f.bias for f in t.nodes] for t in trees])
        structures = [t.with_nodes([None] * t.n_nodes) for t in trees]
        return cls(config, weights, bias, structures)

    @classmethod
    def from_json(cls, text: str) -> "FisLayer":
        return cls.from_dict(json.loads(text))


def fis_forward(layer: FisLayer, batch) -> np.ndarray:
    return layer.forward(batch)


def fis_vjp(layer: FisLayer, batch, cotangent):
    return layer.vjp(batch, cotangent)


# --- block -------------------------------------------------------------------

def adaptive_pool(x, out_hw, mode="average"):
    """Pool the trailing two axes onto ``out_hw`` bins.

    Bin ``k`` of an axis of length ``H`` covers ``[floor(k H/H'), floor((k+1) H/H'))``.
    """
    x = np.asarray(x, dtype=np.float64)
    H, W = x.shape[-2:]
    Ho, Wo = out_hw
    if not (1 <= Ho <= H and 1 <= Wo <= W):
        raise ValueError(f"output size {out_hw} must lie within 1..{(H, W)}")
    red = np.mean if mode == "average" else np.max
    if mode not in ("average", "max"):
        raise ValueError(f"unknown pooling mode {mode!r}")
    out = np.empty(x.shape[:-2] + (Ho, Wo))
    for i in range(Ho):
        r0, r1 = (i * H) // Ho, ((i + 1) * H) // Ho
        for j in range(Wo):
            c0, c1 = (j * W) // Wo, ((j + 1) * W) // Wo
            out[..., i, j] = red(x[..., r0:r1, c0:c1], axis=(-2, -1))
    return out


def _batch_norm(x, gamma, beta, eps=1e-5):
    axes = (0,) + tuple(range(2, x.ndim))
    mean = x.mean(axis=axes, keepdims=True)
    var = x.var(axis=axes, keepdims=True)
    shape = (1, -1) + (1,) * (x.ndim - 2)
    return (x - mean) / np.sqrt(var + eps) * gamma.reshape(shape) + beta.reshape(shape)


class FisBlock:
    """Two FIS layers, each followed by batch-statistics normalisation and ReLU,
    then adaptive pooling."""

    def __init__(self, layer1: FisLayer, layer2: FisLayer, out_hw, pooling="average"):
        if layer1.config.n_trees != layer2.config.in_channels:
            raise ValueError("layer1 output channels must equal layer2 input channels")
        self.layer1, self.layer2 = layer1, layer2
        self.out_hw = tuple(out_hw)
        self.pooling = pooling
        self.gamma1 = np.ones(layer1.config.n_trees)
        self.beta1 = np.zeros(layer1.config.n_trees)
        self.gamma2 = np.ones(layer2.config.n_trees)
        self.beta2 = np.zeros(layer2.config.n_trees)

    def forward(self, batch):
        h = self.layer1(batch)
        h = np.maximum(_batch_norm(h, self.gamma1, self.beta1), 0.0)
        h = self.layer2(h)
        h = np.maximum(_batch_norm(h, self.gamma2, self.beta2), 0.0)
        return adaptive_pool(h, self.out_hw, self.pooling)

    __call__ = forward


def fis_block_forward(layer1, layer2, pooling, out_hw, batch):
    return FisBlock(layer1, layer2, out_hw, pooling).forward(batch)


# --- desk-scale training demo ------------------------------------------------

def make_textures(n_samples=500, size=16, seed=0, smooth=4):
    """Two-class synthetic textures, labels 0 (isotropic white noise) and
    1 (noise smoothed by a moving average along the last axis).

    Each image is standardised to zero mean and unit variance, so the classes
    differ only in their spatial correlation.
    """
    rng = np.random.default_rng(seed)
    y = np.arange(n_samples) % 2
    rng.shuffle(y)
    noise = rng.standard_normal((n_samples, size, size + smooth - 1))
    iso = noise[:, :, :size]
    kernel = np.ones(smooth) / np.sqrt(smooth)
    aniso = np.stack([np.apply_along_axis(lambda r: np.convolve(r, kernel, "valid"), -1, img)
                      for img in noise])
    x = np.where(y[:, None, None] == 1, aniso, iso)
    x = x - x.mean(axis=(1, 2), keepdims=True)
    x = x / x.std(axis=(1, 2), keepdims=True)
    return x[:, None], y


def _softmax_xent(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    loss = -np.log(p[np.arange(len(y)), y]).mean()
    return loss, p


def demo_train(config: FisLayerConfig | None = None, epochs=30, lr=0.1, n_samples=500,
               size=16, batch_size=50, seed=0, log=None):
    """Train FIS layer -> global average pool -> affine softmax with plain SGD.

    Returns the list of log records: a header, then one ``{epoch, loss,
    accuracy}`` record per epoch measured on the full training set after that
    epoch's updates.  ``log``, if given, is called with each record.
    """
    if config is None:
        config = FisLayerConfig(n_trees=8, nodes_per_tree=2, in_channels=1, seed=seed)
    x, y = make_textures(n_samples, size, seed)
    layer = FisLayer(config)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((config.n_trees, 2)) * 0.01
    c = np.zeros(2)
    records = [{"header": True, "config": asdict(config), "epochs": epochs, "lr": lr,
                "n_samples": n_samples, "size": size, "seed": seed}]
    if log:
        log(records[0])

    def features(xb):
        return layer(xb).mean(axis=(2, 3))

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n_samples)
        for start in range(0, n_samples, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x[idx], y[idx]
            out, tape = layer.forward(xb, return_tape=True)
            feats = out.mean(axis=(2, 3))
            _, p = _softmax_xent(feats @ A + c, yb)
            dlogits = p.copy()
            dlogits[np.arange(len(yb)), yb] -= 1.0
            dlogits /= len(yb)
            dA = feats.T @ dlogits
            dc = dlogits.sum(axis=0)
            dfeats = dlogits @ A.T
            hw = out.shape[2] * out.shape[3]
            cot = np.broadcast_to(dfeats[:, :, None, None] / hw, out.shape)
            grads = layer.vjp(xb, cot, tape=tape)
            A -= lr * dA
            c -= lr * dc
            layer.weights -= lr * grads[1]
            if layer.bias is not None:
                layer.bias -= lr * grads[2]
        loss, p = _softmax_xent(features(x) @ A + c, y)
        rec = {"epoch": epoch, "loss": float(loss),
               "accuracy": float((p.argmax(axis=1) == y).mean())}
        records.append(rec)
        if log:
            log(rec)
    return records
