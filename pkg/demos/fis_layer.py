"""
A feature layer built from random corner trees
==============================================

Each output channel is the pre-sum field of one random corner tree whose node
functions are learnable projections of the input channels. The layer keeps the
spatial shape, so it can be stacked like a convolution.
"""
import numpy as np

from fisum import FisLayer, FisLayerConfig
from fisum.fis import FisBlock

rng = np.random.default_rng(0)
x = rng.standard_normal((2, 3, 12, 9))          # (batch, channels, H, W)

layer = FisLayer(FisLayerConfig(n_trees=5, nodes_per_tree=3, in_channels=3, seed=1))
out = layer(x)
print("output shape:", out.shape)
print("first tree:", layer.trees[0].directions)

# Gradients come from a hand-written reverse pass; a quick directional check
# against finite differences:
cot = rng.standard_normal(out.shape)
gx, gw = layer.vjp(x, cot)
v = rng.standard_normal(x.shape)
h = 1e-6
fd = (np.sum(layer(x + h * v) * cot) - np.sum(layer(x - h * v) * cot)) / (2 * h)
print("directional derivative: analytic %.10f  numeric %.10f" % (np.sum(gx * v), fd))

# Max-plus layers take the maximum over placements instead of the sum. Points
# with no allowed placement would be -inf; they are floored at the smallest
# finite value of the field.
mp = FisLayer(FisLayerConfig(5, 3, 3, semiring="max-plus", seed=1))
print("max-plus output finite:", np.isfinite(mp(x)).all())

# Two layers with normalisation and pooling form a block.
block = FisBlock(layer, FisLayer(FisLayerConfig(4, 2, 5, seed=2)), out_hw=(3, 3))
print("block output shape:", block(x).shape)
