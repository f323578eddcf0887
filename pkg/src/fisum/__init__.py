"""fisum: corner-tree sums of grid data in linear time.

Works on order-p tensors over the real and max-plus semirings. Also ships a
brute-force oracle to check the sums and a differentiable feature layer
built on top of them.

>>> import numpy as np
>>> from fisum import CornerTree, Identity, DataTensor, cts, COMPASS
>>> tree = CornerTree(2, (Identity(0), Identity(0)), (0,), (COMPASS["NE"],))
>>> cts(tree, DataTensor.from_grid([[1, 2], [3, 4]]), "real")
4.0
"""
from .engine import (allowed, cts, cts_bruteforce, ctps, eval_node, iterated_sum_1d,
                     mixed_difference)
from .errors import (EnumerationCapError, IngestionError, OrderMismatchError,
                     TreeSchemaError, TreeValidationError)
from .fis import (FisBlock, FisLayer, FisLayerConfig, adaptive_pool, demo_train,
                  fis_block_forward, fis_forward, fis_vjp)
from .grid import DataTensor, ScalarField, field_reduce, load_field, load_tensor, save_field
from .scan import cumsum_dir, cumsum_dir_vjp
from .semiring import MAX_PLUS, REAL, Semiring, get_semiring, register, sadd, smul, sone, szero
from .tree import (COMPASS, CornerTree, Identity, LinearProjection, Monomial, compass_alias,
                   from_json, generate, to_json, validate)

__version__ = "0.1.0"
