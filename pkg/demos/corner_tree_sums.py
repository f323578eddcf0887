"""
Corner-tree sums on a small grid
================================

A corner tree places its vertices on grid points; each edge says in which
direction the child sits relative to its parent. The corner-tree sum adds,
over every allowed placement, the product of the node values. Here it is
computed twice: by the linear-time recursion and by plain enumeration.
"""
import itertools

import numpy as np

from fisum import CornerTree, DataTensor, Identity, ctps, cts, cts_bruteforce, generate

# two vertices, child strictly north-east of the root
z = DataTensor.from_grid([[1.0, 2.0], [3.0, 4.0]])
ne = CornerTree(2, (Identity(0), Identity(0)), (0,), ((1, 1),))

# the only allowed placement is (0,0) -> (1,1), so the sum is 1 * 4
print("pre-sum field:\n", ctps(ne, z, "real").values)
print("real sum:", cts(ne, z, "real"), " max-plus sum:", cts(ne, z, "max-plus"))

# Counting a permutation pattern: on a permutation matrix, a root with one
# child to the south-east and one to the north-west counts decreasing triples.
perm = [3, 5, 2, 4, 1]
m = np.zeros((5, 5))
m[np.arange(5), np.array(perm) - 1] = 1.0
t321 = CornerTree(2, (Identity(0),) * 3, (0, 0), ((1, -1), (-1, 1)))
direct = sum(perm[i] > perm[j] > perm[k] for i, j, k in itertools.combinations(range(5), 3))
print("321 occurrences:", cts(t321, DataTensor.from_grid(m), "real"), "direct count:", direct)

# A random four-vertex tree on integer data: recursion and enumeration agree
# exactly, since every intermediate value is an integer.
rng = np.random.default_rng(0)
tree = generate("random", 4, 2, 1, seed=7).with_nodes([Identity(0)] * 4)
zi = DataTensor.from_grid(rng.integers(-3, 4, size=(4, 5)).astype(float))
print("recursion:", cts(tree, zi, "real"), " enumeration:", cts_bruteforce(tree, zi, "real"))
