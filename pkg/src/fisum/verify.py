"""Randomised engine-vs-oracle checks on small integer-valued instances.

Integer data and integer node functions keep every Real-semiring sum exact
in float64 at these sizes, so agreement is required bit-for-bit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .engine import DEFAULT_ENUMERATION_CAP, cts, cts_bruteforce
from .errors import EnumerationCapError
from .grid import DataTensor
from .tree import CornerTree, Identity, LinearProjection, Monomial, generate, to_json

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**6


@dataclass
class VerifyReport:
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    counterexample: dict | None = None
    failures: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.passed + self.failed


def _integer_nodes(rng, n, d):
    nodes = []
    for _ in range(n):
        kind = rng.integers(3)
        if kind == 0:
            nodes.append(Identity(int(rng.integers(d))))
        elif kind == 1:
            nodes.append(Monomial(int(rng.integers(d)), int(rng.integers(1, 3))))
        else:
            nodes.append(LinearProjection(rng.integers(-2, 3, size=d).astype(float)))
    return nodes


def grid_extents(rng, order, max_extent, n_nodes, budget):
    """Random extents in 1..max_extent (the third axis capped at 4), shrunk
    largest-first until the oracle's placement count fits ``budget``."""
    caps = [max_extent] * order
    if order >= 3:
        caps[2] = min(caps[2], 4)
    ext = [int(rng.integers(1, c + 1)) for c in caps]
    while int(np.prod(ext)) ** n_nodes > budget and max(ext) > 1:
        ext[int(np.argmax(ext))] -= 1
    return tuple(ext)


def sample_case(rng, family, order, max_nodes, max_extent, budget=DEFAULT_BUDGET):
    n = int(rng.integers(1, max_nodes + 1))
    d = int(rng.integers(1, 3))
    base = generate(family, n, order, d, int(rng.integers(2**63)))
    tree = base.with_nodes(_integer_nodes(rng, n, d))
    ext = grid_extents(rng, order, max_extent, n, budget)
    z = DataTensor(rng.integers(-3, 4, size=ext + (d,)).astype(float))
    return tree, z


def check_case(tree: CornerTree, z: DataTensor, semiring, cap=DEFAULT_ENUMERATION_CAP,
               corrupt=False):
    """Return ``(fast, oracle)`` for one instance."""
    fast = cts(tree, z, semiring)
    if corrupt:
        fast += 1.0
    return fast, cts_bruteforce(tree, z, semiring, cap=cap)


def run_verification(trials=200, max_nodes=4, max_extent=5, order=2, semiring="real",
                     seed=0, family=None, cap=DEFAULT_ENUMERATION_CAP,
                     budget=DEFAULT_BUDGET, corrupt=False, stop_on_failure=True):
    """Compare ``cts`` with ``cts_bruteforce`` on ``trials`` random cases.

    ``family=None`` cycles through all three tree families.
    """
    rng = np.random.default_rng(seed)
    families = ("random", "linear", "linear-ne") if family is None else (family,)
    report = VerifyReport()
    for i in range(trials):
        fam = families[i % len(families)]
        tree, z = sample_case(rng, fam, order, max_nodes, max_extent, budget)
        try:
            fast, oracle = check_case(tree, z, semiring, cap=cap, corrupt=corrupt)
        except EnumerationCapError as exc:
            log.warning("trial %d skipped: %s", i, exc)
            report.skipped += 1
            continue
        if fast == oracle:
            report.passed += 1
            continue
        report.failed += 1
        case = {"trial": i, "family": fam, "semiring": str(semiring), "tree": to_json(tree),
                "tensor": z.values.tolist(), "engine": fast, "oracle": oracle}
        report.failures.append(case)
        if report.counterexample is None:
            report.counterexample = case
        if stop_on_failure:
            break
    return report
