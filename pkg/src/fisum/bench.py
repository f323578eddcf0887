"""Wall-time and peak-memory measurements of the CTPS recursion."""
from __future__ import annotations

import time
import tracemalloc

import numpy as np

from .engine import ctps_array
from .semiring import get_semiring
from .tree import generate


def time_ctps(tree, z, semiring, repeats=5, warmup=1):
    """Median wall time (seconds) of ``ctps_array`` over ``repeats`` runs."""
    sr = get_semiring(semiring)
    for _ in range(warmup):
        ctps_array(tree, z, sr)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        ctps_array(tree, z, sr)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def peak_bytes(tree, z, semiring):
    """Peak traced allocation during one ``ctps_array`` call."""
    sr = get_semiring(semiring)
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        ctps_array(tree, z, sr)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return peak


def _interleaved_medians(calls, repeats):
    """Median seconds per call, timing the calls round-robin.

    Interleaving spreads slow drift in machine speed evenly over all calls,
    so their ratios stay meaningful on a noisy host.
    """
    times = [[] for _ in calls]
    for _ in range(repeats):
        for i, f in enumerate(calls):
            t0 = time.perf_counter()
            f()
            times[i].append(time.perf_counter() - t0)
    return [float(np.median(t)) for t in times]


def bench_sizes(sizes=(128, 256, 512), nodes=5, semiring="real", repeats=5, order=2,
                family="random", seed=0, memory=False):
    """One row per square grid size: ``size, median_seconds, ratio[, peak_bytes]``.

    ``ratio`` is the time relative to the previous row (``None`` for the first).
    """
    tree = generate(family, nodes, order, 1, seed)
    sr = get_semiring(semiring)
    rng = np.random.default_rng(seed)
    grids = [rng.standard_normal((s,) * order + (1,)) for s in sizes]
    calls = [lambda z=z: ctps_array(tree, z, sr) for z in grids]
    # untimed warm-up, largest first: until the allocator has seen big blocks,
    # each one is a fresh mmap and the early sizes pay page faults
    for f in reversed(calls):
        f()
    medians = _interleaved_medians(calls, repeats)
    rows = []
    prev = None
    for s, z, t in zip(sizes, grids, medians):
        row = {"size": s, "median_seconds": t, "ratio": None if prev is None else t / prev}
        if memory:
            row["peak_bytes"] = peak_bytes(tree, z, semiring)
        rows.append(row)
        prev = t
    return rows


def bench_nodes(node_counts=range(1, 9), size=512, semiring="real", repeats=5,
                family="linear-ne", seed=0):
    """Median time per node count on a fixed ``size x size`` grid."""
    sr = get_semiring(semiring)
    z = np.random.default_rng(seed).standard_normal((size, size, 1))
    counts = list(node_counts)
    trees = [generate(family, n, 2, 1, seed) for n in counts]
    calls = [lambda t=t: ctps_array(t, z, sr) for t in trees]
    for f in reversed(calls):
        f()
    return [{"nodes": n, "median_seconds": t}
            for n, t in zip(counts, _interleaved_medians(calls, repeats))]
