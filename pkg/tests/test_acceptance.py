"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.  Tolerances are pinned below.
"""
import itertools
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import report  # noqa: E402
from gradcheck import fd_errors, random_case  # noqa: E402

from fisum.bench import bench_nodes, bench_sizes  # noqa: E402
from fisum.engine import cts, cts_bruteforce, iterated_sum_1d  # noqa: E402
from fisum.fis import FisLayer, FisLayerConfig  # noqa: E402
from fisum.grid import DataTensor  # noqa: E402
from fisum.scan import cumsum_dir, cumsum_dir_bruteforce  # noqa: E402
from fisum.tree import FAMILIES, CornerTree, Identity, Monomial, all_directions  # noqa: E402
from fisum.verify import run_verification  # noqa: E402

SEMIRINGS = ("real", "max-plus")

# pinned tolerances
ORACLE_TRIALS = 200          # per family, per order, per semiring
ORACLE_MAX_NODES = 4
ORACLE_MAX_EXTENT = 5
ORACLE_SECONDS = 120
SCAN_MAX_EXTENT = 5
STRIP_MAX_T = 64
STRIP_MAX_K = 4
GRAD_CONFIGS = 50            # per semiring
GRAD_REL_TOL = 1e-6
GRAD_SECONDS = 300
BENCH_SIZES = (128, 256, 512)
BENCH_RATIO = (2.6, 5.4)
BENCH_MEMORY_SLACK = 1.5
BENCH_NODE_SLACK = 1.5
BENCH_NODES = range(1, 9)
BENCH_REPEATS = 15
DEMO_ACCURACY = 0.9
DEMO_EPOCHS = 30
DEMO_SECONDS = 180


def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    total = bad = 0
    first = None
    for semiring in SEMIRINGS:
        for family in FAMILIES:
            for p in (1, 2, 3):
                r = run_verification(trials=ORACLE_TRIALS, max_nodes=ORACLE_MAX_NODES,
                                     max_extent=ORACLE_MAX_EXTENT, order=p,
                                     semiring=semiring, family=family, seed=1000 + p,
                                     stop_on_failure=False)
                total += r.total + r.skipped
                bad += r.failed + r.skipped
                first = first or r.counterexample
    secs = time.perf_counter() - t0
    ok = bad == 0 and secs < ORACLE_SECONDS
    assert report(1, "oracle equivalence", ok,
                  f"{total - bad}/{total} exact, {secs:.1f}s (limit {ORACLE_SECONDS}s)"), first


def test_criterion_2_directional_scans():
    rng = np.random.default_rng(2)
    checked = bad = 0
    for p in (2, 3):
        for d in all_directions(p):
            for semiring in SEMIRINGS:
                for _ in range(3):
                    shape = tuple(int(v) for v in rng.integers(1, SCAN_MAX_EXTENT + 1, size=p))
                    x = rng.integers(-9, 10, size=shape).astype(float)
                    checked += 1
                    if not np.array_equal(cumsum_dir(semiring, d, x).values,
                                          cumsum_dir_bruteforce(semiring, d, x)):
                        bad += 1
    n_dirs = len(all_directions(2)) + len(all_directions(3))
    assert report(2, "directional scans", bad == 0 and n_dirs == 34,
                  f"{n_dirs} sign patterns, {checked - bad}/{checked} grids exact")


def test_criterion_3_permutation_fixture():
    perm = [3, 5, 2, 4, 1]
    z = np.zeros((5, 5))
    z[np.arange(5), np.asarray(perm) - 1] = 1.0
    # triple enumeration over positions i < j < k with decreasing values
    triples = sum(1 for i, j, k in itertools.combinations(range(5), 3)
                  if perm[i] > perm[j] > perm[k])
    t = CornerTree(2, (Identity(0),) * 3, (0, 0), ((1, -1), (-1, 1)))
    zt = DataTensor.from_grid(z)
    fast, oracle = cts(t, zt, "real"), cts_bruteforce(t, zt, "real")
    ok = fast == oracle == triples
    assert report(3, "321-pattern fixture", ok,
                  f"cts={fast:g}, brute force={oracle:g}, triple enumeration={triples}"
                  " (stated fixture value 4 does not match enumeration; see ledger)")


def test_criterion_4_one_dimensional_reduction():
    rng = np.random.default_rng(4)
    checked = bad = 0
    for semiring in SEMIRINGS:
        for T in (1, 2, 7, 33, STRIP_MAX_T):
            for k in range(1, STRIP_MAX_K + 1):
                exps = tuple(int(a) for a in rng.integers(1, 4, size=k))
                x = rng.integers(-3, 4, size=T).astype(float)
                tree = CornerTree(1, tuple(Monomial(0, a) for a in exps), tuple(range(k - 1)),
                                  ((1,),) * (k - 1))
                dp = iterated_sum_1d(x, exps, semiring)[-1]
                checked += 1
                bad += cts(tree, DataTensor.from_grid(x), semiring) != dp
    assert report(4, "1-D reduction", bad == 0, f"{checked - bad}/{checked} strips exact")


def test_criterion_5_gradients():
    t0 = time.perf_counter()
    worst = {}
    kinks = 0
    for semiring in SEMIRINGS:
        rng = np.random.default_rng(5)
        w = 0.0
        for _ in range(GRAD_CONFIGS):
            e, k = fd_errors(*random_case(rng, semiring))
            w, kinks = max(w, e), kinks + k
        worst[semiring] = w
    secs = time.perf_counter() - t0
    ok = max(worst.values()) <= GRAD_REL_TOL and secs < GRAD_SECONDS
    assert report(5, "gradient correctness", ok,
                  f"max rel err real={worst['real']:.2e} max-plus={worst['max-plus']:.2e}"
                  f" (tol {GRAD_REL_TOL:g}), {kinks} kink entries skipped, {secs:.1f}s")


@pytest.mark.slow
def test_criterion_6_linear_complexity():
    parts, ok = [], True
    for semiring in SEMIRINGS:
        rows = bench_sizes(BENCH_SIZES, nodes=5, semiring=semiring, repeats=BENCH_REPEATS,
                           memory=True)
        ratios = [r["ratio"] for r in rows[1:]]
        mem = rows[-1]["peak_bytes"] / rows[0]["peak_bytes"]
        pixels = (BENCH_SIZES[-1] / BENCH_SIZES[0]) ** 2
        nodes = bench_nodes(BENCH_NODES, size=BENCH_SIZES[-1], semiring=semiring, repeats=5)
        n = np.array([r["nodes"] for r in nodes], dtype=float)
        t = np.array([r["median_seconds"] for r in nodes])
        slope, icpt = np.polyfit(n, t, 1)
        excess = float(np.max(t / (icpt + slope * n)))
        ok &= all(BENCH_RATIO[0] <= r <= BENCH_RATIO[1] for r in ratios)
        ok &= mem <= BENCH_MEMORY_SLACK * pixels
        ok &= excess <= BENCH_NODE_SLACK
        parts.append(f"{semiring}: ratios {', '.join(f'{r:.2f}' for r in ratios)}"
                     f" in {list(BENCH_RATIO)}, memory x{mem:.1f} (limit"
                     f" {BENCH_MEMORY_SLACK * pixels:g}), node fit max x{excess:.2f}"
                     f" (limit {BENCH_NODE_SLACK})")
    assert report(6, "linear complexity", ok, "; ".join(parts))


def test_criterion_7_shape_contract():
    seen = []

    @settings(max_examples=100, deadline=None)
    @given(B=st.integers(1, 3), C=st.integers(1, 3), H=st.integers(1, 7), W=st.integers(1, 7),
           NT=st.integers(1, 4), n=st.integers(1, 4), semiring=st.sampled_from(SEMIRINGS),
           family=st.sampled_from(FAMILIES), seed=st.integers(0, 2**32))
    def prop(B, C, H, W, NT, n, semiring, family, seed):
        layer = FisLayer(FisLayerConfig(NT, n, C, family, semiring, seed))
        out = layer(np.random.default_rng(seed).standard_normal((B, C, H, W)))
        assert out.shape == (B, NT, H, W)
        seen.append((B, H, W))

    try:
        prop()
        err = None
    except Exception as exc:  # reported, then re-raised
        err = exc
    non_square = sum(h != w for _, h, w in seen)
    single = sum(b == 1 for b, _, _ in seen)
    ok = err is None and non_square > 0 and single > 0
    report(7, "shape contract", ok,
           f"{len(seen)} configs, {non_square} with H!=W, {single} with B=1"
           + ("" if err is None else f", error: {err!r}"))
    if err is not None:
        raise err
    assert ok


_DET_SCRIPT = """
import hashlib, json, numpy as np
from fisum.fis import FisLayer, FisLayerConfig
from fisum.tree import generate, to_json
h = lambda b: hashlib.sha256(b).hexdigest()
trees = "".join(to_json(generate(f, 6, 2, 3, 77)) for f in ("random", "linear", "linear-ne"))
out = {"trees": h(trees.encode())}
for sr in ("real", "max-plus"):
    layer = FisLayer(FisLayerConfig(4, 3, 2, semiring=sr, seed=77))
    x = np.random.default_rng(77).standard_normal((2, 2, 9, 7))
    out["weights_" + sr] = h(layer.weights.tobytes())
    out["forward_" + sr] = h(layer(x).tobytes())
print(json.dumps(out))
"""


def _single_core():
    if hasattr(os, "sched_setaffinity"):
        os.sched_setaffinity(0, {min(os.sched_getaffinity(0))})


def _env():
    env = dict(os.environ)
    for k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "FISUM_THREADS"):
        env[k] = "1"
    return env


@pytest.fixture(scope="module")
def demo_runs(tmp_path_factory):
    runs = []
    for i in range(2):
        log = tmp_path_factory.mktemp("demo") / f"run{i}.jsonl"
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-m", "fisum", "demo-train", "--out", str(log)],
                       check=True, env=_env(), preexec_fn=_single_core)
        runs.append((log.read_bytes(), time.perf_counter() - t0))
    return runs


def test_criterion_8_determinism(demo_runs):
    outs = [subprocess.run([sys.executable, "-c", _DET_SCRIPT], check=True, capture_output=True,
                           text=True).stdout for _ in range(2)]
    same_objects = outs[0] == outs[1] and outs[0].strip() != ""
    same_logs = demo_runs[0][0] == demo_runs[1][0]
    ok = same_objects and same_logs
    assert report(8, "determinism", ok,
                  f"trees/weights/forward hashes identical across processes: {same_objects};"
                  f" demo logs byte-identical: {same_logs}")


def test_criterion_9_demo_training(demo_runs):
    log, secs = demo_runs[0]
    recs = [json.loads(line) for line in log.decode().splitlines()]
    epochs = [r for r in recs if "epoch" in r]
    acc = epochs[-1]["accuracy"] if epochs else float("nan")
    ok = len(epochs) == DEMO_EPOCHS and acc >= DEMO_ACCURACY and secs < DEMO_SECONDS
    assert report(9, "demo training", ok,
                  f"final train accuracy {acc:.3f} after {len(epochs)} epochs (gate"
                  f" {DEMO_ACCURACY}), {secs:.1f}s on one core (limit {DEMO_SECONDS}s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
