"""
Cost grows with the number of pixels and the number of vertices
===============================================================

Every vertex costs one node evaluation and one directional scan, and each scan
touches every grid point a constant number of times. Quadrupling the pixel
count should therefore roughly quadruple the time.
"""
from fisum.bench import bench_nodes, bench_sizes

for row in bench_sizes((128, 256, 512), nodes=5, repeats=7, memory=True):
    ratio = "" if row["ratio"] is None else f"  x{row['ratio']:.2f}"
    print(f"{row['size']:4d}^2  {row['median_seconds'] * 1e3:7.2f} ms"
          f"  peak {row['peak_bytes'] / 2**20:6.1f} MiB{ratio}")

for row in bench_nodes(range(1, 9), size=256, repeats=5):
    print(f"{row['nodes']} vertices  {row['median_seconds'] * 1e3:6.2f} ms")
