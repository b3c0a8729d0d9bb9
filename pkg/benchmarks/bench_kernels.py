"""Time the hot kernels with numba (WBARY_NUMBA=1) and the numpy fallback (WBARY_NUMBA=0).

Each backend runs in its own subprocess because the flag is read at import.
Compilation is excluded by a warm-up call. Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--tuples 2000]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from wbary import _accel, geometry as geo
from wbary.frechet import frechet_batch
from wbary.measures import solve_transport

repeat, T = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.Generator(np.random.Philox(0))
out = {"numba": _accel.USE_NUMBA}

def best(fn):
    fn()
    ts = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); ts.append(time.perf_counter() - t)
    return min(ts)

for M in (geo.sphere(2), geo.hyperbolic(2)):
    o = geo.origin(M)
    X = np.empty((T, 3, M.ambient_dim))
    for t in range(T):
        for i in range(3):
            v = geo.project_tangent(M, o, rng.standard_normal(M.ambient_dim))
            X[t, i] = geo.exp_map(M, o, 0.8 * v / np.linalg.norm(v) * rng.random())
    lam = np.array([0.2, 0.3, 0.5])
    out[f"frechet_{M.kind.value}"] = best(lambda: frechet_batch(M, lam, X))

n = 80
a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
C = rng.random((n, n))
out["transport_simplex_80x80"] = best(lambda: solve_transport(a, b, C))
print(json.dumps(out))
"""


def run(flag, repeat, tuples):
    env = dict(os.environ, WBARY_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(tuples)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--tuples", type=int, default=2000)
    args = p.parse_args()
    fast = run("1", args.repeat, args.tuples)
    slow = run("0", args.repeat, args.tuples)
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for k in fast:
        if k == "numba":
            continue
        print(f"{k:<26}{fast[k]:>12.4f}{slow[k]:>12.4f}{slow[k] / fast[k]:>10.1f}")


if __name__ == "__main__":
    main()
