"""Compare the compiled and numpy sampling kernels.

Prints one CSV line per (kernel, backend, size) with nanoseconds per draw,
after checking that both backends return identical counts.

    python benchmarks/bench_kernels.py [--draws M] [--repeats R]
"""
import argparse
import time

import numpy as np

from anchored_vi import kernels
from anchored_vi.generators import gen_garnet
from anchored_vi.generative import _stream_keys
from anchored_vi.kernels import sampling_cdf


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_counts(backend, cdf, keys, m, repeats):
    out = np.zeros(cdf.shape, dtype=np.int64)

    def run():
        out[:] = 0
        backend.draw_counts(cdf, keys, m, out, 1)

    return _time(run, repeats), out.copy()


def bench_walk(backend, cdf, horizon, repeats):
    visits = np.zeros(cdf.shape[0], dtype=np.int64)

    def run():
        visits[:] = 0
        backend.walk_visits(cdf, 0, horizon, np.uint64(12345), visits)

    return _time(run, repeats), visits.copy()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=20000, help="draws per (s, a) row")
    parser.add_argument("--horizon", type=int, default=200000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["compiled"] = kernels.get_backend("compiled")
    except ImportError:
        print("# compiled backend not built; timing the numpy backend only")
    print("kernel,backend,states,ns_per_draw,speedup")
    for n_states in (6, 16, 64):
        mdp = gen_garnet(n_states, 3, min(4, n_states), seed=1)
        rows = mdp.transitions.reshape(-1, n_states)
        cdf = sampling_cdf(rows)
        keys = _stream_keys(7, n_states, 3, 0, 0)
        draws = rows.shape[0] * args.draws
        results = {name: bench_counts(b, cdf, keys, args.draws, args.repeats)
                   for name, b in backends.items()}
        _report("draw_counts", n_states, draws, results)
        pi_rows = np.arange(n_states) * 3
        walk_cdf = np.ascontiguousarray(cdf[pi_rows])
        results = {name: bench_walk(b, walk_cdf, args.horizon, args.repeats)
                   for name, b in backends.items()}
        _report("walk_visits", n_states, args.horizon, results)


def _report(kernel, n_states, draws, results):
    outputs = [out for _, out in results.values()]
    if any(not np.array_equal(outputs[0], o) for o in outputs[1:]):
        raise SystemExit(f"{kernel}: backends disagree at {n_states} states")
    base = results["python"][0]
    for name, (secs, _) in results.items():
        print(f"{kernel},{name},{n_states},{secs / draws * 1e9:.2f},{base / secs:.1f}")


if __name__ == "__main__":
    main()
