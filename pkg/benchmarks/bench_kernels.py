"""Time the compiled kernels against the NumPy fallback.

Run from the repository root after building the extension::

    python benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time per backend, the speed-up, and the
largest absolute difference between the two outputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from qvlab import _fallback
from qvlab.distributions import make_distribution

try:
    from qvlab import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases(rng: np.random.Generator):
    F = make_distribution({"family": "uniform"})
    grid_u = np.linspace(-1.0, 1.0, 801)
    grid_v = 0.26 * grid_u
    nodes = rng.uniform(-0.3, 0.3, 4000)
    weights = rng.random(4000)
    weights /= weights.sum()
    y = np.cumsum(rng.normal(0.01, 1.0, 20_000))
    y += rng.normal(0, 5.0, y.size)
    w = rng.random(y.size) + 0.1
    draws = rng.random((200, 10_001))
    return {
        "char_function (4000 nodes x 4096 freqs)": ((nodes, weights, 0.01, 4096), {}),
        "isotonic_increasing (20000 points)": ((y, w), {}),
        "election_sums (200 x 10001 voters)": ((draws, F.ppf_table, grid_u, grid_v, -np.inf, 0.0), {}),
    }


def _max_diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; build with pip install -e . --no-build-isolation")
        return
    print(f"{'kernel':45s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s} {'max diff':>10s}")
    for name, (a, kw) in _cases(np.random.default_rng(args.seed)).items():
        fn = name.split()[0]
        py, cy = getattr(_fallback, fn), getattr(_kernels, fn)
        t_py = min(timeit.repeat(lambda: py(*a, **kw), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*a, **kw), number=1, repeat=args.repeat))
        diff = _max_diff(py(*a, **kw), cy(*a, **kw))
        print(f"{name:45s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x {diff:10.2e}")


if __name__ == "__main__":
    main()
