"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import importlib
import timeit

from skanf import _kernels_py
from skanf.fixtures.generator import random_fixtures


def _compiled():
    try:
        return importlib.import_module("skanf._kernels")
    except ImportError:
        return None


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    codes = [code for code, _ in random_fixtures(20, seed=7)]
    blobs = [bytes(range(256)) * k for k in (1, 4, 16)]
    backends = {"python": _kernels_py}
    ext = _compiled()
    if ext is not None:
        backends["cython"] = ext
    else:
        print("compiled extension not built; timing the fallback only")

    # identical outputs first
    if ext is not None:
        for b in blobs:
            assert ext.keccak256(b) == _kernels_py.keccak256(b)
        for c in codes:
            assert ext.scan_code(c) == _kernels_py.scan_code(c)

    jobs = {
        "keccak256": lambda k: [k.keccak256(b) for b in blobs],
        "scan_code": lambda k: [k.scan_code(c) for c in codes],
    }
    print(f"{'kernel':<10} {'backend':<8} {'best ms':>9}")
    results: dict[str, dict[str, float]] = {}
    for name, job in jobs.items():
        for bname, mod in backends.items():
            t = min(timeit.repeat(lambda: job(mod), number=10, repeat=args.repeat)) / 10
            results.setdefault(name, {})[bname] = t
            print(f"{name:<10} {bname:<8} {t * 1e3:9.3f}")
    if ext is not None:
        for name, r in results.items():
            print(f"{name}: speedup x{r['python'] / r['cython']:.1f}")


if __name__ == "__main__":
    main()
