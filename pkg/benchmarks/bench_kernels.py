"""Timing of the hot loops on every available backend, and of dense eigensolves.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel runs on identical inputs for every backend; the table reports
the best wall time, the speedup over the numpy fallback and the largest
relative deviation from it.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from randzs import kernels
from randzs.operators import build_operator, eigensolve
from randzs.signal import make_grid, make_rng, sample_signal


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _cases(size):
    rng = make_rng(2024, 0)
    dx = 0.05
    nz = 64
    steps = 4000 * size
    zs = (np.linspace(0, 1, nz) + 1j * np.linspace(0.1, 1.5, nz)).astype(complex)
    w = np.sqrt(dx / 2) * (rng.standard_normal((1, steps)) + 1j * rng.standard_normal((1, steps)))
    wp = np.sqrt(dx / 2) * (rng.standard_normal(steps) + 1j * rng.standard_normal(steps))
    lam = np.linspace(-5, 5, 64)
    M = 64
    n = 1000 * size
    wb = np.sqrt(0.1 / 2) * (rng.standard_normal((M, n)) + 1j * rng.standard_normal((M, n)))
    wt = np.sqrt(0.1 / 2) * (rng.standard_normal((M, n)) + 1j * rng.standard_normal((M, n)))

    def lyap(mod):
        p1 = np.full((1, nz), 1 / np.sqrt(2), dtype=complex)
        p2 = p1.copy()
        return mod.lyap_advance(p1, p2, zs, w, dx, 10, -1)

    return {
        f"lyap_advance ({nz} z x {steps} steps)": lyap,
        f"phase_winding ({lam.size} lambda x {steps} steps)":
            lambda mod: mod.phase_winding(wp, lam, dx)[0],
        f"lnb_ensemble ({M} members x {n} steps)":
            lambda mod: mod.lnb_ensemble(0.5j, wb, wt, 0.1, 1j, False)[0],
    }


def bench_kernels(size=1, repeat=3):
    rows = []
    mods = kernels.backends()
    for name, case in _cases(size).items():
        ref_t, ref = _best(lambda: case(mods["python"]), repeat)
        for bname, mod in mods.items():
            t, out = (ref_t, ref) if bname == "python" else _best(lambda: case(mod), repeat)
            dev = float(np.max(np.abs(np.asarray(out) - ref)) / max(np.max(np.abs(ref)), 1e-300))
            rows.append({"case": name, "backend": bname, "seconds": t, "speedup": ref_t / t,
                         "max_rel_dev": dev})
    return rows


def bench_eigensolve(sizes=(200, 400, 800), repeat=1):
    rows = []
    for n in sizes:
        grid = make_grid(n * 0.1, 0.1)
        sig = sample_signal(grid, 1.0, seed=1)
        for kind in ("dark", "bright"):
            op = build_operator(sig, kind, "mal")
            t, _ = _best(lambda: eigensolve(op, vectors=True), repeat)
            rows.append({"case": f"eigensolve {kind} walk (matrix {2 * n})", "backend": "lapack",
                         "seconds": t, "speedup": float("nan"), "max_rel_dev": float("nan")})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=1, help="problem size multiplier")
    ap.add_argument("--skip-eig", action="store_true")
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = bench_kernels(args.size, args.repeat)
    if not args.skip_eig:
        rows += bench_eigensolve()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'case':48s} {'backend':8s} {'seconds':>10s} {'speedup':>8s} {'max dev':>9s}")
    for r in rows:
        print(f"{r['case']:48s} {r['backend']:8s} {r['seconds']:10.4f} "
              f"{r['speedup']:8.1f} {r['max_rel_dev']:9.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
