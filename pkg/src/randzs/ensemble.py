"""Deterministic parallel ensembles.

Every task receives its own index and derives its random stream from
``(master_seed, index)``; results are returned in index order, so the output
does not depend on how many worker threads ran the tasks.  The numerical work
(LAPACK, compiled kernels) releases the GIL, which makes threads effective.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ValidationError
from .operators import build_operator, discrete_mode_filter, eigensolve
from .signal import Polarization, make_grid, sample_signal

__all__ = ["resolve_threads", "parallel_map", "spectra_ensemble"]


def resolve_threads(threads=None) -> int:
    if threads is None or threads == 0:
        return max(1, os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ValidationError(f"threads must be positive, got {threads}")
    return threads


def parallel_map(fn, items, threads=None) -> list:
    """Order-preserving map over ``items`` using a thread pool."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def spectra_ensemble(length, step, D, runs, seed=0, kind="dark", scheme="mal",
                     polarization=Polarization.UNPOLARIZED, vectors=False,
                     eta_min=None, xi_window=None, reducer=None, threads=None) -> list:
    """Eigen-decompose ``runs`` independent realizations.

    Parameters
    ----------
    reducer : callable, optional
        Applied to each spectrum inside the worker, so large eigenvector
        arrays need not be kept; its outputs are returned instead.
    eta_min, xi_window : float, optional
        Apply :func:`discrete_mode_filter` before reduction.
    """
    if runs < 1:
        raise ValidationError("runs must be at least 1")
    grid = make_grid(length, step)

    def one(i):
        sig = sample_signal(grid, D, polarization, seed, member=i)
        spec = eigensolve(build_operator(sig, kind, scheme), vectors=vectors)
        if eta_min is not None:
            spec = discrete_mode_filter(spec, eta_min, xi_window)
        return reducer(spec) if reducer is not None else spec

    return parallel_map(one, range(int(runs)), threads)
