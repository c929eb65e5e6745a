"""Adaptive summation of slowly decaying series with a ratio tail bound.

All series summed in this package have terms that are eventually
log-concave in ``n`` (geometric weights times polynomials, or Boltzmann
factors of convex spectra), so once the ratio of consecutive terms drops
below one it keeps decreasing and

    sum_{k>N} t_k <= t_N * r_N / (1 - r_N),   r_N = t_N / t_{N-1}

bounds the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SlowConvergence

MAX_TERMS = 10_000_000


@dataclass(frozen=True)
class SeriesSum:
    value: np.ndarray  # one entry per summed row
    n_terms: int
    tail_bound: np.ndarray


def sum_series(
    terms: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-14,
    start: int = 0,
    chunk: int = 512,
    max_terms: int = MAX_TERMS,
    n_max: int | None = None,
) -> SeriesSum:
    """Sum ``terms(n)`` over ``n = start, start+1, ...`` until every row has
    converged to relative accuracy ``tol``.

    ``terms`` receives an integer array and returns either a 1-D array of the
    same length or a 2-D array of shape ``(rows, len(n))``. Rows are summed
    independently and the loop stops when every row satisfies
    ``tail_bound <= tol * |partial sum|`` (rows that are identically zero
    count as converged). If ``n_max`` is given the series is finite and is
    summed exactly up to and including ``n_max``.
    """
    total = None
    prev_last = None
    n0 = start
    while True:
        stop = n0 + chunk
        if n_max is not None:
            stop = min(stop, n_max + 1)
        n = np.arange(n0, stop)
        t = np.atleast_2d(np.asarray(terms(n), dtype=float))
        if not np.all(np.isfinite(t)):
            raise SlowConvergence(f"non-finite series term near n={n0}")
        partial = t.sum(axis=1)
        total = partial if total is None else total + partial
        if n_max is not None and stop > n_max:
            return SeriesSum(total, stop - start, np.zeros_like(total))

        last = np.abs(t[:, -1])
        before = np.abs(t[:, -2]) if t.shape[1] > 1 else prev_last
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(before > 0, last / before, 0.0)
            tail = np.where(ratio < 1.0, last * ratio / (1.0 - ratio), np.inf)
        tail = np.where(last == 0.0, 0.0, tail)
        scale = np.abs(total)
        done = (tail <= tol * scale) | ((scale == 0.0) & (last == 0.0))
        if np.all(done):
            return SeriesSum(total, stop - start, tail)
        if stop - start >= max_terms:
            raise SlowConvergence(
                f"series not converged after {stop - start} terms"
            )
        prev_last = last
        n0 = stop
        # grow the chunk so long series need few python iterations
        chunk = min(chunk * 2, 1 << 18)
