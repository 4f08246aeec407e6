# hierstein/utils/numeric.py
from __future__ import annotations

import math
from typing import Iterable, Tuple

import numpy as np

from hierstein.config import ATOM_MERGE_TOL


def compensated_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum (math.fsum tracks every partial, stronger than Kahan)."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel())


def merge_atoms(
    values: np.ndarray, weights: np.ndarray, tol: float = ATOM_MERGE_TOL
) -> Tuple[np.ndarray, np.ndarray]:
    """Sort, then collapse values within `tol` of the first value of their run.

    The first (smallest) value of a run represents it and every member lies within `tol`
    of it, so feeding merged output back in changes nothing.
    """
    order = np.argsort(values, kind="mergesort")
    v = np.asarray(values, dtype=np.float64)[order]
    w = np.asarray(weights, dtype=np.float64)[order]
    if v.size == 0:
        return v, w
    starts = np.concatenate(([0], np.nonzero(np.diff(v) > tol)[0] + 1))
    ends = np.append(starts[1:], v.size)
    # chains of small gaps can drift past tol; split those runs at their anchors
    extra = []
    for s, e in zip(starts, ends):
        if v[e - 1] - v[s] <= tol:
            continue
        anchor = v[s]
        for j in range(s + 1, e):
            if v[j] - anchor > tol:
                extra.append(j)
                anchor = v[j]
    if extra:
        starts = np.union1d(starts, np.asarray(extra, dtype=starts.dtype))
    return v[starts], np.add.reduceat(w, starts)


def fmt17(x: float) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def binomial_chain(r_minus_one: float, p: int) -> float:
    """Σ_{j=1..p} C(p,j)|r−1|^j, the bound on |r^p − 1|."""
    a = abs(r_minus_one)
    return math.fsum(math.comb(p, j) * a**j for j in range(1, p + 1))
