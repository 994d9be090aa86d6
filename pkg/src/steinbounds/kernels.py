"""Inner loops over sorted LLR atoms.

Each kernel exists twice: a numba ``@njit`` loop and a vectorized numpy
version with the same semantics. The public names bind to the numba path
unless numba is missing or ``STEINBOUNDS_DISABLE_NUMBA`` is set to a truthy
value before import. ``benchmarks/bench_kernels.py`` times both.
"""

from __future__ import annotations

import os
from math import comb

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("STEINBOUNDS_DISABLE_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
    "on",
)

# two sorted LLR values closer than this (relative, floor 1) collapse into one atom
MERGE_RTOL = 1e-12


# --------------------------------------------------------------------------- #
# numpy implementations
# --------------------------------------------------------------------------- #


def merge_sorted_np(values, masses, rtol=MERGE_RTOL):
    """Collapse near-equal neighbours of an ascending value array.

    A new group starts where the gap to the previous value exceeds
    ``rtol * max(1, |previous|)``. The merged value is the mass-weighted mean,
    computed as anchor + weighted offset so singleton groups keep their value bit for bit.
    """
    values = np.asarray(values, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    if values.size == 0:
        return values.copy(), masses.copy()
    gap = np.diff(values) > rtol * np.maximum(1.0, np.abs(values[:-1]))
    starts = np.concatenate(([0], np.flatnonzero(gap) + 1))
    group = np.concatenate(([0], np.cumsum(gap)))
    anchor = values[starts]
    total = np.add.reduceat(masses, starts)
    offset = np.add.reduceat(masses * (values - anchor[group]), starts)
    return anchor + offset / total, total


def compositions_np(n, k):
    """All length-``k`` non-negative integer vectors summing to ``n``."""
    rows = np.zeros((1, 0), dtype=np.int64)
    rem = np.array([n], dtype=np.int64)
    for _ in range(k - 1):
        cnt = rem + 1
        rep = np.repeat(np.arange(rem.size), cnt)
        first = np.repeat(np.cumsum(cnt) - cnt, cnt)
        c = np.arange(cnt.sum(), dtype=np.int64) - first
        rows = np.column_stack([rows[rep], c])
        rem = rem[rep] - c
    return np.column_stack([rows, rem])


def first_exceeding_np(masses, level):
    """Index of the first atom whose running mass sum exceeds ``level``, and the sum before it."""
    cum = np.cumsum(masses)
    j = int(np.searchsorted(cum, level, side="right"))
    if j >= masses.size:
        j = masses.size - 1
    before = float(cum[j - 1]) if j > 0 else 0.0
    return j, before


def np_fill_np(p_masses, q_masses, alpha):
    j, before = first_exceeding_np(p_masses, alpha)
    gamma = min(1.0, max(0.0, 1.0 - (alpha - before) / p_masses[j]))
    beta = gamma * q_masses[j] + float(np.sum(q_masses[j + 1 :]))
    return j, gamma, beta


# --------------------------------------------------------------------------- #
# numba implementations
# --------------------------------------------------------------------------- #

if HAVE_NUMBA:

    @njit(cache=True)
    def _merge_sorted_nb(values, masses, rtol):
        n = values.shape[0]
        out_v = np.empty(n)
        out_m = np.empty(n)
        if n == 0:
            return out_v, out_m
        g = 0
        anchor = values[0]
        total = masses[0]
        offset = 0.0
        for i in range(1, n):
            prev = values[i - 1]
            if values[i] - prev > rtol * max(1.0, abs(prev)):
                out_v[g] = anchor + offset / total
                out_m[g] = total
                g += 1
                anchor = values[i]
                total = 0.0
                offset = 0.0
            total += masses[i]
            offset += masses[i] * (values[i] - anchor)
        out_v[g] = anchor + offset / total
        out_m[g] = total
        g += 1
        return out_v[:g].copy(), out_m[:g].copy()

    @njit(cache=True)
    def _compositions_nb(n, k, m):
        out = np.zeros((m, k), dtype=np.int64)
        if k == 1:
            out[0, 0] = n
            return out
        r = np.zeros(k, dtype=np.int64)
        r[0] = n
        t = n
        h = -1
        out[0, :] = r
        row = 1
        while r[k - 1] != n:
            if t > 1:
                h = -1
            h += 1
            t = r[h]
            r[h] = 0
            r[0] = t - 1
            r[h + 1] += 1
            out[row, :] = r
            row += 1
        return out

    @njit(cache=True)
    def _first_exceeding_nb(masses, level):
        cum = 0.0
        n = masses.shape[0]
        for j in range(n):
            nxt = cum + masses[j]
            if nxt > level:
                return j, cum
            cum = nxt
        return n - 1, cum - masses[n - 1]

    @njit(cache=True)
    def _np_fill_nb(p_masses, q_masses, alpha):
        j, before = _first_exceeding_nb(p_masses, alpha)
        gamma = 1.0 - (alpha - before) / p_masses[j]
        gamma = min(1.0, max(0.0, gamma))
        tail = 0.0
        for i in range(q_masses.shape[0] - 1, j, -1):
            tail += q_masses[i]
        return j, gamma, gamma * q_masses[j] + tail

    def merge_sorted_nb(values, masses, rtol=MERGE_RTOL):
        return _merge_sorted_nb(
            np.ascontiguousarray(values, dtype=np.float64),
            np.ascontiguousarray(masses, dtype=np.float64),
            float(rtol),
        )

    def compositions_nb(n, k):
        return _compositions_nb(int(n), int(k), comb(n + k - 1, k - 1))

    def first_exceeding_nb(masses, level):
        j, before = _first_exceeding_nb(np.ascontiguousarray(masses, dtype=np.float64), float(level))
        return int(j), float(before)

    def np_fill_nb(p_masses, q_masses, alpha):
        j, gamma, beta = _np_fill_nb(
            np.ascontiguousarray(p_masses, dtype=np.float64),
            np.ascontiguousarray(q_masses, dtype=np.float64),
            float(alpha),
        )
        return int(j), float(gamma), float(beta)


if USE_NUMBA:
    merge_sorted = merge_sorted_nb
    compositions = compositions_nb
    first_exceeding = first_exceeding_nb
    np_fill = np_fill_nb
else:
    merge_sorted = merge_sorted_np
    compositions = compositions_np
    first_exceeding = first_exceeding_np
    np_fill = np_fill_np


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
