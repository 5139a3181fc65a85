"""Euclidean projection onto the capped simplex ``{y in [0,1]^N : sum(y) <= C}``.

At the optimum every coordinate falls in one of three groups: pinned at 1
(``M1``), shifted by a common amount ``z - rho/2`` (``M2``), or clipped to 0
(``M3``). :func:`project_capped_simplex` finds that partition with a
shrinking-support loop; :func:`project_oracle` enumerates every ordered
partition and is only meant for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EPS_FEAS, CacheVector, InputError

ORACLE_MAX_N = 16


@dataclass(frozen=True)
class PartitionState:
    M1: frozenset
    M2: frozenset
    M3: frozenset
    rho: float


def _check_input(z, C) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise InputError("z must be a non-empty vector")
    if not np.all(np.isfinite(z)):
        raise InputError("z has non-finite coordinates")
    if not C > 0:
        raise InputError(f"capacity must be positive, got {C}")
    return z


def _shift_loop(z: np.ndarray, idx: np.ndarray, n_pinned: int, C: float):
    """Repeat-loop over the free set: recompute rho, drop coordinates that go negative.

    Returns the surviving free indices, their values and rho. Iterates at most
    ``len(idx)`` times since every pass either terminates or removes an index.
    """
    vals = z[idx]
    while True:
        if idx.size == 0:
            return idx, vals, 0.0
        rho = 2.0 * (n_pinned - C + vals.sum()) / idx.size
        shifted = vals - rho / 2.0
        keep = shifted >= 0.0
        if keep.all():
            return idx, shifted, rho
        idx = idx[keep]
        vals = vals[keep]


def _project_tight(z: np.ndarray, C: float):
    """Projection when the capacity binds. Returns ``(y, M1 indices, M2 indices, rho)``."""
    # Nonpositive coordinates end in M3 whenever the capacity constraint binds.
    free = np.flatnonzero(z > 0.0)
    pinned = np.zeros(0, dtype=np.intp)
    while True:
        idx, shifted, rho = _shift_loop(z, free, pinned.size, C)
        over = shifted > 1.0 + EPS_FEAS
        if not over.any():
            break
        # Anything above 1 with M1 too small is above 1 at the optimum too, so
        # grow M1 and rerun from a fresh M2. With one coordinate of z above 1
        # this is exactly a single retry with M1 = {argmax z}.
        pinned = np.union1d(pinned, idx[over])
        free = np.setdiff1d(free, pinned, assume_unique=True)
    y = np.zeros(z.size)
    y[idx] = np.minimum(shifted, 1.0)
    y[pinned] = 1.0
    return y, pinned, idx, rho


def _project(z: np.ndarray, C: float) -> np.ndarray:
    """Array-level projection without input validation (hot path for OGA/BSA)."""
    y = np.clip(z, 0.0, 1.0)
    if y.sum() <= C:
        return y
    return _project_tight(z, C)[0]


def project_partition(z, C: float) -> tuple[np.ndarray, PartitionState]:
    """Projection plus the KKT partition that produced it."""
    z = _check_input(z, C)
    y = np.clip(z, 0.0, 1.0)
    if y.sum() <= C:
        n = z.size
        m1 = frozenset(np.flatnonzero(z >= 1.0).tolist())
        m3 = frozenset(np.flatnonzero(z <= 0.0).tolist())
        return y, PartitionState(m1, frozenset(range(n)) - m1 - m3, m3, 0.0)
    y, pinned, free, rho = _project_tight(z, C)
    m1 = frozenset(pinned.tolist())
    m2 = frozenset(free.tolist())
    return y, PartitionState(m1, m2, frozenset(range(z.size)) - m1 - m2, rho)


def project_capped_simplex(z, C: float) -> CacheVector:
    """Return ``argmin_{y in Y} ||z - y||`` for ``Y`` the capped simplex of capacity ``C``.

    Works for any finite ``z``; the common OGA/BSA case (at most one
    coordinate above 1) needs at most one restart of the inner loop.
    """
    y, _ = project_partition(z, C)
    return CacheVector(y, C)


def _kkt_candidate(zs: np.ndarray, a: int, b: int, C: float, tol: float):
    """Check the ordered partition M1 = first a, M3 = last b of sorted-descending ``zs``.

    Assumes the capacity constraint binds (``sum(clip(z)) > C``).
    """
    n = zs.size
    mid = zs[a : n - b]
    top = zs[:a]
    bot = zs[n - b :]
    if mid.size == 0:
        # Every coordinate pinned: the ones must fill the capacity exactly and
        # some rho >= 0 must separate the pinned groups.
        if abs(a - C) > tol:
            return None
        lo = 0.0 if b == 0 else max(0.0, 2.0 * bot.max())
        hi = np.inf if a == 0 else 2.0 * (top.min() - 1.0)
        return lo if lo <= hi + tol else None
    rho = 2.0 * (a - C + mid.sum()) / mid.size
    if rho < -tol:
        return None
    y_mid = mid - rho / 2.0
    if y_mid.min() < -tol or y_mid.max() > 1 + tol:
        return None
    if a and (top - rho / 2.0).min() < 1 - tol:
        return None
    if b and (bot - rho / 2.0).max() > tol:
        return None
    return rho


def project_oracle(z, C: float) -> CacheVector:
    """Brute-force projection: test every ordered (M1, M2, M3) split against KKT.

    Also accepts the slack-capacity solution (rho = 0) when ``clip(z)`` fits.
    Only for small ``N``; refuses more than 16 coordinates.
    """
    z = _check_input(z, C)
    n = z.size
    if n > ORACLE_MAX_N:
        raise InputError(f"oracle limited to N <= {ORACLE_MAX_N}, got {n}")
    clipped = np.clip(z, 0.0, 1.0)
    if clipped.sum() <= C:
        return CacheVector(clipped, C)
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    tol = 1e-12
    for a in range(n + 1):
        for b in range(n - a + 1):
            rho = _kkt_candidate(zs, a, b, C, tol)
            if rho is None:
                continue
            ys = np.concatenate(
                [np.ones(a), np.clip(zs[a : n - b] - rho / 2.0, 0.0, 1.0), np.zeros(b)]
            )
            y = np.empty(n)
            y[order] = ys
            return CacheVector(y, C)
    raise AssertionError("no KKT partition found")  # unreachable for finite z
