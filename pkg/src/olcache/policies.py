"""Single-cache policies: Online Gradient Ascent, LRU, LFU, and the static
benchmark that knows the whole request sequence in advance.

Each policy has a pure ``*_step`` function over an immutable state, plus a
``simulate_*`` loop that runs a whole trace with mutable internals and returns
per-slot utilities. The two paths share their update code.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .core import CacheVector, Catalog, InputError, Request
from .projection import _project
from .traces import Trace

SCHEDULES = ("fixed", "horizon_optimal", "diminishing")


def capped_simplex_diameter(C: float, N: int) -> float:
    if not 0 < C <= N:
        raise InputError(f"need 0 < C <= N, got C={C}, N={N}")
    return math.sqrt(2 * C) if C <= N / 2 else math.sqrt(2 * (N - C))


def horizon_optimal_step(C: float, N: int, T: int, w_max: float) -> float:
    """Constant step ``diam(Y) / (w_max sqrt(T))`` that balances the two regret terms."""
    if T < 1 or w_max <= 0:
        raise InputError("need T >= 1 and w_max > 0")
    return capped_simplex_diameter(C, N) / (w_max * math.sqrt(T))


@dataclass(frozen=True)
class OgaState:
    y: CacheVector
    eta: float
    schedule: str = "fixed"
    t: int = 0

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise InputError(f"unknown step schedule {self.schedule!r}")
        if self.eta < 0:
            raise InputError("step size must be non-negative")

    @classmethod
    def initial(
        cls,
        catalog: Catalog,
        C: float,
        eta: float | None = None,
        schedule: str = "fixed",
        horizon: int | None = None,
    ) -> "OgaState":
        """Start from the uniform configuration ``C/N`` per file.

        ``horizon_optimal`` needs ``horizon``; ``diminishing`` uses
        ``diam / (w_max sqrt(t))`` at slot ``t`` (1-based).
        """
        y = CacheVector.uniform(catalog.n_files, C)
        if schedule == "horizon_optimal":
            if horizon is None:
                raise InputError("horizon_optimal schedule needs the horizon T")
            eta = horizon_optimal_step(C, catalog.n_files, horizon, catalog.w_max)
        elif schedule == "diminishing":
            eta = capped_simplex_diameter(C, catalog.n_files) / catalog.w_max
        elif eta is None:
            raise InputError("fixed schedule needs eta")
        return cls(y, float(eta), schedule, 0)

    def step_size(self) -> float:
        if self.schedule == "diminishing":
            return self.eta / math.sqrt(self.t + 1)
        return self.eta


def _oga_update(y: np.ndarray, n: int, step: float, C: float) -> np.ndarray:
    z = y.copy()
    z[n] += step
    return _project(z, C)


def oga_step(state: OgaState, request: Request, catalog: Catalog) -> OgaState:
    n = request.file
    if n >= catalog.n_files:
        raise InputError(f"file {n} outside catalog")
    y = state.y
    step = state.step_size() * catalog.file_weights[n]
    new_y = _oga_update(y.fractions, n, step, y.capacity)
    return OgaState(CacheVector(new_y, y.capacity), state.eta, state.schedule, state.t + 1)


def simulate_oga(trace: Trace, catalog: Catalog, state: OgaState) -> tuple[np.ndarray, OgaState]:
    """Run OGA over ``trace``; returns fractional utilities per slot and the final state."""
    w = catalog.file_weights
    C = state.y.capacity
    y = np.array(state.y.fractions)
    util = np.empty(trace.horizon)
    eta = state.eta
    diminishing = state.schedule == "diminishing"
    t0 = state.t
    for t, n in enumerate(trace.files.tolist()):
        util[t] = w[n] * y[n]
        step = eta / math.sqrt(t0 + t + 1) if diminishing else eta
        y = _oga_update(y, n, step * w[n], C)
    final = OgaState(CacheVector(np.clip(y, 0.0, 1.0), C), eta, state.schedule, t0 + trace.horizon)
    return util, final


@dataclass(frozen=True)
class LruState:
    capacity: int
    items: tuple = ()  # most recent first

    def __post_init__(self):
        if self.capacity < 1:
            raise InputError("LRU needs floor(C) >= 1")
        if len(set(self.items)) != len(self.items) or len(self.items) > self.capacity:
            raise InputError("LRU list must be duplicate-free and within capacity")

    @classmethod
    def empty(cls, C: float) -> "LruState":
        return cls(int(math.floor(C)))


def lru_step(state: LruState, request: Request) -> tuple[LruState, bool]:
    n = request.file
    hit = n in state.items
    rest = tuple(k for k in state.items if k != n)
    return LruState(state.capacity, ((n,) + rest)[: state.capacity]), hit


def simulate_lru(trace: Trace, catalog: Catalog, C: float) -> tuple[np.ndarray, LruState]:
    cap = LruState.empty(C).capacity
    w = catalog.file_weights
    cache = OrderedDict()
    util = np.zeros(trace.horizon)
    for t, n in enumerate(trace.files.tolist()):
        if n in cache:
            util[t] = w[n]
            cache.move_to_end(n)
        else:
            cache[n] = None
            if len(cache) > cap:
                cache.popitem(last=False)
    return util, LruState(cap, tuple(reversed(cache)))


@dataclass(frozen=True)
class LfuState:
    """Request counts and first-request slot per file (``-1`` = never requested)."""

    counts: np.ndarray
    first_seen: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        f = np.array(self.first_seen, dtype=np.int64)
        if c.shape != f.shape or np.any(c < 0):
            raise InputError("counts must be non-negative and match first_seen")
        c.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "first_seen", f)

    @classmethod
    def empty(cls, n_files: int) -> "LfuState":
        return cls(np.zeros(n_files, np.int64), np.full(n_files, -1, np.int64))

    def frequencies(self, t: int) -> np.ndarray:
        """``count / (t - first_seen)`` at slot ``t``; zero for unseen files."""
        denom = np.where(self.first_seen >= 0, t - self.first_seen, 1)
        return self.counts / np.maximum(denom, 1)

    def cached(self, t: int, C: float) -> np.ndarray:
        """Files LFU holds at slot ``t``: top ``floor(C)`` seen files, ties to the lower id."""
        h = self.frequencies(t)
        seen = np.flatnonzero(self.counts > 0)
        order = seen[np.lexsort((seen, -h[seen]))]
        return order[: int(math.floor(C))]


def _lfu_hit(counts, first_seen, n: int, t: int, cap: int) -> bool:
    if counts[n] == 0:
        return False
    denom = np.maximum(t - first_seen, 1)
    h = counts / denom
    hn = h[n]
    rank = np.count_nonzero(h > hn) + np.count_nonzero(h[:n] == hn)
    return rank < cap


def lfu_step(state: LfuState, request: Request, C: float) -> tuple[LfuState, bool]:
    cap = int(math.floor(C))
    if cap < 1:
        raise InputError("LFU needs floor(C) >= 1")
    n, t = request.file, request.slot
    hit = _lfu_hit(state.counts, state.first_seen, n, t, cap)
    counts = state.counts.copy()
    first = state.first_seen.copy()
    if counts[n] == 0:
        first[n] = t
    counts[n] += 1
    return LfuState(counts, first), hit


def simulate_lfu(trace: Trace, catalog: Catalog, C: float) -> tuple[np.ndarray, LfuState]:
    cap = int(math.floor(C))
    if cap < 1:
        raise InputError("LFU needs floor(C) >= 1")
    w = catalog.file_weights
    counts = np.zeros(catalog.n_files, np.int64)
    first = np.full(catalog.n_files, -1, np.int64)
    util = np.zeros(trace.horizon)
    for t, n in enumerate(trace.files.tolist()):
        if _lfu_hit(counts, first, n, t, cap):
            util[t] = w[n]
        if counts[n] == 0:
            first[n] = t
        counts[n] += 1
    return util, LfuState(counts, first)


def best_static_config(scores: np.ndarray, C: float) -> np.ndarray:
    """Fill the ``floor(C)`` highest scores fully and the next one fractionally."""
    n = scores.size
    order = np.lexsort((np.arange(n), -scores))
    y = np.zeros(n)
    full = min(int(math.floor(C)), n)
    y[order[:full]] = 1.0
    if full < n:
        y[order[full]] = min(1.0, C - full)
    return y


def hindsight_best_static(trace: Trace, catalog: Catalog, C: float) -> tuple[CacheVector, float]:
    if trace.horizon == 0:
        raise InputError("trace is empty")
    if trace.catalog_size != catalog.n_files:
        raise InputError("trace and catalog sizes differ")
    scores = catalog.file_weights * trace.counts()
    y = best_static_config(scores, C)
    return CacheVector(y, C), float(scores @ y)


def hindsight_slot_utils(trace: Trace, catalog: Catalog, y_star: CacheVector) -> np.ndarray:
    """Per-slot utility of a fixed configuration along the trace."""
    return catalog.file_weights[trace.files] * y_star.fractions[trace.files]
