"""Closed-form regret bounds and a Monte-Carlo estimate of the asymptotic lower bound.

Lower bounds are reported as the coefficient of ``sqrt(T)``; multiply by
``sqrt(T)`` for a given horizon.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import InputError, NumericError
from .policies import capped_simplex_diameter

PAIRING_EXACT_MAX_N = 10


def prop1_bound(w: float, C: int, T: int) -> float:
    """Regret LRU and LFU suffer on the periodic sequence over ``C + 1`` files."""
    if C < 1 or T < 1:
        raise InputError("need C >= 1 and T >= 1")
    return w * C * (T / (C + 1) - 1)


def oga_upper_bound(C: float, N: int, T: int, w_max: float) -> float:
    if not 1 <= C <= N or T < 1:
        raise InputError("need 1 <= C <= N and T >= 1")
    return capped_simplex_diameter(C, N) * w_max * math.sqrt(T)


def bsa_upper_bound(deg: int, J: int, C: float, T: int, w_max: float) -> float:
    if min(deg, J, C, T) < 1 or w_max <= 0:
        raise InputError("deg, J, C, T must be >= 1 and w_max > 0")
    return w_max * math.sqrt(2 * deg * J * C * T)


def lb_uniform(w: float, gamma: float, C: float, T: int) -> float:
    """Lower bound ``w sqrt(gamma/pi) sqrt(C T)`` for equal weights and ``gamma = C/N < 1/2``."""
    if not 0 < gamma < 0.5:
        raise InputError("need 0 < gamma < 1/2")
    return w * math.sqrt(gamma / math.pi) * math.sqrt(C * T)


def _pairings(items):
    """All perfect matchings of an even-length tuple."""
    if not items:
        yield ()
        return
    a = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1 :]
        for tail in _pairings(rest):
            yield ((a, items[k]),) + tail


def _pair_value(w, pairs) -> float:
    return sum(math.sqrt(w[a] + w[b]) for a, b in pairs)


def best_pairing_exact(w, C: int) -> float:
    """Max of ``sum sqrt(w_a + w_b)`` over C disjoint pairs, by enumeration."""
    w = np.asarray(w, dtype=np.float64)
    best = -math.inf
    for subset in itertools.combinations(range(w.size), 2 * C):
        for pairs in _pairings(subset):
            best = max(best, _pair_value(w, pairs))
    return best


def best_pairing_heuristic(w, C: int) -> float:
    """Pair the largest of the top ``2C`` weights with the smallest, and so on inwards."""
    top = np.sort(np.asarray(w, dtype=np.float64))[::-1][: 2 * C]
    return float(np.sum(np.sqrt(top[:C] + top[::-1][:C])))


def lb_pairing(w, C: int, exact: bool | None = None) -> float:
    """Pairwise (Clark-formula) lower-bound coefficient of ``sqrt(T)``.

    Exact enumeration over pairings for ``N <= 10`` unless ``exact`` says
    otherwise. Any pairing gives a valid bound, so the heuristic is safe.
    """
    w = np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        raise InputError("weights must be positive")
    if not 1 <= C < w.size / 2:
        raise InputError("pairing bound needs 1 <= C < N/2")
    if exact is None:
        exact = w.size <= PAIRING_EXACT_MAX_N
    top = best_pairing_exact(w, C) if exact else best_pairing_heuristic(w, C)
    return top / math.sqrt(2 * math.pi * np.sum(1.0 / w))


@dataclass(frozen=True)
class GaussianRequestModel:
    """Limit law of the centred per-file utility counts under the worst-case i.i.d. adversary.

    Requests pick file ``n`` with probability ``(1/w_n) / S``, ``S = sum 1/w``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 2 or np.any(w <= 0):
            raise InputError("need at least two positive weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def S(self) -> float:
        return float(np.sum(1.0 / self.weights))

    @property
    def request_probs(self) -> np.ndarray:
        return (1.0 / self.weights) / self.S

    @property
    def covariance(self) -> np.ndarray:
        S = self.S
        n = self.weights.size
        cov = np.full((n, n), -1.0 / S**2)
        cov[np.diag_indices(n)] = (self.weights - 1.0 / S) / S
        return cov

    def factor(self, tol: float = 1e-12) -> np.ndarray:
        """``A`` with ``A @ A.T == covariance``; eigenvalues below ``tol`` are zeroed."""
        vals, vecs = np.linalg.eigh(self.covariance)
        if vals.min() < -1e-9 * max(1.0, vals.max()):
            raise NumericError(f"covariance has a negative eigenvalue {vals.min():.3g}")
        vals = np.where(vals < tol, 0.0, vals)
        return vecs * np.sqrt(vals)


def _sorted_draws(model: GaussianRequestModel, samples: int, seed: int, chunk: int = 20_000):
    """Yield blocks of draws of Z, each row sorted descending.

    Blocks come from one sequential stream, so the concatenation does not
    depend on ``chunk``.
    """
    if samples < 1000:
        raise InputError("need at least 1000 samples")
    rng = np.random.Generator(np.random.PCG64(seed))
    A = model.factor()
    left = samples
    while left > 0:
        k = min(chunk, left)
        Z = rng.standard_normal((k, A.shape[1])) @ A.T
        yield -np.sort(-Z, axis=1)
        left -= k


def order_statistic_samples(model: GaussianRequestModel, samples: int, seed: int = 0) -> np.ndarray:
    """All draws of Z sorted descending per row, ``samples x N``."""
    return np.concatenate(list(_sorted_draws(model, samples, seed)))


def lb_monte_carlo(model: GaussianRequestModel, C: int, samples: int = 100_000, seed: int = 0):
    """Estimate ``E[sum of the C largest entries of Z]`` and its standard error."""
    n = model.weights.size
    if not 1 <= C <= n:
        raise InputError("need 1 <= C <= N")
    top = np.concatenate([b[:, :C].sum(axis=1) for b in _sorted_draws(model, samples, seed)])
    return float(top.mean()), float(top.std(ddof=1) / math.sqrt(samples))
