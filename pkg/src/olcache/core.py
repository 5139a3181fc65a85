"""Domain types, the per-slot utility and regret accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: Slack allowed on the capacity inequality of a fractional configuration.
EPS_FEAS = 1e-9


class InputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class ParseError(InputError):
    """Raised on malformed trace / config / network files."""


class ConfigError(InputError):
    """Raised when an experiment configuration is inconsistent."""


class NumericError(ArithmeticError):
    """Raised when a numerical routine cannot produce a trustworthy result."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Catalog:
    n_files: int
    file_weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.file_weights)
        if self.n_files < 2:
            raise InputError(f"catalog needs at least 2 files, got {self.n_files}")
        if w.shape != (self.n_files,):
            raise InputError(f"expected {self.n_files} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InputError("file weights must be finite and positive")
        object.__setattr__(self, "file_weights", w)

    @classmethod
    def uniform(cls, n_files: int, weight: float = 1.0) -> "Catalog":
        return cls(n_files, np.full(n_files, float(weight)))

    @property
    def w_max(self) -> float:
        return float(self.file_weights.max())


@dataclass(frozen=True)
class Request:
    slot: int
    file: int
    location: Optional[int] = None

    def __post_init__(self):
        if self.slot < 0 or self.file < 0:
            raise InputError("slot and file must be non-negative")
        if self.location is not None and self.location < 0:
            raise InputError("location must be non-negative")


@dataclass(frozen=True)
class CacheVector:
    """Fractional cache configuration: ``fractions[n]`` of file ``n`` is stored."""

    fractions: np.ndarray
    capacity: float

    def __post_init__(self):
        y = _frozen(self.fractions)
        if y.ndim != 1:
            raise InputError("fractions must be a vector")
        if self.capacity <= 0:
            raise InputError(f"capacity must be positive, got {self.capacity}")
        if not np.all(np.isfinite(y)):
            raise InputError("fractions must be finite")
        if np.any(y < -EPS_FEAS) or np.any(y > 1 + EPS_FEAS):
            raise InputError("fractions must lie in [0, 1]")
        if y.sum() > self.capacity + EPS_FEAS:
            raise InputError(f"sum of fractions {y.sum()} exceeds capacity {self.capacity}")
        object.__setattr__(self, "fractions", y)

    def __len__(self):
        return self.fractions.shape[0]

    @classmethod
    def uniform(cls, n_files: int, capacity: float) -> "CacheVector":
        """Every file gets ``min(1, C/N)``; the start point used by OGA and BSA."""
        return cls(np.full(n_files, min(1.0, capacity / n_files)), capacity)


def slot_utility(request: Request, y: CacheVector, catalog: Catalog) -> float:
    n = request.file
    if n >= catalog.n_files:
        raise InputError(f"file {n} outside catalog of {catalog.n_files}")
    if len(y) != catalog.n_files:
        raise InputError("cache vector and catalog sizes differ")
    return float(catalog.file_weights[n] * y.fractions[n])


@dataclass(frozen=True)
class RegretLedger:
    policy_utils: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hindsight_utils: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        p = _frozen(self.policy_utils)
        h = _frozen(self.hindsight_utils)
        if p.shape != h.shape or p.ndim != 1:
            raise InputError("policy and hindsight series must be equal-length vectors")
        object.__setattr__(self, "policy_utils", p)
        object.__setattr__(self, "hindsight_utils", h)

    def __len__(self):
        return self.policy_utils.shape[0]

    @property
    def regret_series(self) -> np.ndarray:
        """Cumulative regret after each slot."""
        return np.cumsum(self.hindsight_utils - self.policy_utils)

    @property
    def regret(self) -> float:
        return float(np.sum(self.hindsight_utils - self.policy_utils))

    @property
    def cumulative_utility(self) -> np.ndarray:
        return np.cumsum(self.policy_utils)


def ledger_record(ledger: RegretLedger, policy_util: float, hindsight_util: float) -> RegretLedger:
    if policy_util < 0 or hindsight_util < 0:
        raise InputError("utilities must be non-negative")
    return RegretLedger(
        np.append(ledger.policy_utils, policy_util),
        np.append(ledger.hindsight_utils, hindsight_util),
    )
