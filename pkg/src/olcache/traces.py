"""Request sequences: synthetic generators and the CSV trace format.

A trace file is UTF-8 CSV with header ``slot,file`` (single cache) or
``slot,file,location`` (bipartite), optionally preceded by ``#`` comment
lines. Files written by :func:`save_trace` carry ``# catalog_size:``,
``# n_locations:`` and ``# provenance:`` (JSON) comments; their ids are
already dense and are read back verbatim. Any other file is treated as an
external trace and its ids are mapped to ``0..N-1`` in order of first
appearance, the mapping being kept under ``provenance["file_ids"]``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .core import InputError, ParseError, Request


class GenerationError(RuntimeError):
    """A generator was asked for something it cannot produce."""


@dataclass(frozen=True, eq=False)
class Trace:
    files: np.ndarray
    catalog_size: int
    locations: Optional[np.ndarray] = None
    n_locations: Optional[int] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.array(self.files, dtype=np.int64)
        f.setflags(write=False)
        object.__setattr__(self, "files", f)
        if f.ndim != 1:
            raise InputError("files must be a 1-d sequence")
        if f.size and (f.min() < 0 or f.max() >= self.catalog_size):
            raise InputError("file id outside catalog")
        if self.locations is not None:
            loc = np.array(self.locations, dtype=np.int64)
            loc.setflags(write=False)
            object.__setattr__(self, "locations", loc)
            if loc.shape != f.shape:
                raise InputError("locations and files differ in length")
            if self.n_locations is None:
                object.__setattr__(self, "n_locations", int(loc.max()) + 1 if loc.size else 0)
            if loc.size and (loc.min() < 0 or loc.max() >= self.n_locations):
                raise InputError("location id outside range")

    @property
    def horizon(self) -> int:
        return int(self.files.size)

    def __len__(self):
        return self.horizon

    @property
    def requests(self) -> Iterator[Request]:
        if self.locations is None:
            for t, n in enumerate(self.files.tolist()):
                yield Request(t, n)
        else:
            for t, (n, i) in enumerate(zip(self.files.tolist(), self.locations.tolist())):
                yield Request(t, n, i)

    def counts(self) -> np.ndarray:
        """Number of requests per file over the whole trace."""
        return np.bincount(self.files, minlength=self.catalog_size)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        same_loc = (self.locations is None and other.locations is None) or (
            self.locations is not None
            and other.locations is not None
            and np.array_equal(self.locations, other.locations)
            and self.n_locations == other.n_locations
        )
        return (
            self.catalog_size == other.catalog_size
            and np.array_equal(self.files, other.files)
            and same_loc
            and self.provenance == other.provenance
        )


def _rng(seed, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def zipf_pmf(n: int, exponent: float) -> np.ndarray:
    p = np.arange(1, n + 1, dtype=np.float64) ** (-float(exponent))
    return p / p.sum()


def _draw(rng: np.random.Generator, pmf: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def gen_zipf_iid(N: int, T: int, exponent: float, seed: int = 0) -> Trace:
    """I.i.d. requests with ``P(file n) ∝ (n+1)^-exponent``."""
    if N < 2 or T < 1:
        raise InputError("need N >= 2 and T >= 1")
    if exponent < 0:
        raise InputError("Zipf exponent must be >= 0")
    files = _draw(_rng(seed), zipf_pmf(N, exponent), T)
    prov = {"generator": "zipf", "N": N, "T": T, "exponent": float(exponent), "seed": seed}
    return Trace(files, N, provenance=prov)


def gen_uniform_iid(N: int, T: int, seed: int = 0) -> Trace:
    tr = gen_zipf_iid(N, T, 0.0, seed)
    return Trace(tr.files, N, provenance={"generator": "uniform", "N": N, "T": T, "seed": seed})


def gen_periodic_adversarial(C: int, T: int, N: Optional[int] = None) -> Trace:
    """Cycle through files ``0..C`` forever: each request hits the least recent of C+1 files."""
    N = C + 1 if N is None else N
    if C < 1 or T < 1:
        raise InputError("need C >= 1 and T >= 1")
    if C + 1 > N:
        raise InputError(f"periodic sequence needs N >= C+1, got N={N}, C={C}")
    files = np.arange(T, dtype=np.int64) % (C + 1)
    return Trace(files, max(N, 2), provenance={"generator": "periodic", "C": C, "T": T, "N": N})


@dataclass(frozen=True)
class ParetoDurations:
    """Pareto(shape) lifetimes with minimum ``scale`` slots, rounded up to whole slots."""

    shape: float = 2.0
    scale: float = 1000.0

    @property
    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1) if self.shape > 1 else math.inf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.ceil(self.scale * (1.0 + rng.pareto(self.shape, size))).astype(np.int64)


@dataclass(frozen=True)
class UniformVolumes:
    low: float = 50.0
    high: float = 150.0

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)


def snm_from_shots(
    starts,
    durations,
    volumes,
    T: int,
    background: float = 0.0,
    seed: int = 0,
    catalog_size: Optional[int] = None,
) -> Trace:
    """Sample a trace from explicit shots.

    Shot ``k`` is file ``k + 1`` (file 0 is the background file), active on
    ``[starts[k], starts[k] + durations[k])`` with intensity
    ``volumes[k] / durations[k]``. Each slot requests a file with probability
    proportional to the intensities active in that slot.
    """
    starts = np.asarray(starts, dtype=np.int64)
    durations = np.asarray(durations, dtype=np.int64)
    volumes = np.asarray(volumes, dtype=np.float64)
    if np.any(durations < 1):
        raise InputError("shot durations must be >= 1 slot")
    n_shots = starts.size
    N = catalog_size if catalog_size is not None else n_shots + 1
    ends = starts + durations
    intensity = volumes / durations
    rng = _rng(seed, 1)

    bounds = np.unique(np.concatenate([[0, T], np.clip(starts, 0, T), np.clip(ends, 0, T)]))
    on = {}
    by_start = {}
    by_end = {}
    for k in range(n_shots):
        if ends[k] <= 0 or starts[k] >= T:
            continue
        by_start.setdefault(max(int(starts[k]), 0), []).append(k)
        by_end.setdefault(int(ends[k]), []).append(k)
    files = np.empty(T, dtype=np.int64)
    for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
        for k in by_end.get(a, ()):
            on.pop(k, None)
        for k in by_start.get(a, ()):
            on[k] = intensity[k]
        ids = np.fromiter((k + 1 for k in on), dtype=np.int64, count=len(on))
        lam = np.fromiter(on.values(), dtype=np.float64, count=len(on))
        if background > 0:
            ids = np.concatenate([[0], ids])
            lam = np.concatenate([[background], lam])
        if lam.sum() <= 0:
            raise GenerationError(f"no active content in slots [{a}, {b}) and no background file")
        files[a:b] = ids[_draw(rng, lam / lam.sum(), b - a)]
    return Trace(files, N)


def gen_snm(
    N: int,
    T: int,
    shot_rate: Optional[float] = None,
    durations: ParetoDurations = ParetoDurations(),
    volumes: UniformVolumes = UniformVolumes(),
    seed: int = 0,
    background: float = 1e-3,
) -> Trace:
    """Poisson shot-noise requests: ``N - 1`` shots plus an always-on background file 0.

    Shot arrivals form a Poisson process of ``shot_rate`` per slot (default:
    spread the shots evenly over the horizon).
    """
    if N < 2 or T < 1:
        raise InputError("need N >= 2 and T >= 1")
    if not (math.isfinite(durations.mean) and math.isfinite(volumes.mean)):
        raise InputError("shot duration and volume distributions need finite means")
    rate = (N - 1) / T if shot_rate is None else shot_rate
    if rate <= 0:
        raise InputError("shot_rate must be positive")
    rng = _rng(seed)
    starts = np.floor(np.cumsum(rng.exponential(1.0 / rate, N - 1))).astype(np.int64)
    d = durations.sample(rng, N - 1)
    v = volumes.sample(rng, N - 1)
    tr = snm_from_shots(starts, d, v, T, background=background, seed=seed, catalog_size=N)
    prov = {
        "generator": "snm",
        "N": N,
        "T": T,
        "shot_rate": rate,
        "duration_shape": durations.shape,
        "duration_scale": durations.scale,
        "volume_low": volumes.low,
        "volume_high": volumes.high,
        "background": background,
        "seed": seed,
    }
    return Trace(tr.files, N, provenance=prov)


def gen_random_replacement(
    N: int, T: int, popularity_exponent: float, churn_prob: float, seed: int = 0
) -> Trace:
    """Zipf requests over the ranks of a popularity ladder whose entries churn.

    After each request, with probability ``churn_prob`` a uniformly chosen
    rank is handed to a brand-new file id, so the catalog grows beyond ``N``.
    """
    if N < 2 or T < 1:
        raise InputError("need N >= 2 and T >= 1")
    if not 0.0 <= churn_prob <= 1.0:
        raise InputError("churn_prob must lie in [0, 1]")
    rng = _rng(seed)
    ranks = _draw(rng, zipf_pmf(N, popularity_exponent), T)
    churn = rng.random(T) < churn_prob
    where = rng.integers(0, N, T)
    ladder = list(range(N))
    next_id = N
    files = np.empty(T, dtype=np.int64)
    for t, (r, c, u) in enumerate(zip(ranks.tolist(), churn.tolist(), where.tolist())):
        files[t] = ladder[r]
        if c:
            ladder[u] = next_id
            next_id += 1
    prov = {
        "generator": "random_replacement",
        "N": N,
        "T": T,
        "exponent": float(popularity_exponent),
        "churn_prob": float(churn_prob),
        "seed": seed,
    }
    return Trace(files, max(next_id, 2), provenance=prov)


def assign_locations(trace: Trace, n_locations: int, seed: int = 0) -> Trace:
    """Attach uniformly random user locations to a single-cache trace."""
    if n_locations < 1:
        raise InputError("n_locations must be >= 1")
    loc = _rng(seed, 2).integers(0, n_locations, trace.horizon)
    prov = dict(trace.provenance, n_locations=n_locations, location_seed=seed)
    return Trace(trace.files, trace.catalog_size, loc, n_locations, prov)


def save_trace(trace: Trace, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# catalog_size: {trace.catalog_size}\n")
        if trace.locations is not None:
            fh.write(f"# n_locations: {trace.n_locations}\n")
        fh.write(f"# provenance: {json.dumps(trace.provenance, sort_keys=True)}\n")
        if trace.locations is None:
            fh.write("slot,file\n")
            fh.writelines(f"{t},{n}\n" for t, n in enumerate(trace.files.tolist()))
        else:
            fh.write("slot,file,location\n")
            fh.writelines(
                f"{t},{n},{i}\n"
                for t, (n, i) in enumerate(zip(trace.files.tolist(), trace.locations.tolist()))
            )


def load_trace(path, mode: Optional[str] = None, n_locations: Optional[int] = None) -> Trace:
    """Read a CSV trace. ``mode`` may be ``"single"`` or ``"bipartite"`` to enforce a layout."""
    path = Path(path)
    meta = {}
    rows = []
    header = None
    with path.open("r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, _, val = s[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            cells = next(csv.reader([s]))
            if header is None:
                header = [c.strip() for c in cells]
                if header not in (["slot", "file"], ["slot", "file", "location"]):
                    raise ParseError(f"{path}:{lineno}: bad header {s!r}")
                continue
            if len(cells) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
            try:
                slot = int(cells[0])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: slot {cells[0]!r} is not an integer") from None
            if rows and slot <= rows[-1][0]:
                kind = "duplicate" if slot == rows[-1][0] else "decreasing"
                raise ParseError(f"{path}:{lineno}: {kind} slot index {slot}")
            if not rows and slot < 0:
                raise ParseError(f"{path}:{lineno}: negative slot index")
            rows.append((slot, *(c.strip() for c in cells[1:])))
    if header is None:
        raise ParseError(f"{path}: missing header")
    if not rows:
        raise ParseError(f"{path}: trace has no requests")
    bipartite = len(header) == 3
    if mode == "single" and bipartite:
        raise InputError(f"{path}: location column present but single-cache mode requested")
    if mode == "bipartite" and not bipartite:
        raise InputError(f"{path}: bipartite mode needs a location column")

    provenance = json.loads(meta["provenance"]) if "provenance" in meta else {}
    native = "catalog_size" in meta
    if native:
        try:
            files = np.array([int(r[1]) for r in rows], dtype=np.int64)
            locs = np.array([int(r[2]) for r in rows], dtype=np.int64) if bipartite else None
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer id in native trace: {exc}") from None
        N = int(meta["catalog_size"])
        n_loc = int(meta["n_locations"]) if "n_locations" in meta else n_locations
    else:
        file_ids = {}
        files = np.array([file_ids.setdefault(r[1], len(file_ids)) for r in rows], dtype=np.int64)
        provenance = dict(provenance, source=str(path), file_ids=list(file_ids))
        N = max(len(file_ids), 2)
        locs = None
        n_loc = n_locations
        if bipartite:
            loc_ids = {}
            locs = np.array([loc_ids.setdefault(r[2], len(loc_ids)) for r in rows], dtype=np.int64)
            provenance["location_ids"] = list(loc_ids)
            n_loc = len(loc_ids) if n_locations is None else n_locations
        slots = [r[0] for r in rows]
        if slots != list(range(len(rows))):
            provenance["slots_renumbered"] = True
    if locs is not None and n_loc is not None and locs.size and locs.max() >= n_loc:
        raise InputError(f"{path}: location {int(locs.max())} outside {n_loc} locations")
    try:
        return Trace(files, N, locs, n_loc, provenance)
    except InputError as exc:
        raise ParseError(f"{path}: {exc}") from None
