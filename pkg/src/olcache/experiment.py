"""Experiment harness: build a trace, run policies, account regret, write CSV.

A configuration is a JSON object mirroring :class:`ExperimentConfig`::

    {
      "mode": "single",                       # or "bipartite"
      "trace": {"generator": "zipf", "N": 10000, "T": 200000, "exponent": 0.8},
      "capacity": 3000,                       # single mode
      "weights": 1.0,                         # scalar or per-file list, single mode
      "network": "net.json",                  # path or inline object, bipartite mode
      "policies": [{"name": "oga", "eta": 0.1}, {"name": "lru"}, {"name": "lfu"}],
      "seed": 7,
      "output": "results.csv",
      "every": 1,
      "hindsight": "lp"                       # bipartite benchmark: "lp" or "ascent"
    }

``trace`` is either ``{"path": ...}`` or a generator name with its
parameters (``zipf``, ``uniform``, ``periodic``, ``snm``, ``replacement``).
In bipartite mode a generated trace gets uniformly random locations
(``"n_locations"`` defaults to the network's).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bipartite import (
    BipartiteNetwork,
    bsa_horizon_step,
    hindsight_best_static_network,
    load_network,
    network_from_dict,
    network_slot_utils,
    simulate_bsa,
    simulate_multi_lru,
)
from .core import Catalog, ConfigError, InputError, RegretLedger
from .policies import (
    OgaState,
    hindsight_best_static,
    hindsight_slot_utils,
    simulate_lfu,
    simulate_lru,
    simulate_oga,
)
from .traces import (
    ParetoDurations,
    Trace,
    UniformVolumes,
    assign_locations,
    gen_periodic_adversarial,
    gen_random_replacement,
    gen_snm,
    gen_uniform_iid,
    gen_zipf_iid,
    load_trace,
)

SINGLE_POLICIES = ("oga", "lru", "lfu")
BIPARTITE_POLICIES = ("bsa", "mlru", "lazy_qlru")
RESULT_HEADER = "slot,policy,cum_utility,avg_utility,cum_regret"


@dataclass
class ExperimentConfig:
    mode: str = "single"
    trace: dict = field(default_factory=dict)
    policies: list = field(default_factory=list)
    capacity: Optional[float] = None
    weights: object = 1.0
    network: object = None
    seed: int = 0
    output: Optional[str] = None
    every: int = 1
    hindsight: str = "lp"
    horizon: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def validate(self) -> None:
        if self.mode not in ("single", "bipartite"):
            raise ConfigError(f"mode must be single or bipartite, got {self.mode!r}")
        if not self.policies:
            raise ConfigError("policy list is empty")
        allowed = SINGLE_POLICIES if self.mode == "single" else BIPARTITE_POLICIES
        for p in self.policies:
            if not isinstance(p, dict) or p.get("name") not in allowed:
                raise ConfigError(f"policy {p!r} not valid in {self.mode} mode (use {allowed})")
        names = [p["name"] for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError("each policy may appear once")
        if not self.trace:
            raise ConfigError("no trace source given")
        if self.mode == "single" and self.capacity is None:
            raise ConfigError("single mode needs a capacity")
        if self.mode == "bipartite" and self.network is None:
            raise ConfigError("bipartite mode needs a network")
        if self.every < 1:
            raise ConfigError("every must be >= 1")

    def canonical(self) -> str:
        """JSON of everything that affects results; the output path does not."""
        d = asdict(self)
        d.pop("output")
        return json.dumps(d, sort_keys=True, default=str)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def make_trace(spec: dict, seed: int = 0) -> Trace:
    spec = dict(spec)
    if "path" in spec:
        return load_trace(spec["path"], spec.get("mode"))
    gen = spec.pop("generator", None)
    seed = spec.pop("seed", seed)
    try:
        if gen == "zipf":
            return gen_zipf_iid(spec["N"], spec["T"], spec.get("exponent", 0.8), seed)
        if gen == "uniform":
            return gen_uniform_iid(spec["N"], spec["T"], seed)
        if gen == "periodic":
            return gen_periodic_adversarial(spec["C"], spec["T"], spec.get("N"))
        if gen == "snm":
            return gen_snm(
                spec["N"],
                spec["T"],
                spec.get("shot_rate"),
                ParetoDurations(spec.get("duration_shape", 2.0), spec.get("duration_scale", 1000.0)),
                UniformVolumes(spec.get("volume_low", 50.0), spec.get("volume_high", 150.0)),
                seed,
                spec.get("background", 1e-3),
            )
        if gen == "replacement":
            return gen_random_replacement(
                spec["N"], spec["T"], spec.get("exponent", 0.8), spec.get("churn_prob", 0.01), seed
            )
    except KeyError as exc:
        raise ConfigError(f"generator {gen!r} is missing parameter {exc}") from None
    raise ConfigError(f"unknown trace generator {gen!r}")


def _catalog(cfg: ExperimentConfig, trace: Trace) -> Catalog:
    w = cfg.weights
    if isinstance(w, (int, float)):
        return Catalog.uniform(trace.catalog_size, float(w))
    w = np.asarray(w, dtype=np.float64)
    if w.size != trace.catalog_size:
        raise ConfigError(f"{w.size} weights given for a catalog of {trace.catalog_size}")
    return Catalog(trace.catalog_size, w)


def _network(cfg: ExperimentConfig) -> BipartiteNetwork:
    if isinstance(cfg.network, dict):
        return network_from_dict(cfg.network)
    return load_network(cfg.network)


@dataclass
class RunResult:
    trace: Trace
    ledgers: dict  # policy name -> RegretLedger, in config order
    hindsight_total: float
    states: dict


def run_single(cfg: ExperimentConfig, trace: Trace) -> RunResult:
    catalog = _catalog(cfg, trace)
    C = float(cfg.capacity)
    if not 0 < C <= catalog.n_files:
        raise ConfigError(f"capacity {C} outside (0, {catalog.n_files}]")
    y_star, total = hindsight_best_static(trace, catalog, C)
    h_utils = hindsight_slot_utils(trace, catalog, y_star)
    ledgers, states = {}, {"hindsight_y": y_star.fractions}
    for p in cfg.policies:
        name = p["name"]
        if name == "oga":
            schedule = p.get("schedule", "fixed" if "eta" in p else "horizon_optimal")
            st = OgaState.initial(catalog, C, p.get("eta"), schedule, trace.horizon)
            util, final = simulate_oga(trace, catalog, st)
            states["oga_y"] = final.y.fractions
            states["oga_eta"] = np.array(st.eta)
        elif name == "lru":
            util, final = simulate_lru(trace, catalog, C)
            states["lru_items"] = np.array(final.items, dtype=np.int64)
        else:
            util, final = simulate_lfu(trace, catalog, C)
            states["lfu_counts"] = final.counts
        ledgers[name] = RegretLedger(util, h_utils)
    return RunResult(trace, ledgers, total, states)


def run_bipartite(cfg: ExperimentConfig, trace: Trace) -> RunResult:
    net = _network(cfg)
    if trace.locations is None:
        trace = assign_locations(trace, net.n_locations, cfg.seed)
    y_star, total = hindsight_best_static_network(trace, net, method=cfg.hindsight)
    h_utils = network_slot_utils(trace, net, y_star)
    ledgers, states = {}, {"hindsight_y": y_star.y}
    for p in cfg.policies:
        name = p["name"]
        if name == "bsa":
            eta = p.get("eta")
            if eta is None:
                eta = bsa_horizon_step(net, trace.horizon, trace.catalog_size)
            util, final = simulate_bsa(trace, net, float(eta))
            states["bsa_y"] = final.y
        else:
            util, _ = simulate_multi_lru(trace, net, name, p.get("q", 1.0), p.get("seed", cfg.seed))
        ledgers[name] = RegretLedger(util, h_utils)
    return RunResult(trace, ledgers, total, states)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    cfg.validate()
    trace = make_trace(cfg.trace, cfg.seed)
    if cfg.horizon is not None and cfg.horizon != trace.horizon:
        raise ConfigError(f"horizon {cfg.horizon} does not match trace length {trace.horizon}")
    if cfg.mode == "single":
        if trace.locations is not None:
            raise ConfigError("single mode got a trace with locations")
        return run_single(cfg, trace)
    return run_bipartite(cfg, trace)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def format_results(cfg: ExperimentConfig, result: RunResult) -> str:
    """Results CSV text: provenance comments, header, rows ordered by (policy, slot)."""
    out = io.StringIO()
    out.write(f"# olcache {__version__} config_sha256={cfg.digest()} seed={cfg.seed}\n")
    out.write(f"# config: {cfg.canonical()}\n")
    out.write(f"# trace: {json.dumps(result.trace.provenance, sort_keys=True)}\n")
    out.write(f"# hindsight_total: {_fmt(result.hindsight_total)}\n")
    out.write(RESULT_HEADER + "\n")
    T = result.trace.horizon
    slots = np.arange(cfg.every - 1, T, cfg.every)
    if slots.size == 0 or slots[-1] != T - 1:
        slots = np.append(slots, T - 1)
    for name, ledger in result.ledgers.items():
        cum = ledger.cumulative_utility
        reg = ledger.regret_series
        for t in slots.tolist():
            out.write(f"{t},{name},{_fmt(cum[t])},{_fmt(cum[t] / (t + 1))},{_fmt(reg[t])}\n")
    return out.getvalue()


def save_state(path, result: RunResult) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, **result.states)


def lru_oga_table(state_path) -> list[tuple[int, int, float]]:
    """``(rank, file, oga_y)`` for each file in the final LRU cache, most recent first."""
    with np.load(state_path) as st:
        if "lru_items" not in st or "oga_y" not in st:
            raise InputError("state file lacks an LRU or OGA result; run both policies")
        items = st["lru_items"].tolist()
        y = st["oga_y"]
    return [(r, n, float(y[n])) for r, n in enumerate(items)]


def summary_rows(result: RunResult) -> list[tuple[str, float, float, float]]:
    """Per policy: total utility, time-average utility and final regret."""
    T = result.trace.horizon
    rows = [("hindsight", result.hindsight_total, result.hindsight_total / T, 0.0)]
    for name, led in result.ledgers.items():
        tot = float(led.policy_utils.sum())
        rows.append((name, tot, tot / T, led.regret))
    return rows

