"""Bipartite caching networks: user locations reach a subset of caches.

A request for file ``n`` at location ``i`` is served fractionally by the
reachable caches holding parts of ``n`` (the origin absorbs whatever is
left, at zero utility). The per-slot utility is the value of that routing
LP, a concave function of the placement whose LP duals give a
supergradient. BSA ascends along it, one capped-simplex projection per
cache.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import EPS_FEAS, InputError, ParseError, Request
from .projection import _project
from .traces import Trace, _rng


@dataclass(frozen=True, eq=False)
class BipartiteNetwork:
    """Locations x caches graph with capacities and utility weights.

    The weight of serving file ``n`` at location ``i`` from cache ``j`` is
    ``file_multipliers[n] * weights[i, j]``, or ``weight_tensor[n, i, j]``
    when a dense tensor is given. Unreachable pairs carry no weight.
    """

    capacities: np.ndarray
    connectivity: np.ndarray
    weights: np.ndarray
    file_multipliers: Optional[np.ndarray] = None
    weight_tensor: Optional[np.ndarray] = None
    _orders: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        cap = np.asarray(self.capacities, dtype=np.float64)
        ell = np.asarray(self.connectivity).astype(bool)
        w = np.asarray(self.weights, dtype=np.float64)
        if ell.ndim != 2 or cap.shape != (ell.shape[1],):
            raise InputError("connectivity must be I x J and capacities length J")
        if w.shape != ell.shape:
            raise InputError("weight matrix must be I x J")
        if np.any(cap <= 0):
            raise InputError("capacities must be positive")
        if np.any(w < 0):
            raise InputError("weights must be non-negative")
        object.__setattr__(self, "capacities", cap)
        object.__setattr__(self, "connectivity", ell)
        object.__setattr__(self, "weights", np.where(ell, w, 0.0))
        if self.file_multipliers is not None:
            m = np.asarray(self.file_multipliers, dtype=np.float64)
            if np.any(m <= 0):
                raise InputError("file multipliers must be positive")
            object.__setattr__(self, "file_multipliers", m)
        if self.weight_tensor is not None:
            wt = np.asarray(self.weight_tensor, dtype=np.float64)
            if wt.ndim != 3 or wt.shape[1:] != ell.shape or np.any(wt < 0):
                raise InputError("weight tensor must be N x I x J and non-negative")
            object.__setattr__(self, "weight_tensor", np.where(ell[None], wt, 0.0))
        # Reachable caches per location, by descending base weight then index.
        orders = tuple(
            tuple(sorted(np.flatnonzero(ell[i]).tolist(), key=lambda j: (-w[i, j], j)))
            for i in range(ell.shape[0])
        )
        object.__setattr__(self, "_orders", orders)

    @property
    def n_locations(self) -> int:
        return self.connectivity.shape[0]

    @property
    def n_caches(self) -> int:
        return self.connectivity.shape[1]

    @property
    def deg(self) -> int:
        """Largest number of caches reachable from one location."""
        return int(self.connectivity.sum(axis=1).max())

    def w_max(self, n_files: Optional[int] = None) -> float:
        if self.weight_tensor is not None:
            return float(self.weight_tensor.max())
        m = 1.0 if self.file_multipliers is None else float(self.file_multipliers[:n_files].max())
        return m * float(self.weights.max())

    def check_catalog(self, n_files: int) -> None:
        if self.file_multipliers is not None and self.file_multipliers.size < n_files:
            raise InputError("fewer file multipliers than files")
        if self.weight_tensor is not None and self.weight_tensor.shape[0] < n_files:
            raise InputError("weight tensor covers fewer files than the catalog")

    def served_by(self, n: int, i: int) -> tuple[list, list]:
        """Reachable caches for (n, i) in serving order and their weights."""
        if self.weight_tensor is not None:
            wv = self.weight_tensor[n, i]
            js = sorted(np.flatnonzero(self.connectivity[i]).tolist(), key=lambda j: (-wv[j], j))
            return js, [float(wv[j]) for j in js]
        js = self._orders[i]
        m = 1.0 if self.file_multipliers is None else float(self.file_multipliers[n])
        row = self.weights[i]
        return list(js), [m * float(row[j]) for j in js]

    def weight_matrix(self, n_files: int) -> np.ndarray:
        """Dense ``N x I x J`` weights."""
        if self.weight_tensor is not None:
            return self.weight_tensor[:n_files]
        m = np.ones(n_files) if self.file_multipliers is None else self.file_multipliers[:n_files]
        return m[:, None, None] * self.weights[None]

    def to_dict(self) -> dict:
        d = {
            "n_locations": self.n_locations,
            "n_caches": self.n_caches,
            "capacities": self.capacities.tolist(),
            "connectivity": self.connectivity.astype(int).tolist(),
            "weights": self.weights.tolist(),
        }
        if self.file_multipliers is not None:
            d["file_multipliers"] = self.file_multipliers.tolist()
        if self.weight_tensor is not None:
            d["weight_tensor"] = self.weight_tensor.tolist()
        return d


def load_network(path) -> BipartiteNetwork:
    """Read a network description (JSON object, see :meth:`BipartiteNetwork.to_dict`)."""
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return network_from_dict(d, str(path))


def network_from_dict(d: dict, where: str = "network") -> BipartiteNetwork:
    missing = {"capacities", "connectivity", "weights"} - set(d)
    if missing:
        raise ParseError(f"{where}: missing keys {sorted(missing)}")
    net = BipartiteNetwork(
        d["capacities"],
        d["connectivity"],
        d["weights"],
        d.get("file_multipliers"),
        d.get("weight_tensor"),
    )
    for key, val in (("n_locations", net.n_locations), ("n_caches", net.n_caches)):
        if key in d and d[key] != val:
            raise ParseError(f"{where}: {key}={d[key]} disagrees with matrix shape ({val})")
    return net


def save_network(net: BipartiteNetwork, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict(), indent=2) + "\n", encoding="utf-8")


def three_tier_network(capacity: float = 10, n_locations: int = 4) -> BipartiteNetwork:
    """Three caches of utility 1, 2 and 100, every location reaching all of them."""
    return BipartiteNetwork(
        np.full(3, float(capacity)),
        np.ones((n_locations, 3), dtype=bool),
        np.tile([1.0, 2.0, 100.0], (n_locations, 1)),
    )


@dataclass(frozen=True)
class NetworkCacheVector:
    """Placement ``y[n, j]``: fraction of file ``n`` stored at cache ``j``."""

    y: np.ndarray
    capacities: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64)
        cap = np.asarray(self.capacities, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != cap.size:
            raise InputError("placement must be N x J with J capacities")
        if np.any(y < -EPS_FEAS) or np.any(y > 1 + EPS_FEAS):
            raise InputError("placement entries must lie in [0, 1]")
        if np.any(y.sum(axis=0) > cap + EPS_FEAS):
            raise InputError("placement exceeds a cache capacity")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "capacities", cap)

    @classmethod
    def uniform(cls, n_files: int, net: BipartiteNetwork) -> "NetworkCacheVector":
        cap = net.capacities
        return cls(np.tile(np.minimum(1.0, cap / n_files), (n_files, 1)), cap)


@dataclass(frozen=True)
class RoutingSolution:
    z: np.ndarray  # per cache, zero where unreachable
    z_origin: float
    value: float
    alpha: float  # multiplier of the unit-demand constraint


def _waterfill(ys: list, ws: list) -> tuple[list, float, float]:
    """Greedy LP solution along caches already sorted by descending weight.

    ``alpha`` is the weight of the first cache at which the cumulative stored
    amount strictly exceeds the unit demand, or 0 if it never does. When the
    demand is met exactly at a cache boundary this picks the next cache's
    weight, the smallest optimal multiplier.
    """
    z = []
    cum = 0.0
    value = 0.0
    alpha = 0.0
    found = False
    for y, w in zip(ys, ws):
        take = min(y, 1.0 - cum) if cum < 1.0 else 0.0
        z.append(take)
        value += w * take
        cum += y
        if not found and cum > 1.0:
            alpha = w
            found = True
    return z, value, alpha


def _request_parts(y: np.ndarray, request: Request, net: BipartiteNetwork):
    if request.location is None:
        raise InputError("bipartite requests need a location")
    if request.location >= net.n_locations:
        raise InputError(f"location {request.location} outside network")
    if request.file >= y.shape[0]:
        raise InputError(f"file {request.file} outside placement")
    js, ws = net.served_by(request.file, request.location)
    row = y[request.file]
    return js, ws, [float(row[j]) for j in js]


def route(y: NetworkCacheVector, request: Request, net: BipartiteNetwork) -> RoutingSolution:
    js, ws, ys = _request_parts(y.y, request, net)
    zs, value, alpha = _waterfill(ys, ws)
    z = np.zeros(net.n_caches)
    z[js] = zs
    return RoutingSolution(z, max(0.0, 1.0 - sum(zs)), value, alpha)


def network_utility(y: NetworkCacheVector, request: Request, net: BipartiteNetwork) -> float:
    return route(y, request, net).value


def _beta(ws: list, alpha: float) -> list:
    return [w - alpha if w > alpha else 0.0 for w in ws]


def supergradient(y: NetworkCacheVector, request: Request, net: BipartiteNetwork) -> np.ndarray:
    """Optimal duals of the per-cache limits ``z_j <= y[n, j]``, placed in row ``n``."""
    js, ws, ys = _request_parts(y.y, request, net)
    _, _, alpha = _waterfill(ys, ws)
    g = np.zeros_like(y.y)
    g[request.file, js] = _beta(ws, alpha)
    return g


def _bsa_update(Y: np.ndarray, n: int, js: list, g: list, eta: float, caps) -> None:
    """In-place BSA update on a cache-major (J x N) placement."""
    for j, gj in zip(js, g):
        if gj > 0.0:
            z = Y[j].copy()
            z[n] += eta * gj
            Y[j] = _project(z, caps[j])


def bsa_step(
    y: NetworkCacheVector, request: Request, net: BipartiteNetwork, eta: float
) -> NetworkCacheVector:
    js, ws, ys = _request_parts(y.y, request, net)
    _, _, alpha = _waterfill(ys, ws)
    Y = np.array(y.y.T)
    _bsa_update(Y, request.file, js, _beta(ws, alpha), eta, net.capacities)
    return NetworkCacheVector(Y.T, y.capacities)


def network_diameter_sq(net: BipartiteNetwork, n_files: int) -> float:
    cap = net.capacities
    return float(np.sum(2.0 * np.minimum(cap, n_files - cap)))


def bsa_horizon_step(net: BipartiteNetwork, T: int, n_files: Optional[int] = None) -> float:
    """Constant step ``diam / (w_max sqrt(deg T))``.

    ``diam^2 = sum_j 2 min(C_j, N - C_j)``, which is ``2CJ`` for equal
    capacities ``C <= N/2``; ``n_files`` only matters when some ``C_j > N/2``.
    """
    if T < 1:
        raise InputError("T must be >= 1")
    cap = net.capacities
    if n_files is None:
        if not np.allclose(cap, cap[0]):
            raise InputError("non-uniform capacities need n_files for the diameter")
        d2 = 2.0 * cap.sum()
    else:
        d2 = network_diameter_sq(net, n_files)
    return math.sqrt(d2) / (net.w_max(n_files) * math.sqrt(net.deg * T))


def _check_network_trace(trace: Trace, net: BipartiteNetwork) -> None:
    if trace.locations is None:
        raise InputError("bipartite runs need a trace with locations")
    if trace.n_locations is not None and trace.n_locations > net.n_locations:
        raise InputError("trace has more locations than the network")
    net.check_catalog(trace.catalog_size)


def simulate_bsa(
    trace: Trace, net: BipartiteNetwork, eta: float, y0: Optional[NetworkCacheVector] = None
) -> tuple[np.ndarray, NetworkCacheVector]:
    """Run BSA over ``trace``; returns per-slot routed utility and the final placement."""
    _check_network_trace(trace, net)
    N = trace.catalog_size
    y0 = y0 if y0 is not None else NetworkCacheVector.uniform(N, net)
    Y = np.array(y0.y.T)
    caps = net.capacities.tolist()
    util = np.empty(trace.horizon)
    for t, (n, i) in enumerate(zip(trace.files.tolist(), trace.locations.tolist())):
        js, ws = net.served_by(n, i)
        ys = [Y[j, n] for j in js]
        _, value, alpha = _waterfill(ys, ws)
        util[t] = value
        _bsa_update(Y, n, js, _beta(ws, alpha), eta, caps)
    return util, NetworkCacheVector(np.clip(Y.T, 0.0, 1.0), net.capacities)


# --- static benchmark ------------------------------------------------------


def _request_groups(trace: Trace):
    """Distinct (file, location) pairs and how often each was requested."""
    key = trace.files * (trace.n_locations or 1) + trace.locations
    uniq, counts = np.unique(key, return_counts=True)
    nl = trace.n_locations or 1
    return uniq // nl, uniq % nl, counts.astype(np.float64)


def _batch_route(y: np.ndarray, fn, loc, net: BipartiteNetwork, W: np.ndarray):
    """Vectorised waterfilling for many (file, location) pairs at once.

    ``W`` is the dense N x I x J weight tensor. Returns values and duals beta (P x J).
    """
    reach = net.connectivity[loc]
    w = W[fn, loc]
    key = np.where(reach, -w, np.inf)
    order = np.lexsort((np.broadcast_to(np.arange(w.shape[1]), w.shape), key), axis=1)
    ws = np.take_along_axis(w, order, 1)
    ys = np.take_along_axis(y[fn] * reach, order, 1)
    cum = np.cumsum(ys, axis=1)
    z = np.clip(np.minimum(ys, 1.0 - (cum - ys)), 0.0, None)
    value = (ws * z).sum(axis=1)
    over = cum > 1.0
    has = over.any(axis=1)
    first = np.argmax(over, axis=1)
    alpha = np.where(has, ws[np.arange(len(fn)), first], 0.0)
    beta = np.where(reach, np.maximum(w - alpha[:, None], 0.0), 0.0)
    return value, beta


def network_objective(trace: Trace, net: BipartiteNetwork, y: NetworkCacheVector) -> float:
    """Total utility a fixed placement collects over the trace."""
    fn, loc, c = _request_groups(trace)
    W = net.weight_matrix(trace.catalog_size)
    value, _ = _batch_route(y.y, fn, loc, net, W)
    return float(c @ value)


def network_slot_utils(trace: Trace, net: BipartiteNetwork, y: NetworkCacheVector) -> np.ndarray:
    W = net.weight_matrix(trace.catalog_size)
    value, _ = _batch_route(y.y, trace.files, trace.locations, net, W)
    return value


def _project_columns(Y: np.ndarray, caps) -> np.ndarray:
    out = np.empty_like(Y)
    for j in range(Y.shape[1]):
        out[:, j] = _project(Y[:, j], caps[j])
    return out


def hindsight_best_static_network(
    trace: Trace,
    net: BipartiteNetwork,
    epochs: int = 50,
    method: str = "ascent",
    step_scale: float = 1.0,
) -> tuple[NetworkCacheVector, float]:
    """Best fixed placement for the whole trace, routing included.

    ``method="ascent"`` runs projected supergradient ascent on the aggregate
    (concave) objective with steps ``diam / (||G|| sqrt(e))`` and returns the
    best iterate by exact evaluation. ``method="lp"`` solves the joint
    placement/routing LP exactly with HiGHS.
    """
    if trace.horizon == 0:
        raise InputError("trace is empty")
    if epochs < 1:
        raise InputError("epochs must be >= 1")
    _check_network_trace(trace, net)
    if method == "lp":
        return _hindsight_lp(trace, net)
    if method != "ascent":
        raise InputError(f"unknown method {method!r}")
    N = trace.catalog_size
    caps = net.capacities
    W = net.weight_matrix(N)
    fn, loc, c = _request_groups(trace)
    diam = math.sqrt(network_diameter_sq(net, N))
    y = _warm_start(fn, loc, c, net, W, N)
    best_y, best_f = y, -math.inf
    for e in range(1, epochs + 1):
        value, beta = _batch_route(y, fn, loc, net, W)
        f = float(c @ value)
        if f > best_f:
            best_y, best_f = y, f
        G = np.zeros_like(y)
        np.add.at(G, fn, c[:, None] * beta)
        norm = np.linalg.norm(G)
        if norm == 0:
            break
        y = _project_columns(y + (step_scale * diam / (norm * math.sqrt(e))) * G, caps)
    value, _ = _batch_route(y, fn, loc, net, W)
    f = float(c @ value)
    if f > best_f:
        best_y, best_f = y, f
    return NetworkCacheVector(np.clip(best_y, 0.0, 1.0), caps), best_f


def _warm_start(fn, loc, c, net, W, N) -> np.ndarray:
    """Greedy integral placement: caches by descending weight take the files
    whose full copy adds the most utility given what is already placed."""
    y = np.zeros((N, net.n_caches))
    order = np.argsort(-net.weights.max(axis=0), kind="stable")
    for j in order:
        before, _ = _batch_route(y, fn, loc, net, W)
        trial = y.copy()
        trial[:, j] = 1.0
        after, _ = _batch_route(trial, fn, loc, net, W)
        gain = np.zeros(N)
        np.add.at(gain, fn, c * (after - before))
        y[:, j] = _best_fill(gain, net.capacities[j])
    return y


def _best_fill(scores: np.ndarray, cap: float) -> np.ndarray:
    n = scores.size
    order = np.lexsort((np.arange(n), -scores))
    y = np.zeros(n)
    k = min(int(math.floor(cap)), n)
    y[order[:k]] = 1.0
    if k < n:
        y[order[k]] = min(1.0, cap - k)
    return y


def _hindsight_lp(trace: Trace, net: BipartiteNetwork) -> tuple[NetworkCacheVector, float]:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    N, J = trace.catalog_size, net.n_caches
    W = net.weight_matrix(N)
    fn, loc, c = _request_groups(trace)
    # Variables: y[n, j] (N*J) then z[p, j] for reachable (p, j).
    pj = [(p, j) for p in range(len(fn)) for j in np.flatnonzero(net.connectivity[loc[p]])]
    nz = len(pj)
    cost = np.zeros(N * J + nz)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for k, (p, j) in enumerate(pj):
        cost[N * J + k] = -c[p] * W[fn[p], loc[p], j]
        # z[p, j] - y[n_p, j] <= 0
        rows += [r, r]
        cols += [N * J + k, fn[p] * J + j]
        vals += [1.0, -1.0]
        rhs.append(0.0)
        r += 1
    by_p = {}
    for k, (p, _) in enumerate(pj):
        by_p.setdefault(p, []).append(k)
    for ks in by_p.values():
        rows += [r] * len(ks)
        cols += [N * J + k for k in ks]
        vals += [1.0] * len(ks)
        rhs.append(1.0)
        r += 1
    for j in range(J):
        rows += [r] * N
        cols += [n * J + j for n in range(N)]
        vals += [1.0] * N
        rhs.append(net.capacities[j])
        r += 1
    A = coo_matrix((vals, (rows, cols)), shape=(r, N * J + nz)).tocsr()
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=(0.0, 1.0), method="highs")
    if res.status != 0:
        raise RuntimeError(f"hindsight LP failed: {res.message}")
    y = np.clip(res.x[: N * J].reshape(N, J), 0.0, 1.0)
    yv = NetworkCacheVector(_project_columns(y, net.capacities), net.capacities)
    return yv, network_objective(trace, net, yv)


def hindsight_bruteforce_network(trace: Trace, net: BipartiteNetwork) -> tuple[NetworkCacheVector, float]:
    """Best integral placement by enumeration; only for ``N * J <= 12``."""
    N, J = trace.catalog_size, net.n_caches
    if N * J > 12:
        raise InputError("brute force limited to N * J <= 12")
    caps = np.floor(net.capacities + EPS_FEAS)
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=N * J):
        y = np.array(bits).reshape(N, J)
        if np.any(y.sum(axis=0) > caps):
            continue
        yv = NetworkCacheVector(y, net.capacities)
        f = network_objective(trace, net, yv)
        if best is None or f > best[1] + 1e-12:
            best = (yv, f)
    return best


# --- LRU-style heuristics ----------------------------------------------------


@dataclass
class MultiLruState:
    """One LRU list per cache (most recent last) and the RNG for insertions."""

    caches: list
    rng: np.random.Generator

    @classmethod
    def empty(cls, net: BipartiteNetwork, seed: int = 0) -> "MultiLruState":
        return cls([OrderedDict() for _ in range(net.n_caches)], _rng(seed, 3))

    def contents(self) -> list:
        return [list(reversed(c)) for c in self.caches]


def _insert(cache: OrderedDict, n: int, cap: int) -> None:
    cache[n] = None
    cache.move_to_end(n)
    while len(cache) > cap:
        cache.popitem(last=False)


def _serve(state: MultiLruState, n: int, i: int, net: BipartiteNetwork):
    js, ws = net.served_by(n, i)
    for j, w in zip(js, ws):  # already in descending weight order
        if n in state.caches[j]:
            state.caches[j].move_to_end(n)
            return js, w, True
    return js, 0.0, False


def _mlru_update(state: MultiLruState, n: int, i: int, net: BipartiteNetwork) -> float:
    js, util, hit = _serve(state, n, i, net)
    if not hit and js:
        j = js[int(state.rng.integers(len(js)))]
        _insert(state.caches[j], n, int(math.floor(net.capacities[j])))
    return util


def _lazy_qlru_update(state: MultiLruState, n: int, i: int, net: BipartiteNetwork, q: float) -> float:
    js, util, hit = _serve(state, n, i, net)
    if not hit:
        # Lazy rule: replicate only when no reachable cache already has the file.
        for j in js:
            if q >= 1.0 or state.rng.random() < q:
                _insert(state.caches[j], n, int(math.floor(net.capacities[j])))
    return util


def mlru_step(state: MultiLruState, request: Request, net: BipartiteNetwork):
    """Serve from the best reachable hit; on a full miss insert at one random reachable cache."""
    new = copy.deepcopy(state)
    return new, _mlru_update(new, request.file, request.location, net)


def _check_q(q: float) -> None:
    if not 0.0 < q <= 1.0:
        raise InputError(f"q must lie in (0, 1], got {q}")


def lazy_qlru_step(state: MultiLruState, request: Request, net: BipartiteNetwork, q: float = 1.0):
    """Serve from the best reachable hit; on a full miss each reachable cache inserts w.p. ``q``."""
    _check_q(q)
    new = copy.deepcopy(state)
    return new, _lazy_qlru_update(new, request.file, request.location, net, q)


def simulate_multi_lru(
    trace: Trace, net: BipartiteNetwork, variant: str = "mlru", q: float = 1.0, seed: int = 0
) -> tuple[np.ndarray, MultiLruState]:
    _check_network_trace(trace, net)
    if variant == "lazy_qlru":
        _check_q(q)
    elif variant != "mlru":
        raise InputError(f"unknown variant {variant!r}")
    state = MultiLruState.empty(net, seed)
    util = np.empty(trace.horizon)
    for t, (n, i) in enumerate(zip(trace.files.tolist(), trace.locations.tolist())):
        if variant == "mlru":
            util[t] = _mlru_update(state, n, i, net)
        else:
            util[t] = _lazy_qlru_update(state, n, i, net, q)
    return util, state
