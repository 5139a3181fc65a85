import math

import numpy as np
import pytest

from oracles import random_network, random_placement, route_lp_oracle
from olcache.bipartite import (
    BipartiteNetwork,
    MultiLruState,
    NetworkCacheVector,
    bsa_horizon_step,
    bsa_step,
    three_tier_network,
    hindsight_best_static_network,
    hindsight_bruteforce_network,
    lazy_qlru_step,
    load_network,
    mlru_step,
    network_objective,
    network_utility,
    route,
    save_network,
    simulate_bsa,
    simulate_multi_lru,
    supergradient,
)
from olcache.core import Catalog, InputError, Request
from olcache.policies import OgaState, simulate_lru, simulate_oga
from olcache.traces import Trace, assign_locations, gen_zipf_iid


def one_file_net(weights):
    J = len(weights)
    return BipartiteNetwork(np.ones(J), np.ones((1, J), bool), np.array([weights], float))


def test_route_example():
    net = one_file_net([1, 2, 100])
    y = NetworkCacheVector([[0.5, 0.8, 0.3]], [1, 1, 1])
    sol = route(y, Request(0, 0, 0), net)
    assert np.allclose(sol.z, [0, 0.7, 0.3])
    assert sol.value == pytest.approx(31.4)
    assert sol.z_origin == pytest.approx(0.0)
    assert sol.alpha == 2.0
    assert np.allclose(supergradient(y, Request(0, 0, 0), net), [[0, 0, 98]])


def test_route_trivial_cases():
    net = one_file_net([5])
    assert network_utility(NetworkCacheVector([[1.0]], [1]), Request(0, 0, 0), net) == 5.0
    net = one_file_net([1, 2, 100])
    sol = route(NetworkCacheVector([[0.0, 0.0, 0.0]], [1, 1, 1]), Request(0, 0, 0), net)
    assert sol.value == 0 and sol.z_origin == 1


def test_supergradient_with_slack_budget_is_the_weights():
    net = one_file_net([1, 2, 100])
    y = NetworkCacheVector([[0.2, 0.3, 0.1]], [1, 1, 1])
    assert np.allclose(supergradient(y, Request(0, 0, 0), net), [[1, 2, 100]])


def test_supergradient_at_exact_budget_boundary():
    # demand met exactly by the only cache: the smallest valid multiplier is 0
    net = one_file_net([5])
    y = NetworkCacheVector([[1.0]], [1])
    g = supergradient(y, Request(0, 0, 0), net)
    assert np.allclose(g, [[5.0]])
    f = network_utility(y, Request(0, 0, 0), net)
    for v in np.linspace(0, 1, 11):
        yp = NetworkCacheVector([[v]], [1])
        assert network_utility(yp, Request(0, 0, 0), net) <= f + g[0, 0] * (v - 1) + 1e-12


def test_unreachable_caches_get_nothing():
    net = BipartiteNetwork([1, 1], [[True, False]], [[3.0, 7.0]])
    y = NetworkCacheVector([[0.5, 1.0]], [1, 1])
    sol = route(y, Request(0, 0, 0), net)
    assert sol.z.tolist() == [0.5, 0.0] and sol.value == 1.5
    assert supergradient(y, Request(0, 0, 0), net)[0, 1] == 0.0


def test_route_needs_location():
    net = one_file_net([1])
    with pytest.raises(InputError):
        route(NetworkCacheVector([[0.5]], [1]), Request(0, 0), net)


def test_route_matches_vertex_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(300):
        net = random_network(rng)
        y = random_placement(rng, 3, net)
        n, i = int(rng.integers(3)), int(rng.integers(net.n_locations))
        js, ws = net.served_by(n, i)
        expected = route_lp_oracle([y.y[n, j] for j in js], ws)
        assert route(y, Request(0, n, i), net).value == pytest.approx(expected, abs=1e-9)


def test_supergradient_inequality_and_norm():
    rng = np.random.default_rng(2)
    for _ in range(300):
        net = random_network(rng)
        y, yp = random_placement(rng, 3, net), random_placement(rng, 3, net)
        req = Request(0, int(rng.integers(3)), int(rng.integers(net.n_locations)))
        g = supergradient(y, req, net)
        f, fp = network_utility(y, req, net), network_utility(yp, req, net)
        assert fp <= f + np.sum(g * (yp.y - y.y)) + 1e-9
        assert np.linalg.norm(g) <= net.w_max() * math.sqrt(net.deg) + 1e-12


def test_concavity():
    rng = np.random.default_rng(3)
    for _ in range(300):
        net = random_network(rng)
        a, b = random_placement(rng, 3, net), random_placement(rng, 3, net)
        lam = rng.random()
        mix = NetworkCacheVector(lam * a.y + (1 - lam) * b.y, net.capacities)
        req = Request(0, int(rng.integers(3)), int(rng.integers(net.n_locations)))
        lhs = network_utility(mix, req, net)
        rhs = lam * network_utility(a, req, net) + (1 - lam) * network_utility(b, req, net)
        assert lhs >= rhs - 1e-9


def test_bsa_zero_supergradient_leaves_y():
    y = NetworkCacheVector([[0.0], [1.0]], [1])
    # the only cache is out of reach, so the supergradient vanishes
    net = BipartiteNetwork([1], [[False]], [[0.0]])
    assert np.array_equal(bsa_step(y, Request(0, 0, 0), net, 0.5).y, y.y)


def test_bsa_three_tier_first_step():
    net = three_tier_network(capacity=10, n_locations=1)
    N = 100
    y = np.zeros((N, 3))
    y[0] = [0.5, 0.8, 0.3]
    y0 = NetworkCacheVector(y, net.capacities)
    eta = 1e-3
    y1 = bsa_step(y0, Request(0, 0, 0), net, eta)
    # interior point, so the projection is the identity
    assert y1.y[0, 2] == pytest.approx(0.3 + eta * 98)
    assert y1.y[0, :2].tolist() == [0.5, 0.8]


def test_bsa_single_cache_equals_oga():
    N, C, T = 40, 7.0, 2000
    trace = assign_locations(gen_zipf_iid(N, T, 0.8, seed=5), 1, seed=5)
    net = BipartiteNetwork([C], [[True]], [[2.0]])
    eta = 0.03
    bsa_util, bsa_y = simulate_bsa(trace, net, eta)
    cat = Catalog(N, np.full(N, 2.0))
    oga_util, oga = simulate_oga(trace, cat, OgaState.initial(cat, C, eta=eta))
    assert np.abs(bsa_util - oga_util).max() <= 1e-12
    assert np.abs(bsa_y.y[:, 0] - oga.y.fractions).max() <= 1e-12


def test_bsa_horizon_step():
    net = three_tier_network()
    eta = bsa_horizon_step(net, 100_000)
    assert eta == pytest.approx(math.sqrt(60) / (100 * math.sqrt(3e5)))
    assert bsa_horizon_step(net, 400_000) == pytest.approx(eta / 2)
    uneven = BipartiteNetwork([1, 2], np.ones((1, 2), bool), [[1.0, 1.0]])
    with pytest.raises(InputError):
        bsa_horizon_step(uneven, 10)
    assert bsa_horizon_step(uneven, 10, n_files=3) == pytest.approx(math.sqrt(2 + 2) / math.sqrt(20))


def test_bsa_stays_feasible():
    net = three_tier_network(capacity=3, n_locations=2)
    trace = assign_locations(gen_zipf_iid(20, 3000, 0.8, seed=1), 2, seed=1)
    _, y = simulate_bsa(trace, net, 0.01)
    assert np.all(y.y.sum(axis=0) <= 3 + 1e-9)


def test_hindsight_trivial_cases():
    net = BipartiteNetwork([1], [[True]], [[4.0]])
    trace = Trace(np.zeros(7, np.int64), 2, np.zeros(7, np.int64), 1)
    y, val = hindsight_best_static_network(trace, net)
    assert val == pytest.approx(28.0)
    trace = Trace(np.array([0, 1] * 5), 2, np.zeros(10, np.int64), 1)
    _, val = hindsight_best_static_network(trace, net)
    _, bf = hindsight_bruteforce_network(trace, net)
    assert val == pytest.approx(bf)
    with pytest.raises(InputError):
        hindsight_best_static_network(trace, net, epochs=0)


def test_hindsight_against_bruteforce_and_lp():
    rng = np.random.default_rng(8)
    for _ in range(40):
        net = random_network(rng, max_i=3, max_j=3)
        N = max(1, 12 // net.n_caches)
        N = min(N, 4)
        T = 60
        files = rng.integers(0, N, T)
        trace = Trace(files, max(N, 2), rng.integers(0, net.n_locations, T), net.n_locations)
        if trace.catalog_size * net.n_caches > 12:
            continue
        _, bf = hindsight_bruteforce_network(trace, net)
        _, lp = hindsight_best_static_network(trace, net, method="lp")
        _, asc = hindsight_best_static_network(trace, net, epochs=200)
        # the LP relaxation can only do better than the best integral placement
        assert lp >= bf - 1e-7
        assert asc <= lp + 1e-7
        assert asc >= 0.95 * lp


def test_hindsight_beats_top_files_in_best_cache():
    net = three_tier_network()
    trace = assign_locations(gen_zipf_iid(100, 5000, 0.8, seed=0), 4, seed=0)
    _, val = hindsight_best_static_network(trace, net)
    y = np.zeros((100, 3))
    y[np.argsort(-trace.counts(), kind="stable")[:10], 2] = 1.0
    assert val >= network_objective(trace, net, NetworkCacheVector(y, net.capacities))


def test_mlru_examples():
    net = BipartiteNetwork([2, 2], np.ones((1, 2), bool), [[2.0, 100.0]])
    s = MultiLruState.empty(net, seed=0)
    s, u = mlru_step(s, Request(0, 5, 0), net)
    assert u == 0 and sum(5 in c for c in s.caches) == 1
    s.caches[0][7] = None
    s.caches[1][7] = None
    s2, u = mlru_step(s, Request(1, 7, 0), net)
    assert u == 100
    assert list(s2.caches[1])[-1] == 7


def test_lazy_qlru_examples():
    net = BipartiteNetwork([2, 2], np.ones((1, 2), bool), [[2.0, 100.0]])
    s = MultiLruState.empty(net)
    s, u = lazy_qlru_step(s, Request(0, 3, 0), net, 1.0)
    assert u == 0 and all(3 in c for c in s.caches)
    before = [list(c) for c in s.caches]
    s, u = lazy_qlru_step(s, Request(1, 3, 0), net, 1.0)
    assert u == 100 and [sorted(c) for c in s.caches] == [sorted(b) for b in before]
    for q in (0.0, 1.5):
        with pytest.raises(InputError):
            lazy_qlru_step(s, Request(2, 3, 0), net, q)


@pytest.mark.parametrize("variant", ["mlru", "lazy_qlru"])
def test_single_cache_heuristics_reduce_to_lru(variant):
    trace = assign_locations(gen_zipf_iid(30, 2000, 0.8, seed=2), 1)
    net = BipartiteNetwork([5], [[True]], [[1.0]])
    util, _ = simulate_multi_lru(trace, net, variant, q=1.0)
    lru, _ = simulate_lru(trace, Catalog.uniform(30), 5)
    assert np.array_equal(util, lru)


def test_network_file_round_trip(tmp_path):
    net = BipartiteNetwork([2, 3], [[True, False], [True, True]], [[1, 0], [2, 5]], file_multipliers=[1, 2, 3])
    save_network(net, tmp_path / "net.json")
    back = load_network(tmp_path / "net.json")
    assert np.array_equal(back.weight_matrix(3), net.weight_matrix(3))
    assert np.array_equal(back.capacities, net.capacities)
