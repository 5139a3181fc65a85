import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olcache.core import (
    CacheVector,
    Catalog,
    InputError,
    RegretLedger,
    Request,
    ledger_record,
    slot_utility,
)


def test_slot_utility_examples():
    cat = Catalog.uniform(3)
    assert slot_utility(Request(0, 2), CacheVector([0.5, 0.5, 0.0], 1), cat) == 0.0
    assert slot_utility(Request(0, 2), CacheVector([0.0, 0.0, 1.0], 1), cat) == 1.0
    cat = Catalog(2, [2.5, 1.0])
    assert slot_utility(Request(0, 0), CacheVector([0.4, 0.0], 1), cat) == pytest.approx(1.0)


def test_slot_utility_rejects_out_of_range_file():
    with pytest.raises(InputError):
        slot_utility(Request(0, 3), CacheVector([0.1] * 3, 1), Catalog.uniform(3))


def test_cache_vector_invariants():
    with pytest.raises(InputError):
        CacheVector([0.6, 0.6], 1.0)
    with pytest.raises(InputError):
        CacheVector([1.2, 0.0], 2.0)
    CacheVector([0.5, 0.5 + 5e-10], 1.0)  # within feasibility slack
    with pytest.raises(InputError):
        Catalog(1, [1.0])
    with pytest.raises(InputError):
        Catalog(2, [1.0, 0.0])


def test_ledger_examples():
    led = ledger_record(RegretLedger(), 0.5, 1.0)
    assert led.regret_series.tolist() == [0.5]
    led = ledger_record(led, 1.0, 1.0)
    assert led.regret_series.tolist() == [0.5, 0.5]
    led = ledger_record(led, 1.0, 0.0)
    assert led.regret_series.tolist() == [0.5, 0.5, -0.5]
    with pytest.raises(InputError):
        ledger_record(led, -1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_utility_is_linear_in_y(n, seed):
    rng = np.random.default_rng(seed)
    cat = Catalog(n, rng.uniform(0.1, 5, n))
    C = float(rng.integers(1, n + 1))
    y1 = rng.uniform(0, 1, n)
    y1 *= min(1.0, C / y1.sum())
    y2 = rng.uniform(0, 1, n)
    y2 *= min(1.0, C / y2.sum())
    lam = rng.random()
    req = Request(0, int(rng.integers(n)))
    mix = slot_utility(req, CacheVector(lam * y1 + (1 - lam) * y2, C), cat)
    parts = lam * slot_utility(req, CacheVector(y1, C), cat) + (1 - lam) * slot_utility(
        req, CacheVector(y2, C), cat
    )
    assert abs(mix - parts) <= 1e-12
    assert mix <= cat.w_max


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=30))
def test_ledger_regret_is_running_sum(pairs):
    led = RegretLedger()
    for p, h in pairs:
        prev = led.regret_series.copy()
        led = ledger_record(led, p, h)
        assert np.array_equal(led.regret_series[:-1], prev)
    expected = sum(h - p for p, h in pairs)
    assert led.regret == pytest.approx(expected, abs=1e-9)
