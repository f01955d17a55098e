import numpy as np
import pytest

from mtl import (
    LogitWtp,
    MarketParams,
    MarketState,
    UniformWtp,
    demand_shares,
    effective_prices,
    market_view,
    rank_and_eliminate,
    set_param,
)
from mtl.market import parse_param_path

UNIT = UniformWtp(0.0, 1.0)


def params_for(p0, k=0.2, lam=0.1, wtp=UNIT):
    return MarketParams.from_p0(p0, k=k, lam=lam, wtp=wtp)


def test_effective_prices_zero_share():
    p = effective_prices(params_for([0.8], k=0.5), MarketState(u=np.array([0.0])))
    assert p == pytest.approx([0.8])


def test_effective_prices_substitution():
    p = effective_prices(params_for([0.5], k=0.25), MarketState(u=np.array([0.4])))
    assert p == pytest.approx([0.4])


def test_effective_prices_componentwise():
    params = params_for([0.5, 0.6, 0.8], k=0.2)
    p = effective_prices(params, MarketState(u=np.array([1.0, 0.0, 0.0])))
    assert p == pytest.approx([0.3, 0.6, 0.8])


def test_effective_prices_may_go_negative():
    params = params_for([0.1], k=0.5)
    p = effective_prices(params, MarketState(u=np.array([1.0])))
    assert p == pytest.approx([-0.4])


def test_eliminate_keeps_sorted_prices():
    assert rank_and_eliminate(np.array([0.3, 0.6, 0.8])) == [0, 1, 2]


def test_eliminate_drops_dominated_middle():
    # product 1 costs more than the greener product 2
    assert rank_and_eliminate(np.array([0.3, 0.6, 0.55])) == [0, 2]


def test_eliminate_ties_resolve_to_greenest():
    assert rank_and_eliminate(np.array([0.9, 0.9, 0.9])) == [2]


def test_eliminate_greenest_always_survives():
    # even when it is by far the most expensive
    assert rank_and_eliminate(np.array([0.0, 0.0, 5.0])) == [1, 2]
    assert rank_and_eliminate(np.array([5.0])) == [0]
    rng = np.random.default_rng(3)
    for _ in range(100):
        prices = rng.uniform(-1.0, 1.0, size=4)
        assert 3 in rank_and_eliminate(prices)


def test_eliminate_chain():
    assert rank_and_eliminate(np.array([0.31, 0.30, 0.29])) == [2]
    assert rank_and_eliminate(np.array([0.30, 0.31, 0.29])) == [2]
    assert rank_and_eliminate(np.array([0.29, 0.31, 0.30])) == [0, 2]


def test_demand_all_survive():
    params = params_for([0.5, 0.6, 0.8], k=0.2)
    prices = np.array([0.3, 0.6, 0.8])
    d = demand_shares(params, prices, [0, 1, 2])
    assert d == pytest.approx([0.3, 0.2, 0.2], abs=1e-15)
    assert 1.0 - d.sum() == pytest.approx(0.3, abs=1e-15)


def test_demand_with_eliminated_product():
    params = params_for([0.5, 0.6, 0.8], k=0.2)
    prices = np.array([0.3, 0.6, 0.55])
    d = demand_shares(params, prices, [0, 2])
    assert d == pytest.approx([0.25, 0.0, 0.45], abs=1e-15)


def test_demand_single_survivor_is_tail():
    for wtp in (UNIT, LogitWtp(0.0, 4.0)):
        params = params_for([0.5, 0.6, 0.7], wtp=wtp)
        prices = np.array([0.9, 0.8, 0.7])
        d = demand_shares(params, prices, [2])
        assert d[2] == pytest.approx(1.0 - float(wtp.cdf(0.7)), abs=1e-15)
        assert d[0] == d[1] == 0.0


@pytest.mark.parametrize("wtp", [UNIT, LogitWtp(0.3, 5.0), UniformWtp(-0.2, 1.4)])
def test_demand_conservation_random(wtp):
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = rng.integers(1, 6)
        prices = rng.uniform(-0.5, 1.5, size=n)
        params = params_for(prices, wtp=wtp)  # p0 values double as prices here
        survivors = rank_and_eliminate(prices)
        d = demand_shares(params, prices, survivors)
        assert np.all(d >= 0.0)
        nonbuyer_demand = float(wtp.cdf(prices[survivors[0]]))
        assert abs(d.sum() + nonbuyer_demand - 1.0) < 1e-12


def test_dominance_soundness_random():
    rng = np.random.default_rng(23)
    for _ in range(500):
        prices = rng.uniform(0.0, 1.0, size=rng.integers(1, 8))
        survivors = rank_and_eliminate(prices)
        kept = prices[survivors]
        assert np.all(np.diff(kept) > 0.0)
        for i in range(len(prices)):
            if i not in survivors:
                assert np.any(prices[i + 1 :] <= prices[i])


def test_greenest_demand_ignores_other_prices():
    rng = np.random.default_rng(5)
    wtp = LogitWtp(0.2, 3.0)
    for _ in range(100):
        prices = rng.uniform(-0.5, 1.5, size=4)
        params = params_for(prices, wtp=wtp)
        survivors = rank_and_eliminate(prices)
        d = demand_shares(params, prices, survivors)
        assert d[3] == pytest.approx(1.0 - float(wtp.cdf(prices[3])), abs=1e-15)


def test_elimination_idempotent():
    rng = np.random.default_rng(31)
    for _ in range(200):
        prices = rng.uniform(0.0, 1.0, size=5)
        survivors = rank_and_eliminate(prices)
        again = rank_and_eliminate(prices[survivors])
        assert again == list(range(len(survivors)))


def test_market_view_reports_nonbuyers():
    params = params_for([0.5, 0.6, 0.8], k=0.2)
    view = market_view(params, MarketState(u=np.array([0.1, 0.2, 0.3])))
    assert view.nonbuyer_share == pytest.approx(0.4, abs=1e-15)
    assert view.survivors == (0, 1, 2)


def test_params_validation():
    with pytest.raises(ValueError):
        MarketParams.from_p0([], k=0.2, lam=0.1, wtp=UNIT)
    with pytest.raises(ValueError):
        params_for([0.5], k=-0.1)
    with pytest.raises(ValueError):
        params_for([0.5], lam=0.0)
    with pytest.raises(ValueError):
        params_for([0.5], lam=1.2)
    with pytest.raises(ValueError):
        params_for([np.inf])


def test_state_validation():
    with pytest.raises(ValueError):
        MarketState(u=np.array([1.2, 0.0]))
    with pytest.raises(ValueError):
        MarketState(u=np.array([-0.1, 0.0]))
    with pytest.raises(ValueError):
        MarketState(u=np.array([0.7, 0.7]))
    MarketState(u=np.array([0.5, 0.5]))  # exactly full market is fine


def test_parse_param_path():
    assert parse_param_path("k", 3) == ("k", None)
    assert parse_param_path("lambda", 3) == ("lambda", None)
    assert parse_param_path("p0[1]", 3) == ("p0", 1)
    assert parse_param_path("share[0]", 3) == ("share", 0)
    for bad in ("p0", "share", "k[1]", "p0[3]", "price[0]", "p0[-1]", ""):
        with pytest.raises(ValueError):
            parse_param_path(bad, 3)


def test_set_param():
    params = params_for([0.5, 0.6, 0.8], k=0.2, lam=0.1)
    assert set_param(params, "k", 0.4).k == 0.4
    assert set_param(params, "lambda", 0.5).lam == 0.5
    assert set_param(params, "p0[1]", 0.7).products[1].p0 == 0.7
    assert set_param(params, "p0[1]", 0.7).products[0].p0 == 0.5
    with pytest.raises(ValueError):
        set_param(params, "share[1]", 0.7)
    # originals untouched
    assert params.k == 0.2 and params.products[1].p0 == 0.6
