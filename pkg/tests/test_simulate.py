import pytest

from gridpop.features import example_arrays, extract_features, label_examples
from gridpop.forest import ForestParams, train
from gridpop.simulate import POLICIES, SimConfig, SimulationError, forecasts_at, simulate
from gridpop.strategy import replay


@pytest.fixture(scope="module")
def small_model(small_trace):
    ex = label_examples(extract_features(small_trace, 78), small_trace, 78, 26)
    return train(ex, ForestParams(n_trees=10), seed=1)


@pytest.mark.parametrize("policy", POLICIES)
def test_replay_reproduces_final_state(small_trace, small_model, policy):
    cfg = SimConfig(policy=policy, start_week=104, purge_every=13)
    res = simulate(small_trace, cfg, small_model if policy == "metric_m" else None)
    assert res.log
    assert replay(res.initial, res.log).replicas == res.final.replicas
    assert res.final.used_bytes == res.final.recompute_used()
    assert len(res.weekly_used) == small_trace.horizon_weeks - 104
    assert all(u <= res.final.capacity_bytes for u in res.weekly_used)
    assert all(0 <= n <= cfg.max_replicas or n == 0 for n in res.final.replicas.values())


def test_simulation_is_deterministic(small_trace, small_model):
    cfg = SimConfig(start_week=110)
    a = simulate(small_trace, cfg, small_model)
    b = simulate(small_trace, cfg, small_model)
    assert a.log == b.log and a.final.replicas == b.final.replicas


def test_forecasts_cover_existing_datasets(fixture_trace):
    fc = forecasts_at(fixture_trace, 2)
    assert set(fc) == {"d1", "d2"}
    assert all(v >= 0 for v in fc.values())


def test_bad_config(small_trace):
    with pytest.raises(SimulationError):
        simulate(small_trace, SimConfig(policy="random"))
    with pytest.raises(SimulationError):
        simulate(small_trace, SimConfig(start_week=small_trace.horizon_weeks))
    with pytest.raises(SimulationError):
        simulate(small_trace, SimConfig(purge_every=0))
