import pytest
from hypothesis import given, strategies as st

from rampflow.baselines import (FixedHeadwayPolicy, ThresholdAccConfig, ThresholdAccPolicy, fixed_headway_policy,
                                measured_flow, threshold_acc_policy)
from rampflow.mdp_env import Scenario, run_episode
from rampflow.road_world import TrafficDemand
from rampflow.v2x import TrafficBulletin


def bulletin(density, speed):
    return TrafficBulletin(density, speed, 0.0, 22.2, 360.0, 1500.0, 16.67, 0.0)


def test_minimum_headway_accepted():
    assert fixed_headway_policy(2.5).headway() == 2.5


def test_below_minimum_rejected():
    with pytest.raises(ValueError):
        fixed_headway_policy(2.4)


def test_flow_conversion():
    assert measured_flow(bulletin(20.0, 25.0), 2) == pytest.approx(3600.0)


def test_threshold_boundary_is_small_gap():
    cfg = ThresholdAccConfig(flow_threshold=3600.0)
    assert threshold_acc_policy(bulletin(20.0, 25.0), cfg) == cfg.h_low


def test_zero_traffic_is_large_gap():
    cfg = ThresholdAccConfig()
    assert threshold_acc_policy(bulletin(0.0, 33.3), cfg) == cfg.h_high


def test_no_bulletin_is_conservative():
    cfg = ThresholdAccConfig()
    assert threshold_acc_policy(None, cfg) == cfg.h_high
    assert ThresholdAccPolicy(cfg).headway(None) == cfg.h_high


@given(d=st.floats(0, 200), v=st.floats(0, 40), thr=st.floats(100, 5000))
def test_threshold_output_is_one_of_two(d, v, thr):
    cfg = ThresholdAccConfig(flow_threshold=thr)
    out = threshold_acc_policy(bulletin(d, v), cfg)
    assert out in (cfg.h_low, cfg.h_high)
    assert out == threshold_acc_policy(bulletin(d, v), cfg)


def test_config_invariants():
    with pytest.raises(ValueError):
        ThresholdAccConfig(h_low=2.0)
    with pytest.raises(ValueError):
        ThresholdAccConfig(h_low=15.0, h_high=15.0)


def test_larger_gap_wins_under_heavy_merging():
    demand = TrafficDemand(main_rate=2057.0, ramp_rate=900.0, penetration=1.0)
    sc = Scenario(demand=demand, horizon=1200.0, warmup=120.0)
    delay = {}
    for h in (2.5, 20.0):
        runs = []
        for seed in range(5):
            pol = FixedHeadwayPolicy(h)
            runs.append(run_episode(sc.world_for(pol, seed), pol, sc.horizon, sc).report.avg_delay)
        delay[h] = sum(runs) / len(runs)
    assert delay[20.0] < delay[2.5]
