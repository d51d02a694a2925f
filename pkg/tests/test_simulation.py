import numpy as np
import pytest

from vanetsec import streams
from vanetsec.connectivity import LogNormal, UnitDisk
from vanetsec.oracle import exact_p_succ_fixed, exact_p_succ_marginal
from vanetsec.simulation import estimate_p_succ, run_trial
from vanetsec.topology import Scenario, Topology


def test_clean_connected_road_always_succeeds():
    sc = Scenario(1000.0, 0.02, 0.0, UnitDisk(1000.0))
    rng = np.random.default_rng(0)
    assert all(run_trial(sc, rng).success for _ in range(500))


def test_empty_road_is_a_coin_flip():
    sc = Scenario(1000.0, 0.01, 0.3, UnitDisk(250.0))
    empty = Topology(1000.0)
    est = estimate_p_succ(sc, 100_000, 9, topology=empty)
    assert abs(est.p_succ - 0.5) <= 3 * est.stderr
    out = run_trial(sc, np.random.default_rng(1), topology=empty)
    assert out.destination_inbox_size == 0 and out.destination_tie and out.broadcasts_made == 0


def test_trial_determinism():
    sc = Scenario(3000.0, 0.05, 0.2, LogNormal())
    a = run_trial(sc, streams.stream(77, 3))
    b = run_trial(sc, streams.stream(77, 3))
    assert a == b


def test_broadcasts_bounded_by_relays():
    sc = Scenario(2000.0, 0.03, 0.3, LogNormal())
    for i in range(300):
        out = run_trial(sc, streams.stream(5, i))
        assert out.broadcasts_made <= out.relays
        assert out.destination_inbox_size <= out.broadcasts_made + 1


def test_connected_clean_estimate_is_exactly_one():
    est = estimate_p_succ(Scenario(800.0, 0.02, 0.0, UnitDisk(1000.0)), 2000, 4)
    assert est.p_succ == 1.0 and est.stderr == 0.0
    assert est.ci_low == est.ci_high == 1.0


def test_single_relay_fixture():
    # relay normal: destination holds {+1, +1}; relay malicious: tie {+1, -1}
    p_m = 0.2
    closed_form = (1 - p_m) * 1.0 + p_m * 0.5
    fixture = Topology(1000.0, (400.0,), (False,))
    model = UnitDisk(1000.0)
    assert exact_p_succ_marginal(fixture.positions, 1000.0, model, p_m) == pytest.approx(closed_form, abs=1e-15)
    est = estimate_p_succ(Scenario(1000.0, 0.001, p_m, model), 100_000, 21, topology=fixture, resample_malice=True)
    assert abs(est.p_succ - 0.9) <= 3 * est.stderr


def test_two_relay_fixture_against_oracle():
    fixture = Topology(500.0, (100.0, 300.0), (False, True))
    model = UnitDisk(600.0)
    exact = exact_p_succ_fixed(fixture, model)
    est = estimate_p_succ(Scenario(500.0, 0.004, 0.5, model), 100_000, 8, topology=fixture)
    assert abs(est.p_succ - exact) <= 3 * est.stderr


def test_full_scale_plateau():
    est = estimate_p_succ(Scenario(3000.0, 0.05, 0.4, UnitDisk(250.0)), 5000, 1)
    assert abs(est.p_succ - 0.5) <= 0.05


@pytest.mark.parametrize("p_m", [0.05, 0.5, 0.9])
def test_floor_at_one_half(p_m):
    est = estimate_p_succ(Scenario(1500.0, 0.03, p_m, LogNormal()), 3000, 2)
    assert est.p_succ >= 0.5 - 3 * max(est.stderr, 1e-3)


def test_interval_and_stderr():
    est = estimate_p_succ(Scenario(1000.0, 0.01, 0.1), 400, 3)
    p = est.p_succ
    assert est.stderr == pytest.approx(np.sqrt(p * (1 - p) / 400))
    assert 0.0 <= est.ci_low <= p <= est.ci_high <= 1.0
    assert est.method == "simulation" and est.master_seed == 3 and est.trials == 400


def test_result_independent_of_workers():
    sc = Scenario(1500.0, 0.02, 0.15, UnitDisk(250.0))
    assert estimate_p_succ(sc, 600, 99, workers=1) == estimate_p_succ(sc, 600, 99, workers=2)


def test_bad_inputs():
    sc = Scenario(1000.0, 0.01, 0.1)
    with pytest.raises(ValueError):
        estimate_p_succ(sc, 0, 1)
    with pytest.raises(ValueError):
        run_trial(sc, np.random.default_rng(0), topology=Topology(500.0))


def test_cursor_matches_fresh_streams():
    cursor = streams.StreamCursor(2**90 + 3, streams.ANALYTIC)
    for i in (4, 0, 2**33, 4):
        fresh = streams.stream(2**90 + 3, i, streams.ANALYTIC)
        reused = cursor.at(i)
        assert np.array_equal(fresh.random(7), reused.random(7))
        assert fresh.integers(0, 2**40) == reused.integers(0, 2**40)


@pytest.mark.parametrize("topology", [None, Topology(900.0, (150.0, 500.0), (True, False))])
def test_estimate_equals_trial_by_trial(topology):
    sc = Scenario(900.0, 0.01, 0.3, LogNormal())
    wins = sum(run_trial(sc, streams.stream(13, i), topology, topology is not None).success for i in range(300))
    assert estimate_p_succ(sc, 300, 13, topology=topology, resample_malice=topology is not None).p_succ == wins / 300
