import math

import numpy as np
import pytest
from scipy import stats

from vanetsec.connectivity import LogNormal
from vanetsec.topology import (
    Scenario,
    Topology,
    format_topology,
    parse_topology,
    poisson_pmf,
    sample_topology,
    truncation_bound,
)


def test_pmf_values():
    assert poisson_pmf(1.0, 1.0, 0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert poisson_pmf(0.5, 2.0, 1) == pytest.approx(math.exp(-1), rel=1e-14)


def test_pmf_large_count_does_not_overflow():
    p = poisson_pmf(0.05, 3000, 400)
    assert 0.0 <= p < 1e-30


def test_pmf_normalises():
    total = math.fsum(poisson_pmf(0.05, 100, n) for n in range(200))
    assert abs(total - 1.0) < 1e-12


def _tail_by_summation(mean, n):
    # Pr(N > n) from the direct pmf, independent of truncation_bound
    return 1.0 - math.fsum(mean**k * math.exp(-mean) / math.factorial(k) for k in range(n + 1))


def test_truncation_examples():
    assert _tail_by_summation(1.0, 1) == pytest.approx(0.2642, abs=1e-4)
    assert truncation_bound(1.0, 1.0, 0.30) == 1
    assert truncation_bound(1.0, 1.0, 0.9) == 0


@pytest.mark.parametrize("mean", [0.5, 5.0, 20.0])
@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6, 1e-9])
def test_truncation_is_smallest(mean, eps):
    n = truncation_bound(mean, 1.0, eps)
    assert _tail_by_summation(mean, n) < eps + 1e-15
    if n > 0:
        assert _tail_by_summation(mean, n - 1) >= eps - 1e-15


def test_truncation_monotone_in_eps():
    bounds = [truncation_bound(5.0, 1.0, e) for e in (0.5, 0.1, 1e-2, 1e-4, 1e-8, 1e-12)]
    assert bounds == sorted(bounds)


def test_truncation_rejects_bad_eps():
    with pytest.raises(ValueError):
        truncation_bound(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        truncation_bound(1.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(road_length=0, density=0.1, malice_prob=0.1),
        dict(road_length=10, density=0.0, malice_prob=0.1),
        dict(road_length=10, density=0.1, malice_prob=1.5),
    ],
)
def test_scenario_validation(kwargs):
    with pytest.raises(ValueError):
        Scenario(**kwargs)


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(100.0, (50.0, 20.0), (False, False))
    with pytest.raises(ValueError):
        Topology(100.0, (0.0,), (False,))
    with pytest.raises(ValueError):
        Topology(100.0, (100.0,), (False,))
    with pytest.raises(ValueError):
        Topology(100.0, (10.0,), ())


def test_samples_are_sorted_and_inside():
    rng = np.random.default_rng(3)
    sc = Scenario(1000.0, 0.05, 0.3)
    for _ in range(200):
        t = sample_topology(sc, rng)
        assert all(0 < p < 1000 for p in t.positions)
        assert list(t.positions) == sorted(set(t.positions))
        assert len(t.malicious) == len(t.positions)


def test_near_empty_road():
    rng = np.random.default_rng(0)
    sc = Scenario(1.0, 1e-12, 0.5)
    assert all(len(sample_topology(sc, rng)) == 0 for _ in range(1000))


def test_all_malicious():
    t = sample_topology(Scenario(1000.0, 0.05, 1.0), np.random.default_rng(1))
    assert len(t) > 0 and all(t.malicious)


def test_sampling_is_deterministic():
    sc = Scenario(2000.0, 0.02, 0.2, LogNormal())
    a = sample_topology(sc, np.random.default_rng(42))
    b = sample_topology(sc, np.random.default_rng(42))
    assert a == b


def test_mean_count():
    rng = np.random.default_rng(11)
    sc = Scenario(100.0, 0.05, 0.0)
    counts = np.array([len(sample_topology(sc, rng)) for _ in range(100_000)])
    assert abs(counts.mean() - 5.0) <= 3 * math.sqrt(5.0 / 100_000)


def poisson_chi_square(counts, mean):
    """p-value of the count histogram against Poisson(mean), pooling cells with expected < 5."""
    n = len(counts)
    kmax = counts.max()
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = np.array([poisson_pmf(mean, 1.0, k) for k in range(kmax + 1)]) * n
    expected[-1] += n - expected.sum()  # upper tail folded into the last cell
    obs_cells, exp_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0
    obs_cells[-1] += acc_o
    exp_cells[-1] += acc_e
    return stats.chisquare(obs_cells, exp_cells).pvalue


def test_count_distribution_chi_square():
    rng = np.random.default_rng(2024)
    sc = Scenario(100.0, 0.05, 0.0)
    counts = np.array([len(sample_topology(sc, rng)) for _ in range(100_000)])
    assert poisson_chi_square(counts, 5.0) > 1e-3


def test_text_round_trip():
    t = Topology(1000.0, (12.5, 300.0, 999.25), (False, True, False))
    text = format_topology(t)
    assert text.splitlines()[1] == "12.5\t0"
    assert parse_topology(text) == t


def test_text_needs_length():
    with pytest.raises(ValueError):
        parse_topology("10\t0\n")
    assert parse_topology("10\t1\n", road_length=50.0).malicious == (True,)


def test_text_rejects_garbage():
    with pytest.raises(ValueError, match="line 2"):
        parse_topology("# road_length=100\n10\tmaybe\n")
