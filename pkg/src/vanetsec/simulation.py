"""Event-level broadcast dissemination and Monte Carlo estimation of P_succ.

One trial: the source at 0 broadcasts +1. Then, repeatedly, one relay is
picked uniformly among those that hold at least one copy and have not yet
broadcast; it fuses its inbox by majority, negates the result if malicious,
and broadcasts once. Reception at every remaining relay and at the
destination is an independent Bernoulli(g(distance)) draw. When nobody is
eligible the destination fuses what it holds; the trial succeeds on +1.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import streams
from .connectivity import link_matrix
from .fusion import fuse_counts
from .topology import Scenario, Topology, sample_topology

__all__ = ["TrialOutcome", "Estimate", "run_trial", "estimate_p_succ", "proportion_estimate"]

Z95 = 1.959963984540054


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    broadcasts_made: int
    destination_inbox_size: int
    destination_tie: bool
    relays: int = 0


@dataclass(frozen=True)
class Estimate:
    p_succ: float
    stderr: float
    ci_low: float
    ci_high: float
    trials: int
    method: str
    master_seed: int
    tail_mass: float = 0.0

    def __post_init__(self) -> None:
        if not self.ci_low <= self.p_succ <= self.ci_high:
            raise ValueError(f"inconsistent interval {self.ci_low} <= {self.p_succ} <= {self.ci_high}")


def proportion_estimate(successes: int, trials: int, method: str, master_seed: int) -> Estimate:
    p = successes / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    return Estimate(
        p_succ=p,
        stderr=se,
        ci_low=max(0.0, p - Z95 * se),
        ci_high=min(1.0, p + Z95 * se),
        trials=trials,
        method=method,
        master_seed=master_seed,
    )


@njit(cache=True)
def _draw(p, rng):
    # Certain and impossible links consume no randomness.
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    return rng.random() < p


@njit(cache=True)
def _disseminate(relay_links, source_links, malicious, rng):
    """Run the protocol on fixed link probabilities.

    ``relay_links[i, j]`` is g between relay i and receiver j, where receiver
    ``n`` is the destination; ``source_links`` is the same row for the source.
    Receivers are visited in position order for every broadcast.
    """
    n = malicious.shape[0]
    plus = np.zeros(n + 1, np.int64)
    minus = np.zeros(n + 1, np.int64)
    done = np.zeros(n, np.bool_)
    eligible = np.empty(n, np.int64)

    for j in range(n + 1):
        if _draw(source_links[j], rng):
            plus[j] += 1

    broadcasts = 0
    while True:
        k = 0
        for j in range(n):
            if not done[j] and plus[j] + minus[j] > 0:
                eligible[k] = j
                k += 1
        if k == 0:
            break
        pick = int(rng.random() * k)
        if pick >= k:
            pick = k - 1
        b = eligible[pick]
        if plus[b] == minus[b]:
            msg = fuse_counts(plus[b], minus[b], rng.random())
        else:
            msg = fuse_counts(plus[b], minus[b], 0.0)
        if malicious[b]:
            msg = -msg
        done[b] = True
        broadcasts += 1
        for j in range(n + 1):
            if j == b or (j < n and done[j]):
                continue
            if _draw(relay_links[b, j], rng):
                if msg > 0:
                    plus[j] += 1
                else:
                    minus[j] += 1

    tie = plus[n] == minus[n]
    if tie:
        success = rng.random() < 0.5
    else:
        success = plus[n] > minus[n]
    return success, broadcasts, plus[n] + minus[n], tie


def _links(topo: Topology, model):
    pos = np.asarray(topo.positions, dtype=float)
    receivers = np.append(pos, topo.road_length)
    return link_matrix(model, pos, receivers), model.g(receivers)


def _run_on(topo: Topology, model, rng: np.random.Generator) -> TrialOutcome:
    pos = topo.positions
    relay_links, source_links = _links(topo, model)
    malicious = np.asarray(topo.malicious, dtype=np.bool_)
    success, made, size, tie = _disseminate(relay_links, source_links, malicious, rng)
    return TrialOutcome(bool(success), int(made), int(size), bool(tie), len(pos))


def run_trial(
    scenario: Scenario,
    rng: np.random.Generator,
    topology: Optional[Topology] = None,
    resample_malice: bool = False,
) -> TrialOutcome:
    """One dissemination. A fixed ``topology`` replaces Poisson sampling.

    With ``resample_malice`` the fixture's positions are kept but its flags are
    redrawn as Bernoulli(``scenario.malice_prob``).
    """
    if topology is None:
        topo = sample_topology(scenario, rng)
    else:
        if topology.road_length != scenario.road_length:
            raise ValueError("topology road length does not match the scenario")
        topo = topology
        if resample_malice:
            flags = rng.random(len(topology)) < scenario.malice_prob
            topo = Topology(topology.road_length, topology.positions, tuple(flags.tolist()))
    return _run_on(topo, scenario.model, rng)


def _count_successes(scenario, master_seed, start, stop, topology, resample_malice) -> int:
    wins = 0
    cursor = streams.StreamCursor(master_seed, streams.SIMULATION)
    if topology is not None:
        if topology.road_length != scenario.road_length:
            raise ValueError("topology road length does not match the scenario")
        # same draws as run_trial, with the link matrix computed once
        relay_links, source_links = _links(topology, scenario.model)
        fixed = np.asarray(topology.malicious, dtype=np.bool_)
        n, p_m = len(topology), scenario.malice_prob
        for i in range(start, stop):
            rng = cursor.at(i)
            flags = rng.random(n) < p_m if resample_malice else fixed
            wins += bool(_disseminate(relay_links, source_links, flags, rng)[0])
        return wins
    for i in range(start, stop):
        wins += run_trial(scenario, cursor.at(i), topology, resample_malice).success
    return wins


def estimate_p_succ(
    scenario: Scenario,
    trials: int,
    master_seed: int,
    *,
    topology: Optional[Topology] = None,
    resample_malice: bool = False,
    workers: int = 1,
) -> Estimate:
    """Fraction of successful trials with a 95% normal-approximation interval.

    Trial ``i`` draws from ``streams.stream(master_seed, i)``, so the result
    does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1 or trials < 2 * workers:
        wins = _count_successes(scenario, master_seed, 0, trials, topology, resample_malice)
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_count_successes, scenario, master_seed, int(a), int(b), topology, resample_malice)
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            wins = sum(f.result() for f in futures)
    return proportion_estimate(int(wins), trials, "simulation", master_seed)
