"""Exact P_succ for tiny fixed roads by enumerating every protocol choice.

Each branch of the protocol is weighted by its probability: the uniform
choice of the next broadcaster, each Bernoulli reception, and each fair tie
coin. Branches that lead to the same protocol state are merged through
memoisation, which keeps four relays cheap.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .connectivity import ConnectionModel, link_matrix
from .topology import Topology

__all__ = ["MAX_RELAYS", "OracleTooLarge", "exact_p_succ_fixed", "exact_p_succ_marginal", "enumerate_protocol"]

MAX_RELAYS = 4


class OracleTooLarge(ValueError):
    pass


def _reception_patterns(probs):
    """Yield (received mask, probability) over all outcomes with nonzero weight."""
    options = []
    for p in probs:
        opts = []
        if p > 0.0:
            opts.append((True, p))
        if p < 1.0:
            opts.append((False, 1.0 - p))
        options.append(opts)
    for combo in itertools.product(*options):
        weight = 1.0
        for _, w in combo:
            weight *= w
        yield tuple(c for c, _ in combo), weight


def enumerate_protocol(topology: Topology, model: ConnectionModel) -> tuple[float, float]:
    """Return ``(Pr(M_D = +1), total probability of all terminal paths)``.

    The second value is 1 up to rounding; it is exposed for checking the
    enumeration itself.
    """
    n = len(topology)
    if n > MAX_RELAYS:
        raise OracleTooLarge(f"oracle handles at most {MAX_RELAYS} relays, got {n}")
    pos = np.asarray(topology.positions, dtype=float)
    receivers = np.append(pos, topology.road_length)
    links = link_matrix(model, pos, receivers).tolist()
    source = model.g(receivers).tolist()
    malicious = topology.malicious

    @lru_cache(maxsize=None)
    def value(inbox, done, dest):
        # inbox: per-relay (plus, minus), zeroed once the relay has broadcast
        eligible = [i for i in range(n) if not done[i] and sum(inbox[i]) > 0]
        if not eligible:
            plus, minus = dest
            win = 1.0 if plus > minus else 0.0 if minus > plus else 0.5
            return win, 1.0
        win = mass = 0.0
        pick_w = 1.0 / len(eligible)
        for b in eligible:
            plus, minus = inbox[b]
            if plus > minus:
                fused = [(1, 1.0)]
            elif minus > plus:
                fused = [(-1, 1.0)]
            else:
                fused = [(1, 0.5), (-1, 0.5)]
            new_done = done[:b] + (True,) + done[b + 1 :]
            targets = [j for j in range(n) if not new_done[j]] + [n]
            for msg, fw in fused:
                if malicious[b]:
                    msg = -msg
                for got, rw in _reception_patterns([links[b][j] for j in targets]):
                    new_inbox = list(inbox)
                    new_inbox[b] = (0, 0)
                    new_dest = dest
                    for j, hit in zip(targets, got):
                        if not hit:
                            continue
                        if j == n:
                            new_dest = _add(new_dest, msg)
                        else:
                            new_inbox[j] = _add(new_inbox[j], msg)
                    w, m = value(tuple(new_inbox), new_done, new_dest)
                    weight = pick_w * fw * rw
                    win += weight * w
                    mass += weight * m
        return win, mass

    win = mass = 0.0
    for got, w in _reception_patterns(source):
        inbox = tuple((1, 0) if got[j] else (0, 0) for j in range(n))
        dest = (1, 0) if got[n] else (0, 0)
        v, m = value(inbox, (False,) * n, dest)
        win += w * v
        mass += w * m
    return win, mass


def _add(counts, msg):
    plus, minus = counts
    return (plus + 1, minus) if msg > 0 else (plus, minus + 1)


def exact_p_succ_fixed(topology: Topology, model: ConnectionModel) -> float:
    """Exact Pr(M_D = +1) for fixed relay positions and malice flags."""
    return enumerate_protocol(topology, model)[0]


def exact_p_succ_marginal(positions, road_length: float, model: ConnectionModel, p_m: float) -> float:
    """Exact Pr(M_D = +1) with each relay independently malicious w.p. ``p_m``."""
    positions = tuple(positions)
    if len(positions) > MAX_RELAYS:
        raise OracleTooLarge(f"oracle handles at most {MAX_RELAYS} relays, got {len(positions)}")
    total = 0.0
    for flags in itertools.product((False, True), repeat=len(positions)):
        k = sum(flags)
        w = p_m**k * (1.0 - p_m) ** (len(flags) - k)
        if w == 0.0:
            continue
        total += w * exact_p_succ_fixed(Topology(road_length, positions, flags), model)
    return total
