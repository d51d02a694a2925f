"""Analytical evaluation of P_succ.

The success probability is a Poisson mixture over the relay count ``n`` of
the success probability given ``n`` broadcasters. Given the broadcast
locations, that conditional probability is computed exactly: the joint law
of the broadcast messages follows from a chain of per-broadcaster
conditionals, and the destination's vote is a sum of independent Bernoulli
receptions. The location integral is done either by grid quadrature (small
``n``) or by Monte Carlo over sequentially sampled broadcast layouts.

Vote sums ``c + sum_j w_j B_j`` with ``w_j`` in {+1, -1} and independent
``B_j ~ Bernoulli(q_j)`` are handled by convolution (``VoteDistribution``)
rather than by enumerating the ``2**J`` reception patterns.

Relay ``i`` always counts the source's +1 in its own vote, whether or not it
could have heard the source. The event-level simulator does not make this
assumption, so the two methods are expected to differ somewhat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import streams
from .connectivity import ConnectionModel, link_probability
from .simulation import Z95, Estimate
from .topology import Scenario, poisson_pmf, truncation_bound

__all__ = [
    "BroadcastLayout",
    "VoteDistribution",
    "DisconnectedLayoutError",
    "InfeasibleError",
    "DEFAULT_CEILING",
    "message_prefix_conditional",
    "message_vector_probability",
    "conditional_success_probability",
    "conditional_success_batch",
    "next_broadcaster_density",
    "sample_layout",
    "sample_layouts",
    "analytic_p_succ_given_n",
    "analytic_p_succ",
]

DEFAULT_CEILING = 12
# cap on floats held by one batched enumeration chunk
_CHUNK_FLOATS = 1 << 22


class DisconnectedLayoutError(RuntimeError):
    """No location on the road can receive from the broadcasters so far."""


class InfeasibleError(RuntimeError):
    """Requested exact evaluation exceeds the configured ceiling."""


@dataclass(frozen=True)
class BroadcastLayout:
    """Broadcaster locations in broadcast order (not sorted); the source at 0 is implicit."""

    positions: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(float(y) for y in self.positions))

    def __len__(self) -> int:
        return len(self.positions)

    def check(self, road_length: float) -> None:
        for y in self.positions:
            if not 0.0 < y < road_length:
                raise ValueError(f"broadcast location {y!r} outside (0, {road_length})")


@dataclass(frozen=True)
class VoteDistribution:
    """Law of an integer vote sum; ``probs[k]`` is Pr(sum = low + k)."""

    low: int
    probs: np.ndarray

    @classmethod
    def build(cls, constant: int, weights: Sequence[int], probabilities: Sequence[float]) -> "VoteDistribution":
        J = len(weights)
        dist = np.zeros(2 * J + 1)
        dist[J] = 1.0
        for w, q in zip(weights, probabilities):
            if q <= 0.0:
                continue
            moved = np.roll(dist, 1 if w > 0 else -1)  # support never reaches the ends
            dist = dist * (1.0 - q) + moved * q
        return cls(constant - J, dist)

    def prob_positive(self) -> float:
        k0 = -self.low
        return float(self.probs[max(k0 + 1, 0):].sum())

    def prob_zero(self) -> float:
        k0 = -self.low
        return float(self.probs[k0]) if 0 <= k0 < len(self.probs) else 0.0

    def prob_negative(self) -> float:
        k0 = -self.low
        return float(self.probs[: max(min(k0, len(self.probs)), 0)].sum())

    def as_dict(self) -> dict[int, float]:
        return {self.low + k: float(p) for k, p in enumerate(self.probs) if p > 0.0}


def _broadcast_plus(p_pos: float, p_neg: float, p_zero: float, p_m: float):
    return p_pos * (1.0 - p_m) + p_neg * p_m + 0.5 * p_zero


def message_prefix_conditional(
    layout: BroadcastLayout, model: ConnectionModel, p_m: float, prefix: Sequence[int]
) -> float:
    """Pr(M_i = +1 | M_1..M_{i-1} = prefix) for ``i = len(prefix) + 1``."""
    i = len(prefix) + 1
    if not 1 <= i <= len(layout):
        raise ValueError(f"prefix of length {len(prefix)} does not fit a layout of {len(layout)} broadcasters")
    y = layout.positions
    q = [link_probability(model, abs(y[i - 1] - y[j])) for j in range(i - 1)]
    votes = VoteDistribution.build(1, list(prefix), q)
    return _broadcast_plus(votes.prob_positive(), votes.prob_negative(), votes.prob_zero(), p_m)


def message_vector_probability(
    layout: BroadcastLayout, model: ConnectionModel, p_m: float, assignment: Sequence[int]
) -> float:
    if len(assignment) != len(layout):
        raise ValueError("assignment length must equal the number of broadcasters")
    prob = 1.0
    for i, m in enumerate(assignment):
        p_plus = message_prefix_conditional(layout, model, p_m, assignment[:i])
        prob *= p_plus if m == 1 else 1.0 - p_plus
    return prob


# ---------------------------------------------------------------------------
# batched kernels: leading axes are (layout, message prefix)


def _vote_tails(constant, weights, q):
    """Pr(sum > 0) and Pr(sum = 0) for ``constant + sum_j weights[..., j] * B_j``.

    ``q`` broadcasts against ``weights``; deterministic links short-circuit to
    plain arithmetic.
    """
    q = np.broadcast_to(q, weights.shape)
    if np.all((q == 0.0) | (q == 1.0)):
        s = constant + np.einsum("...j,...j->...", weights, q)
        return (s > 0).astype(float), (s == 0).astype(float)
    J = weights.shape[-1]
    dist = np.zeros(weights.shape[:-1] + (2 * J + 1,))
    dist[..., J] = 1.0
    for j in range(J):
        qj = q[..., j]
        if not np.any(qj):
            continue
        up = np.zeros_like(dist)
        up[..., 1:] = dist[..., :-1]
        down = np.zeros_like(dist)
        down[..., :-1] = dist[..., 1:]
        moved = np.where((weights[..., j] > 0)[..., None], up, down)
        dist = dist + qj[..., None] * (moved - dist)
    # value at index k is constant + k - J
    k0 = J - constant
    gt = dist[..., max(k0 + 1, 0):].sum(axis=-1)
    eq = dist[..., k0] if 0 <= k0 <= 2 * J else np.zeros(dist.shape[:-1])
    return gt, eq


def _success_chunk(Y, model, p_m, L, rng):
    B, n = Y.shape
    relay = model.g(np.abs(Y[:, :, None] - Y[:, None, :]))
    to_dest = model.g(L - Y)
    src_dest = link_probability(model, L)

    msgs = np.zeros((B, 1, 0))
    weight = np.ones((B, 1))
    for i in range(n):
        if i == 0:
            p_plus = np.full((B, 1), 1.0 - p_m)
        else:
            gt, eq = _vote_tails(1, msgs, relay[:, None, i, :i])
            lt = 1.0 - gt - eq
            p_plus = _broadcast_plus(gt, lt, eq, p_m)
        if rng is None:
            K = msgs.shape[1]
            msgs = np.concatenate(
                [
                    np.concatenate([msgs, np.ones((B, K, 1))], axis=2),
                    np.concatenate([msgs, -np.ones((B, K, 1))], axis=2),
                ],
                axis=1,
            )
            weight = np.concatenate([weight * p_plus, weight * (1.0 - p_plus)], axis=1)
        else:
            m = np.where(rng.random((B, 1)) < p_plus, 1.0, -1.0)
            msgs = np.concatenate([msgs, m[:, :, None]], axis=2)

    K = msgs.shape[1]
    dest_w = np.concatenate([np.ones((B, K, 1)), msgs], axis=2)
    dest_q = np.concatenate([np.full((B, 1), src_dest), to_dest], axis=1)[:, None, :]
    gt, eq = _vote_tails(0, dest_w, dest_q)
    return (weight * (gt + 0.5 * eq)).sum(axis=1)


def conditional_success_batch(
    positions: np.ndarray,
    model: ConnectionModel,
    p_m: float,
    road_length: float,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Success probability given broadcast locations, one value per row of ``positions``.

    With ``rng=None`` the message vector is summed over all ``2**n``
    assignments. With a generator, one message vector per row is drawn from
    its chain law instead (unbiased, for ``n`` too large to enumerate);
    receptions at the destination stay exact either way.
    """
    Y = np.atleast_2d(np.asarray(positions, dtype=float))
    B, n = Y.shape
    per_row = (2**n if rng is None else 1) * (2 * n + 3) * (n + 1)
    chunk = max(1, _CHUNK_FLOATS // per_row)
    out = np.empty(B)
    for s in range(0, B, chunk):
        out[s : s + chunk] = _success_chunk(Y[s : s + chunk], model, p_m, road_length, rng)
    return np.clip(out, 0.0, 1.0)


def conditional_success_probability(
    layout: BroadcastLayout, model: ConnectionModel, p_m: float, road_length: float
) -> float:
    """Pr(destination fuses +1 | broadcast locations), summed over all message vectors."""
    layout.check(road_length)
    if len(layout) == 0:
        g = link_probability(model, road_length)
        return g + 0.5 * (1.0 - g)
    return float(conditional_success_batch(np.array([layout.positions]), model, p_m, road_length)[0])


# ---------------------------------------------------------------------------
# broadcaster locations


def _grid(road_length: float, grid_step: float) -> np.ndarray:
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    cells = max(1, math.ceil(road_length / grid_step - 1e-9))
    return np.linspace(0.0, road_length, cells + 1)


def _trapezoid_masses(density: np.ndarray, h: float) -> np.ndarray:
    return 0.5 * h * (density[..., :-1] + density[..., 1:])


def next_broadcaster_density(
    prior: Sequence[float], model: ConnectionModel, road_length: float, grid_step: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Density of the next broadcaster's location given earlier ones.

    ``prior`` holds y_0 = 0 followed by the earlier broadcast locations.
    Returns ``(grid, density)`` with the density normalised by the trapezoid
    rule on ``grid``.
    """
    x = _grid(road_length, grid_step)
    silent = np.ones_like(x)
    for y in prior:
        silent *= 1.0 - model.g(np.abs(x - y))
    dens = 1.0 - silent
    total = _trapezoid_masses(dens, x[1] - x[0]).sum()
    if not total > 0:
        raise DisconnectedLayoutError("no point of the road can hear any broadcaster")
    return x, dens / total


def sample_layouts(
    n: int,
    count: int,
    model: ConnectionModel,
    road_length: float,
    grid_step: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """``count`` independent layouts as an array of shape ``(count, n)``.

    Each location is drawn by inverting the piecewise-linear CDF of the
    trapezoid cell masses, uniformly within the chosen cell.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    x = _grid(road_length, grid_step)
    h = x[1] - x[0]
    lo = np.nextafter(0.0, 1.0)
    hi = np.nextafter(road_length, 0.0)
    out = np.empty((count, n))
    chunk = max(1, _CHUNK_FLOATS // (4 * len(x)))
    for s in range(0, count, chunk):
        b = min(chunk, count - s)
        silent = np.tile(1.0 - model.g(x), (b, 1))
        for m in range(n):
            masses = _trapezoid_masses(1.0 - silent, h)
            cdf = np.cumsum(masses, axis=1)
            total = cdf[:, -1]
            if np.any(total <= 0.0):
                raise DisconnectedLayoutError("no point of the road can hear any broadcaster")
            u = rng.random(b) * total
            cell = np.minimum((cdf < u[:, None]).sum(axis=1), len(masses[0]) - 1)
            before = np.where(cell > 0, cdf[np.arange(b), cell - 1], 0.0)
            mass = masses[np.arange(b), cell]
            frac = np.where(mass > 0, (u - before) / np.where(mass > 0, mass, 1.0), 0.5)
            y = np.clip(x[cell] + np.clip(frac, 0.0, 1.0) * h, lo, hi)
            out[s : s + b, m] = y
            silent *= 1.0 - model.g(np.abs(x[None, :] - y[:, None]))
    return out


def sample_layout(
    n: int, model: ConnectionModel, road_length: float, grid_step: float, rng: np.random.Generator
) -> BroadcastLayout:
    return BroadcastLayout(tuple(sample_layouts(n, 1, model, road_length, grid_step, rng)[0]))


def _quadrature_layouts(n: int, model: ConnectionModel, L: float, grid_step: float):
    """All grid layouts with their joint trapezoid weights (summing to 1)."""
    x = _grid(L, grid_step)
    G = len(x)
    if G**n > 5e7:
        raise InfeasibleError(f"quadrature needs {G}**{n} nodes; increase grid_step")
    h = x[1] - x[0]
    tw = np.full(G, h)
    tw[0] = tw[-1] = h / 2
    layouts = np.zeros((1, 0))
    weights = np.ones(1)
    silent = (1.0 - model.g(x))[None, :]  # one row per partial layout
    for _ in range(n):
        dens = 1.0 - silent
        norm = (dens * tw).sum(axis=1, keepdims=True)
        if np.any(norm <= 0):
            raise DisconnectedLayoutError("no point of the road can hear any broadcaster")
        step_w = dens * tw / norm  # (P, G)
        P = layouts.shape[0]
        layouts = np.concatenate([np.repeat(layouts, G, axis=0), np.tile(x, P)[:, None]], axis=1)
        weights = (weights[:, None] * step_w).ravel()
        silent = np.repeat(silent, G, axis=0) * (1.0 - model.g(np.abs(x[None, :] - np.tile(x, P)[:, None])))
    return layouts, weights


# ---------------------------------------------------------------------------
# estimates


def _given_n(
    n: int,
    scenario: Scenario,
    budget: int,
    grid_step: float,
    rng: Optional[np.random.Generator],
    quadrature: bool,
    sample_messages: bool,
) -> tuple[float, float]:
    model, L, p_m = scenario.model, scenario.road_length, scenario.malice_prob
    if n == 0:
        g = link_probability(model, L)
        return g + 0.5 * (1.0 - g), 0.0
    if quadrature:
        if n > 3:
            raise ValueError("grid quadrature is available for n <= 3 only")
        layouts, w = _quadrature_layouts(n, model, L, grid_step)
        keep = w > 0
        layouts = np.clip(layouts[keep], np.nextafter(0.0, 1.0), np.nextafter(L, 0.0))
        vals = conditional_success_batch(layouts, model, p_m, L)
        return float(np.dot(w[keep], vals) / w[keep].sum()), 0.0
    if rng is None:
        raise ValueError("a random generator is required for Monte Carlo evaluation")
    Y = sample_layouts(n, budget, model, L, grid_step, rng)
    vals = conditional_success_batch(Y, model, p_m, L, rng if sample_messages else None)
    se = float(vals.std(ddof=1) / math.sqrt(budget)) if budget > 1 else 0.0
    return float(vals.mean()), se


def analytic_p_succ_given_n(
    n: int,
    scenario: Scenario,
    budget: int = 10_000,
    grid_step: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    *,
    quadrature: bool = False,
    ceiling: int = DEFAULT_CEILING,
    sample_messages: bool = False,
    master_seed: int = 0,
) -> Estimate:
    """Pr(M_D = +1 | N = n).

    ``n = 0`` is closed form; ``quadrature`` integrates the location law on
    the grid (``n <= 3``); otherwise ``budget`` layouts are sampled and the
    exact conditional success probability is averaged over them.
    Enumerating messages beyond ``ceiling`` broadcasters is refused unless
    ``sample_messages`` is set.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if n > ceiling and not sample_messages:
        raise InfeasibleError(
            f"exact message enumeration for n={n} exceeds the ceiling of {ceiling}; "
            "raise the ceiling or allow message sampling"
        )
    p, se = _given_n(n, scenario, budget, grid_step, rng, quadrature, sample_messages and n > ceiling)
    count = 1 if n == 0 or quadrature else budget
    return Estimate(
        p_succ=p,
        stderr=se,
        ci_low=max(0.0, p - Z95 * se),
        ci_high=min(1.0, p + Z95 * se),
        trials=count,
        method="analytic",
        master_seed=master_seed,
    )


def analytic_p_succ(
    scenario: Scenario,
    tail_mass: float = 1e-3,
    per_n_budget: int = 10_000,
    grid_step: float = 1.0,
    master_seed: int = 0,
    *,
    quadrature: bool = False,
    ceiling: int = DEFAULT_CEILING,
    beyond_ceiling: str = "refuse",
) -> Estimate:
    """Poisson mixture of the per-``n`` terms, truncated where the tail drops below ``tail_mass``.

    The ``n``-th term draws from ``streams.stream(master_seed, n, ANALYTIC)``.
    The omitted tail adds between 0 and ``tail_mass`` to the true value, so
    the upper confidence limit is widened by ``tail_mass``.

    ``beyond_ceiling`` is ``"refuse"`` (raise when the truncation point
    exceeds ``ceiling``) or ``"sample"`` (terms above the ceiling sample
    message vectors instead of enumerating them).
    """
    if beyond_ceiling not in ("refuse", "sample"):
        raise ValueError("beyond_ceiling must be 'refuse' or 'sample'")
    n_max = truncation_bound(scenario.density, scenario.road_length, tail_mass)
    if n_max > ceiling and beyond_ceiling == "refuse":
        raise InfeasibleError(
            f"tail mass {tail_mass:g} needs n up to {n_max}, beyond the exact-evaluation ceiling of {ceiling}"
        )
    total = 0.0
    var = 0.0
    samples = 0
    for n in range(n_max + 1):
        w = poisson_pmf(scenario.density, scenario.road_length, n)
        rng = streams.stream(master_seed, n, streams.ANALYTIC)
        est = analytic_p_succ_given_n(
            n,
            scenario,
            per_n_budget,
            grid_step,
            rng,
            quadrature=quadrature and 1 <= n <= 3,
            ceiling=ceiling,
            sample_messages=beyond_ceiling == "sample",
            master_seed=master_seed,
        )
        total += w * est.p_succ
        var += (w * est.stderr) ** 2
        samples += est.trials
    p = min(max(total, 0.0), 1.0)
    se = math.sqrt(var)
    return Estimate(
        p_succ=p,
        stderr=se,
        ci_low=max(0.0, p - Z95 * se),
        ci_high=min(1.0, p + Z95 * se + tail_mass),
        trials=samples,
        method="analytic",
        master_seed=master_seed,
        tail_mass=tail_mass,
    )
