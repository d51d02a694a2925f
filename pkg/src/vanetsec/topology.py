"""Scenarios and Poisson road realizations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .connectivity import ConnectionModel, UnitDisk

__all__ = [
    "Scenario",
    "Topology",
    "poisson_pmf",
    "truncation_bound",
    "sample_topology",
    "parse_topology",
    "format_topology",
]


@dataclass(frozen=True)
class Scenario:
    road_length: float
    density: float
    malice_prob: float
    model: ConnectionModel = field(default_factory=UnitDisk)

    def __post_init__(self) -> None:
        if not self.road_length > 0:
            raise ValueError(f"road_length must be positive, got {self.road_length!r}")
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density!r}")
        if not 0.0 <= self.malice_prob <= 1.0:
            raise ValueError(f"malice_prob must lie in [0, 1], got {self.malice_prob!r}")

    @property
    def mean_vehicles(self) -> float:
        return self.density * self.road_length


@dataclass(frozen=True)
class Topology:
    """Relay vehicles strictly between the source (at 0) and the destination (at L)."""

    road_length: float
    positions: tuple[float, ...] = ()
    malicious: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(float(p) for p in self.positions))
        object.__setattr__(self, "malicious", tuple(bool(m) for m in self.malicious))
        if len(self.positions) != len(self.malicious):
            raise ValueError("positions and malicious flags differ in length")
        prev = 0.0
        for p in self.positions:
            if not prev < p < self.road_length:
                raise ValueError(
                    f"positions must be strictly increasing inside (0, {self.road_length}); got {p!r}"
                )
            prev = p

    def __len__(self) -> int:
        return len(self.positions)


def poisson_pmf(density: float, length: float, count: int) -> float:
    mean = density * length
    if not mean > 0:
        raise ValueError("density * length must be positive")
    if count < 0:
        raise ValueError("count must be non-negative")
    return math.exp(count * math.log(mean) - mean - math.lgamma(count + 1))


def truncation_bound(density: float, length: float, tail_mass: float) -> int:
    """Smallest ``n_max`` with ``Pr(N > n_max) < tail_mass``."""
    if not 0.0 < tail_mass < 1.0:
        raise ValueError("tail_mass must lie in (0, 1)")
    mean = density * length
    if not mean > 0:
        raise ValueError("density * length must be positive")
    # Tail sums are accumulated from the far end; 1 - cdf loses everything below ~1e-16.
    pmf = []
    k = 0
    while True:
        t = poisson_pmf(density, length, k)
        pmf.append(t)
        if k > mean and (t < 1e-30 * tail_mass or t == 0.0):
            break
        k += 1
    tails = np.cumsum(pmf[::-1])[::-1]  # tails[k] = Pr(N >= k)
    for n in range(len(pmf) - 1):
        if tails[n + 1] < tail_mass:
            return n
    return len(pmf) - 1


def sample_topology(scenario: Scenario, rng: np.random.Generator) -> Topology:
    """Draw ``N ~ Poisson(rho L)`` relays, uniform on ``(0, L)``, each malicious w.p. ``p_m``."""
    L = scenario.road_length
    n = int(rng.poisson(scenario.mean_vehicles))
    pos = np.sort(rng.uniform(0.0, L, n))
    while n and (pos[0] <= 0.0 or np.any(np.diff(pos) <= 0.0)):
        pos = np.sort(rng.uniform(0.0, L, n))
    flags = rng.random(n) < scenario.malice_prob
    return Topology(L, tuple(pos.tolist()), tuple(flags.tolist()))


def format_topology(topo: Topology) -> str:
    lines = [f"# road_length={topo.road_length!r}"]
    lines += [f"{p!r}\t{int(m)}" for p, m in zip(topo.positions, topo.malicious)]
    return "\n".join(lines) + "\n"


def parse_topology(text: str | Iterable[str], road_length: float | None = None) -> Topology:
    """Read ``position<TAB>malice`` lines; ``# road_length=...`` supplies L if not given."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    positions: list[float] = []
    flags: list[bool] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("road_length=") and road_length is None:
                road_length = float(body.split("=", 1)[1])
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'position<TAB>malice', got {raw!r}")
        pos, mal = parts
        if mal.strip().lower() not in ("0", "1", "true", "false"):
            raise ValueError(f"line {lineno}: malice flag must be 0/1/true/false, got {mal!r}")
        positions.append(float(pos))
        flags.append(mal.strip().lower() in ("1", "true"))
    if road_length is None:
        raise ValueError("road length missing: pass road_length or add a '# road_length=' header")
    return Topology(road_length, tuple(positions), tuple(flags))
