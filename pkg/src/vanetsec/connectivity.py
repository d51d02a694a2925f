"""Link-success functions g(x) for broadcast reception.

Two variants are provided: the hard-range unit disk and the log-normal
shadowing model. Both accept scalars or numpy arrays of distances.

The log-normal form is evaluated as ``0.5 * erfc(z)`` (``scipy.special.erfc``
for arrays, ``math.erfc`` for scalars). Both are Cephes/libm implementations
with relative error near machine epsilon, well inside 1e-7 absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import erfc

__all__ = ["UnitDisk", "LogNormal", "ConnectionModel", "link_probability", "link_matrix"]


@dataclass(frozen=True)
class UnitDisk:
    """Reception is certain up to ``range_m`` and impossible beyond it."""

    range_m: float = 250.0

    def __post_init__(self) -> None:
        if not self.range_m > 0:
            raise ValueError(f"range_m must be positive, got {self.range_m!r}")

    kind = "unit_disk"

    def g(self, distance):
        d = np.asarray(distance, dtype=float)
        return (d <= self.range_m).astype(float)


@dataclass(frozen=True)
class LogNormal:
    """Log-normal shadowing; ``range_m`` is the range the model collapses to as sigma -> 0."""

    range_m: float = 250.0
    path_loss_exponent: float = 2.0
    shadowing_stddev: float = 4.0

    def __post_init__(self) -> None:
        if not self.range_m > 0:
            raise ValueError(f"range_m must be positive, got {self.range_m!r}")
        if not self.path_loss_exponent > 0:
            raise ValueError(f"path_loss_exponent must be positive, got {self.path_loss_exponent!r}")
        if not self.shadowing_stddev > 0:
            # sigma = 0 is the unit disk; use UnitDisk for it
            raise ValueError(f"shadowing_stddev must be positive, got {self.shadowing_stddev!r}")

    kind = "log_normal"

    @property
    def _scale(self) -> float:
        return 10.0 * self.path_loss_exponent / (math.sqrt(2.0) * self.shadowing_stddev)

    def g(self, distance):
        d = np.asarray(distance, dtype=float)
        out = np.ones_like(d)
        pos = d > 0
        out[pos] = 0.5 * erfc(self._scale * (np.log10(d[pos]) - math.log10(self.range_m)))
        return out


ConnectionModel = Union[UnitDisk, LogNormal]


def link_probability(model: ConnectionModel, distance: float) -> float:
    """Probability that a broadcast is received at ``distance`` metres.

    ``g(0)`` is 1 for both models.
    """
    if distance < 0 or math.isnan(distance):
        raise ValueError(f"distance must be non-negative, got {distance!r}")
    if distance == 0:
        return 1.0
    if isinstance(model, UnitDisk):
        return 1.0 if distance <= model.range_m else 0.0
    if isinstance(model, LogNormal):
        return 0.5 * math.erfc(model._scale * (math.log10(distance) - math.log10(model.range_m)))
    raise TypeError(f"unknown connection model {model!r}")


def link_matrix(model: ConnectionModel, a, b) -> np.ndarray:
    """Pairwise ``g(|a_i - b_j|)`` as an ``(len(a), len(b))`` array."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return model.g(np.abs(a[:, None] - b[None, :]))
