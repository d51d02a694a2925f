"""Counter-based random streams.

Every independent work item (a simulation trial, an analytic per-n term)
gets its own ``Philox`` generator keyed by the master seed. The work item's
index goes into the most significant counter word and the stream domain into
the next one, so streams occupy disjoint 2**128-block counter ranges and can
be generated in any order, on any worker, with identical results.
"""

from __future__ import annotations

import numpy as np

_KEY_MOD = 1 << 128
_WORD_MOD = 1 << 64

SIMULATION = 0
ANALYTIC = 1


def stream(master_seed: int, index: int, domain: int = SIMULATION) -> np.random.Generator:
    if index < 0:
        raise ValueError("stream index must be non-negative")
    counter = [0, 0, domain % _WORD_MOD, index % _WORD_MOD]
    return np.random.Generator(np.random.Philox(key=master_seed % _KEY_MOD, counter=counter))


class StreamCursor:
    """One generator repositioned onto ``stream(master_seed, i, domain)`` for each ``i``.

    Yields the same draws as :func:`stream` without rebuilding a bit
    generator per work item.
    """

    def __init__(self, master_seed: int, domain: int = SIMULATION) -> None:
        self._domain = domain % _WORD_MOD
        self._bits = np.random.Philox(key=master_seed % _KEY_MOD)
        self._base = self._bits.state
        self.generator = np.random.Generator(self._bits)

    def at(self, index: int) -> np.random.Generator:
        if index < 0:
            raise ValueError("stream index must be non-negative")
        state = dict(self._base)
        state["state"] = {
            "counter": np.array([0, 0, self._domain, index % _WORD_MOD], dtype=np.uint64),
            "key": self._base["state"]["key"],
        }
        self._bits.state = state
        return self.generator
