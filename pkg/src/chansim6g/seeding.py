"""Deterministic RNG stream management.

One 64-bit root seed per campaign. Every random draw happens on a child
generator keyed by (drop index, named module stream, step), derived with
``numpy.random.SeedSequence`` spawn keys. A module's draws are therefore
insulated from changes in any other module's draw counts, and per-drop
results are independent of execution order and parallelism degree.
"""

from __future__ import annotations

import numpy as np

# Stable integer ids for named streams. Append only: renumbering breaks
# seed reproducibility across versions.
STREAM_IDS = {
    "link_state": 0,
    "shadow": 1,
    "lsp": 2,
    "delays": 3,
    "powers": 4,
    "angles": 5,
    "xpr": 6,
    "phases": 7,
    "sparsity": 8,
    "sns": 9,
    "isac_shared": 10,
    "isac_comm": 11,
    "isac_sense": 12,
    "ris_leg1": 13,
    "ris_leg2": 14,
    "envelope": 15,
    "misc": 16,
}


def child_rng(seed: int, drop: int, stream: str, step: int = 0) -> np.random.Generator:
    """Generator for one (drop, stream, step) cell of the campaign."""
    if stream not in STREAM_IDS:
        raise KeyError(f"unknown rng stream {stream!r}; known: {sorted(STREAM_IDS)}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(drop, STREAM_IDS[stream], step))
    return np.random.default_rng(ss)


class DropStreams:
    """All named streams of a single drop, lazily constructed."""

    def __init__(self, seed: int, drop: int, step: int = 0):
        self.seed = int(seed)
        self.drop = int(drop)
        self.step = int(step)

    def get(self, stream: str) -> np.random.Generator:
        return child_rng(self.seed, self.drop, stream, self.step)

    def shifted(self, step: int) -> "DropStreams":
        """Same drop, different sub-step (e.g. the two legs of a cascade)."""
        return DropStreams(self.seed, self.drop, step)
