from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """Replica or Monte Carlo average with its standard error."""

    mean: float
    stderr: float
    replicas: int

    @classmethod
    def from_samples(cls, samples) -> "Estimate":
        x = np.asarray(samples, dtype=float)
        n = len(x)
        se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        return cls(float(x.mean()), se, n)

    def __iter__(self):
        yield from (self.mean, self.stderr, self.replicas)


def child_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 63-bit integer seeds derived from ``seed``."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1)) for c in ss.spawn(n)]
