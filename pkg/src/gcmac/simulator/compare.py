"""Side-by-side runs of the sensing schemes under common random numbers."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import InvalidParameterError
from .engine import Scheme, SimConfig, SimMetrics, run

METRICS = ("throughput", "overhead", "achievable")


@dataclass(frozen=True)
class SchemeSummary:
    """Normalized per-cycle metrics of one scheme across seeds."""

    scheme: str
    seeds: tuple[int, ...]
    mean: dict
    std: dict
    runs: tuple[SimMetrics, ...]

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seeds": list(self.seeds),
            "mean": self.mean,
            "std": self.std,
            "runs": [r.to_dict() for r in self.runs],
        }


def compare_schemes(cfg: SimConfig, schemes: Sequence, seeds: Sequence[int]) -> list[SchemeSummary]:
    """Run every (scheme, seed) pair from the template ``cfg``.

    A seed fixes the channel trajectories of every cycle, so all schemes
    face the same channels.  Rows follow the order of ``schemes``.
    """
    if len(schemes) == 0 or len(seeds) == 0:
        raise InvalidParameterError("need at least one scheme and one seed")
    out = []
    for scheme in schemes:
        scheme = Scheme.parse(scheme)
        runs = tuple(run(replace(cfg, scheme=scheme, seed=int(s))) for s in seeds)
        values = {k: np.array([r.normalized[k] for r in runs]) for k in METRICS}
        mean = {k: float(v.mean()) for k, v in values.items()}
        std = {k: float(v.std(ddof=1)) if v.size > 1 else 0.0 for k, v in values.items()}
        out.append(SchemeSummary(scheme.value, tuple(int(s) for s in seeds), mean, std, runs))
    return out
