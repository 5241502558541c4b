"""Energy-detection performance and majority-rule fusion.

Single-SU probabilities use the Gaussian (CLT) approximation of the
energy statistic.  Team decisions fuse ``j`` independent votes: the team
declares the primary user present once at least ``ceil(j/2)`` members do.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from statistics import NormalDist

from .errors import InvalidParameterError, UnattainableTargetError

_STD_NORMAL = NormalDist()


class SignalModel(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class DetectorConfig:
    """Energy-detector parameters.

    Attributes:
        samples: number of samples N per sensing period (t_s * f_s).
        sigma_s2: primary signal variance.
        sigma_w2: noise variance.
        threshold: decision threshold on the summed energy.
        model: real- or complex-valued signal model.
        channel_gain2: |h|^2, used by the complex model only.
    """

    samples: int
    sigma_s2: float
    sigma_w2: float = 1.0
    threshold: float = 0.0
    model: SignalModel = SignalModel.REAL
    channel_gain2: float = 1.0

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidParameterError("samples must be >= 1")
        if self.sigma_s2 < 0 or self.channel_gain2 < 0:
            raise InvalidParameterError("signal variance and channel gain must be non-negative")
        if not self.sigma_w2 > 0:
            raise InvalidParameterError("noise variance must be positive")

    @property
    def effective_signal(self) -> float:
        if self.model is SignalModel.COMPLEX:
            return self.channel_gain2 * self.sigma_s2
        return self.sigma_s2

    @property
    def snr(self) -> float:
        return self.effective_signal / self.sigma_w2

    @classmethod
    def from_snr_db(cls, samples: int, snr_db: float, sigma_w2: float = 1.0, **kw) -> "DetectorConfig":
        return cls(samples=samples, sigma_s2=sigma_w2 * 10 ** (snr_db / 10), sigma_w2=sigma_w2, **kw)


@dataclass(frozen=True)
class FusionOutcome:
    team_size: int
    pd_single: float
    pf_single: float
    pd_fused: float
    pf_fused: float


def q_function(x: float) -> float:
    """Standard Gaussian tail probability P(Z > x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def pd_single(cfg: DetectorConfig) -> float:
    total = cfg.effective_signal + cfg.sigma_w2
    n = cfg.samples
    return q_function((cfg.threshold - n * total) / (math.sqrt(2 * n) * total))


def pf_single(cfg: DetectorConfig) -> float:
    n = cfg.samples
    return q_function((cfg.threshold - n * cfg.sigma_w2) / (math.sqrt(2 * n) * cfg.sigma_w2))


def threshold_for_pd(cfg: DetectorConfig, target_pd: float) -> float:
    """Threshold that makes :func:`pd_single` equal ``target_pd``.

    ``cfg.threshold`` is ignored.
    """
    if not 0.0 < target_pd < 1.0:
        raise UnattainableTargetError(f"target detection probability must lie in (0, 1), got {target_pd!r}")
    total = cfg.effective_signal + cfg.sigma_w2
    n = cfg.samples
    # Q(x) = target  <=>  x = Phi^{-1}(1 - target)
    x = _STD_NORMAL.inv_cdf(1.0 - target_pd)
    return n * total + x * math.sqrt(2 * n) * total


def with_target_pd(cfg: DetectorConfig, target_pd: float) -> DetectorConfig:
    """Copy of ``cfg`` whose threshold achieves ``target_pd``."""
    return replace(cfg, threshold=threshold_for_pd(cfg, target_pd))


def majority_votes(j: int) -> int:
    """Number of 'PU present' votes a team of ``j`` needs to declare busy."""
    if j < 1:
        raise InvalidParameterError(f"team size must be >= 1, got {j!r}")
    return math.ceil(j / 2)


def _majority_tail(j: int, prob: float) -> float:
    need = majority_votes(j)
    total = 0.0
    for y in range(j - need + 1):
        hits = need + y
        total += math.comb(j, hits) * (1.0 - prob) ** (j - hits) * prob**hits
    return min(total, 1.0)


def fused_pd(j: int, pd: float) -> float:
    """Team detection probability under the majority rule."""
    return _majority_tail(j, pd)


def fused_pf(j: int, pf: float) -> float:
    """Team false-alarm probability under the majority rule."""
    return _majority_tail(j, pf)


def majority_decision(votes) -> bool:
    """Fuse individual busy/free votes; True means the PU is declared present."""
    votes = list(votes)
    return sum(bool(v) for v in votes) >= majority_votes(len(votes))


def fusion_outcome(j: int, pd: float, pf: float) -> FusionOutcome:
    return FusionOutcome(j, pd, pf, fused_pd(j, pd), fused_pf(j, pf))
