"""Reference implementation of the reliability-gated co-training loss.

Reliable pixels get a supervised cross-entropy against the pseudo-label;
unreliable pixels get a symmetric consistency term where each branch is
trained toward the other branch's hard argmax (treated as a constant).
This is a numerical contract for validating trainers, not a training loop.
"""

from dataclasses import dataclass

import numpy as np

from .crf import LabelMap
from .errors import ConfigError
from .reliability import ReliabilityMap

_EPS = 1e-8


@dataclass(frozen=True)
class PredictionMaps:
    p: np.ndarray  # float32 [(N+1), H, W], per-pixel distribution

    def __post_init__(self):
        if self.p.ndim != 3:
            raise ConfigError("predictions must be [K, H, W]")
        if np.any(self.p < 0):
            raise ConfigError("negative probabilities")
        sums = self.p.sum(axis=0)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ConfigError("per-pixel probabilities must sum to 1")


@dataclass(frozen=True)
class LossReport:
    total: float
    supervised_term: float
    consistency_term: float
    pixel_counts: dict[str, int]


def _nll(p: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean −log p[label] over masked pixels; 0 for an empty mask."""
    if not mask.any():
        return 0.0
    picked = np.take_along_axis(p, labels[None].astype(np.intp), axis=0)[0]
    return float(-np.log(np.clip(picked[mask], _EPS, None)).mean())


def reliability_gated_loss(p_a: PredictionMaps, p_b: PredictionMaps,
                           s: LabelMap, rmap: ReliabilityMap,
                           lam: float) -> LossReport:
    """total = supervised(R=1) + lam * consistency(R=0).

    The consistency term averages the two cross-branch hard-label
    cross-entropies, mirroring stop-gradient co-training.
    """
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    if p_a.p.shape != p_b.p.shape or p_a.p.shape[1:] != s.s.shape:
        raise ConfigError("shape mismatch between predictions and labels")
    if rmap.r.shape != s.s.shape:
        raise ConfigError("reliability map dims do not match labels")
    reliable = rmap.r.astype(bool)
    unreliable = ~reliable
    sup = _nll(p_a.p, s.s, reliable)
    cons = 0.5 * (_nll(p_a.p, p_b.p.argmax(axis=0), unreliable)
                  + _nll(p_b.p, p_a.p.argmax(axis=0), unreliable))
    return LossReport(
        total=sup + lam * cons,
        supervised_term=sup,
        consistency_term=cons,
        pixel_counts={"reliable": int(reliable.sum()),
                      "unreliable": int(unreliable.sum())})
