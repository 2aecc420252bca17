"""Reliability maps gating supervised vs. consistency training.

Two schemes: a constant global threshold on the per-pixel maximum class
probability, and an adaptive per-class scheme where each class threshold
is alpha times the mean activation over the region the dCRF assigned to
that class. The adaptive scheme compensates for spatial-softmax dilution:
a large object spreads the same attention mass over more pixels, so its
per-pixel values are lower and a fixed threshold would reject it wholesale.
"""

from dataclasses import dataclass

import numpy as np

from .crf import LabelMap
from .errors import ConfigError
from .masks import ClassProbMaps


@dataclass(frozen=True)
class ThresholdTable:
    """Per-class reliability thresholds, keyed by class id (0 = background)."""
    r_c: dict[int, float]
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        for c, r in self.r_c.items():
            if r < 0:
                raise ConfigError(f"threshold for class {c} is negative")


@dataclass(frozen=True)
class ReliabilityMap:
    r: np.ndarray  # uint8 [H, W], values in {0, 1}


def constant_reliability(maps: ClassProbMaps, r: float) -> ReliabilityMap:
    """R(x,y) = 1 iff the per-pixel maximum over all channels reaches r."""
    if not 0.0 <= r <= 1.0:
        raise ConfigError(f"constant threshold must be in [0, 1], got {r}")
    peak = maps.maps.max(axis=0)
    return ReliabilityMap(r=(peak >= np.float32(r)).astype(np.uint8))


def adaptive_thresholds(maps: ClassProbMaps, s: LabelMap, alpha: float) -> ThresholdTable:
    """r_c = alpha * mean of A_c over the region labelled c.

    Only classes actually occurring in s get an entry; the map feeding the
    mean is the same normalized-with-background array the dCRF consumed, so
    labels and activations stay consistent.
    """
    if alpha <= 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    if s.s.shape != maps.maps.shape[1:]:
        raise ConfigError("label map dims do not match class maps")
    table: dict[int, float] = {}
    for c in np.unique(s.s):
        region = s.s == c
        table[int(c)] = float(alpha * maps.maps[int(c)][region].mean())
    return ThresholdTable(r_c=table, alpha=float(alpha))


def reliability_map(maps: ClassProbMaps, s: LabelMap,
                    table: ThresholdTable) -> ReliabilityMap:
    """R(x,y) = 1 iff A_{S(x,y)}(x,y) >= r_{S(x,y)} (inclusive)."""
    labels = np.unique(s.s)
    missing = [int(c) for c in labels if int(c) not in table.r_c]
    if missing:
        raise ConfigError(f"no threshold for label(s) {missing}")
    h, w = s.s.shape
    thresh = np.zeros((h, w), dtype=np.float32)
    for c in labels:
        thresh[s.s == c] = table.r_c[int(c)]
    own = np.take_along_axis(
        maps.maps, s.s[None].astype(np.intp), axis=0)[0]
    return ReliabilityMap(r=(own >= thresh).astype(np.uint8))
