"""Densely connected CRF with mean-field inference.

Two backends share the same update rule (Gaussian smoothness + bilateral
appearance kernels, Potts compatibility, self-excluded messages):

* ``exact``  — pairwise sums computed directly from the full P x P kernel
               matrix; quadratic, intended for small images and as oracle.
* ``lattice`` — permutohedral-lattice approximation, linear in P.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .masks import ClassProbMaps
from .permutohedral import PermutohedralFilter

EXACT = "exact"
LATTICE = "lattice"


@dataclass(frozen=True)
class DcrfParams:
    iterations: int = 10
    smooth_weight: float = 3.0
    smooth_sigma_xy: float = 3.0
    bilateral_weight: float = 10.0
    bilateral_sigma_xy: float = 80.0
    bilateral_sigma_rgb: float = 13.0
    unary_epsilon: float = 1e-8

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        for name in ("smooth_sigma_xy", "bilateral_sigma_xy", "bilateral_sigma_rgb"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("smooth_weight", "bilateral_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 < self.unary_epsilon < 1.0:
            raise ConfigError("unary_epsilon must be in (0, 1)")


@dataclass(frozen=True)
class MarginalMaps:
    q: np.ndarray  # float32 [K, H, W], per-pixel distributions


@dataclass(frozen=True)
class LabelMap:
    s: np.ndarray  # int32 [H, W]


def unary_from_probs(maps: ClassProbMaps | np.ndarray, epsilon: float) -> np.ndarray:
    """Negative-log unaries from clamped, per-pixel-renormalized probabilities."""
    probs = maps.maps if isinstance(maps, ClassProbMaps) else maps
    p = np.clip(probs.astype(np.float64), epsilon, 1.0)
    p /= p.sum(axis=0, keepdims=True)
    return -np.log(p)


def _softmax_channels(neg_energy: np.ndarray) -> np.ndarray:
    shifted = neg_energy - neg_energy.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _softmax_rows(neg_energy: np.ndarray) -> np.ndarray:
    shifted = neg_energy - neg_energy.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    e /= e.sum(axis=1, keepdims=True)
    return e


def _spatial_features(h: int, w: int, sigma: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return np.stack([xx.ravel(), yy.ravel()], axis=1) / sigma


class _ExactMessenger:
    """Full kernel matrices; O(P^2) memory and time.

    Each kernel is normalized by its full row sum (self included), the
    convention of the widely used dCRF implementations, which keeps the
    standard weight defaults meaningful. The self term is excluded from
    the message numerator.
    """

    def __init__(self, image: np.ndarray, params: DcrfParams):
        h, w = image.shape[:2]
        pos = np.stack(np.mgrid[0:h, 0:w][::-1], axis=-1).reshape(-1, 2).astype(np.float64)
        rgb = image.reshape(-1, 3).astype(np.float64)
        d_xy = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
        d_rgb = ((rgb[:, None, :] - rgb[None, :, :]) ** 2).sum(-1)
        kernel = np.zeros_like(d_xy)
        for w_k, k in (
            (params.smooth_weight,
             np.exp(-d_xy / (2 * params.smooth_sigma_xy ** 2))),
            (params.bilateral_weight,
             np.exp(-d_xy / (2 * params.bilateral_sigma_xy ** 2)
                    - d_rgb / (2 * params.bilateral_sigma_rgb ** 2))),
        ):
            if w_k == 0:
                continue
            n = k.sum(axis=1)  # includes the self term k(f_i, f_i) = 1
            k = k / n[:, None]
            np.fill_diagonal(k, 0.0)
            kernel += w_k * k
        self._kernel = kernel

    def __call__(self, q_pk: np.ndarray) -> np.ndarray:
        return self._kernel @ q_pk


class _LatticeMessenger:
    """Permutohedral filtering with the same row normalization and
    self-exclusion as the exact backend. Row sums come from filtering a
    constant map; the filter's own (approximate) self-weight is replaced
    by the exact value 1 before normalizing."""

    def __init__(self, image: np.ndarray, params: DcrfParams):
        h, w = image.shape[:2]
        self._terms = []
        if params.smooth_weight > 0:
            f = PermutohedralFilter(
                _spatial_features(h, w, params.smooth_sigma_xy))
            self._add_term(f, params.smooth_weight)
        if params.bilateral_weight > 0:
            xy = _spatial_features(h, w, params.bilateral_sigma_xy)
            rgb = image.reshape(-1, 3).astype(np.float64) / params.bilateral_sigma_rgb
            self._add_term(
                PermutohedralFilter(np.concatenate([xy, rgb], axis=1)),
                params.bilateral_weight)

    def _add_term(self, f: PermutohedralFilter, weight: float) -> None:
        self_w = f.self_response()[:, None]
        ones = f.filter(np.ones(f.P, dtype=np.float32))[:, None]
        norm = np.maximum(ones - self_w + 1.0, 1e-12)
        coef = (weight / norm).astype(np.float32)
        self._terms.append((f, self_w.astype(np.float32), coef))

    def __call__(self, q_pk: np.ndarray) -> np.ndarray:
        m = np.zeros_like(q_pk)
        for f, self_w, coef in self._terms:
            r = f.filter(q_pk)
            r -= self_w * q_pk
            r *= coef
            m += r
        return m


def mean_field_infer(
    unary: np.ndarray,
    image: np.ndarray,
    params: DcrfParams,
    backend: str = LATTICE,
) -> MarginalMaps:
    """Run mean-field updates from Q = softmax(-unary).

    ``unary`` is [K, H, W]; ``image`` is uint8 [H, W, 3]. Messages use Potts
    compatibility and exclude each pixel's own contribution.
    """
    k, h, w = unary.shape
    if image.shape[:2] != (h, w):
        raise ConfigError("image dimensions do not match unary")
    if not np.isfinite(unary).all():
        raise ConfigError("unary potentials must be finite")

    q = _softmax_channels(-unary.astype(np.float64))
    if params.iterations == 0:
        return MarginalMaps(q=q.astype(np.float32))

    no_pairwise = params.smooth_weight == 0 and params.bilateral_weight == 0
    if no_pairwise:
        messenger = None
    elif backend == EXACT:
        messenger = _ExactMessenger(image, params)
    elif backend == LATTICE:
        messenger = _LatticeMessenger(image, params)
    else:
        raise ConfigError(f"unknown backend {backend!r}")

    # the lattice path runs in float32 (its filter is float32 anyway);
    # the exact oracle keeps float64. Layout is [P, K] to match the filter.
    dtype = np.float32 if backend == LATTICE else np.float64
    u_pk = np.ascontiguousarray(unary.reshape(k, -1).T, dtype=dtype)
    q_pk = np.ascontiguousarray(q.reshape(k, -1).T, dtype=dtype)
    for _ in range(params.iterations):
        if messenger is None:
            m = np.zeros_like(q_pk)
        else:
            m = messenger(q_pk)
        # Potts: energy for label l gains the mass of all other labels
        pairwise = m.sum(axis=1, keepdims=True) - m
        q_pk = _softmax_rows(-(u_pk + pairwise))
    return MarginalMaps(q=q_pk.T.reshape(k, h, w).astype(np.float32))


def dcrf_label(
    maps: ClassProbMaps,
    image: np.ndarray,
    params: DcrfParams,
    backend: str = LATTICE,
) -> tuple[LabelMap, MarginalMaps]:
    """Discrete labels from continuous class maps.

    Inference runs over background plus the classes present in the prompt;
    absent classes can never be assigned. Argmax ties resolve to the lowest
    class index.
    """
    n_plus_1 = maps.maps.shape[0]
    channels = [0] + sorted(maps.present_classes)
    unary_full = unary_from_probs(maps, params.unary_epsilon)
    unary = unary_full[channels]
    marg = mean_field_infer(unary, image, params, backend=backend)
    idx = np.argmax(marg.q, axis=0)  # first (lowest) wins ties
    lut = np.asarray(channels, dtype=np.int32)
    labels = lut[idx]
    q_full = np.zeros((n_plus_1,) + labels.shape, dtype=np.float32)
    q_full[channels] = marg.q
    return LabelMap(s=labels), MarginalMaps(q=q_full)
