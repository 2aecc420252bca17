"""From fused per-token attention to per-class continuous probability maps."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .container import FusedAttention, TokenMeta
from .errors import ConfigError

PER_CLASS_MAX = "per_class_max"
GLOBAL_MAX = "global_max"


@dataclass(frozen=True)
class ClassDef:
    class_id: int
    display_name: str
    match_words: tuple[str, ...]


@dataclass(frozen=True)
class ClassTable:
    classes: tuple[ClassDef, ...]

    def __post_init__(self):
        ids = [c.class_id for c in self.classes]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError(f"class ids must be contiguous from 1, got {ids}")
        seen: dict[str, int] = {}
        for c in self.classes:
            if not c.match_words:
                raise ConfigError(f"class {c.display_name}: empty match_words")
            for w in c.match_words:
                if w != w.lower():
                    raise ConfigError(f"match word {w!r} must be lowercase")
                if w in seen and seen[w] != c.class_id:
                    raise ConfigError(f"match word {w!r} assigned to two classes")
                seen[w] = c.class_id

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def word_to_class(self) -> dict[str, int]:
        return {w: c.class_id for c in self.classes for w in c.match_words}

    def name_to_class(self) -> dict[str, int]:
        return {c.display_name: c.class_id for c in self.classes}

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ClassTable":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        entries = sorted(raw, key=lambda e: e["id"])
        return cls(tuple(
            ClassDef(class_id=int(e["id"]), display_name=e["name"],
                     match_words=tuple(e["match_words"]))
            for e in entries))


@dataclass(frozen=True)
class TokenRelevance:
    """Token positions backing each class, keyed by class id."""
    tau: dict[int, list[int]]

    def present_classes(self) -> frozenset[int]:
        return frozenset(c for c, pos in self.tau.items() if pos)


@dataclass(frozen=True)
class ClassProbMaps:
    maps: np.ndarray  # float32 [(N+1), H, W]; channel 0 is background
    beta: float
    present_classes: frozenset[int]

    @property
    def num_classes(self) -> int:
        return self.maps.shape[0] - 1


def build_token_index(tokens: list[TokenMeta], table: ClassTable) -> TokenRelevance:
    """Exact word matching: a matched word contributes all its subword tokens."""
    words: dict[int, list[TokenMeta]] = {}
    for t in tokens:
        words.setdefault(t.word_index, []).append(t)
    lookup = table.word_to_class()
    tau: dict[int, list[int]] = {c.class_id: [] for c in table.classes}
    for _, group in sorted(words.items()):
        word = "".join(t.text for t in group).strip().lower()
        cid = lookup.get(word)
        if cid is not None:
            tau[cid].extend(t.position for t in group)
    return TokenRelevance(tau={c: sorted(p) for c, p in tau.items()})


def aggregate_class_maps(fused: FusedAttention, rel: TokenRelevance) -> np.ndarray:
    """Mean of the relevant token channels per class; [N, H, W] float32."""
    h, w, length = fused.maps.shape
    pos_by_meta = {t.position: i for i, t in enumerate(fused.tokens)}
    n = max(rel.tau) if rel.tau else 0
    out = np.zeros((n, h, w), dtype=np.float32)
    for cid, positions in rel.tau.items():
        if not positions:
            continue
        idx = []
        for p in positions:
            if p not in pos_by_meta or pos_by_meta[p] >= length:
                raise ConfigError(f"token position {p} outside fused maps")
            idx.append(pos_by_meta[p])
        out[cid - 1] = fused.maps[:, :, idx].mean(axis=2)
    return out


def normalize_maps(raw: np.ndarray, mode: str = PER_CLASS_MAX) -> np.ndarray:
    """Rescale raw class maps into [0, 1]; all-zero maps stay zero."""
    maps = raw.astype(np.float32, copy=True)
    maxima = maps.reshape(maps.shape[0], -1).max(axis=1)
    if mode == PER_CLASS_MAX:
        for c in range(maps.shape[0]):
            if maxima[c] > 0:
                maps[c] /= maxima[c]
    elif mode == GLOBAL_MAX:
        top = maxima.max() if maxima.size else 0.0
        if top > 0:
            maps /= top
    else:
        raise ConfigError(f"unknown normalization mode {mode!r}")
    return maps


def background_map(
    normalized: np.ndarray,
    beta: float,
    present_classes: frozenset[int] | None = None,
) -> ClassProbMaps:
    """Attach the background channel: A_0 = clamp(1 - max_c A_c - beta, 0, 1)."""
    if not 0.0 <= beta < 1.0:
        raise ConfigError(f"beta must be in [0, 1), got {beta}")
    n, h, w = normalized.shape
    if present_classes is None:
        present_classes = frozenset(
            c + 1 for c in range(n) if normalized[c].max() > 0)
    if not present_classes:
        raise ConfigError("prompt matched no class; cannot build background prior")
    present_idx = [c - 1 for c in sorted(present_classes)]
    fg_max = normalized[present_idx].max(axis=0)
    bg = np.float32(1.0) - fg_max - np.float32(beta)
    bg = np.clip(bg, 0.0, 1.0)
    maps = np.empty((n + 1, h, w), dtype=np.float32)
    maps[0] = bg
    maps[1:] = normalized
    return ClassProbMaps(maps=maps, beta=float(beta),
                         present_classes=frozenset(present_classes))
