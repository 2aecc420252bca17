"""Indexed-color PNG segmentation masks with the standard VOC palette."""

import numpy as np
from PIL import Image

from .crf import LabelMap
from .errors import ConfigError, IoError


def voc_palette() -> list[int]:
    """256-entry RGB palette from the VOC devkit's bit-reversal scheme."""
    palette = []
    for i in range(256):
        r = g = b = 0
        cid = i
        for j in range(8):
            r |= ((cid >> 0) & 1) << (7 - j)
            g |= ((cid >> 1) & 1) << (7 - j)
            b |= ((cid >> 2) & 1) << (7 - j)
            cid >>= 3
        palette.extend((r, g, b))
    return palette


def emit_voc_mask(s: LabelMap, path) -> None:
    """Write S as an indexed PNG; pixel value = class id, background = 0."""
    labels = s.s
    if labels.min() < 0 or labels.max() > 255:
        raise ConfigError("label values outside palette range [0, 255]")
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette(voc_palette())
    try:
        img.save(path, format="PNG")
    except OSError as e:
        raise IoError(f"cannot write mask to {path}: {e}") from e


def emit_binary_png(mask: np.ndarray, path) -> None:
    """Write a {0,1} map as 8-bit grayscale, 0 = off, 255 = on."""
    img = Image.fromarray((mask.astype(np.uint8) * 255), mode="L")
    try:
        img.save(path, format="PNG")
    except OSError as e:
        raise IoError(f"cannot write PNG to {path}: {e}") from e


def decode_voc_mask(path) -> LabelMap:
    """Read an emitted mask back; indices are the class ids."""
    try:
        img = Image.open(path)
    except OSError as e:
        raise IoError(f"cannot read mask from {path}: {e}") from e
    if img.mode != "P":
        raise ConfigError(f"{path} is not an indexed-color PNG")
    return LabelMap(s=np.asarray(img, dtype=np.int32))
