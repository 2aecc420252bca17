"""Attention container format: read/write and layer fusion.

A container is a directory holding ``manifest.json``, ``image.png`` and one
raw float32 payload file per captured cross-attention layer. Payloads are
little-endian, C-order ``[heads][height][width][L]`` with no header, so a
write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import CorruptError, FormatError, IoError, MissingTimestepError

MANIFEST_NAME = "manifest.json"
IMAGE_NAME = "image.png"
CONTAINER_VERSION = 1

# per-token spatial maps are softmaxed over their own grid
SPATIAL_SUM_ATOL = 1e-3


@dataclass(frozen=True)
class TokenMeta:
    text: str
    word_index: int
    position: int


@dataclass(frozen=True)
class AttentionLayer:
    layer_id: str
    heads: int
    width: int
    height: int
    timestep: int
    data: np.ndarray  # float32 [heads, height, width, L]

    def validate(self, n_tokens: int) -> None:
        if self.heads < 1 or self.width < 1 or self.height < 1:
            raise CorruptError(f"layer {self.layer_id}: bad dimensions")
        expected = (self.heads, self.height, self.width, n_tokens)
        if self.data.shape != expected:
            raise CorruptError(
                f"layer {self.layer_id}: data shape {self.data.shape} != {expected}")
        if self.data.dtype != np.float32:
            raise CorruptError(f"layer {self.layer_id}: dtype {self.data.dtype}")
        if not np.isfinite(self.data).all():
            raise CorruptError(f"layer {self.layer_id}: non-finite values")
        if (self.data < 0).any():
            raise CorruptError(f"layer {self.layer_id}: negative attention")
        sums = self.data.sum(axis=(1, 2))  # [heads, L]
        if not np.allclose(sums, 1.0, atol=SPATIAL_SUM_ATOL):
            raise CorruptError(
                f"layer {self.layer_id}: spatial sums deviate from 1 "
                f"(max |err| = {np.abs(sums - 1.0).max():.2e})")


@dataclass(frozen=True)
class AttentionStack:
    image: np.ndarray  # uint8 [H_img, W_img, 3]
    layers: list[AttentionLayer]
    tokens: list[TokenMeta]
    prompt: str
    seed: int
    timesteps_captured: list[int] = field(default_factory=list)

    def validate(self) -> None:
        if self.image.ndim != 3 or self.image.shape[2] != 3 or self.image.dtype != np.uint8:
            raise CorruptError("image must be uint8 [H, W, 3]")
        positions = [t.position for t in self.tokens]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise CorruptError("token positions must be unique and strictly increasing")
        for layer in self.layers:
            layer.validate(len(self.tokens))

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


@dataclass(frozen=True)
class FusedAttention:
    maps: np.ndarray  # float32 [H_img, W_img, L]
    tokens: list[TokenMeta]


def _layer_filename(layer_id: str, timestep: int) -> str:
    return f"{layer_id}_{timestep}.bin"


def write_attention_stack(stack: AttentionStack, path: str | os.PathLike) -> None:
    """Write ``stack`` as a container directory. Round-trips bit-exactly."""
    stack.validate()
    path = os.fspath(path)
    try:
        os.makedirs(path, exist_ok=True)
        Image.fromarray(stack.image).save(os.path.join(path, IMAGE_NAME))
        layer_entries = []
        for layer in stack.layers:
            fname = _layer_filename(layer.layer_id, layer.timestep)
            payload = np.ascontiguousarray(layer.data, dtype="<f4").tobytes()
            with open(os.path.join(path, fname), "wb") as f:
                f.write(payload)
            layer_entries.append({
                "layer_id": layer.layer_id,
                "heads": layer.heads,
                "width": layer.width,
                "height": layer.height,
                "timestep": layer.timestep,
                "file": fname,
                "byte_length": len(payload),
            })
        manifest = {
            "version": CONTAINER_VERSION,
            "image": {
                "file": IMAGE_NAME,
                "width": stack.width,
                "height": stack.height,
            },
            "prompt": stack.prompt,
            "seed": stack.seed,
            "timesteps_captured": list(stack.timesteps_captured),
            "tokens": [
                {"text": t.text, "word_index": t.word_index, "position": t.position}
                for t in stack.tokens
            ],
            "layers": layer_entries,
        }
        with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise IoError(f"failed writing container {path}: {e}") from e


def read_attention_stack(path: str | os.PathLike) -> AttentionStack:
    """Read and fully validate a container directory."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise FormatError(f"{path}: missing {MANIFEST_NAME}")
    try:
        with open(manifest_path, encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable manifest: {e}") from e

    if manifest.get("version") != CONTAINER_VERSION:
        raise FormatError(f"{path}: unsupported version {manifest.get('version')!r}")
    for key in ("image", "prompt", "seed", "tokens", "layers"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing key {key!r}")

    image_info = manifest["image"]
    image_path = os.path.join(path, image_info["file"])
    if not os.path.isfile(image_path):
        raise FormatError(f"{path}: missing image file {image_info['file']}")
    image = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.uint8)
    if image.shape[1] != image_info["width"] or image.shape[0] != image_info["height"]:
        raise CorruptError(f"{path}: image dimensions disagree with manifest")

    tokens = [
        TokenMeta(text=t["text"], word_index=int(t["word_index"]),
                  position=int(t["position"]))
        for t in manifest["tokens"]
    ]
    n_tokens = len(tokens)

    layers = []
    for entry in manifest["layers"]:
        heads, height, width = int(entry["heads"]), int(entry["height"]), int(entry["width"])
        expected_bytes = heads * height * width * n_tokens * 4
        if int(entry["byte_length"]) != expected_bytes:
            raise CorruptError(
                f"{path}: layer {entry['layer_id']} byte_length "
                f"{entry['byte_length']} != {expected_bytes}")
        layer_path = os.path.join(path, entry["file"])
        if not os.path.isfile(layer_path):
            raise FormatError(f"{path}: missing layer file {entry['file']}")
        raw = np.fromfile(layer_path, dtype="<f4")
        if raw.size * 4 != expected_bytes:
            raise CorruptError(f"{path}: layer file {entry['file']} truncated")
        data = raw.reshape(heads, height, width, n_tokens)
        layers.append(AttentionLayer(
            layer_id=entry["layer_id"], heads=heads, width=width, height=height,
            timestep=int(entry["timestep"]), data=data))

    stack = AttentionStack(
        image=image,
        layers=layers,
        tokens=tokens,
        prompt=manifest["prompt"],
        seed=int(manifest["seed"]),
        timesteps_captured=[int(t) for t in manifest.get("timesteps_captured", [])],
    )
    stack.validate()
    return stack


def bilinear_resize(maps: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of [h, w, C] maps with half-pixel-centered sampling."""
    h, w = maps.shape[:2]
    if (h, w) == (out_h, out_w):
        return maps.astype(np.float32, copy=True)
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    m = maps.astype(np.float64, copy=False)
    top = m[y0][:, x0] * (1 - wx) + m[y0][:, x1] * wx
    bot = m[y1][:, x0] * (1 - wx) + m[y1][:, x1] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def default_timestep(stack: AttentionStack) -> int:
    """Midpoint of the captured sampling steps."""
    steps = sorted({layer.timestep for layer in stack.layers})
    if not steps:
        raise MissingTimestepError("stack has no layers")
    return steps[len(steps) // 2]


def fuse_layers(
    stack: AttentionStack,
    timestep_policy: int | list[int] | None = None,
) -> FusedAttention:
    """Fuse per-layer attention into image-resolution per-token maps.

    Each selected layer is averaged over heads, bilinearly resized to the
    image resolution, then averaged uniformly over layers. An integer policy
    selects a single timestep; a list averages the per-timestep fusions;
    ``None`` picks the midpoint of the captured steps.
    """
    if timestep_policy is None:
        timesteps = [default_timestep(stack)]
    elif isinstance(timestep_policy, int):
        timesteps = [timestep_policy]
    else:
        timesteps = list(timestep_policy)
        if not timesteps:
            raise MissingTimestepError("empty timestep list")

    h, w = stack.height, stack.width
    per_step = []
    for t in timesteps:
        selected = [layer for layer in stack.layers if layer.timestep == t]
        if not selected:
            raise MissingTimestepError(f"timestep {t} not present in stack")
        acc = np.zeros((h, w, len(stack.tokens)), dtype=np.float64)
        for layer in selected:
            head_mean = layer.data.mean(axis=0)  # [h_l, w_l, L]
            acc += bilinear_resize(head_mean, h, w)
        per_step.append(acc / len(selected))
    fused = np.mean(per_step, axis=0).astype(np.float32)
    return FusedAttention(maps=fused, tokens=list(stack.tokens))
