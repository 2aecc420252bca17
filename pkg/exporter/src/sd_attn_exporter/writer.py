"""Writes attention-stack containers.

Independent implementation of the container contract: a directory with
``manifest.json``, ``image.png``, and one raw little-endian float32 payload
per captured layer, C-order [heads][height][width][tokens]. This module
deliberately shares no code with the consumer library; agreement is
enforced by cross-validation tests.
"""

import json
import os

import numpy as np
from PIL import Image

from .backends import GenerationResult
from .config import ExportError

CONTAINER_VERSION = 1


def write_container(result: GenerationResult, prompt: str, seed: int,
                    capture_timesteps: tuple[int, ...], path: str) -> str:
    os.makedirs(path, exist_ok=True)
    Image.fromarray(result.image).save(os.path.join(path, "image.png"))
    layer_entries = []
    for cap in result.captures:
        heads, height, width, n_tokens = cap.data.shape
        if n_tokens != len(result.tokens):
            raise ExportError(
                f"layer {cap.layer_id}: {n_tokens} token channels for "
                f"{len(result.tokens)} tokens")
        fname = f"{cap.layer_id}_{cap.timestep}.bin"
        payload = np.ascontiguousarray(cap.data, dtype="<f4").tobytes()
        with open(os.path.join(path, fname), "wb") as f:
            f.write(payload)
        layer_entries.append({
            "layer_id": cap.layer_id,
            "heads": heads,
            "width": width,
            "height": height,
            "timestep": cap.timestep,
            "file": fname,
            "byte_length": len(payload),
        })
    manifest = {
        "version": CONTAINER_VERSION,
        "image": {
            "file": "image.png",
            "width": result.image.shape[1],
            "height": result.image.shape[0],
        },
        "prompt": prompt,
        "seed": seed,
        "timesteps_captured": list(capture_timesteps),
        "tokens": [
            {"text": t.text, "word_index": t.word_index, "position": t.position}
            for t in result.tokens
        ],
        "layers": layer_entries,
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
