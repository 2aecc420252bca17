"""End-to-end walkthrough: synthetic attention containers to pseudo-masks.

Builds a handful of fake attention stacks (the same geometry a diffusion
exporter would produce), runs the full pipeline, and prints the dataset
report. Outputs land in a temp directory so the demo is side-effect free.
"""

import json
import os
import tempfile

import numpy as np

from attnforge import (AttentionLayer, AttentionStack, TokenMeta,
                       write_attention_stack)
from attnforge.crf import DcrfParams
from attnforge.pipeline import PipelineConfig, dataset_stats, run_pipeline

rng = np.random.default_rng(0)
root = tempfile.mkdtemp(prefix="attnforge_demo_")
in_dir = os.path.join(root, "containers")
out_dir = os.path.join(root, "dataset")

classes = [
    {"id": 1, "name": "cat", "match_words": ["cat", "cats"]},
    {"id": 2, "name": "dog", "match_words": ["dog", "dogs"]},
]
classes_file = os.path.join(root, "classes.json")
with open(classes_file, "w") as f:
    json.dump(classes, f)

words = ["a", "cat", "beside", "a", "dog"]
for i in range(4):
    tokens = [TokenMeta(text=w, word_index=j, position=j)
              for j, w in enumerate(words)]
    layers = []
    for layer_id, (h, w) in (("down", (8, 8)), ("up", (16, 16))):
        data = rng.random((4, h, w, len(tokens))).astype(np.float32)
        data /= data.sum(axis=(1, 2), keepdims=True)
        layers.append(AttentionLayer(layer_id=layer_id, heads=4, width=w,
                                     height=h, timestep=50, data=data))
    stack = AttentionStack(
        image=rng.integers(0, 256, (32, 32, 3), dtype=np.uint8),
        layers=layers, tokens=tokens, prompt=" ".join(words), seed=i,
        timesteps_captured=[50])
    write_attention_stack(stack, os.path.join(in_dir, f"sample{i}"))

config = PipelineConfig(
    input_dir=in_dir, output_dir=out_dir, classes_file=classes_file,
    beta=0.1, alpha=1.0, dcrf=DcrfParams(iterations=10))
manifest = run_pipeline(config)

print(dataset_stats(manifest))
print(f"\noutputs in {out_dir}")
for sample in manifest["samples"]:
    print(f"  {sample['container_id']}: mask={sample['mask_file']} "
          f"reliable={sample['reliable_fraction']:.2f}")
