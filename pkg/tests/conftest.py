import json

import numpy as np
import pytest

from attnforge.container import AttentionLayer, AttentionStack, TokenMeta
from attnforge.masks import ClassDef, ClassTable


def make_tokens(words):
    """One token per word, positions strictly increasing."""
    return [TokenMeta(text=w, word_index=i, position=i) for i, w in enumerate(words)]


def make_layer(rng, layer_id, heads, h, w, n_tokens, timestep):
    data = rng.random((heads, h, w, n_tokens)).astype(np.float32)
    data /= data.sum(axis=(1, 2), keepdims=True)
    return AttentionLayer(layer_id=layer_id, heads=heads, width=w, height=h,
                          timestep=timestep, data=data)


def make_stack(rng, img_hw=(24, 24), grids=((8, 8), (12, 12)), heads=2,
               timesteps=(50,), words=("a", "cat", "and", "dog"), seed=0):
    tokens = make_tokens(words)
    layers = []
    for t in timesteps:
        for i, (h, w) in enumerate(grids):
            layers.append(make_layer(rng, f"layer{i}", heads, h, w,
                                     len(tokens), t))
    image = rng.integers(0, 256, (*img_hw, 3), dtype=np.uint8)
    return AttentionStack(image=image, layers=layers, tokens=tokens,
                          prompt=" ".join(words), seed=seed,
                          timesteps_captured=list(timesteps))


@pytest.fixture
def class_table():
    return ClassTable(classes=(
        ClassDef(class_id=1, display_name="cat", match_words=("cat", "cats")),
        ClassDef(class_id=2, display_name="dog", match_words=("dog", "dogs")),
        ClassDef(class_id=3, display_name="bird", match_words=("bird",)),
    ))


@pytest.fixture
def classes_file(tmp_path):
    path = tmp_path / "classes.json"
    path.write_text(json.dumps([
        {"id": 1, "name": "cat", "match_words": ["cat", "cats"]},
        {"id": 2, "name": "dog", "match_words": ["dog", "dogs"]},
        {"id": 3, "name": "bird", "match_words": ["bird"]},
    ]))
    return str(path)
