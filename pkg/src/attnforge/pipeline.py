"""Batch orchestration: containers in, pseudo-mask datasets out.

Each container is processed independently (fusion, class aggregation,
normalization, background prior, dCRF, reliability) and emits three files:
an image copy, a palette-indexed mask PNG, and a reliability PNG. Failures
are recorded per sample and never abort the batch. All writes go through a
write-temp-then-rename step so a crashed run leaves no partial files.
"""

import json
import os
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .container import fuse_layers, read_attention_stack
from .crf import DcrfParams, LabelMap, dcrf_label
from .errors import AttnforgeError, ConfigError
from .masks import (ClassTable, aggregate_class_maps, background_map,
                    build_token_index, normalize_maps)
from .reliability import (adaptive_thresholds, constant_reliability,
                          reliability_map)
from .vocpng import emit_binary_png, emit_voc_mask

CONSTANT = "constant"
ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str
    output_dir: str
    classes_file: str
    beta: float = 0.1
    alpha: float = 1.0
    normalization: str = "per_class_max"
    dcrf: DcrfParams = field(default_factory=DcrfParams)
    timestep_policy: int | None = None
    reliability_mode: str = ADAPTIVE
    constant_r: float = 0.5
    backend: str = "lattice"
    jobs: int = 1

    def __post_init__(self):
        if self.reliability_mode not in (CONSTANT, ADAPTIVE):
            raise ConfigError(
                f"unknown reliability mode {self.reliability_mode!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass(frozen=True)
class SampleResult:
    container_id: str
    image_file: str
    mask_file: str
    reliability_file: str
    present_classes: list[int]
    reliable_fraction: float
    class_pixels: dict[int, int]


def _atomic_write(path: str, writer) -> None:
    """Run writer(tmp_path), then rename into place."""
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def process_container(container_dir: str, out_dir: str, table: ClassTable,
                      config: PipelineConfig) -> SampleResult:
    """Full single-sample pass; raises AttnforgeError on any bad input."""
    cid = os.path.basename(os.path.normpath(container_dir))
    stack = read_attention_stack(container_dir)
    fused = fuse_layers(stack, timestep_policy=config.timestep_policy)
    rel = build_token_index(stack.tokens, table)
    raw = aggregate_class_maps(fused, rel)
    normalized = normalize_maps(raw, mode=config.normalization)
    maps = background_map(normalized, config.beta,
                          present_classes=rel.present_classes() or None)
    labels, _ = dcrf_label(maps, stack.image, config.dcrf,
                           backend=config.backend)
    if config.reliability_mode == CONSTANT:
        rmap = constant_reliability(maps, config.constant_r)
    else:
        thresholds = adaptive_thresholds(maps, labels, config.alpha)
        rmap = reliability_map(maps, labels, thresholds)

    image_file = f"{cid}_image.png"
    mask_file = f"{cid}_mask.png"
    rel_file = f"{cid}_reliability.png"
    _atomic_write(os.path.join(out_dir, image_file),
                  lambda p: Image.fromarray(stack.image).save(p, format="PNG"))
    _atomic_write(os.path.join(out_dir, mask_file),
                  lambda p: emit_voc_mask(labels, p))
    _atomic_write(os.path.join(out_dir, rel_file),
                  lambda p: emit_binary_png(rmap.r, p))

    values, counts = np.unique(labels.s, return_counts=True)
    return SampleResult(
        container_id=cid,
        image_file=image_file,
        mask_file=mask_file,
        reliability_file=rel_file,
        present_classes=sorted(rel.present_classes()),
        reliable_fraction=float(rmap.r.mean()),
        class_pixels={int(v): int(n) for v, n in zip(values, counts)})


def _worker(args) -> tuple[str, SampleResult | None, str | None]:
    container_dir, out_dir, table, config = args
    cid = os.path.basename(os.path.normpath(container_dir))
    try:
        return cid, process_container(container_dir, out_dir, table, config), None
    except AttnforgeError as e:
        return cid, None, str(e)
    except Exception:
        return cid, None, traceback.format_exc(limit=3)


def run_pipeline(config: PipelineConfig) -> dict:
    """Process every container under input_dir; returns the manifest dict.

    The manifest is also written to output_dir/manifest.json. Sample order,
    file bytes, and manifest content are deterministic for a fixed config.
    """
    if not os.path.isdir(config.input_dir):
        raise ConfigError(f"input directory {config.input_dir!r} not found")
    table = ClassTable.from_json(config.classes_file)
    os.makedirs(config.output_dir, exist_ok=True)
    containers = sorted(
        os.path.join(config.input_dir, name)
        for name in os.listdir(config.input_dir)
        if os.path.isdir(os.path.join(config.input_dir, name)))

    tasks = [(c, config.output_dir, table, config) for c in containers]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_worker, tasks))
    else:
        outcomes = [_worker(t) for t in tasks]

    samples, failures = [], []
    histogram: dict[int, int] = {}
    for cid, result, error in outcomes:
        if result is None:
            failures.append({"container_id": cid, "error": error})
            continue
        samples.append({
            "container_id": result.container_id,
            "image_file": result.image_file,
            "mask_file": result.mask_file,
            "reliability_file": result.reliability_file,
            "present_classes": result.present_classes,
            "reliable_fraction": result.reliable_fraction,
        })
        for c, n in result.class_pixels.items():
            histogram[c] = histogram.get(c, 0) + n

    manifest = {
        "samples": samples,
        "class_histogram": {str(c): histogram[c] for c in sorted(histogram)},
        "failures": failures,
    }
    _atomic_write(
        os.path.join(config.output_dir, "manifest.json"),
        lambda p: _dump_json(manifest, p))
    return manifest


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def dataset_stats(manifest: dict) -> str:
    """Human-readable summary: class shares, reliability, failures."""
    lines = []
    histogram = {int(c): n for c, n in manifest.get("class_histogram", {}).items()}
    total = sum(histogram.values())
    lines.append(f"samples: {len(manifest.get('samples', []))}")
    lines.append("per-class pixel shares:")
    if total:
        for c in sorted(histogram):
            lines.append(f"  class {c}: {histogram[c] / total:.4f}")
    else:
        lines.append("  (no pixels)")
    fracs = [s["reliable_fraction"] for s in manifest.get("samples", [])]
    mean_frac = sum(fracs) / len(fracs) if fracs else 0.0
    lines.append(f"mean reliable fraction: {mean_frac:.4f}")
    lines.append(f"failures: {len(manifest.get('failures', []))}")
    return "\n".join(lines)


def decode_manifest_mask(output_dir: str, sample: dict) -> LabelMap:
    from .vocpng import decode_voc_mask
    return decode_voc_mask(os.path.join(output_dir, sample["mask_file"]))
