"""Batch export: one container per (prompt, seed)."""

import logging
import os

from .backends import SyntheticBackend
from .config import ExportConfig, load_prompts
from .writer import write_container

log = logging.getLogger(__name__)


def export_batch(config: ExportConfig, backend=None) -> list[str]:
    """Generate and export every (prompt, seed) pair.

    Failures are logged and skipped; the returned list holds the paths of
    the containers actually written.
    """
    prompts = load_prompts(config.prompts_file)
    if backend is None:
        backend = SyntheticBackend()
    os.makedirs(config.output_dir, exist_ok=True)
    paths = []
    for p_idx, prompt in enumerate(prompts):
        for seed in config.seeds:
            name = f"p{p_idx:05d}_s{seed:05d}"
            out = os.path.join(config.output_dir, name)
            try:
                result = backend.generate(prompt, seed,
                                          config.capture_timesteps,
                                          config.layer_selection)
                paths.append(write_container(result, prompt, seed,
                                             config.capture_timesteps, out))
            except Exception:
                log.exception("generation failed for %r seed %d", prompt, seed)
    return paths
