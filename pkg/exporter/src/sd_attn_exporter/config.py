"""Export configuration and prompt loading."""

import json
from dataclasses import dataclass, field


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportConfig:
    model_id: str
    prompts_file: str
    output_dir: str
    seeds: tuple[int, ...] = (0,)
    sampler_steps: int = 100
    capture_timesteps: tuple[int, ...] = (50,)
    layer_selection: tuple[str, ...] = ()  # empty = all cross-attention layers

    def __post_init__(self):
        if self.sampler_steps < 1:
            raise ExportError("sampler_steps must be >= 1")
        if not self.seeds:
            raise ExportError("at least one seed is required")
        bad = [t for t in self.capture_timesteps
               if not 0 <= t < self.sampler_steps]
        if bad:
            raise ExportError(
                f"capture timesteps {bad} outside the sampler schedule "
                f"[0, {self.sampler_steps})")
        if not self.capture_timesteps:
            raise ExportError("at least one capture timestep is required")


def load_prompts(path: str) -> list[str]:
    """Prompt texts from a JSONL of prompt records ({"text": ...} per line)."""
    prompts = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "text" not in record:
                raise ExportError("prompt record missing 'text'")
            prompts.append(record["text"])
    if not prompts:
        raise ExportError(f"no prompts in {path}")
    return prompts
