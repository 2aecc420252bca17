"""Prompt-image alignment scoring in the consumer's TSV format.

The scorer is pluggable. ``ClipScorer`` uses a CLIP model when torch and
transformers are installed. ``HashScorer`` is a deterministic stand-in
returning stable pseudo-scores in [0, 1]; it exists so the scoring file
format and plumbing can be exercised without model weights.
"""

import os
import zlib

from .config import ExportError


class HashScorer:
    """Deterministic placeholder score from a digest of (prompt, image file)."""

    def score(self, prompt: str, image_path: str) -> float:
        with open(image_path, "rb") as f:
            digest = zlib.crc32(prompt.encode("utf-8") + f.read(4096))
        return (digest % 10_000) / 10_000.0


class ClipScorer:
    """CLIP cosine-similarity scorer (requires the ``diffusion`` extra)."""

    def __init__(self, model_id: str = "openai/clip-vit-base-patch32",
                 device: str = "cpu"):
        try:
            import torch
            from PIL import Image
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as e:
            raise ExportError("ClipScorer needs torch and transformers") from e
        self._torch = torch
        self._Image = Image
        self.model = CLIPModel.from_pretrained(model_id).to(device)
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.device = device

    def score(self, prompt: str, image_path: str) -> float:
        image = self._Image.open(image_path).convert("RGB")
        inputs = self.processor(text=[prompt], images=[image],
                                return_tensors="pt", padding=True,
                                truncation=True).to(self.device)
        with self._torch.no_grad():
            out = self.model(**inputs)
        t = out.text_embeds / out.text_embeds.norm(dim=-1, keepdim=True)
        v = out.image_embeds / out.image_embeds.norm(dim=-1, keepdim=True)
        return float((t * v).sum())


def score_prompts(prompts: list[str], image_paths: list[str],
                  out_path: str, scorer=None) -> int:
    """Write 'index<TAB>score' rows; returns the number of rows written.

    A missing image skips its row with a warning instead of aborting.
    """
    import logging
    log = logging.getLogger(__name__)
    if len(prompts) != len(image_paths):
        raise ExportError("one image path per prompt required")
    if scorer is None:
        scorer = HashScorer()
    rows = 0
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("index\tscore\n")
        for i, (prompt, image_path) in enumerate(zip(prompts, image_paths)):
            if not os.path.isfile(image_path):
                log.warning("missing image %s; skipping row %d", image_path, i)
                continue
            f.write(f"{i}\t{scorer.score(prompt, image_path):.6f}\n")
            rows += 1
    return rows
