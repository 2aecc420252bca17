"""Capture diffusion cross-attention during sampling and export containers."""

from .backends import (DiffusersBackend, GenerationResult, LayerCapture,
                       SyntheticBackend, Token, simple_tokenize)
from .config import ExportConfig, ExportError, load_prompts
from .export import export_batch
from .scoring import ClipScorer, HashScorer, score_prompts
from .writer import write_container

__version__ = "0.1.0"
