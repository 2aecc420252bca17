"""Diffusion cross-attention tensors to segmentation pseudo-masks."""

from .container import (AttentionLayer, AttentionStack, FusedAttention,
                        TokenMeta, bilinear_resize, default_timestep,
                        fuse_layers, read_attention_stack,
                        write_attention_stack)
from .crf import (DcrfParams, LabelMap, MarginalMaps, dcrf_label,
                  mean_field_infer, unary_from_probs)
from .errors import (AttnforgeError, ConfigError, CorruptError, FormatError,
                     IoError, MissingTimestepError, ScoreMissingError)
from .losses import LossReport, PredictionMaps, reliability_gated_loss
from .masks import (ClassDef, ClassProbMaps, ClassTable, TokenRelevance,
                    aggregate_class_maps, background_map, build_token_index,
                    normalize_maps)
from .permutohedral import PermutohedralFilter
from .pipeline import PipelineConfig, dataset_stats, run_pipeline
from .prompts import (Match, PromptRecord, SynonymTable, augment, curate,
                      filter_by_score)
from .reliability import (ReliabilityMap, ThresholdTable, adaptive_thresholds,
                          constant_reliability, reliability_map)
from .vocpng import decode_voc_mask, emit_voc_mask, voc_palette

__version__ = "0.1.0"
