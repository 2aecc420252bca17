"""Generation backends.

A backend turns (prompt, seed) into a generated image plus per-layer
cross-attention captures. ``SyntheticBackend`` produces deterministic
fake data with the real geometry (multiple resolutions, multiple heads,
spatially softmaxed maps) so the export path can be exercised without
model weights. ``DiffusersBackend`` hooks a Stable Diffusion pipeline's
attention processors; it needs torch and diffusers installed and a local
or downloadable model.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from .config import ExportError


@dataclass(frozen=True)
class Token:
    text: str
    word_index: int
    position: int


@dataclass(frozen=True)
class LayerCapture:
    layer_id: str
    timestep: int
    data: np.ndarray  # float32 [heads, height, width, n_tokens]


@dataclass(frozen=True)
class GenerationResult:
    image: np.ndarray  # uint8 [H, W, 3]
    tokens: list[Token]
    captures: list[LayerCapture]


def simple_tokenize(prompt: str) -> list[Token]:
    """Whitespace tokenizer that splits long words into two subword tokens,
    mimicking the subword-to-word mapping a real tokenizer produces."""
    tokens = []
    position = 0
    for word_index, word in enumerate(prompt.split()):
        pieces = [word] if len(word) <= 6 else [word[:4], word[4:]]
        for piece in pieces:
            tokens.append(Token(text=piece, word_index=word_index,
                                position=position))
            position += 1
    return tokens


class SyntheticBackend:
    """Deterministic stand-in for a diffusion pipeline."""

    LAYER_GRIDS = {"down.0": (8, 8), "mid.0": (16, 16), "up.0": (32, 32)}
    HEADS = 4

    def __init__(self, image_size: int = 64):
        self.image_size = image_size

    def generate(self, prompt: str, seed: int,
                 capture_timesteps: tuple[int, ...],
                 layer_selection: tuple[str, ...]) -> GenerationResult:
        digest = zlib.crc32(prompt.encode("utf-8"))
        rng = np.random.default_rng(np.random.SeedSequence([seed, digest]))
        tokens = simple_tokenize(prompt)
        image = rng.integers(0, 256, (self.image_size, self.image_size, 3),
                             dtype=np.uint8)
        layer_ids = layer_selection or tuple(self.LAYER_GRIDS)
        captures = []
        for layer_id in layer_ids:
            if layer_id not in self.LAYER_GRIDS:
                raise ExportError(f"unknown layer {layer_id!r}")
            h, w = self.LAYER_GRIDS[layer_id]
            for t in capture_timesteps:
                logits = rng.normal(0, 1, (self.HEADS, h, w, len(tokens)))
                e = np.exp(logits - logits.max(axis=(1, 2), keepdims=True))
                data = (e / e.sum(axis=(1, 2), keepdims=True)).astype(np.float32)
                captures.append(LayerCapture(layer_id=layer_id, timestep=t,
                                             data=data))
        return GenerationResult(image=image, tokens=tokens, captures=captures)


class DiffusersBackend:
    """Captures post-softmax cross-attention from a diffusers pipeline.

    Attention is taken at A(Q, K) after the softmax and before the value
    multiplication, per head, for every cross-attention layer (or the
    selected subset). Requires the ``diffusion`` extra and model weights.
    """

    def __init__(self, model_id: str, device: str = "cpu",
                 sampler_steps: int = 100):
        try:
            import torch
            from diffusers import DDPMScheduler, StableDiffusionPipeline
        except ImportError as e:
            raise ExportError(
                "DiffusersBackend needs torch and diffusers installed "
                "(pip install 'sd-attn-exporter[diffusion]')") from e
        self.pipe = StableDiffusionPipeline.from_pretrained(model_id)
        self.pipe.scheduler = DDPMScheduler.from_config(
            self.pipe.scheduler.config)
        self.pipe.to(device)
        self.sampler_steps = sampler_steps
        self._torch = torch

    def _tokens_for(self, prompt: str) -> list[Token]:
        enc = self.pipe.tokenizer(prompt, return_offsets_mapping=False)
        ids = enc["input_ids"]
        words = []  # token position -> word index via detokenized pieces
        pieces = self.pipe.tokenizer.convert_ids_to_tokens(ids)
        tokens = []
        word_index = -1
        for position, piece in enumerate(pieces):
            text = piece.replace("</w>", "")
            if piece in (self.pipe.tokenizer.bos_token,
                         self.pipe.tokenizer.eos_token):
                continue
            starts_word = not words or words[-1].endswith("</w>")
            if starts_word:
                word_index += 1
            words.append(piece)
            tokens.append(Token(text=text, word_index=word_index,
                                position=position))
        return tokens

    def generate(self, prompt: str, seed: int,
                 capture_timesteps: tuple[int, ...],
                 layer_selection: tuple[str, ...]) -> GenerationResult:
        torch = self._torch
        unet = self.pipe.unet
        captured: dict[tuple[str, int], np.ndarray] = {}
        step = {"i": -1}

        from diffusers.models.attention_processor import AttnProcessor

        class CaptureProcessor(AttnProcessor):
            def __init__(self, name):
                super().__init__()
                self.name = name

            def __call__(self, attn, hidden_states,
                         encoder_hidden_states=None, attention_mask=None,
                         **kwargs):
                is_cross = encoder_hidden_states is not None
                query = attn.head_to_batch_dim(attn.to_q(hidden_states))
                ctx = encoder_hidden_states if is_cross else hidden_states
                key = attn.head_to_batch_dim(attn.to_k(ctx))
                value = attn.head_to_batch_dim(attn.to_v(ctx))
                probs = attn.get_attention_scores(query, key, attention_mask)
                if is_cross and step["i"] in capture_timesteps and (
                        not layer_selection or self.name in layer_selection):
                    captured[(self.name, step["i"])] = (
                        probs.detach().float().cpu().numpy())
                out = attn.batch_to_head_dim(torch.bmm(probs, value))
                return attn.to_out[1](attn.to_out[0](out))

        original = unet.attn_processors
        unet.set_attn_processor(
            {name: CaptureProcessor(name) for name in original})

        def on_step(pipe, i, t, cb_kwargs):
            step["i"] = i + 1
            return cb_kwargs

        try:
            step["i"] = 0
            result = self.pipe(
                prompt, num_inference_steps=self.sampler_steps,
                generator=torch.Generator(device="cpu").manual_seed(seed),
                callback_on_step_end=on_step, output_type="np")
        finally:
            unet.set_attn_processor(original)

        image = (result.images[0] * 255).round().astype(np.uint8)
        tokens = self._tokens_for(prompt)
        captures = []
        for (name, t), probs in sorted(captured.items()):
            heads_batch, pixels, n_keys = probs.shape
            side = int(round(pixels ** 0.5))
            # classifier-free guidance doubles the batch; keep the
            # conditional half, then the first len(tokens)+special columns
            heads = heads_batch // 2 if heads_batch % 2 == 0 else heads_batch
            cond = probs[-heads:]
            grid = cond.reshape(heads, side, side, n_keys)
            cols = [tok.position for tok in tokens]
            data = np.ascontiguousarray(grid[:, :, :, cols], dtype=np.float32)
            # the container stores spatially normalized per-token maps
            # (softmax along the spatial axes), not key-normalized ones
            data /= np.maximum(data.sum(axis=(1, 2), keepdims=True), 1e-12)
            captures.append(LayerCapture(
                layer_id=name.replace("/", "."), timestep=t, data=data))
        return GenerationResult(image=image, tokens=tokens, captures=captures)
