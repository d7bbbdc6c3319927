"""Encoder archetypes producing a four-stage feature pyramid.

Four archetypes are supported:

- conv-hierarchical: ConvNeXt-style blocks, stage strides patch*2^(s-1)
- windowed-attn-hierarchical: window-attention blocks, same stride geometry
- hybrid-hierarchical: conv blocks in stages 1-2, window attention in 3-4
- global-attn-nonhierarchical: a single-resolution transformer trunk whose
  four pyramid outputs are taps on intermediate blocks

An encoder is non-hierarchical exactly when all four embeddings share the
same spatial dimensions; `is_hierarchical` tests that predicate on a pyramid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import tensorkit as tk
from .layers import AttentionBlock, ChannelNorm, Conv2d, ConvNeXtBlock, sinusoidal_posenc
from .params import ParameterStore
from .tensorkit import ShapeError, Tensor

ARCHETYPES = (
    "conv-hierarchical",
    "windowed-attn-hierarchical",
    "global-attn-nonhierarchical",
    "hybrid-hierarchical",
)

HIERARCHICAL_ARCHETYPES = tuple(a for a in ARCHETYPES if a != "global-attn-nonhierarchical")


class ConfigError(ValueError):
    """Invalid encoder/decoder configuration."""


@dataclass
class EncoderConfig:
    archetype: str
    stage_channels: tuple = (16, 32, 64, 128)
    stage_depths: tuple = (2, 2, 4, 2)
    patch_stride: int = 4
    window: int = 4
    tap_layers: tuple | None = None  # non-hierarchical only; defaults to ceil(i*depth/4)
    input_hw: tuple | None = None  # declared input size, used for validation only

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.stage_depths = tuple(int(d) for d in self.stage_depths)
        if self.tap_layers is not None:
            self.tap_layers = tuple(int(t) for t in self.tap_layers)

    @property
    def hierarchical(self):
        return self.archetype != "global-attn-nonhierarchical"

    @property
    def trunk_depth(self):
        return int(sum(self.stage_depths))

    def taps(self):
        if self.tap_layers is not None:
            return self.tap_layers
        d = self.trunk_depth
        return tuple(math.ceil((i + 1) * d / 4) for i in range(4))

    def stage_strides(self):
        p = self.patch_stride
        if self.hierarchical:
            return tuple(p * 2**s for s in range(4))
        return (p, p, p, p)

    def validate(self):
        if self.archetype not in ARCHETYPES:
            raise ConfigError(f"unknown archetype {self.archetype!r}; expected one of {ARCHETYPES}")
        if len(self.stage_channels) != 4 or any(c < 1 for c in self.stage_channels):
            raise ConfigError(f"stage_channels must be 4 positive ints, got {self.stage_channels}")
        if len(self.stage_depths) != 4 or any(d < 1 for d in self.stage_depths):
            raise ConfigError(f"stage_depths must be 4 positive ints, got {self.stage_depths}")
        if self.patch_stride < 1:
            raise ConfigError(f"patch_stride must be positive, got {self.patch_stride}")
        if self.archetype in ("windowed-attn-hierarchical", "hybrid-hierarchical") and self.window < 1:
            raise ConfigError(f"window must be positive, got {self.window}")
        if not self.hierarchical:
            if len(set(self.stage_channels)) != 1:
                raise ConfigError(
                    f"non-hierarchical taps share one trunk width; stage_channels must be equal, got {self.stage_channels}"
                )
            if self.stage_channels[0] % 4:
                raise ConfigError("non-hierarchical trunk width must be divisible by 4 (positional grid)")
            taps = self.taps()
            if len(taps) != 4 or any(t < 1 or t > self.trunk_depth for t in taps) or list(taps) != sorted(set(taps)):
                raise ConfigError(
                    f"tap_layers must be 4 strictly increasing indices in 1..{self.trunk_depth}, got {taps}"
                )
        if self.input_hw is not None:
            h, w = self.input_hw
            for s, stride in enumerate(self.stage_strides(), start=1):
                if h % stride or w % stride:
                    raise ConfigError(
                        f"declared input {h}x{w} not divisible by stage-{s} stride {stride}"
                    )
            if self.archetype in ("windowed-attn-hierarchical", "hybrid-hierarchical"):
                for s, stride in enumerate(self.stage_strides(), start=1):
                    hs, ws = h // stride, w // stride
                    eff = min(self.window, hs, ws)
                    if hs % eff or ws % eff:
                        raise ConfigError(
                            f"window {self.window} does not tile stage-{s} map {hs}x{ws} at declared input {h}x{w}"
                        )

    def pyramid_shapes(self, hw=None):
        """(C_s, H_s, W_s) per stage for an input of size hw (or the declared size)."""
        if hw is None:
            hw = self.input_hw
        if hw is None:
            raise ConfigError("no input size declared; pass hw explicitly")
        h, w = hw
        return [
            (c, h // s, w // s)
            for c, s in zip(self.stage_channels, self.stage_strides())
        ]


@dataclass
class FeaturePyramid:
    """Ordered stage embeddings, each a (C_s, H_s, W_s) tensor."""

    embeddings: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.embeddings) != 4:
            raise ShapeError(f"feature pyramid must have 4 embeddings, got {len(self.embeddings)}")

    def shapes(self):
        return [tuple(e.data.shape) for e in self.embeddings]

    def __iter__(self):
        return iter(self.embeddings)

    def __getitem__(self, i):
        return self.embeddings[i]


def is_hierarchical(p: FeaturePyramid) -> bool:
    """False iff all embeddings share both spatial dims, true otherwise."""
    hs = [e.data.shape[1] for e in p.embeddings]
    ws = [e.data.shape[2] for e in p.embeddings]
    return not (len(set(hs)) == 1 and len(set(ws)) == 1)


class Encoder:
    """Parameterized encoder; call with a (1,H,W) tensor to get a pyramid."""

    def __init__(self, config, store):
        self.config = config
        self.params = store
        self._stages = []  # hierarchical: [(downsample|None, norm|None, blocks)]
        self._trunk = []  # non-hierarchical: flat block list
        self._patch = None
        self._patch_norm = None

    @property
    def param_count(self):
        return self.params.count("encoder")

    def _check_input(self, x):
        if x.data.ndim != 3 or x.data.shape[0] != 1:
            raise ShapeError(f"encoder input must be (1,H,W), got {x.data.shape}")
        _, h, w = x.data.shape
        for s, stride in enumerate(self.config.stage_strides(), start=1):
            if h % stride or w % stride:
                raise ShapeError(f"stage {s}: input {h}x{w} not divisible by stride {stride}")
        if self.config.archetype in ("windowed-attn-hierarchical", "hybrid-hierarchical"):
            for s, stride in enumerate(self.config.stage_strides(), start=1):
                hs, ws = h // stride, w // stride
                eff = min(self.config.window, hs, ws)
                if hs % eff or ws % eff:
                    raise ShapeError(f"stage {s}: window {eff} does not tile {hs}x{ws}")

    def __call__(self, x) -> FeaturePyramid:
        self._check_input(x)
        if self.config.hierarchical:
            return self._forward_stages(x)
        return self._forward_trunk(x)

    def _forward_stages(self, x):
        y = self._patch_norm(self._patch(x))
        embeddings = []
        for down, norm, blocks in self._stages:
            if down is not None:
                y = norm(down(y))
            for blk in blocks:
                y = blk(y)
            embeddings.append(y)
        return FeaturePyramid(embeddings)

    def _forward_trunk(self, x):
        y = self._patch(x)
        _, h, w = y.data.shape
        pe = Tensor(sinusoidal_posenc(y.data.shape[0], h, w, dtype=y.data.dtype))
        y = y + pe
        y = self._patch_norm(y)
        taps = self.config.taps()
        embeddings = []
        for i, blk in enumerate(self._trunk, start=1):
            y = blk(y)
            if i in taps:
                embeddings.append(y)
        return FeaturePyramid(embeddings)


def build_encoder(config: EncoderConfig, seed: int, dtype=np.float64) -> Encoder:
    """Construct an encoder with seeded truncated-normal init (std 0.02)."""
    config.validate()
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    enc = Encoder(config, store)
    part = "encoder"
    ch = config.stage_channels

    if config.hierarchical:
        enc._patch = Conv2d(
            store, "encoder.patch_embed", part, rng, 1, ch[0], config.patch_stride,
            stride=config.patch_stride, dtype=dtype,
        )
        enc._patch_norm = ChannelNorm(store, "encoder.patch_norm", part, ch[0], dtype=dtype)
        for s in range(4):
            if s == 0:
                down, norm = None, None
            else:
                down = Conv2d(store, f"encoder.down{s}", part, rng, ch[s - 1], ch[s], 2, stride=2, dtype=dtype)
                norm = ChannelNorm(store, f"encoder.down{s}_norm", part, ch[s], dtype=dtype)
            blocks = []
            for b in range(config.stage_depths[s]):
                name = f"encoder.stage{s + 1}.block{b}"
                if config.archetype == "conv-hierarchical" or (
                    config.archetype == "hybrid-hierarchical" and s < 2
                ):
                    blocks.append(ConvNeXtBlock(store, name, part, rng, ch[s], dtype=dtype))
                else:
                    blocks.append(AttentionBlock(store, name, part, rng, ch[s], window=config.window, dtype=dtype))
            enc._stages.append((down, norm, blocks))
    else:
        d = ch[0]
        enc._patch = Conv2d(
            store, "encoder.patch_embed", part, rng, 1, d, config.patch_stride,
            stride=config.patch_stride, dtype=dtype,
        )
        enc._patch_norm = ChannelNorm(store, "encoder.patch_norm", part, d, dtype=dtype)
        for b in range(config.trunk_depth):
            enc._trunk.append(
                AttentionBlock(store, f"encoder.trunk.block{b}", part, rng, d, window=None, dtype=dtype)
            )
    return enc


def encode(encoder: Encoder, gather) -> FeaturePyramid:
    """Run the encoder on a gather (2-D array or Gather), without tracking gradients."""
    samples = getattr(gather, "samples", gather)
    arr = np.asarray(samples)
    if arr.ndim != 2:
        raise ShapeError(f"encode expects a 2-D gather, got shape {arr.shape}")
    dtype = next(iter(encoder.params.items()))[1].data.dtype
    x = Tensor(arr[None, :, :].astype(dtype))
    with tk.no_grad():
        return encoder(x)
