"""UNet-style decoder: consume a feature pyramid, emit a gather-sized map.

With skip connections the four stages are fused coarsest-to-finest (upsample,
concatenate, block); without them only the final stage is consumed. Decoder
stage widths mirror the pyramid channel counts; the path past the finest
stage tapers to `head_channels` before a 1x1 regression head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorkit as tk
from .encoders import ConfigError, FeaturePyramid
from .layers import Conv2d, ConvNeXtBlock, DoubleConvBlock, TransposedConv2x
from .params import ParameterStore
from .tensorkit import ShapeError, Tensor

BLOCK_KINDS = ("double-conv", "modern-conv")
UPSAMPLE_KINDS = ("bilinear", "transposed-conv")


@dataclass
class DecoderConfig:
    skip_connections: bool = True
    block: str = "modern-conv"
    upsample: str = "bilinear"
    bottleneck_multiplier: int = 2
    head_channels: int = 16

    def validate(self):
        if self.block not in BLOCK_KINDS:
            raise ConfigError(f"block must be one of {BLOCK_KINDS}, got {self.block!r}")
        if self.upsample not in UPSAMPLE_KINDS:
            raise ConfigError(f"upsample must be one of {UPSAMPLE_KINDS}, got {self.upsample!r}")
        if self.bottleneck_multiplier < 1:
            raise ConfigError(f"bottleneck_multiplier must be >= 1, got {self.bottleneck_multiplier}")
        if self.head_channels < 1:
            raise ConfigError(f"head_channels must be >= 1, got {self.head_channels}")


def _log2_ratio(a, b, what):
    """Number of 2x steps from b up to a; error when not a power of two."""
    if a % b:
        raise ConfigError(f"{what}: {a} not an integer multiple of {b}")
    r = a // b
    n = r.bit_length() - 1
    if 2**n != r:
        raise ConfigError(f"{what}: ratio {r} is not a power of two; no chain of 2x upsamplings bridges it")
    return n


class _Fuse:
    """One decoder fusion: reduce concatenated channels, then a conv block."""

    def __init__(self, store, name, rng, cin, cout, cfg, dtype):
        if cfg.block == "modern-conv":
            self.reduce = Conv2d(store, f"{name}.reduce", "decoder", rng, cin, cout, 1, dtype=dtype, init="fan_in")
            self.block = ConvNeXtBlock(store, f"{name}.block", "decoder", rng, cout,
                                       expansion=cfg.bottleneck_multiplier, dtype=dtype, init="fan_in")
        else:
            self.reduce = None
            self.block = DoubleConvBlock(store, f"{name}.block", "decoder", rng, cin, cout, dtype=dtype, init="fan_in")

    def __call__(self, x):
        if self.reduce is not None:
            x = self.reduce(x)
        return self.block(x)


class Decoder:
    def __init__(self, config, pyramid_shapes, output_shape, store):
        self.config = config
        self.pyramid_shapes = [tuple(s) for s in pyramid_shapes]
        self.output_shape = tuple(output_shape)
        self.params = store
        self.adapters = {}  # stage index (0-based) -> 1x1 Conv2d
        self._ups = {}  # name -> TransposedConv2x (bilinear needs no params)
        self._fuses = []
        self._final = []
        self._head = None

    @property
    def param_count(self):
        return self.params.count("decoder")

    def _upsample(self, x, key):
        if self.config.upsample == "bilinear":
            return tk.bilinear_upsample2x(x)
        return self._ups[key](x)

    def __call__(self, pyramid: FeaturePyramid) -> Tensor:
        shapes = pyramid.shapes()
        if shapes != self.pyramid_shapes:
            raise ShapeError(
                f"pyramid shapes {shapes} do not match the decoder's build shapes {self.pyramid_shapes}"
            )
        stages = list(pyramid.embeddings)
        x = self.adapters[3](stages[3])
        fuse_iter = iter(self._fuses)
        x = next(fuse_iter)(x)
        if self.config.skip_connections:
            for s in (2, 1, 0):
                for step in range(self._steps_between[s]):
                    x = self._upsample(x, f"up{s}_{step}")
                skip = self.adapters[s](stages[s])
                x = next(fuse_iter)(tk.concat([x, skip], axis=0))
        for i, blk in enumerate(self._final):
            x = self._upsample(x, f"final{i}")
            x = blk(x)
        x = self._head(x)
        return x


def build_decoder(config: DecoderConfig, pyramid_shapes, output_shape, seed: int, dtype=np.float64) -> Decoder:
    """Construct a decoder for the given pyramid geometry and output size."""
    config.validate()
    pyramid_shapes = [tuple(int(v) for v in s) for s in pyramid_shapes]
    if len(pyramid_shapes) != 4:
        raise ConfigError(f"expected 4 pyramid shapes, got {len(pyramid_shapes)}")
    oh, ow = (int(v) for v in output_shape)
    for c, h, w in pyramid_shapes:
        if c < 1 or h < 1 or w < 1:
            raise ConfigError(f"invalid pyramid shape ({c},{h},{w})")
    # all stages must sit on one power-of-two stride ladder of the output
    ratios_h = [_log2_ratio(oh, h, f"output height {oh} vs stage height {h}") for _, h, _ in pyramid_shapes]
    ratios_w = [_log2_ratio(ow, w, f"output width {ow} vs stage width {w}") for _, _, w in pyramid_shapes]
    if ratios_h != ratios_w:
        raise ConfigError(f"anisotropic pyramid strides {ratios_h} vs {ratios_w} are not supported")

    rng = np.random.default_rng(seed)
    store = ParameterStore()
    dec = Decoder(config, pyramid_shapes, (oh, ow), store)
    ch = [s[0] for s in pyramid_shapes]

    dec.adapters[3] = Conv2d(store, "decoder.adapter4", "decoder", rng, ch[3], ch[3], 1, dtype=dtype, init="fan_in")
    dec._fuses.append(_Fuse(store, "decoder.bottleneck", rng, ch[3], ch[3], config, dtype))

    prev_c = ch[3]
    dec._steps_between = {}
    if config.skip_connections:
        # number of 2x steps between stage s+1 and stage s resolutions
        for s in (2, 1, 0):
            hs_next = pyramid_shapes[s + 1][1]
            hs = pyramid_shapes[s][1]
            dec._steps_between[s] = _log2_ratio(hs, hs_next, f"stage {s + 2} -> stage {s + 1} heights")
            if config.upsample == "transposed-conv":
                for step in range(dec._steps_between[s]):
                    dec._ups[f"up{s}_{step}"] = TransposedConv2x(
                        store, f"decoder.up{s}_{step}", "decoder", rng, prev_c, prev_c, dtype=dtype, init="fan_in"
                    )
            dec.adapters[s] = Conv2d(store, f"decoder.adapter{s + 1}", "decoder", rng, ch[s], ch[s], 1, dtype=dtype, init="fan_in")
            dec._fuses.append(_Fuse(store, f"decoder.fuse{s + 1}", rng, prev_c + ch[s], ch[s], config, dtype))
            prev_c = ch[s]
        final_steps = ratios_h[0]
    else:
        final_steps = ratios_h[3]

    c = prev_c
    for i in range(final_steps):
        if config.upsample == "transposed-conv":
            dec._ups[f"final{i}"] = TransposedConv2x(store, f"decoder.up_final{i}", "decoder", rng, c, c, dtype=dtype, init="fan_in")
        dec._final.append(_Fuse(store, f"decoder.final{i}", rng, c, config.head_channels, config, dtype))
        c = config.head_channels
    # zero-init head: predictions start at 0, the l1 scale ramp is skipped
    dec._head = Conv2d(store, "decoder.head", "decoder", rng, c, 1, 1, dtype=dtype, init="zero")
    return dec


def decode(decoder: Decoder, pyramid: FeaturePyramid, dt=0.004, trace_spacing=12.5):
    """Run the decoder without gradient tracking; returns a Gather."""
    from .seisdata import Gather

    with tk.no_grad():
        out = decoder(pyramid)
    return Gather(np.asarray(out.data[0], dtype=np.float64), dt=dt, trace_spacing=trace_spacing)
