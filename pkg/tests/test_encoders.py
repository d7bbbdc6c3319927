import numpy as np
import pytest

import seisfm.tensorkit as tk
from seisfm.encoders import (
    ConfigError,
    EncoderConfig,
    FeaturePyramid,
    build_encoder,
    encode,
    is_hierarchical,
)
from seisfm.tensorkit import ShapeError, Tensor


def conv_cfg(**kw):
    base = dict(
        archetype="conv-hierarchical",
        stage_channels=(16, 32, 64, 128),
        stage_depths=(2, 2, 4, 2),
        patch_stride=4,
    )
    base.update(kw)
    return EncoderConfig(**base)


def global_cfg(**kw):
    base = dict(
        archetype="global-attn-nonhierarchical",
        stage_channels=(64, 64, 64, 64),
        stage_depths=(2, 2, 1, 1),
        patch_stride=8,
    )
    base.update(kw)
    return EncoderConfig(**base)


class TestBuild:
    def test_stage_strides(self):
        cfg = conv_cfg()
        assert cfg.stage_strides() == (4, 8, 16, 32)
        assert global_cfg().stage_strides() == (8, 8, 8, 8)

    def test_same_seed_bit_identical(self):
        a = build_encoder(conv_cfg(), seed=11)
        b = build_encoder(conv_cfg(), seed=11)
        assert a.params.state_hash() == b.params.state_hash()
        c = build_encoder(conv_cfg(), seed=12)
        assert a.params.state_hash() != c.params.state_hash()

    def test_global_taps_default(self):
        # depth 6 trunk: ceil(i*6/4) = 2,3,5,6
        assert global_cfg().taps() == (2, 3, 5, 6)

    def test_global_taps_explicit(self):
        cfg = global_cfg(tap_layers=(2, 4, 5, 6))
        enc = build_encoder(cfg, seed=0)
        p = enc(Tensor(np.zeros((1, 64, 64))))
        assert all(s == (64, 8, 8) for s in p.shapes())

    def test_invalid_taps_rejected(self):
        with pytest.raises(ConfigError):
            build_encoder(global_cfg(tap_layers=(1, 2, 3, 9)), seed=0)

    def test_window_not_tiling_declared_input(self):
        cfg = EncoderConfig(
            "windowed-attn-hierarchical",
            stage_channels=(8, 16, 32, 64),
            stage_depths=(1, 1, 1, 1),
            patch_stride=4,
            window=5,
            input_hw=(64, 64),
        )
        with pytest.raises(ConfigError, match="window"):
            build_encoder(cfg, seed=0)

    def test_bad_archetype(self):
        with pytest.raises(ConfigError):
            build_encoder(EncoderConfig("resnet"), seed=0)

    def test_param_count_invariant_to_input_size(self):
        n1 = build_encoder(conv_cfg(input_hw=(64, 64)), seed=0).param_count
        n2 = build_encoder(conv_cfg(input_hw=(128, 256)), seed=0).param_count
        assert n1 == n2
        g1 = build_encoder(global_cfg(input_hw=(64, 64)), seed=0).param_count
        g2 = build_encoder(global_cfg(input_hw=(128, 128)), seed=0).param_count
        assert g1 == g2


class TestEncode:
    def test_conv_pyramid_shapes(self):
        enc = build_encoder(conv_cfg(), seed=0)
        p = enc(Tensor(np.random.default_rng(0).normal(size=(1, 64, 64))))
        assert p.shapes() == [(16, 16, 16), (32, 8, 8), (64, 4, 4), (128, 2, 2)]

    def test_global_pyramid_shapes(self):
        enc = build_encoder(global_cfg(), seed=0)
        p = enc(Tensor(np.random.default_rng(0).normal(size=(1, 64, 64))))
        assert all(s == (64, 8, 8) for s in p.shapes())

    def test_zero_input_finite(self):
        for cfg in (conv_cfg(), global_cfg()):
            enc = build_encoder(cfg, seed=0)
            p = enc(Tensor(np.zeros((1, 64, 64))))
            for e in p:
                assert np.isfinite(e.data).all()

    def test_indivisible_input_names_stage(self):
        enc = build_encoder(conv_cfg(), seed=0)
        with pytest.raises(ShapeError, match="stage 4"):
            enc(Tensor(np.zeros((1, 48, 48))))  # 48 divisible by 16 but not 32

    def test_encode_is_pure(self):
        enc = build_encoder(conv_cfg(stage_depths=(1, 1, 1, 1)), seed=3)
        g = np.random.default_rng(5).normal(size=(64, 64))
        p1 = encode(enc, g)
        p2 = encode(enc, g)
        for a, b in zip(p1, p2):
            assert np.array_equal(a.data, b.data)

    def test_encode_accepts_gather(self):
        from seisfm.seisdata import Gather

        enc = build_encoder(conv_cfg(stage_depths=(1, 1, 1, 1)), seed=3)
        g = Gather(np.random.default_rng(5).normal(size=(64, 64)))
        assert encode(enc, g).shapes()[0] == (16, 16, 16)


class TestHierarchyPredicate:
    @staticmethod
    def pyramid_of(shapes):
        return FeaturePyramid([Tensor(np.zeros(s)) for s in shapes])

    def test_strictly_decreasing_true(self):
        p = self.pyramid_of([(4, 16, 16), (4, 8, 8), (4, 4, 4), (4, 2, 2)])
        assert is_hierarchical(p) is True

    def test_all_equal_false(self):
        p = self.pyramid_of([(4, 8, 8)] * 4)
        assert is_hierarchical(p) is False

    def test_single_varying_dim_true(self):
        p = self.pyramid_of([(4, 8, 8), (4, 8, 8), (4, 8, 8), (4, 8, 4)])
        assert is_hierarchical(p) is True

    def test_archetype_dichotomy(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(1, 32, 32)))
        small = dict(stage_channels=(4, 8, 12, 16), stage_depths=(1, 1, 1, 1), patch_stride=2)
        for arch in ("conv-hierarchical", "windowed-attn-hierarchical", "hybrid-hierarchical"):
            enc = build_encoder(EncoderConfig(arch, window=2, **small), seed=0)
            assert is_hierarchical(enc(x)) is True
        enc = build_encoder(
            EncoderConfig("global-attn-nonhierarchical", stage_channels=(16,) * 4,
                          stage_depths=(1, 1, 1, 1), patch_stride=4),
            seed=0,
        )
        assert is_hierarchical(enc(x)) is False


class TestGradientFlow:
    def test_every_stage_contributes_with_skips(self):
        from seisfm.decoder import DecoderConfig, build_decoder

        cfg = conv_cfg(stage_channels=(4, 8, 12, 16), stage_depths=(1, 1, 1, 1))
        enc = build_encoder(cfg, seed=0)
        p_shapes = cfg.pyramid_shapes((32, 32))
        dec = build_decoder(DecoderConfig(head_channels=4), p_shapes, (32, 32), seed=1)
        x = Tensor(np.random.default_rng(2).normal(size=(1, 32, 32)))
        out = dec(enc(x))
        tk.backward((out * out).mean())
        for s in range(1, 5):
            names = [n for n in enc.params.names() if f"stage{s}" in n and n.endswith("weight")]
            assert names, f"no stage-{s} parameters found"
            assert any(
                enc.params.get(n).grad is not None and np.abs(enc.params.get(n).grad).max() > 0
                for n in names
            ), f"stage {s} received no gradient"
