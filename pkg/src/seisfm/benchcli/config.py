"""Flat key=value experiment configs with dotted keys.

Example:

    experiment.name = desk-small
    encoders = tiny-conv,tiny-global
    tasks = demultiple,interpolation,denoise
    strategies = scratch
    data.demultiple.count = 240
    train.lr = 0.003
    train.epochs = 12

Unknown keys are rejected up front so typos fail loudly. Encoder presets can
be extended or overridden with encoder.<name>.<field> entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..decoder import DecoderConfig
from ..encoders import ConfigError, EncoderConfig
from ..seisdata.types import TASKS
from ..training import STRATEGIES, TrainConfig

ENCODER_PRESETS = {
    # desk-scale presets: smallest sizes that keep the four-stage geometry
    "conv": dict(archetype="conv-hierarchical", stage_channels=(16, 32, 64, 128),
                 stage_depths=(2, 2, 4, 2), patch_stride=4),
    "window": dict(archetype="windowed-attn-hierarchical", stage_channels=(16, 32, 64, 128),
                   stage_depths=(2, 2, 4, 2), patch_stride=4, window=4),
    "global": dict(archetype="global-attn-nonhierarchical", stage_channels=(64, 64, 64, 64),
                   stage_depths=(2, 2, 1, 1), patch_stride=8),
    "hybrid": dict(archetype="hybrid-hierarchical", stage_channels=(16, 32, 64, 128),
                   stage_depths=(2, 2, 4, 2), patch_stride=4, window=4),
    # tiny variants for fast grids and tests
    "tiny-conv": dict(archetype="conv-hierarchical", stage_channels=(8, 16, 32, 64),
                      stage_depths=(1, 1, 2, 1), patch_stride=4),
    "tiny-window": dict(archetype="windowed-attn-hierarchical", stage_channels=(8, 16, 32, 64),
                        stage_depths=(1, 1, 2, 1), patch_stride=4, window=4),
    "tiny-global": dict(archetype="global-attn-nonhierarchical", stage_channels=(48, 48, 48, 48),
                        stage_depths=(1, 1, 1, 1), patch_stride=8),
    "tiny-hybrid": dict(archetype="hybrid-hierarchical", stage_channels=(8, 16, 32, 64),
                        stage_depths=(1, 1, 2, 1), patch_stride=4, window=4),
}

_KNOWN_PREFIXES = ("encoder.", "data.", "panels.")
_KNOWN_KEYS = {
    "experiment.name", "seed", "encoders", "tasks", "strategies",
    "decoder.skip_connections", "decoder.block", "decoder.upsample",
    "decoder.bottleneck_multiplier", "decoder.head_channels",
    "train.lr", "train.weight_decay", "train.epochs", "train.batch",
    "train.beta1", "train.beta2",
    "pretrain.checkpoint", "pretrain.corpus", "pretrain.epochs", "pretrain.lr",
    "pretrain.mask_ratio", "pretrain.batch", "pretrain.seed",
    "timing.enabled", "timing.batch", "timing.reps", "timing.warmup",
    "eval.split",
}

_ENCODER_FIELDS = {"archetype", "stage_channels", "stage_depths", "patch_stride", "window", "tap_layers"}
_DATA_FIELDS = {"count", "height", "width", "moveout", "cut", "mask_ratio", "noise_level", "noise_dist"}


def parse_config_text(text) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _check_keys(raw):
    for key in raw:
        if key in _KNOWN_KEYS:
            continue
        if key.startswith("encoder."):
            parts = key.split(".")
            if len(parts) == 3 and parts[2] in _ENCODER_FIELDS:
                continue
        if key.startswith("data."):
            parts = key.split(".")
            if len(parts) == 3 and parts[1] in TASKS and parts[2] in _DATA_FIELDS:
                continue
        if key.startswith("panels."):
            continue
        raise ConfigError(f"unknown config key {key!r}")


def _as_bool(v):
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _int_tuple(v):
    return tuple(int(x) for x in v.split(","))


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_path(cls, path):
        with open(path) as f:
            raw = parse_config_text(f.read())
        _check_keys(raw)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text):
        raw = parse_config_text(text)
        _check_keys(raw)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    # -- accessors -------------------------------------------------------

    def _get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def name(self):
        return self._get("experiment.name", "experiment")

    @property
    def seed(self):
        return int(self._get("seed", "0"))

    def encoder_names(self):
        names = [n.strip() for n in self._get("encoders", "tiny-conv").split(",") if n.strip()]
        if not names:
            raise ConfigError("encoders list is empty")
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate encoder names in {names}")
        return names

    def encoder_config(self, name) -> EncoderConfig:
        base = dict(ENCODER_PRESETS.get(name, {}))
        for f in _ENCODER_FIELDS:
            v = self._get(f"encoder.{name}.{f}")
            if v is None:
                continue
            if f == "archetype":
                base[f] = v
            elif f in ("stage_channels", "stage_depths", "tap_layers"):
                base[f] = _int_tuple(v)
            else:
                base[f] = int(v)
        if "archetype" not in base:
            raise ConfigError(f"encoder {name!r} is not a preset and defines no archetype")
        cfg = EncoderConfig(**base)
        cfg.validate()
        return cfg

    def encoders(self):
        return [(n, self.encoder_config(n)) for n in self.encoder_names()]

    def decoder_config(self) -> DecoderConfig:
        cfg = DecoderConfig(
            skip_connections=_as_bool(self._get("decoder.skip_connections", "true")),
            block=self._get("decoder.block", "modern-conv"),
            upsample=self._get("decoder.upsample", "bilinear"),
            bottleneck_multiplier=int(self._get("decoder.bottleneck_multiplier", "2")),
            head_channels=int(self._get("decoder.head_channels", "16")),
        )
        cfg.validate()
        return cfg

    def tasks(self):
        ts = [t.strip() for t in self._get("tasks", "demultiple").split(",") if t.strip()]
        bad = [t for t in ts if t not in TASKS]
        if bad or not ts:
            raise ConfigError(f"tasks must be a nonempty subset of {TASKS}, got {ts}")
        return ts

    def strategies(self):
        ss = [s.strip() for s in self._get("strategies", "scratch").split(",") if s.strip()]
        bad = [s for s in ss if s not in STRATEGIES]
        if bad or not ss:
            raise ConfigError(f"strategies must be a nonempty subset of {STRATEGIES}, got {ss}")
        return ss

    def data_count(self, task):
        return int(self._get(f"data.{task}.count", "200"))

    def data_options(self, task):
        out = {}
        for f in _DATA_FIELDS - {"count"}:
            v = self._get(f"data.{task}.{f}")
            if v is not None:
                out[f] = v
        return out

    def train_config(self, seed) -> TrainConfig:
        return TrainConfig(
            lr=float(self._get("train.lr", "0.001")),
            weight_decay=float(self._get("train.weight_decay", "0.01")),
            betas=(float(self._get("train.beta1", "0.9")), float(self._get("train.beta2", "0.999"))),
            epochs=int(self._get("train.epochs", "50")),
            batch=int(self._get("train.batch", "8")),
            seed=seed,
        )

    def pretrain_options(self):
        return {
            "checkpoint": self._get("pretrain.checkpoint") or None,
            "corpus": int(self._get("pretrain.corpus", "150")),
            "epochs": int(self._get("pretrain.epochs", "20")),
            "lr": float(self._get("pretrain.lr", self._get("train.lr", "0.001"))),
            "mask_ratio": float(self._get("pretrain.mask_ratio", "0.6")),
            "batch": int(self._get("pretrain.batch", "8")),
        }

    def timing_options(self):
        return {
            "enabled": _as_bool(self._get("timing.enabled", "true")),
            "batch": int(self._get("timing.batch", "8")),
            "reps": int(self._get("timing.reps", "5")),
            "warmup": int(self._get("timing.warmup", "2")),
        }

    @property
    def eval_split(self):
        v = float(self._get("eval.split", "0.1"))
        if not 0.0 < v < 1.0:
            raise ConfigError(f"eval.split must lie in (0,1), got {v}")
        return v

    def validate(self):
        self.encoders()
        self.decoder_config()
        self.tasks()
        self.strategies()
        self.eval_split
        needs_ckpt = any(s in ("frozen", "fine-tuned") for s in self.strategies())
        if needs_ckpt:
            self.pretrain_options()
