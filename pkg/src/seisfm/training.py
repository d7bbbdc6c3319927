"""Losses, AdamW, checkpoints, MIM pre-training, and downstream strategies.

Downstream training comes in three flavors: `frozen` loads a pre-trained
encoder and trains only the decoder, `fine-tuned` loads the same checkpoint
but updates both partitions, and `scratch` starts everything from seeded
random init. The frozen encoder partition is bit-invariant across training;
that is enforced by the trainable flag and guarded in the optimizer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import tensorkit as tk
from .decoder import Decoder, DecoderConfig, build_decoder
from .encoders import Encoder, EncoderConfig, build_encoder
from .layers import Conv2d, ConvNeXtBlock
from .params import ParameterStore
from .tensorkit import Tensor

STRATEGIES = ("frozen", "fine-tuned", "scratch")


class FreezeViolation(RuntimeError):
    """A gradient arrived for a tensor in a frozen partition."""


class CheckpointError(ValueError):
    """Malformed checkpoint file or name/shape mismatch on load."""


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    epochs: int = 50
    batch: int = 8
    seed: int = 0
    schedule: str = "constant"
    eps: float = 1e-8

    def validate(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.schedule != "constant":
            raise ValueError(f"only the constant schedule is supported, got {self.schedule!r}")


@dataclass
class TrainingStrategy:
    kind: str
    pretrained_checkpoint: str | None = None

    def validate(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind in ("frozen", "fine-tuned") and not self.pretrained_checkpoint:
            raise ValueError(f"strategy {self.kind!r} requires a pretrained checkpoint")
        if self.kind == "scratch" and self.pretrained_checkpoint:
            raise ValueError("scratch strategy must not receive a checkpoint")


# -- losses ---------------------------------------------------------------------


def _pair(pred, target):
    if not isinstance(pred, Tensor):
        pred = Tensor(getattr(pred, "samples", pred))
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(getattr(target, "samples", target), dtype=pred.data.dtype))
    return pred, target


def l1_loss(pred, target):
    """Mean absolute difference."""
    pred, target = _pair(pred, target)
    return (pred - target).abs().mean()


def l2_loss(pred, target):
    """Mean squared difference."""
    pred, target = _pair(pred, target)
    d = pred - target
    return (d * d).mean()


# -- AdamW ------------------------------------------------------------------------


def adamw_step(store: ParameterStore, grads: dict, config: TrainConfig, t: int, state=None):
    """One decoupled-weight-decay Adam step over the trainable partitions.

    `grads` maps parameter name to gradient array; an entry for a frozen
    tensor raises FreezeViolation, a missing entry for a trainable tensor is
    an error. Moment estimates live in `state` (created when None) and are
    bias-corrected with step count `t` (1-based).
    """
    if state is None:
        state = {}
    beta1, beta2 = config.betas
    for name, tensor in store.items():
        trainable = store.is_trainable(store.partition_of(name))
        if not trainable:
            if name in grads and grads[name] is not None:
                raise FreezeViolation(f"gradient supplied for frozen parameter {name!r}")
            continue
        g = grads.get(name)
        if g is None:
            raise ValueError(f"missing gradient for trainable parameter {name!r}")
        if name not in state:
            # moments kept in float64 so squared float32 gradients cannot overflow
            state[name] = (
                np.zeros(tensor.data.shape, dtype=np.float64),
                np.zeros(tensor.data.shape, dtype=np.float64),
            )
        g = np.asarray(g, dtype=np.float64)
        m, v = state[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        p = tensor.data.astype(np.float64)
        if config.weight_decay:
            p = p - config.lr * config.weight_decay * p
        p = p - config.lr * mhat / (np.sqrt(vhat) + config.eps)
        tensor.data = p.astype(tensor.data.dtype)
    return state


class AdamW:
    """Stateful wrapper around adamw_step; reads gradients off the store."""

    def __init__(self, store: ParameterStore, config: TrainConfig):
        self.store = store
        self.config = config
        self.state = {}
        self.t = 0

    def step(self):
        self.t += 1
        grads = {name: tensor.grad for name, tensor in self.store.items() if tensor.grad is not None}
        adamw_step(self.store, grads, self.config, self.t, self.state)
        self.store.zero_grad()


# -- checkpoints -------------------------------------------------------------------

_CKPT_MAGIC = b"SPCK"
_CKPT_VERSION = 1
_PARTITION_CODES = {"encoder": 0, "decoder": 1}
_PARTITION_NAMES = {v: k for k, v in _PARTITION_CODES.items()}


def save_checkpoint(store: ParameterStore, path, partition=None):
    """Serialize (a partition of) a ParameterStore; data stored as float32."""
    items = store.items(partition)
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<BI", _CKPT_VERSION, len(items)))
        for name, tensor in items:
            raw = name.encode("utf-8")
            part = _PARTITION_CODES[store.partition_of(name)]
            trainable = 1 if store.is_trainable(store.partition_of(name)) else 0
            dims = tensor.data.shape
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BBB", part, trainable, len(dims)))
            f.write(struct.pack(f"<{len(dims)}I", *dims))
            f.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> ParameterStore:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r} at byte offset 0")
    version, count = struct.unpack_from("<BI", raw, 4)
    if version != _CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} at byte offset 4")
    store = ParameterStore()
    pos = 9
    trainable_flags = {}
    for _ in range(count):
        if pos + 4 > len(raw):
            raise CheckpointError(f"truncated name length field at byte offset {pos}")
        (nlen,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if nlen == 0 or pos + nlen > len(raw):
            raise CheckpointError(f"invalid name length {nlen} at byte offset {pos - 4}")
        name = raw[pos : pos + nlen].decode("utf-8")
        pos += nlen
        if pos + 3 > len(raw):
            raise CheckpointError(f"truncated tensor header at byte offset {pos}")
        part, trainable, rank = struct.unpack_from("<BBB", raw, pos)
        pos += 3
        if part not in _PARTITION_NAMES:
            raise CheckpointError(f"unknown partition code {part} at byte offset {pos - 3}")
        if pos + 4 * rank > len(raw):
            raise CheckpointError(f"truncated dims field at byte offset {pos}")
        dims = struct.unpack_from(f"<{rank}I", raw, pos)
        pos += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        nbytes = 4 * n
        if pos + nbytes > len(raw):
            raise CheckpointError(f"truncated tensor data at byte offset {pos} (need {nbytes} bytes)")
        data = np.frombuffer(raw[pos : pos + nbytes], dtype="<f4").reshape(dims)
        pos += nbytes
        store.add(name, data.astype(np.float32), _PARTITION_NAMES[part])
        trainable_flags[_PARTITION_NAMES[part]] = bool(trainable)
    if pos != len(raw):
        raise CheckpointError(f"{len(raw) - pos} trailing bytes at byte offset {pos}")
    for partname, flag in trainable_flags.items():
        store.set_trainable(partname, flag)
    return store


def load_into(store: ParameterStore, checkpoint, partitions=None):
    """Copy checkpoint values into matching names of `store`.

    Every partition the checkpoint covers (optionally restricted by
    `partitions`) must agree exactly on parameter names and shapes; the first
    mismatch raises CheckpointError with a name diff. Partitions absent from
    the checkpoint are left untouched.
    """
    if not isinstance(checkpoint, ParameterStore):
        checkpoint = load_checkpoint(checkpoint)
    covered = set(checkpoint.partitions())
    if partitions is not None:
        covered &= set(partitions)
    for part in sorted(covered):
        ck_names = set(checkpoint.names(part))
        st_names = set(store.names(part))
        if ck_names != st_names:
            missing = sorted(ck_names - st_names)
            extra = sorted(st_names - ck_names)
            raise CheckpointError(
                f"checkpoint/model mismatch in partition {part!r}: "
                f"checkpoint-only={missing[:8]} model-only={extra[:8]}"
            )
        for name in sorted(ck_names):
            src = checkpoint.get(name).data
            dst = store.get(name)
            if tuple(src.shape) != tuple(dst.data.shape):
                raise CheckpointError(
                    f"shape mismatch for {name!r}: checkpoint {src.shape} vs model {dst.data.shape}"
                )
            dst.data = src.astype(dst.data.dtype)


# -- encoder-decoder model ----------------------------------------------------------


class EncoderDecoder:
    def __init__(self, encoder: Encoder, decoder):
        self.encoder = encoder
        self.decoder = decoder
        self.store = ParameterStore()
        self.store.adopt(encoder.params)
        self.store.adopt(decoder.params)

    def __call__(self, x: Tensor) -> Tensor:
        return self.decoder(self.encoder(x))

    @property
    def dtype(self):
        return next(iter(self.store.items()))[1].data.dtype

    def predict(self, samples) -> np.ndarray:
        """Inference on a 2-D gather array; returns the (H,W) prediction."""
        arr = np.asarray(getattr(samples, "samples", samples))
        with tk.no_grad():
            out = self(Tensor(arr[None].astype(self.dtype)))
        return np.asarray(out.data[0], dtype=np.float64)


def _child_seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _epoch_batches(n, batch, rng):
    idx = rng.permutation(n)
    return [idx[i : i + batch] for i in range(0, n, batch)]


def _run_supervised(model, inputs, labels, config, epochs=None):
    """Shared minibatch loop; returns per-epoch mean l1 loss."""
    opt = AdamW(model.store, config)
    shuffle_rng = np.random.default_rng(_child_seeds(config.seed, 3)[2])
    dtype = model.dtype
    history = []
    for _ in range(epochs if epochs is not None else config.epochs):
        total, seen = 0.0, 0
        for batch_idx in _epoch_batches(len(inputs), config.batch, shuffle_rng):
            losses = []
            for i in batch_idx:
                x = Tensor(inputs[i][None].astype(dtype))
                pred = model(x)
                losses.append(l1_loss(pred, Tensor(labels[i][None].astype(dtype))))
            loss = losses[0]
            for extra in losses[1:]:
                loss = loss + extra
            loss = loss * (1.0 / len(losses))
            tk.backward(loss)
            opt.step()
            total += float(loss.data) * len(batch_idx)
            seen += len(batch_idx)
        history.append(total / seen)
    return history


# -- MIM pre-training -----------------------------------------------------------------


class MimDecoder:
    """Single-path reconstruction head for pre-training: consumes only the
    coarsest embedding, upsamples back to the input size with narrow
    modern-conv blocks. Deliberately small next to the encoder."""

    def __init__(self, store, rng, c4, steps, width, dtype):
        self.adapter = Conv2d(store, "decoder.mim_adapter", "decoder", rng, c4, width, 1, dtype=dtype, init="fan_in")
        self.blocks = [
            ConvNeXtBlock(store, f"decoder.mim_block{i}", "decoder", rng, width, expansion=2, dtype=dtype, init="fan_in")
            for i in range(steps)
        ]
        self.head = Conv2d(store, "decoder.mim_head", "decoder", rng, width, 1, 1, dtype=dtype, init="zero")
        self.params = store

    def __call__(self, pyramid):
        x = self.adapter(pyramid[3])
        for blk in self.blocks:
            x = tk.bilinear_upsample2x(x)
            x = blk(x)
        return self.head(x)


def build_mim_decoder(encoder: Encoder, hw, seed, dtype, max_fraction=0.2):
    """Smallest-width reconstruction head with params < max_fraction of the encoder's."""
    c4, h4, _ = encoder.config.pyramid_shapes(hw)[3]
    steps = int(np.log2(hw[0] // h4))
    budget = max_fraction * encoder.param_count
    for width in (32, 24, 16, 12, 8, 6, 4):
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        dec = MimDecoder(store, rng, c4, steps, width, dtype)
        if store.count() < budget:
            return dec
    raise ValueError(
        f"cannot size a pre-training decoder under {max_fraction:.0%} of {encoder.param_count} encoder parameters"
    )


def mask_patches(samples, ratio, patch, rng):
    """Zero square patches of the gather independently with probability `ratio`."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"mask ratio must lie in [0,1], got {ratio}")
    h, w = samples.shape
    gh, gw = -(-h // patch), -(-w // patch)
    grid = rng.random((gh, gw)) < ratio
    out = samples.copy()
    for gy in range(gh):
        for gx in range(gw):
            if grid[gy, gx]:
                out[gy * patch : (gy + 1) * patch, gx * patch : (gx + 1) * patch] = 0.0
    return out


@dataclass
class MimResult:
    checkpoint: ParameterStore  # encoder partition only
    history: list  # [init loss, epoch losses...]
    encoder_params: int
    decoder_params: int


def mim_pretrain(encoder: Encoder, corpus, mask_ratio, config: TrainConfig, mask_patch=8) -> MimResult:
    """Masked-gather pre-training: reconstruct each full gather from a
    patch-masked copy, l1 loss over the whole gather. Trains encoder plus a
    small reconstruction head; only the encoder partition is exported."""
    if not corpus:
        raise ValueError("pre-training corpus is empty")
    config.validate()
    arrays = [np.asarray(getattr(g, "samples", g), dtype=np.float64) for g in corpus]
    hw = arrays[0].shape
    dtype = encoder.params.items()[0][1].data.dtype

    seeds = _child_seeds(config.seed, 3)
    dec = build_mim_decoder(encoder, hw, seeds[1], dtype)
    model = EncoderDecoder(encoder, dec)

    mask_rng = np.random.default_rng(seeds[0])
    inputs = [mask_patches(a, mask_ratio, mask_patch, mask_rng) for a in arrays]

    with tk.no_grad():
        init = float(
            np.mean([float(l1_loss(model(Tensor(x[None].astype(dtype))), Tensor(a[None].astype(dtype))).data)
                     for x, a in zip(inputs, arrays)])
        )
    history = [init] + _run_supervised(model, inputs, arrays, config)

    export = ParameterStore()
    for name, tensor in model.store.items("encoder"):
        export.add(name, tensor.data.copy(), "encoder")
    return MimResult(
        checkpoint=export,
        history=history,
        encoder_params=encoder.param_count,
        decoder_params=dec.params.count("decoder"),
    )


# -- downstream training ----------------------------------------------------------------


def train_downstream(
    encoder_cfg: EncoderConfig,
    decoder_cfg: DecoderConfig,
    strategy: TrainingStrategy,
    dataset,
    config: TrainConfig,
    dtype=np.float32,
):
    """Train one encoder-decoder for a task dataset under the given strategy.

    Returns (model, per-epoch loss history). Parameter init, data order, and
    hence the trained weights are fully determined by config.seed.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    strategy.validate()
    config.validate()
    hw = dataset[0].input.samples.shape
    seeds = _child_seeds(config.seed, 3)

    encoder = build_encoder(encoder_cfg, seed=seeds[0], dtype=dtype)
    decoder = build_decoder(decoder_cfg, encoder_cfg.pyramid_shapes(hw), hw, seed=seeds[1], dtype=dtype)
    model = EncoderDecoder(encoder, decoder)

    if strategy.kind in ("frozen", "fine-tuned"):
        load_into(model.store, strategy.pretrained_checkpoint, partitions=("encoder",))
    if strategy.kind == "frozen":
        model.store.set_trainable("encoder", False)

    inputs = [s.input.samples for s in dataset]
    labels = [s.label.samples for s in dataset]
    history = _run_supervised(model, inputs, labels, config)
    return model, history
