"""Named parameter tensors partitioned into encoder/decoder groups.

Re-exported by `seisfm.training`; lives here so encoder/decoder builders can
use it without import cycles.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .tensorkit import Tensor

PARTITIONS = ("encoder", "decoder")


class ParameterStore:
    """Insertion-ordered named tensors with a trainable flag per partition."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}
        self._partition: dict[str, str] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name, value, partition):
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        if partition not in PARTITIONS:
            raise ValueError(f"unknown partition {partition!r}")
        if isinstance(value, Tensor):
            t = value
        else:
            t = Tensor(np.asarray(value))
        t.requires_grad = self._trainable.get(partition, True)
        self._tensors[name] = t
        self._partition[name] = partition
        self._trainable.setdefault(partition, t.requires_grad)
        return t

    def adopt(self, other: "ParameterStore"):
        """Share another store's tensors (same names, same objects)."""
        for name, t in other._tensors.items():
            if name in self._tensors:
                raise ValueError(f"duplicate parameter name {name!r} while merging")
            self._tensors[name] = t
            self._partition[name] = other._partition[name]
        for part, flag in other._trainable.items():
            self._trainable.setdefault(part, flag)

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def get(self, name):
        return self._tensors[name]

    def names(self, partition=None):
        if partition is None:
            return list(self._tensors)
        return [n for n, p in self._partition.items() if p == partition]

    def items(self, partition=None):
        return [(n, self._tensors[n]) for n in self.names(partition)]

    def partition_of(self, name):
        return self._partition[name]

    def count(self, partition=None):
        return int(sum(t.data.size for _, t in self.items(partition)))

    def partitions(self):
        return sorted(set(self._partition.values()))

    def set_trainable(self, partition, flag):
        self._trainable[partition] = bool(flag)
        for name, t in self.items(partition):
            t.requires_grad = bool(flag)

    def is_trainable(self, partition):
        return self._trainable.get(partition, True)

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def state_hash(self, partition=None):
        """SHA-256 over (name, shape, raw bytes) in sorted name order."""
        h = hashlib.sha256()
        for name in sorted(self.names(partition)):
            t = self._tensors[name]
            h.update(name.encode())
            h.update(str(t.data.dtype).encode())
            h.update(np.asarray(t.data.shape, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()


def trunc_normal(rng, shape, std=0.02, dtype=np.float64):
    """Normal(0, std) truncated at two standard deviations, via resampling."""
    a = rng.normal(0.0, std, size=shape)
    bad = np.abs(a) > 2.0 * std
    while bad.any():
        a[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(a) > 2.0 * std
    return a.astype(dtype)


def fan_in_normal(rng, shape, dtype=np.float64):
    """He-style truncated normal: std = sqrt(2 / fan_in), for conv/linear weights.

    fan_in is the product of all dims past the first (input channels x kernel
    taps). Keeps activation scale through unnormalized decoder paths.
    """
    fan_in = int(np.prod(shape[1:]))
    return trunc_normal(rng, shape, std=float(np.sqrt(2.0 / max(fan_in, 1))), dtype=dtype)
