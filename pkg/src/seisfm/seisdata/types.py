"""Core seismic data containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Gather:
    """A 2-D seismic panel: rows are time samples at interval dt, columns traces."""

    samples: np.ndarray
    dt: float = 0.004
    trace_spacing: float = 12.5

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1 or self.samples.shape[1] < 1:
            raise ValueError(f"gather must be a 2-D H x W panel, got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise ValueError("gather contains non-finite samples")

    @property
    def shape(self):
        return self.samples.shape


@dataclass
class LayeredModel:
    """A 1-D stack of reflectors: (two-way thickness seconds, impedance contrast).

    The water bottom acts as the multiple generator: each primary spawns
    order-k repeats delayed by k * water_bottom_time with amplitude scaled by
    (-water_bottom_r)^k.
    """

    layers: list  # [(thickness_s, r)]
    water_bottom_time: float = 0.06
    water_bottom_r: float = 0.5
    wavelet_peak_freq: float = 30.0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("layered model needs at least one layer")
        for th, r in self.layers:
            if th <= 0:
                raise ValueError(f"layer thickness must be positive, got {th}")
            if not -1.0 < r < 1.0:
                raise ValueError(f"impedance contrast must lie in (-1,1), got {r}")
        if not -1.0 < self.water_bottom_r < 1.0:
            raise ValueError(f"water bottom contrast must lie in (-1,1), got {self.water_bottom_r}")

    def primary_events(self):
        """(two-way time, amplitude) per reflector, water bottom first."""
        times = self.water_bottom_time + np.cumsum([th for th, _ in self.layers])
        return [(float(t), float(r)) for t, (_, r) in zip(times, self.layers)]


@dataclass
class MaskedGather:
    """A gather with whole traces zeroed; mask[j] is True where trace j is dead."""

    base: Gather
    mask: np.ndarray
    masked: Gather

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.base.samples.shape[1],):
            raise ValueError(
                f"mask must have one flag per trace ({self.base.samples.shape[1]}), got {self.mask.shape}"
            )


TASKS = ("demultiple", "interpolation", "denoise")


@dataclass
class TaskSample:
    """One supervised pair for a downstream task."""

    input: Gather
    label: Gather
    task: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.input.samples.shape != self.label.samples.shape:
            raise ValueError(
                f"input/label shape mismatch: {self.input.samples.shape} vs {self.label.samples.shape}"
            )
