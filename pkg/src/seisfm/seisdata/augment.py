"""Augmentation and normalization: cuts, trace masking, noise injection."""

from __future__ import annotations

import numpy as np

from .types import Gather, MaskedGather, TaskSample


class InfeasibleCutError(ValueError):
    """No window of the requested size fits below the first break."""


def random_cut_below_first_break(g: Gather, first_break, cut_h, cut_w, rng) -> Gather:
    """Cut a (cut_h, cut_w) window whose top row lies strictly below the first break.

    The window position is uniform over the feasible set: for each left trace
    l, tops range over (max first_break of the covered traces, H - cut_h].
    """
    h, w = g.samples.shape
    fb = np.asarray(first_break, dtype=np.int64)
    if fb.shape != (w,):
        raise ValueError(f"first_break must have one entry per trace ({w}), got {fb.shape}")
    if cut_h < 1 or cut_w < 1 or cut_h > h or cut_w > w:
        raise InfeasibleCutError(f"cut {cut_h}x{cut_w} cannot fit in gather {h}x{w}")

    # sliding max of fb over windows of cut_w traces
    n_left = w - cut_w + 1
    win_max = np.array([fb[l : l + cut_w].max() for l in range(n_left)])
    top_lo = win_max + 1  # first admissible top row per left position
    top_hi = h - cut_h  # last admissible top row
    counts = np.maximum(top_hi - top_lo + 1, 0)
    total = int(counts.sum())
    if total == 0:
        raise InfeasibleCutError(
            f"no {cut_h}x{cut_w} window fits below the first break (max fb {int(fb.max())}, H={h})"
        )
    pick = int(rng.integers(total))
    left = int(np.searchsorted(np.cumsum(counts), pick, side="right"))
    offset = pick - int(np.concatenate(([0], np.cumsum(counts)))[left])
    top = int(top_lo[left] + offset)
    cut = g.samples[top : top + cut_h, left : left + cut_w].copy()
    return Gather(cut, dt=g.dt, trace_spacing=g.trace_spacing)


def mask_traces(g: Gather, ratio, pattern="random", rng=None, keep_every=4) -> MaskedGather:
    """Zero whole traces.

    pattern="random": each trace dies independently with probability `ratio`.
    pattern="regular": every keep_every-th trace survives, the rest die
    (ratio is ignored), the decimation used for evaluation panels.
    """
    w = g.samples.shape[1]
    if pattern == "random":
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"mask ratio must lie in [0,1], got {ratio}")
        if rng is None:
            rng = np.random.default_rng(0)
        mask = rng.random(w) < ratio
    elif pattern == "regular":
        mask = np.ones(w, dtype=bool)
        mask[::keep_every] = False
    else:
        raise ValueError(f"unknown mask pattern {pattern!r}")
    masked = g.samples.copy()
    masked[:, mask] = 0.0
    return MaskedGather(base=g, mask=mask, masked=Gather(masked, dt=g.dt, trace_spacing=g.trace_spacing))


def add_noise(g: Gather, dist="gaussian", level=0.2, rng=None) -> TaskSample:
    """Additive noise pair: input = gather + noise, label = gather.

    gaussian: N(0, (level*std)^2). uniform: U(-sqrt(3)*level*std,
    +sqrt(3)*level*std), which matches the gaussian variance at equal level.
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    if rng is None:
        rng = np.random.default_rng(0)
    sigma = level * float(np.std(g.samples))
    if dist == "gaussian":
        noise = rng.normal(0.0, sigma, size=g.samples.shape) if sigma > 0 else np.zeros_like(g.samples)
    elif dist == "uniform":
        half = np.sqrt(3.0) * sigma
        noise = rng.uniform(-half, half, size=g.samples.shape) if sigma > 0 else np.zeros_like(g.samples)
    else:
        raise ValueError(f"unknown noise distribution {dist!r}")
    noisy = Gather(g.samples + noise, dt=g.dt, trace_spacing=g.trace_spacing)
    return TaskSample(input=noisy, label=g, task="denoise")


STD_FLOOR = 1e-12


def normalize(g: Gather):
    """Zero-mean unit-std per gather; returns (normalized, (mean, std)) for inversion."""
    mean = float(np.mean(g.samples))
    std = max(float(np.std(g.samples)), STD_FLOOR)
    out = (g.samples - mean) / std
    return Gather(out, dt=g.dt, trace_spacing=g.trace_spacing), (mean, std)


def denormalize(g: Gather, stats) -> Gather:
    mean, std = stats
    return Gather(g.samples * std + mean, dt=g.dt, trace_spacing=g.trace_spacing)
