"""Synthetic gather generation by 1-D convolutional modeling.

The cited full-scale recipes live outside this codebase, so the generators
here document their own parameter distributions: see `random_layered_model`
and the two synthesizers. Everything is a pure function of (config, seed).
"""

from __future__ import annotations

import numpy as np

from .types import Gather, LayeredModel, TaskSample

MAX_MULTIPLE_ORDER = 3  # amplitudes below |r_wb|^3 are negligible at the chosen contrasts


def ricker_wavelet(peak_freq, dt, half_len):
    """Zero-phase Ricker wavelet, w(t) = (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2).

    Returns 2*half_len + 1 taps centered on t=0. peak_freq must stay below
    Nyquist (peak_freq * dt < 0.5).
    """
    if peak_freq * dt >= 0.5:
        raise ValueError(f"peak frequency {peak_freq} Hz violates Nyquist at dt={dt}s")
    t = np.arange(-half_len, half_len + 1) * dt
    a = (np.pi * peak_freq * t) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def _spike_panel(events, h, w, dt):
    """Accumulate (time0, slope, amp) events onto an H x W spike train.

    Each event is linear in trace index: t(j) = time0 + slope * j. Samples
    falling outside [0, H) are dropped.
    """
    panel = np.zeros((h, w))
    j = np.arange(w)
    for time0, slope, amp in events:
        rows = np.rint((time0 + slope * j) / dt).astype(np.int64)
        ok = (rows >= 0) & (rows < h)
        np.add.at(panel, (rows[ok], j[ok]), amp)
    return panel


def _convolve_columns(panel, wavelet):
    h, w = panel.shape
    half = (len(wavelet) - 1) // 2
    out = np.empty_like(panel)
    for j in range(w):
        out[:, j] = np.convolve(panel[:, j], wavelet)[half : half + h]
    return out


def synthesize_demultiple_pair(model: LayeredModel, h, w, moveout_s_per_trace, seed) -> TaskSample:
    """CDP-style demultiple pair: label = primaries, input = label + water-layer multiples.

    Primaries sit at the model's layer times with a per-event linear moveout
    whose slope is drawn uniformly from [0.3, 1.0] * moveout_s_per_trace.
    Order-k multiples (k <= 3) repeat each primary at t + k * water_bottom_time
    with amplitude (-water_bottom_r)^k, inheriting the primary's slope. Both
    panels are scaled by the same factor (1/std of the raw input); the sample's
    meta carries 'multiples' = input - label, the exact construction residual.
    """
    rng = np.random.default_rng(seed)
    dt = 0.004
    primaries = []
    for t0, amp in model.primary_events():
        slope = float(rng.uniform(0.3, 1.0)) * moveout_s_per_trace
        primaries.append((t0, slope, amp))
    multiples = []
    for t0, slope, amp in primaries:
        for k in range(1, MAX_MULTIPLE_ORDER + 1):
            multiples.append((t0 + k * model.water_bottom_time, slope, amp * (-model.water_bottom_r) ** k))

    wavelet = ricker_wavelet(model.wavelet_peak_freq, dt, half_len=16)
    label_raw = _convolve_columns(_spike_panel(primaries, h, w, dt), wavelet)
    mult_raw = _convolve_columns(_spike_panel(multiples, h, w, dt), wavelet)

    scale = 1.0 / max(float(np.std(label_raw + mult_raw)), 1e-12)
    label = label_raw * scale
    input_panel = label + mult_raw * scale

    sample = TaskSample(
        input=Gather(input_panel, dt=dt),
        label=Gather(label, dt=dt),
        task="demultiple",
        meta={"multiples": input_panel - label, "scale": scale},
    )
    return sample


def synthesize_shot_gather(model: LayeredModel, v1, h, w, dt, trace_spacing, seed):
    """Shot gather with a direct arrival plus hyperbolic reflections.

    first_break[j] = round((j * trace_spacing / v1) / dt); everything above is
    muted to zero. Interface k gets an rms velocity v1 * (1 + 0.4 * t0_k /
    t_max) so deeper events flatten, and its hyperbola t(j) =
    sqrt(t0^2 + (offset/v)^2). Events beyond the panel are dropped silently.
    Randomness (seed) jitters reflection amplitudes by +-20%.
    """
    if v1 <= 0:
        raise ValueError(f"direct-arrival velocity must be positive, got {v1}")
    rng = np.random.default_rng(seed)
    offsets = np.arange(w) * trace_spacing
    direct_t = offsets / v1
    first_break = np.rint(direct_t / dt).astype(np.int64)

    panel = np.zeros((h, w))
    rows = first_break
    ok = rows < h
    panel[rows[ok], np.arange(w)[ok]] = 1.0  # direct arrival spike

    t_max = h * dt
    for t0, amp in model.primary_events():
        v = v1 * (1.0 + 0.4 * t0 / t_max)
        jitter = float(rng.uniform(0.8, 1.2))
        times = np.sqrt(t0**2 + (offsets / v) ** 2)
        rrows = np.rint(times / dt).astype(np.int64)
        ok = rrows < h
        np.add.at(panel, (rrows[ok], np.arange(w)[ok]), amp * jitter)

    wavelet = ricker_wavelet(model.wavelet_peak_freq, dt, half_len=16)
    out = _convolve_columns(panel, wavelet)
    for j in range(w):
        out[: min(first_break[j], h), j] = 0.0  # mute above the first break

    return Gather(out, dt=dt, trace_spacing=trace_spacing), first_break


def random_layered_model(rng, max_time=0.24, freq_range=(25.0, 45.0), n_layers=(3, 8)) -> LayeredModel:
    """Draw a layered model for dataset generation.

    Distributions: U{n_layers} layers; thickness U(0.015, 0.05) s; contrast
    sign * U(0.15, 0.6); water bottom time U(0.04, 0.09) s and contrast
    U(0.3, 0.6); wavelet peak frequency U(freq_range) Hz. Layers beyond
    max_time are trimmed so primaries stay inside the panel.
    """
    n = int(rng.integers(n_layers[0], n_layers[1] + 1))
    wb_t = float(rng.uniform(0.04, 0.09))
    layers = []
    t = wb_t
    for _ in range(n):
        th = float(rng.uniform(0.015, 0.05))
        if t + th > max_time:
            break
        r = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.6))
        layers.append((th, r))
        t += th
    if not layers:
        layers = [(0.02, 0.4)]
    return LayeredModel(
        layers=layers,
        water_bottom_time=wb_t,
        water_bottom_r=float(rng.uniform(0.3, 0.6)),
        wavelet_peak_freq=float(rng.uniform(*freq_range)),
    )
