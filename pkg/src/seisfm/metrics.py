"""Evaluation metrics (MSE, PSNR, SSIM, combined SSIM) and inference timing.

SSIM is built from tensorkit ops so it is differentiable end to end; the
plain-array entry point just runs it without gradient tracking. PSNR of
identical inputs is reported as a capped 99 dB sentinel so reports stay
numeric.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensorkit as tk
from .tensorkit import ShapeError, Tensor

PSNR_CAP_DB = 99.0


def _arr(x):
    return np.asarray(getattr(x, "samples", x), dtype=np.float64)


def mse(a, b) -> float:
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, peak) -> float:
    """10 log10(peak^2 / mse), in dB; identical inputs return the 99 dB cap."""
    if peak <= 0:
        raise ValueError(f"psnr peak must be positive, got {peak}")
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak * peak / m))


def _gaussian_window(window, sigma, dtype):
    half = (window - 1) / 2.0
    g = np.arange(window) - half
    k = np.exp(-(g[:, None] ** 2 + g[None, :] ** 2) / (2.0 * sigma * sigma))
    k /= k.sum()
    return k.astype(dtype)


def ssim_graph(a: Tensor, b: Tensor, window=11, sigma=1.5, k1=0.01, k2=0.03, drange=1.0) -> Tensor:
    """Differentiable SSIM between two (1,H,W) tensors."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"ssim: shape mismatch {a.data.shape} vs {b.data.shape}")
    _, h, w = a.data.shape
    if h < window or w < window:
        raise ShapeError(f"ssim: gather {h}x{w} smaller than the {window}x{window} window")
    if drange <= 0:
        raise ValueError(f"ssim dynamic range must be positive, got {drange}")
    kern = Tensor(_gaussian_window(window, sigma, a.data.dtype)[None, None])
    c1 = (k1 * drange) ** 2
    c2 = (k2 * drange) ** 2

    mu_a = tk.conv2d(a, kern)
    mu_b = tk.conv2d(b, kern)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    s_aa = tk.conv2d(a * a, kern) - mu_aa
    s_bb = tk.conv2d(b * b, kern) - mu_bb
    s_ab = tk.conv2d(a * b, kern) - mu_ab

    num = (mu_ab * 2.0 + c1) * (s_ab * 2.0 + c2)
    den = (mu_aa + mu_bb + c1) * (s_aa + s_bb + c2)
    return (num / den).mean()


def ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, drange=None) -> float:
    """SSIM of two 2-D panels. drange defaults to max(b) - min(b) (label range)."""
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if drange is None:
        drange = max(float(b.max() - b.min()), 1e-12)
    with tk.no_grad():
        out = ssim_graph(Tensor(a[None]), Tensor(b[None]), window, sigma, k1, k2, drange)
    return float(out.data)


@dataclass
class CombinedScore:
    ssim_demultiple: float
    ssim_interpolation: float
    ssim_denoise: float
    combined: float


def combined_ssim(per_task: dict) -> CombinedScore:
    """Sum of the three per-task SSIM values; a missing task is an error."""
    required = ("demultiple", "interpolation", "denoise")
    missing = [t for t in required if t not in per_task]
    if missing:
        raise ValueError(f"combined SSIM needs all three tasks; missing {missing}")
    vals = [float(per_task[t]) for t in required]
    return CombinedScore(*vals, combined=float(sum(vals)))


@dataclass
class MetricsRecord:
    task: str
    mse: float
    psnr_db: float
    ssim: float
    params_encoder: int = 0
    params_total: int = 0
    throughput_gps: float = 0.0
    latency_s: float = 0.0


@dataclass
class TimingResult:
    latency_s: float  # median seconds per batch
    throughput_gps: float  # gathers per second over all measured reps
    samples: list = field(default_factory=list)  # per-rep seconds


def time_inference(model, batch, shape, warmup=2, reps=5) -> TimingResult:
    """Time `model(batch_of_arrays)` with a monotonic clock.

    `model` is called with a list of `batch` float32 arrays of `shape`. Warmup
    calls are discarded; the median of `reps` measured calls is the latency
    and throughput = batch * reps / total measured time.
    """
    if reps < 3:
        raise ValueError(f"reps must be >= 3, got {reps}")
    rng = np.random.default_rng(0)
    arrays = [rng.normal(size=shape).astype(np.float32) for _ in range(batch)]
    for _ in range(warmup):
        model(arrays)
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        model(arrays)
        samples.append(time.perf_counter() - t0)
    total = sum(samples)
    return TimingResult(
        latency_s=float(np.median(samples)),
        throughput_gps=batch * reps / total if total > 0 else float("inf"),
        samples=samples,
    )
