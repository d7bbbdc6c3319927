"""Dataset assembly for the three tasks and the pre-training corpus.

Every builder is a pure function of (sizes, seed): worker-independent
generation draws per-sample seeds from one SeedSequence so datasets are
reproducible regardless of how they are batched or parallelized.
"""

from __future__ import annotations

import numpy as np

from .augment import InfeasibleCutError, add_noise, mask_traces, normalize, random_cut_below_first_break
from .synth import random_layered_model, synthesize_demultiple_pair, synthesize_shot_gather
from .types import Gather, TaskSample

# a cut with almost no reflection energy carries nothing to learn from
MIN_CUT_STD = 0.02


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def build_demultiple_dataset(n, h=64, w=512, moveout=3e-4, seed=0):
    """n CDP demultiple pairs of size h x w."""
    out = []
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n)):
        rng = np.random.default_rng(ss)
        model = random_layered_model(rng, max_time=h * 0.004 * 0.95)
        out.append(synthesize_demultiple_pair(model, h, w, moveout, seed=ss.spawn(1)[0]))
    return out


def shot_gather_pool(n_gathers, h=256, w=96, v1=2500.0, dt=0.004, trace_spacing=10.0, seed=0):
    """Synthetic stand-in for a field shot-gather survey."""
    pool = []
    for ss in np.random.SeedSequence(seed).spawn(n_gathers):
        rng = np.random.default_rng(ss)
        model = random_layered_model(rng, max_time=h * dt * 0.95, n_layers=(8, 16))
        g, fb = synthesize_shot_gather(model, v1, h, w, dt, trace_spacing, seed=ss.spawn(1)[0])
        pool.append((g, fb))
    return pool


def sample_cuts(pool, n, cut_h, cut_w, seed, max_tries=40):
    """Draw n normalized random cuts below the first break, skipping dead windows."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    cuts = []
    while len(cuts) < n:
        g, fb = pool[int(rng.integers(len(pool)))]
        cut = None
        for _ in range(max_tries):
            cand = random_cut_below_first_break(g, fb, cut_h, cut_w, rng)
            if float(cand.samples.std()) > MIN_CUT_STD * max(float(g.samples.std()), 1e-12):
                cut = cand
                break
        if cut is None:
            raise InfeasibleCutError(
                f"could not draw an energetic {cut_h}x{cut_w} cut in {max_tries} tries"
            )
        cuts.append(normalize(cut)[0])
    return cuts


def build_interpolation_dataset(n, cut=64, mask_ratio=0.3, seed=0, pool=None):
    """n trace-masked interpolation pairs from shot-gather cuts."""
    if pool is None:
        pool = shot_gather_pool(max(n // 10, 4), seed=seed + 1)
    cuts = sample_cuts(pool, n, cut, cut, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed + 2).spawn(1)[0])
    out = []
    for g in cuts:
        m = mask_traces(g, mask_ratio, pattern="random", rng=rng)
        out.append(TaskSample(input=m.masked, label=g, task="interpolation",
                              meta={"mask": m.mask}))
    return out


def build_denoise_dataset(n, cut=64, level=0.2, dist="gaussian", seed=0, pool=None):
    """n additive-noise pairs from shot-gather cuts."""
    if pool is None:
        pool = shot_gather_pool(max(n // 10, 4), seed=seed + 1)
    cuts = sample_cuts(pool, n, cut, cut, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed + 2).spawn(1)[0])
    return [add_noise(g, dist=dist, level=level, rng=rng) for g in cuts]


def build_pretrain_corpus(n, hw=(64, 64), seed=0) -> list[Gather]:
    """Unlabeled gathers for MIM pre-training, drawn from a shot-gather pool.

    Use a seed disjoint from the downstream datasets to keep the corpora
    separate.
    """
    pool = shot_gather_pool(max(n // 10, 4), seed=seed + 1)
    return sample_cuts(pool, n, hw[0], hw[1], seed)


def build_task_dataset(task, n, seed, options=None):
    opts = dict(options or {})
    if task == "demultiple":
        return build_demultiple_dataset(
            n, h=int(opts.get("height", 64)), w=int(opts.get("width", 64)),
            moveout=float(opts.get("moveout", 3e-4)), seed=seed,
        )
    if task == "interpolation":
        return build_interpolation_dataset(
            n, cut=int(opts.get("cut", 64)), mask_ratio=float(opts.get("mask_ratio", 0.3)), seed=seed,
        )
    if task == "denoise":
        return build_denoise_dataset(
            n, cut=int(opts.get("cut", 64)), level=float(opts.get("noise_level", 0.2)),
            dist=opts.get("noise_dist", "gaussian"), seed=seed,
        )
    raise ValueError(f"unknown task {task!r}")
