"""Experiment grid execution: data -> (pre)train -> evaluate -> rows."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from ..encoders import build_encoder
from ..metrics import MetricsRecord, combined_ssim, mse, psnr, ssim, time_inference
from ..seisdata.datasets import build_pretrain_corpus, build_task_dataset
from ..training import (
    TrainConfig,
    TrainingStrategy,
    mim_pretrain,
    save_checkpoint,
    train_downstream,
)


def subseed(seed, *parts):
    """Stable derived seed for a named purpose."""
    ints = [int(seed)] + [zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


@dataclass
class ReportRow:
    name: str
    archetype: str
    hierarchical: bool
    strategy: str
    records: dict = field(default_factory=dict)  # task -> MetricsRecord
    combined: object = None  # CombinedScore when all three tasks ran
    dataset_sizes: dict = field(default_factory=dict)
    status: str = "ok"
    error: str = ""

    @property
    def failed(self):
        return self.status != "ok"

    def mean_latency(self):
        vals = [r.latency_s for r in self.records.values()]
        return float(np.mean(vals)) if vals else 0.0


def split_dataset(samples, eval_fraction):
    """Hold out the trailing fraction by sample index, before any shuffling."""
    n_eval = max(1, int(round(len(samples) * eval_fraction)))
    n_train = len(samples) - n_eval
    if n_train < 1:
        raise ValueError(f"dataset of {len(samples)} too small for eval fraction {eval_fraction}")
    return samples[:n_train], samples[n_train:]


def evaluate_model(model, eval_samples):
    """Mean MSE / PSNR / SSIM over the held-out samples.

    PSNR peak is the label's max absolute amplitude; SSIM range the label's
    max - min (both per pair).
    """
    mses, psnrs, ssims = [], [], []
    for s in eval_samples:
        pred = model.predict(s.input.samples)
        label = s.label.samples
        peak = max(float(np.abs(label).max()), 1e-12)
        mses.append(mse(pred, label))
        psnrs.append(psnr(pred, label, peak))
        ssims.append(ssim(pred, label))
    return float(np.mean(mses)), float(np.mean(psnrs)), float(np.mean(ssims))


def _pretrain_checkpoint(config, enc_name, enc_cfg, seed, out_dir, log):
    opts = config.pretrain_options()
    if opts["checkpoint"]:
        return opts["checkpoint"]
    hw = _task_hw(config, config.tasks()[0])
    corpus = build_pretrain_corpus(opts["corpus"], hw=hw, seed=subseed(seed, "pretrain-corpus"))
    encoder = build_encoder(enc_cfg, seed=subseed(seed, "pretrain-init", enc_name), dtype=np.float32)
    cfg = TrainConfig(
        lr=opts["lr"], epochs=opts["epochs"], batch=opts["batch"],
        seed=subseed(seed, "pretrain", enc_name),
    )
    log(f"[pretrain] {enc_name}: corpus={len(corpus)} epochs={cfg.epochs} mask={opts['mask_ratio']}")
    result = mim_pretrain(encoder, corpus, opts["mask_ratio"], cfg)
    path = str(out_dir / f"pretrained_{enc_name}.spck") if out_dir else f"pretrained_{enc_name}.spck"
    save_checkpoint(result.checkpoint, path)
    log(f"[pretrain] {enc_name}: loss {result.history[0]:.4f} -> {result.history[-1]:.4f}, saved {path}")
    return path


def _task_hw(config, task):
    opts = config.data_options(task)
    if task == "demultiple":
        return int(opts.get("height", 64)), int(opts.get("width", 64))
    cut = int(opts.get("cut", 64))
    return cut, cut


def generate_datasets(config, seed):
    datasets = {}
    for task in config.tasks():
        datasets[task] = build_task_dataset(
            task, config.data_count(task), seed=subseed(seed, "data", task),
            options=config.data_options(task),
        )
    return datasets


def run_experiment(config, seed=None, out_dir=None, log=print):
    """Execute the full grid; returns one ReportRow per (encoder, strategy).

    A failure in any stage marks that row failed and the grid continues.
    Fully deterministic for a fixed seed when timing is disabled; with timing
    enabled the latency/throughput fields carry measured (nondeterministic)
    values.
    """
    seed = config.seed if seed is None else seed
    timing = config.timing_options()
    datasets = generate_datasets(config, seed)
    splits = {t: split_dataset(d, config.eval_split) for t, d in datasets.items()}
    decoder_cfg = config.decoder_config()

    checkpoints = {}
    rows = []
    for enc_name, enc_cfg in config.encoders():
        for strategy_kind in config.strategies():
            row = ReportRow(
                name=enc_name,
                archetype=enc_cfg.archetype,
                hierarchical=enc_cfg.hierarchical,
                strategy=strategy_kind,
            )
            rows.append(row)
            try:
                if strategy_kind in ("frozen", "fine-tuned") and enc_name not in checkpoints:
                    checkpoints[enc_name] = _pretrain_checkpoint(
                        config, enc_name, enc_cfg, seed, out_dir, log
                    )
                strategy = TrainingStrategy(strategy_kind, checkpoints.get(enc_name))
                ssims = {}
                for task in config.tasks():
                    train_set, eval_set = splits[task]
                    tcfg = config.train_config(subseed(seed, "train", enc_name, strategy_kind, task))
                    log(f"[train] {enc_name}/{strategy_kind}/{task}: n={len(train_set)} epochs={tcfg.epochs}")
                    model, history = train_downstream(
                        enc_cfg, decoder_cfg, strategy, train_set, tcfg
                    )
                    m, p, s = evaluate_model(model, eval_set)
                    ssims[task] = s
                    if timing["enabled"]:
                        tr = time_inference(
                            lambda arrays: [model.predict(a) for a in arrays],
                            batch=timing["batch"], shape=_task_hw(config, task),
                            warmup=timing["warmup"], reps=timing["reps"],
                        )
                        latency, throughput = tr.latency_s, tr.throughput_gps
                    else:
                        latency, throughput = 0.0, 0.0
                    row.records[task] = MetricsRecord(
                        task=task, mse=m, psnr_db=p, ssim=s,
                        params_encoder=model.store.count("encoder"),
                        params_total=model.store.count(),
                        throughput_gps=throughput, latency_s=latency,
                    )
                    row.dataset_sizes[task] = len(datasets[task])
                    log(f"[eval]  {enc_name}/{strategy_kind}/{task}: "
                        f"ssim={s:.4f} psnr={p:.2f}dB loss {history[0]:.4f}->{history[-1]:.4f}")
                if set(ssims) == {"demultiple", "interpolation", "denoise"}:
                    row.combined = combined_ssim(ssims)
            except Exception as exc:  # keep the grid going, mark the row
                row.status = "failed"
                row.error = f"{type(exc).__name__}: {exc}"
                log(f"[fail]  {enc_name}/{strategy_kind}: {row.error}")
    return rows
