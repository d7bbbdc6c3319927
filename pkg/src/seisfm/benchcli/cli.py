"""Command-line entry point.

Subcommands: synth, pretrain, train, eval, bench, report, panels. All read a
flat key=value config (see `config`); --seed overrides the config seed and
--out picks the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..decoder import build_decoder
from ..encoders import build_encoder
from ..metrics import time_inference
from ..seisdata import write_gather
from ..training import (
    EncoderDecoder,
    TrainConfig,
    TrainingStrategy,
    load_into,
    save_checkpoint,
    train_downstream,
)
from .config import ExperimentConfig
from .report import emit_panels, emit_report, emit_scatter
from .runner import (
    ReportRow,
    evaluate_model,
    generate_datasets,
    run_experiment,
    split_dataset,
    subseed,
    _pretrain_checkpoint,
    _task_hw,
)
from ..metrics import MetricsRecord, combined_ssim


def _parser():
    p = argparse.ArgumentParser(prog="seisfm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("synth", "generate task datasets and write them as SGTH files"),
        ("pretrain", "MIM-pretrain each encoder in the grid, save checkpoints"),
        ("train", "train the full grid, save model checkpoints and loss histories"),
        ("eval", "evaluate saved model checkpoints, write metrics tables"),
        ("bench", "inference timing for each encoder in the grid"),
        ("report", "run the whole experiment grid and emit tables and plots"),
        ("panels", "write qualitative PGM panels for a trained model"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="path to a key=value config file")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--out", default="out", help="output directory")
    return p


def _setup(args):
    cfg = ExperimentConfig.from_path(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, seed, out


def _model_tag(enc_name, strategy, task):
    return f"{enc_name}_{strategy}_{task}"


def cmd_synth(args):
    cfg, seed, out = _setup(args)
    for task, samples in generate_datasets(cfg, seed).items():
        tdir = out / task
        tdir.mkdir(parents=True, exist_ok=True)
        index = []
        for i, s in enumerate(samples):
            inp, lab = f"input_{i:05d}.sgth", f"label_{i:05d}.sgth"
            write_gather(tdir / inp, s.input)
            write_gather(tdir / lab, s.label)
            index.append({"input": inp, "label": lab, "task": task})
        with open(tdir / "index.json", "w") as f:
            json.dump(index, f, indent=1)
        print(f"{task}: {len(samples)} samples -> {tdir}")
    return 0


def cmd_pretrain(args):
    cfg, seed, out = _setup(args)
    for enc_name, enc_cfg in cfg.encoders():
        path = _pretrain_checkpoint(cfg, enc_name, enc_cfg, seed, out, print)
        print(f"{enc_name}: checkpoint {path}")
    return 0


def cmd_train(args):
    cfg, seed, out = _setup(args)
    datasets = generate_datasets(cfg, seed)
    splits = {t: split_dataset(d, cfg.eval_split) for t, d in datasets.items()}
    decoder_cfg = cfg.decoder_config()
    checkpoints = {}
    failures = 0
    histories = {}
    for enc_name, enc_cfg in cfg.encoders():
        for strategy_kind in cfg.strategies():
            try:
                if strategy_kind in ("frozen", "fine-tuned") and enc_name not in checkpoints:
                    checkpoints[enc_name] = _pretrain_checkpoint(cfg, enc_name, enc_cfg, seed, out, print)
                strategy = TrainingStrategy(strategy_kind, checkpoints.get(enc_name))
                for task in cfg.tasks():
                    train_set, _ = splits[task]
                    tcfg = cfg.train_config(subseed(seed, "train", enc_name, strategy_kind, task))
                    model, history = train_downstream(enc_cfg, decoder_cfg, strategy, train_set, tcfg)
                    tag = _model_tag(enc_name, strategy_kind, task)
                    save_checkpoint(model.store, out / f"{tag}.spck")
                    histories[tag] = history
                    print(f"{tag}: loss {history[0]:.4f} -> {history[-1]:.4f}")
            except Exception as exc:
                failures += 1
                print(f"FAILED {enc_name}/{strategy_kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
    with open(out / "loss_histories.json", "w") as f:
        json.dump(histories, f, indent=1, sort_keys=True)
    return 1 if failures else 0


def cmd_eval(args):
    cfg, seed, out = _setup(args)
    datasets = generate_datasets(cfg, seed)
    splits = {t: split_dataset(d, cfg.eval_split) for t, d in datasets.items()}
    decoder_cfg = cfg.decoder_config()
    timing = cfg.timing_options()
    rows = []
    failures = 0
    for enc_name, enc_cfg in cfg.encoders():
        for strategy_kind in cfg.strategies():
            row = ReportRow(enc_name, enc_cfg.archetype, enc_cfg.hierarchical, strategy_kind)
            rows.append(row)
            try:
                ssims = {}
                for task in cfg.tasks():
                    _, eval_set = splits[task]
                    hw = eval_set[0].input.samples.shape
                    encoder = build_encoder(enc_cfg, seed=0, dtype=np.float32)
                    decoder = build_decoder(decoder_cfg, enc_cfg.pyramid_shapes(hw), hw, seed=0, dtype=np.float32)
                    model = EncoderDecoder(encoder, decoder)
                    load_into(model.store, str(out / f"{_model_tag(enc_name, strategy_kind, task)}.spck"))
                    m, p, s = evaluate_model(model, eval_set)
                    ssims[task] = s
                    if timing["enabled"]:
                        tr = time_inference(
                            lambda arrays: [model.predict(a) for a in arrays],
                            batch=timing["batch"], shape=hw,
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
                    print(f"{enc_name}/{strategy_kind}/{task}: ssim={s:.4f} psnr={p:.2f}dB")
                if set(ssims) == {"demultiple", "interpolation", "denoise"}:
                    row.combined = combined_ssim(ssims)
            except Exception as exc:
                failures += 1
                row.status, row.error = "failed", f"{type(exc).__name__}: {exc}"
                print(f"FAILED {enc_name}/{strategy_kind}: {row.error}", file=sys.stderr)
    emit_report(rows, "csv", out / "eval.csv")
    emit_report(rows, "json", out / "eval.json")
    return 1 if failures else 0


def cmd_bench(args):
    cfg, seed, out = _setup(args)
    timing = cfg.timing_options()
    hw = _task_hw(cfg, cfg.tasks()[0])
    lines = ["name,archetype,params_encoder,latency_s,throughput_gps"]
    for enc_name, enc_cfg in cfg.encoders():
        encoder = build_encoder(enc_cfg, seed=subseed(seed, "bench", enc_name), dtype=np.float32)
        decoder = build_decoder(cfg.decoder_config(), enc_cfg.pyramid_shapes(hw), hw,
                                seed=subseed(seed, "bench-dec", enc_name), dtype=np.float32)
        model = EncoderDecoder(encoder, decoder)
        tr = time_inference(
            lambda arrays: [model.predict(a) for a in arrays],
            batch=timing["batch"], shape=hw, warmup=timing["warmup"], reps=max(timing["reps"], 3),
        )
        print(f"{enc_name}: {tr.latency_s * 1e3:.1f} ms/batch, {tr.throughput_gps:.1f} gathers/s")
        lines.append(f"{enc_name},{enc_cfg.archetype},{encoder.param_count},"
                     f"{tr.latency_s:.6g},{tr.throughput_gps:.6g}")
    with open(out / "bench.csv", "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


def cmd_report(args):
    cfg, seed, out = _setup(args)
    rows = run_experiment(cfg, seed=seed, out_dir=out, log=print)
    emit_report(rows, "csv", out / "report.csv")
    emit_report(rows, "json", out / "report.json")
    plottable = [r for r in rows if not r.failed and r.combined is not None]
    if plottable:
        emit_scatter(rows, "params", out / "scatter_params.svg")
        emit_scatter(rows, "dataset_size", out / "scatter_dataset_size.svg", log_x=True)
        emit_scatter(rows, "latency", out / "scatter_latency.svg")
    failures = [r for r in rows if r.failed]
    for r in failures:
        print(f"FAILED {r.name}/{r.strategy}: {r.error}", file=sys.stderr)
    print(f"report written to {out} ({len(rows) - len(failures)}/{len(rows)} rows ok)")
    return 1 if failures else 0


def cmd_panels(args):
    cfg, seed, out = _setup(args)
    task = cfg.raw.get("panels.task", cfg.tasks()[0])
    n = int(cfg.raw.get("panels.count", "2"))
    datasets = generate_datasets(cfg, seed)
    if task not in datasets:
        print(f"task {task!r} not in config tasks", file=sys.stderr)
        return 1
    train_set, eval_set = split_dataset(datasets[task], cfg.eval_split)
    enc_name, enc_cfg = cfg.encoders()[0]
    decoder_cfg = cfg.decoder_config()
    hw = eval_set[0].input.samples.shape
    ckpt = cfg.raw.get("panels.checkpoint")
    encoder = build_encoder(enc_cfg, seed=0, dtype=np.float32)
    decoder = build_decoder(decoder_cfg, enc_cfg.pyramid_shapes(hw), hw, seed=0, dtype=np.float32)
    model = EncoderDecoder(encoder, decoder)
    if ckpt:
        load_into(model.store, ckpt)
    else:
        tcfg = cfg.train_config(subseed(seed, "train", enc_name, "scratch", task))
        model, _ = train_downstream(enc_cfg, decoder_cfg, TrainingStrategy("scratch"), train_set, tcfg)
    paths = emit_panels(model, eval_set[:n], task, str(out))
    for p in paths:
        print(p)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "report": cmd_report,
    "panels": cmd_panels,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
