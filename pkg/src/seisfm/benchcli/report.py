"""Report emission: CSV/JSON tables, SVG scatter plots, PGM image panels."""

from __future__ import annotations

import json

import numpy as np

CSV_COLUMNS = [
    "name", "archetype", "hierarchical", "strategy", "params_encoder", "params_total",
    "task", "mse", "psnr_db", "ssim", "ssim_combined", "latency_s", "throughput_gps",
]

ARCHETYPE_COLORS = {
    "conv-hierarchical": "#1f77b4",
    "windowed-attn-hierarchical": "#d62728",
    "global-attn-nonhierarchical": "#2ca02c",
    "hybrid-hierarchical": "#9467bd",
}
# marker shape encodes the training strategy
STRATEGY_SHAPES = {"scratch": "circle", "frozen": "square", "fine-tuned": "triangle"}


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def rows_to_table(rows):
    """One table line per (row, task), successful rows only, stable order."""
    table = []
    for row in rows:
        if row.failed:
            continue
        for task in ("demultiple", "interpolation", "denoise"):
            rec = row.records.get(task)
            if rec is None:
                continue
            table.append({
                "name": row.name,
                "archetype": row.archetype,
                "hierarchical": row.hierarchical,
                "strategy": row.strategy,
                "params_encoder": rec.params_encoder,
                "params_total": rec.params_total,
                "task": task,
                "mse": rec.mse,
                "psnr_db": rec.psnr_db,
                "ssim": rec.ssim,
                "ssim_combined": row.combined.combined if row.combined else "",
                "latency_s": rec.latency_s,
                "throughput_gps": rec.throughput_gps,
            })
    return table


def emit_report(rows, fmt, path):
    """Write the metrics table as csv or json.

    The JSON variant additionally records failed rows with their error; the
    CSV keeps only numeric rows so every field parses as a number.
    """
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for entry in rows_to_table(rows):
            lines.append(",".join(_fmt(entry[c]) for c in CSV_COLUMNS))
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    elif fmt == "json":
        payload = {
            "rows": rows_to_table(rows),
            "failures": [
                {"name": r.name, "strategy": r.strategy, "error": r.error}
                for r in rows if r.failed
            ],
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)
            f.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


# -- scatter plots -------------------------------------------------------------

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 20, 50  # margins


def _axis_ticks(lo, hi, log):
    if log:
        lo_e = int(np.floor(np.log10(lo)))
        hi_e = int(np.ceil(np.log10(hi)))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo
    step = 10 ** np.floor(np.log10(span / 4)) if span > 0 else 1.0
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 5:
            step *= mult
            break
    first = np.ceil(lo / step) * step
    return list(np.arange(first, hi + step / 2, step))


def _x_value(row, x_axis):
    if x_axis == "params":
        return next(iter(row.records.values())).params_encoder
    if x_axis == "dataset_size":
        return float(np.mean(list(row.dataset_sizes.values())))
    if x_axis == "latency":
        return row.mean_latency()
    raise ValueError(f"unknown x axis {x_axis!r}; expected params, dataset_size, or latency")


X_LABELS = {
    "params": "encoder parameters",
    "dataset_size": "training samples",
    "latency": "inference latency (s/batch)",
}


def emit_scatter(rows, x_axis, path, log_x=False):
    """Scatter of combined SSIM against params, dataset size, or latency.

    One marker per successful row with a combined score; marker shape encodes
    the strategy and fill color the archetype.
    """
    usable = [r for r in rows if not r.failed and r.combined is not None and r.records]
    if not usable:
        raise ValueError("no rows with a combined score to plot")
    xs = [_x_value(r, x_axis) for r in usable]
    ys = [r.combined.combined for r in usable]
    if log_x and min(xs) <= 0:
        raise ValueError("log-scale x axis requires positive values")

    x_lo, x_hi = min(xs), max(xs)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo * 0.9 - 1e-9, x_hi * 1.1 + 1e-9
    y_lo, y_hi = min(0.0, min(ys)), max(3.0, max(ys))

    def sx(v):
        if log_x:
            t = (np.log10(v) - np.log10(x_lo)) / (np.log10(x_hi) - np.log10(x_lo))
        else:
            t = (v - x_lo) / (x_hi - x_lo)
        return _ML + t * (_W - _ML - _MR)

    def sy(v):
        t = (v - y_lo) / (y_hi - y_lo)
        return _H - _MB - t * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for t in _axis_ticks(x_lo, x_hi, log_x):
        if t < x_lo * 0.999 or t > x_hi * 1.001:
            continue
        px = sx(t)
        parts.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in _axis_ticks(y_lo, y_hi, False):
        py = sy(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" font-size="11" text-anchor="end">{t:g}</text>')
    xlabel = X_LABELS[x_axis] + (" (log)" if log_x else "")
    parts.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" font-size="13" text-anchor="middle">{xlabel}</text>')
    parts.append(
        f'<text x="16" y="{(_MT + _H - _MB) / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2})">combined SSIM</text>'
    )

    for row, x, y in zip(usable, xs, ys):
        px, py = sx(x), sy(y)
        color = ARCHETYPE_COLORS.get(row.archetype, "#7f7f7f")
        shape = STRATEGY_SHAPES.get(row.strategy, "circle")
        title = f"<title>{row.name} / {row.strategy}: {y:.4f}</title>"
        if shape == "circle":
            parts.append(f'<circle class="marker" cx="{px:.1f}" cy="{py:.1f}" r="6" fill="{color}">{title}</circle>')
        elif shape == "square":
            parts.append(
                f'<rect class="marker" x="{px - 5.5:.1f}" y="{py - 5.5:.1f}" width="11" height="11" '
                f'fill="{color}">{title}</rect>'
            )
        else:  # triangle
            pts = f"{px:.1f},{py - 7:.1f} {px - 6:.1f},{py + 5:.1f} {px + 6:.1f},{py + 5:.1f}"
            parts.append(f'<polygon class="marker" points="{pts}" fill="{color}">{title}</polygon>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


# -- qualitative panels ----------------------------------------------------------


def to_grayscale(panel, sigma):
    """Clip at +-3 sigma and map linearly to 8-bit, 0 at mid-gray."""
    if sigma <= 0:
        sigma = 1.0
    clipped = np.clip(panel, -3.0 * sigma, 3.0 * sigma)
    return np.rint((clipped + 3.0 * sigma) / (6.0 * sigma) * 255.0).astype(np.uint8)


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path):
    with open(path, "rb") as f:
        raw = f.read()
    magic, dims, maxval, rest = raw.split(b"\n", 3)
    if magic != b"P5":
        raise ValueError(f"not a binary PGM: {magic!r}")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(rest[: w * h], dtype=np.uint8).reshape(h, w)


def panel_set(model, sample):
    """The panel arithmetic per task, computed in float64 before quantization.

    interpolation: G, D(G), G*, R = (G - G*) x 10
    denoise:       G, G+N, G*, N* = (G+N) - G*
    demultiple:    P+M, P*, M* = (P+M) - P*
    """
    pred = model.predict(sample.input.samples)
    label = sample.label.samples.astype(np.float64)
    inp = sample.input.samples.astype(np.float64)
    if sample.task == "interpolation":
        return [("label", label), ("decimated", inp), ("pred", pred), ("residual_x10", (label - pred) * 10.0)]
    if sample.task == "denoise":
        return [("label", label), ("noisy", inp), ("pred", pred), ("pred_noise", inp - pred)]
    return [("input", inp), ("pred_primaries", pred), ("pred_multiples", inp - pred)]


def emit_panels(model, samples, task, out_dir):
    """Write the qualitative PGM panels for each sample; returns file paths."""
    paths = []
    for i, sample in enumerate(samples):
        if sample.task != task:
            raise ValueError(f"sample {i} is for task {sample.task!r}, expected {task!r}")
        sigma = float(np.std(sample.label.samples))
        for name, panel in panel_set(model, sample):
            path = f"{out_dir}/{task}_{i:03d}_{name}.pgm"
            write_pgm(path, to_grayscale(panel, sigma))
            paths.append(path)
    return paths
