"""Finite-difference gradient checking for scalar-valued tensor functions."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward


class CoordReport:
    __slots__ = ("index", "analytic", "numeric", "rel_err", "ok")

    def __init__(self, index, analytic, numeric, rel_err, ok):
        self.index = index
        self.analytic = analytic
        self.numeric = numeric
        self.rel_err = rel_err
        self.ok = ok

    def __repr__(self):
        flag = "ok" if self.ok else "FAIL"
        return f"[{flag}] idx={self.index} analytic={self.analytic:.6e} numeric={self.numeric:.6e} rel={self.rel_err:.3e}"


class GradCheckReport:
    def __init__(self, coords):
        self.coords = coords

    @property
    def passed(self):
        return all(c.ok for c in self.coords)

    @property
    def max_rel_err(self):
        return max((c.rel_err for c in self.coords), default=0.0)

    def failures(self):
        return [c for c in self.coords if not c.ok]


def grad_check(f, point, h=1e-5, tol=1e-4, sample=None, rng=None):
    """Compare the backward() gradient of f at `point` against central differences.

    f must map a Tensor to a scalar Tensor. `sample` limits the check to that
    many randomly chosen coordinates (all coordinates when None). Relative
    error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    base = np.array(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(base.copy(), requires_grad=True)
    loss = f(x)
    backward(loss)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(base)

    n = base.size
    if sample is not None and sample < n:
        if rng is None:
            rng = np.random.default_rng(0)
        flat_idx = rng.choice(n, size=sample, replace=False)
    else:
        flat_idx = np.arange(n)

    coords = []
    flat = base.reshape(-1)
    for fi in flat_idx:
        fi = int(fi)
        orig = flat[fi]
        flat[fi] = orig + h
        fp = float(f(Tensor(base.copy())).data)
        flat[fi] = orig - h
        fm = float(f(Tensor(base.copy())).data)
        flat[fi] = orig
        numeric = (fp - fm) / (2.0 * h)
        a = float(analytic.reshape(-1)[fi])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        idx = np.unravel_index(fi, base.shape)
        coords.append(CoordReport(idx, a, numeric, rel, rel < tol))
    return GradCheckReport(coords)
