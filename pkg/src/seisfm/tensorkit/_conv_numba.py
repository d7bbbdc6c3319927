"""Numba-jitted conv2d kernels (default backend).

Direct loops, one output cell per iteration, accumulated in float64. No
fastmath: results must be bit-reproducible run to run.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d_forward(x, k, stride, pad, groups):
    ci, h, w = x.shape
    co, cig, kh, kw = k.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    cog = co // groups
    y = np.zeros((co, ho, wo), dtype=x.dtype)
    for o in range(co):
        c0 = (o // cog) * cig
        for oy in range(ho):
            iy0 = oy * stride - pad
            for ox in range(wo):
                ix0 = ox * stride - pad
                acc = 0.0
                for c in range(cig):
                    for ky in range(kh):
                        iy = iy0 + ky
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ix0 + kx
                            if 0 <= ix < w:
                                acc += x[c0 + c, iy, ix] * k[o, c, ky, kx]
                y[o, oy, ox] = acc
    return y


@njit(cache=True)
def conv2d_grad_input(dy, k, stride, pad, h, w, groups):
    co, ho, wo = dy.shape
    cig = k.shape[1]
    kh = k.shape[2]
    kw = k.shape[3]
    ci = cig * groups
    cog = co // groups
    dx = np.zeros((ci, h, w), dtype=dy.dtype)
    for xi in range(ci):
        g = xi // cig
        c = xi - g * cig
        o0 = g * cog
        for iy in range(h):
            for ix in range(w):
                acc = 0.0
                for ky in range(kh):
                    t = iy + pad - ky
                    if t < 0 or t % stride != 0:
                        continue
                    oy = t // stride
                    if oy >= ho:
                        continue
                    for kx in range(kw):
                        u = ix + pad - kx
                        if u < 0 or u % stride != 0:
                            continue
                        ox = u // stride
                        if ox >= wo:
                            continue
                        for og in range(cog):
                            acc += dy[o0 + og, oy, ox] * k[o0 + og, c, ky, kx]
                dx[xi, iy, ix] = acc
    return dx


@njit(cache=True)
def conv2d_grad_kernel(dy, x, stride, pad, kh, kw, groups):
    co, ho, wo = dy.shape
    ci, h, w = x.shape
    cig = ci // groups
    cog = co // groups
    dk = np.zeros((co, cig, kh, kw), dtype=dy.dtype)
    for o in range(co):
        g = o // cog
        for c in range(cig):
            xi = g * cig + c
            for ky in range(kh):
                for kx in range(kw):
                    acc = 0.0
                    for oy in range(ho):
                        iy = oy * stride - pad + ky
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(wo):
                            ix = ox * stride - pad + kx
                            if 0 <= ix < w:
                                acc += dy[o, oy, ox] * x[xi, iy, ix]
                    dk[o, c, ky, kx] = acc
    return dk
