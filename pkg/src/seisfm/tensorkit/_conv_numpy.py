"""Pure-numpy conv2d kernels (fallback backend).

Each routine accumulates one vectorized term per kernel tap, so memory stays
O(input) even for 7x7 kernels.
"""

import numpy as np


def conv2d_forward(x, k, stride, pad, groups):
    ci, h, w = x.shape
    co, cig, kh, kw = k.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((co, ho, wo), dtype=x.dtype)
    cog = co // groups
    for ky in range(kh):
        for kx in range(kw):
            xs = x[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride]
            if groups == 1:
                y += np.einsum("chw,oc->ohw", xs, k[:, :, ky, kx])
            elif cig == 1 and cog == 1:  # depthwise
                y += xs * k[:, 0, ky, kx][:, None, None]
            else:
                for g in range(groups):
                    y[g * cog : (g + 1) * cog] += np.einsum(
                        "chw,oc->ohw",
                        xs[g * cig : (g + 1) * cig],
                        k[g * cog : (g + 1) * cog, :, ky, kx],
                    )
    return y


def conv2d_grad_input(dy, k, stride, pad, h, w, groups):
    co, ho, wo = dy.shape
    _, cig, kh, kw = k.shape
    ci = cig * groups
    cog = co // groups
    dxp = np.zeros((ci, h + 2 * pad, w + 2 * pad), dtype=dy.dtype)
    for ky in range(kh):
        for kx in range(kw):
            tgt = dxp[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride]
            if groups == 1:
                tgt += np.einsum("ohw,oc->chw", dy, k[:, :, ky, kx])
            elif cig == 1 and cog == 1:
                tgt += dy * k[:, 0, ky, kx][:, None, None]
            else:
                for g in range(groups):
                    tgt[g * cig : (g + 1) * cig] += np.einsum(
                        "ohw,oc->chw",
                        dy[g * cog : (g + 1) * cog],
                        k[g * cog : (g + 1) * cog, :, ky, kx],
                    )
    if pad:
        return np.ascontiguousarray(dxp[:, pad : pad + h, pad : pad + w])
    return dxp


def conv2d_grad_kernel(dy, x, stride, pad, kh, kw, groups):
    co, ho, wo = dy.shape
    ci, h, w = x.shape
    cig = ci // groups
    cog = co // groups
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    dk = np.zeros((co, cig, kh, kw), dtype=dy.dtype)
    for ky in range(kh):
        for kx in range(kw):
            xs = x[:, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride]
            if groups == 1:
                dk[:, :, ky, kx] = np.einsum("ohw,chw->oc", dy, xs)
            elif cig == 1 and cog == 1:
                dk[:, 0, ky, kx] = np.einsum("chw,chw->c", dy, xs)
            else:
                for g in range(groups):
                    dk[g * cog : (g + 1) * cog, :, ky, kx] = np.einsum(
                        "ohw,chw->oc",
                        dy[g * cog : (g + 1) * cog],
                        xs[g * cig : (g + 1) * cig],
                    )
    return dk
