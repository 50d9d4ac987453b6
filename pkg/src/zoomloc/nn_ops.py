"""Network primitives with exact reverse-mode gradients.

Convolution is explicit im2col + matrix product (no external kernel
dependency, deterministic). Bilinear sampling uses the half-pixel-center
convention; the lerp form preserves constants exactly.
"""

from __future__ import annotations

import numpy as np

from .tensor import NumericsError, ShapeError, Tensor, as_tensor, from_op


# -- convolution ----------------------------------------------------------------


def _im2col(xp: np.ndarray, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, out_h, out_w), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride]
    return cols.reshape(n, c * k * k, out_h * out_w)


def _col2im(gcols: np.ndarray, xp_shape, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c = xp_shape[:2]
    gxp = np.zeros(xp_shape, dtype=gcols.dtype)
    gc = gcols.reshape(n, c, k, k, out_h, out_w)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += gc[:, :, i, j]
    return gxp


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with OCkk weights.

    Output spatial size is floor((H + 2p - k) / s) + 1. Gradients are
    defined w.r.t. input, weight and bias.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be NCHW (4 axes), got {x.ndim}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d: weight must be OCkk (4 axes), got {weight.ndim}")
    n, c, h, w = x.shape
    o, cw, kh, kw = weight.shape
    if kh != kw:
        raise ShapeError(f"conv2d: kernel must be square, got {kh}x{kw}")
    if cw != c:
        raise ShapeError(f"conv2d: input channel axis 1 has size {c} but weight expects {cw}")
    if bias is not None and bias.shape != (o,):
        raise ShapeError(f"conv2d: bias axis 0 has size {bias.shape} but weight has {o} outputs")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be >= 1, got {stride}")
    k = kh
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ShapeError(
            f"conv2d: kernel {k} does not fit padded input {h + 2 * padding}x{w + 2 * padding}"
        )
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1

    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    cols = _im2col(xp, k, stride, out_h, out_w)
    w2 = weight.data.reshape(o, c * k * k)
    out = np.matmul(w2, cols)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1)
    out = out.reshape(n, o, out_h, out_w)

    def backward(g):
        gr = g.reshape(n, o, out_h * out_w)
        gw = np.matmul(gr, cols.transpose(0, 2, 1)).sum(axis=0).reshape(o, c, k, k)
        gb = gr.sum(axis=(0, 2)) if bias is not None else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, gr)
            gxp = _col2im(gcols, xp.shape, k, stride, out_h, out_w)
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        return gx, gw, gb

    parents = (x, weight, bias) if bias is not None else (x, weight)
    if bias is None:
        return from_op(out, parents, lambda g: backward(g)[:2])
    return from_op(out, parents, backward)


# -- batch normalization ----------------------------------------------------------


def batchnorm2d(
    x,
    gamma,
    beta,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes with batch statistics and updates the running
    arrays in place (unbiased variance, momentum 0.1). Eval mode uses the
    running statistics.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"batchnorm2d: input must be NCHW, got ndim {x.ndim}")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm2d: gamma/beta must have shape ({c},)")
    count = n * h * w
    gs = gamma.data.reshape(1, c, 1, 1)
    bs = beta.data.reshape(1, c, 1, 1)

    if training:
        if count < 2:
            raise ValueError("batchnorm2d: train mode needs at least 2 elements per channel")
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        inv = 1.0 / np.sqrt(var + eps)
        xc = x.data - mu.reshape(1, c, 1, 1)
        xhat = xc * inv.reshape(1, c, 1, 1)
        out = gs * xhat + bs
        var_unbiased = var * (count / (count - 1))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.astype(running_mean.dtype)
        running_var *= 1.0 - momentum
        running_var += momentum * var_unbiased.astype(running_var.dtype)

        def backward(g):
            dgamma = (g * xhat).sum(axis=(0, 2, 3))
            dbeta = g.sum(axis=(0, 2, 3))
            gx = None
            if x.requires_grad:
                dxhat = g * gs
                inv4 = inv.reshape(1, c, 1, 1)
                dvar = (dxhat * xc).sum(axis=(0, 2, 3)) * (-0.5) * inv**3
                dmu = -(dxhat.sum(axis=(0, 2, 3))) * inv + dvar * (-2.0 / count) * xc.sum(axis=(0, 2, 3))
                gx = dxhat * inv4
                gx += (2.0 / count) * xc * dvar.reshape(1, c, 1, 1)
                gx += dmu.reshape(1, c, 1, 1) / count
            return gx, dgamma, dbeta

        return from_op(out, (x, gamma, beta), backward)

    inv = (1.0 / np.sqrt(running_var + eps)).astype(x.dtype)
    rm = running_mean.astype(x.dtype, copy=False)
    xhat = (x.data - rm.reshape(1, c, 1, 1)) * inv.reshape(1, c, 1, 1)
    out = gs * xhat + bs

    def backward_eval(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        gx = g * (gs * inv.reshape(1, c, 1, 1)) if x.requires_grad else None
        return gx, dgamma, dbeta

    return from_op(out, (x, gamma, beta), backward_eval)


# -- softmax -----------------------------------------------------------------------


def softmax(x, axis: int) -> Tensor:
    """Numerically stabilized softmax along ``axis``; rejects non-finite input."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax: axis {axis} invalid for shape {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericsError("softmax: input contains NaN or Inf")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return from_op(out, (x,), backward)


# -- bilinear sampling --------------------------------------------------------------


def _bilinear_gather(data: np.ndarray, rows: np.ndarray, cols: np.ndarray, padding_mode: str):
    """Forward bilinear gather. Returns output plus tap info for backward.

    data: (N, C, H, W); rows/cols: (N, outH, outW) float sample positions
    in pixel-center coordinates. ``border`` clamps positions to the image,
    ``zeros`` treats outside taps as zero.
    """
    n, c, h, w = data.shape
    if padding_mode == "border":
        rows = np.clip(rows, 0.0, h - 1.0)
        cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    dr = (rows - r0).astype(data.dtype)
    dc = (cols - c0).astype(data.dtype)
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    r1 = r0 + 1
    c1 = c0 + 1

    if padding_mode == "zeros":
        masks = [
            ((r0 >= 0) & (r0 < h) & (c0 >= 0) & (c0 < w)),
            ((r0 >= 0) & (r0 < h) & (c1 >= 0) & (c1 < w)),
            ((r1 >= 0) & (r1 < h) & (c0 >= 0) & (c0 < w)),
            ((r1 >= 0) & (r1 < h) & (c1 >= 0) & (c1 < w)),
        ]
    elif padding_mode == "border":
        r1 = np.minimum(r1, h - 1)
        c1 = np.minimum(c1, w - 1)
        masks = [None, None, None, None]
    else:
        raise ValueError(f"unknown padding_mode {padding_mode!r}")

    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r1, 0, h - 1)
    c0c = np.clip(c0, 0, w - 1)
    c1c = np.clip(c1, 0, w - 1)

    nidx = np.arange(n).reshape(n, 1, 1)

    def tap(ri, ci, mask):
        v = data[nidx, :, ri, ci]  # (N, outH, outW, C)
        if mask is not None:
            v = v * mask[..., None]
        return v

    v00 = tap(r0c, c0c, masks[0])
    v01 = tap(r0c, c1c, masks[1])
    v10 = tap(r1c, c0c, masks[2])
    v11 = tap(r1c, c1c, masks[3])

    # lerp form: exact for constant images under border clamping
    dr4 = dr[..., None]
    dc4 = dc[..., None]
    top = v00 + dc4 * (v01 - v00)
    bot = v10 + dc4 * (v11 - v10)
    out = top + dr4 * (bot - top)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    taps = (r0c, r1c, c0c, c1c, dr, dc, masks)
    return out, taps


def _bilinear_scatter(g: np.ndarray, data_shape, taps) -> np.ndarray:
    n, c, h, w = data_shape
    r0c, r1c, c0c, c1c, dr, dc, masks = taps
    w00 = (1.0 - dr) * (1.0 - dc)
    w01 = (1.0 - dr) * dc
    w10 = dr * (1.0 - dc)
    w11 = dr * dc
    gx = np.zeros((n, c, h, w), dtype=g.dtype)
    g_nhwc = g.transpose(0, 2, 3, 1)  # (N, outH, outW, C)
    flat = gx.reshape(n, c, h * w)
    nidx = np.arange(n).reshape(n, 1, 1)
    hw = h * w
    for ri, ci, wt, mask in (
        (r0c, c0c, w00, masks[0]),
        (r0c, c1c, w01, masks[1]),
        (r1c, c0c, w10, masks[2]),
        (r1c, c1c, w11, masks[3]),
    ):
        contrib = g_nhwc * wt[..., None]
        if mask is not None:
            contrib = contrib * mask[..., None]
        lin = (nidx * hw + ri * w + ci).ravel()  # (N*outH*outW,)
        vals = contrib.reshape(-1, c)
        for ch in range(c):
            add = np.bincount(lin, weights=vals[:, ch], minlength=n * hw)
            flat[:, ch, :] += add.reshape(n, hw).astype(g.dtype)
    return gx


def bilinear_sample(x, rows: np.ndarray, cols: np.ndarray, padding_mode: str = "border") -> Tensor:
    """Differentiable bilinear sampling of NCHW ``x`` at float positions.

    ``rows``/``cols`` are (N, outH, outW) constants in pixel-center
    coordinates of x's grid. Gradient w.r.t. x is the transpose of the
    interpolation weights.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"bilinear_sample: input must be NCHW, got ndim {x.ndim}")
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    if rows.shape != cols.shape or rows.ndim != 3 or rows.shape[0] != x.shape[0]:
        raise ShapeError(
            f"bilinear_sample: grids must be (N, outH, outW) with N={x.shape[0]}, got {rows.shape} and {cols.shape}"
        )
    out, taps = _bilinear_gather(x.data, rows, cols, padding_mode)

    def backward(g):
        return (_bilinear_scatter(g, x.shape, taps),)

    return from_op(out, (x,), backward)


def _resize_grid(in_h, in_w, out_h, out_w, align_corners):
    if align_corners:
        rr = np.linspace(0.0, in_h - 1.0, out_h) if out_h > 1 else np.zeros(1)
        cc = np.linspace(0.0, in_w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    else:
        rr = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
        cc = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    rows = np.repeat(rr[:, None], out_w, axis=1)
    cols = np.repeat(cc[None, :], out_h, axis=0)
    return rows, cols


def bilinear_resize(x, out_h: int, out_w: int, align_corners: bool = False) -> Tensor:
    """Bilinear resize of an NCHW tensor (half-pixel centers by default)."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"bilinear_resize: input must be NCHW, got ndim {x.ndim}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bilinear_resize: output size must be >= 1, got {out_h}x{out_w}")
    n = x.shape[0]
    rows, cols = _resize_grid(x.shape[2], x.shape[3], out_h, out_w, align_corners)
    rows = np.broadcast_to(rows, (n, out_h, out_w))
    cols = np.broadcast_to(cols, (n, out_h, out_w))
    return bilinear_sample(x, rows, cols, padding_mode="border")


def resize_image_np(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain numpy bilinear resize of a (C, H, W) image, same convention."""
    out, _ = _bilinear_gather(
        img[None],
        *(np.broadcast_to(a, (1, out_h, out_w)) for a in _resize_grid(img.shape[1], img.shape[2], out_h, out_w, False)),
        "border",
    )
    return out[0]


# -- loss ------------------------------------------------------------------------------


def mse_loss(pred, target) -> Tensor:
    """Mean over all elements of the squared difference."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shapes differ, {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = np.asarray((diff * diff).mean(), dtype=pred.dtype)
    scale = 2.0 / pred.size

    def backward(g):
        gp = g * scale * diff
        return gp, -gp

    return from_op(out, (pred, target), backward)
