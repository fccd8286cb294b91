"""Primitive tensor operations with explicit reverse-mode derivatives.

Layout is NCHW throughout.  Convolutions use kernel 5, stride 2 with
"same-ceil" padding: the output spatial size is ceil(in / stride) and the
total padding splits floor(total/2) before, the rest after.  Transposed
convolution is the exact linear adjoint of that convolution, so its
output size is exactly stride * input size.

Each ``*_forward`` returns (output, cache); the matching ``*_backward``
takes the upstream gradient and the cache and returns gradients for its
inputs and parameters.  All derivatives here are verified against central
finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def same_pads(in_size: int, kernel: int, stride: int):
    """(out_size, pad_begin, pad_end) for same-ceil convolution geometry."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return out, total // 2, total - total // 2


def _gather_core(xp, w, stride, oh, ow):
    """Correlation: xp (N,C,Hp,Wp) with w (OC,C,KH,KW) -> (N,OC,OH,OW)."""
    n = xp.shape[0]
    oc, _, kh, kw = w.shape
    acc = np.zeros((n, oh, ow, oc), dtype=np.result_type(xp, w))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            acc += np.tensordot(patch, w[:, :, i, j], axes=([1], [1]))
    return acc.transpose(0, 3, 1, 2)


def _scatter_core(y, w, stride, padded_h, padded_w):
    """Adjoint of _gather_core: y (N,OC,OH,OW) scattered back to (N,C,Hp,Wp)."""
    n, _, oh, ow = y.shape
    _, c, kh, kw = w.shape
    out = np.zeros((n, c, padded_h, padded_w), dtype=np.result_type(y, w))
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(y, w[:, :, i, j], axes=([1], [0]))  # (N,OH,OW,C)
            out[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    return out


def _weight_core(xp, y, stride, kh, kw):
    """dw[oc,c,i,j] = sum_n,oh,ow y[n,oc,oh,ow] * xp[n,c,oh*s+i,ow*s+j]."""
    oc = y.shape[1]
    c = xp.shape[1]
    _, _, oh, ow = y.shape
    dw = np.empty((oc, c, kh, kw), dtype=np.result_type(xp, y))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            dw[:, :, i, j] = np.tensordot(y, patch, axes=([0, 2, 3], [0, 2, 3]))
    return dw


def conv2d_forward(x, w, b, stride: int):
    """x (N,C,H,W), w (OC,C,KH,KW), b (OC,) -> (N,OC,ceil(H/s),ceil(W/s))."""
    n, c, h, wd = x.shape
    kh, kw = w.shape[2], w.shape[3]
    oh, ph0, ph1 = same_pads(h, kh, stride)
    ow, pw0, pw1 = same_pads(wd, kw, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    y = _gather_core(xp, w, stride, oh, ow) + b[None, :, None, None]
    cache = (xp, (h, wd), (ph0, pw0), w, stride)
    return y, cache


def conv2d_backward(dy, cache, want_param_grads=True):
    xp, (h, wd), (ph0, pw0), w, stride = cache
    dxp = _scatter_core(dy, w, stride, xp.shape[2], xp.shape[3])
    dx = dxp[:, :, ph0 : ph0 + h, pw0 : pw0 + wd]
    if not want_param_grads:
        return dx, None, None
    dw = _weight_core(xp, dy, stride, w.shape[2], w.shape[3])
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def deconv2d_forward(x, w, b, stride: int):
    """Transposed convolution: x (N,C,H,W), w (C,OC,KH,KW) -> (N,OC,sH,sW).

    Defined as the adjoint of conv2d with output size exactly stride * input
    size; the implied crop mirrors conv2d's same-ceil padding.
    """
    n, c, h, wd = x.shape
    kh, kw = w.shape[2], w.shape[3]
    big_h = stride * h
    big_w = stride * wd
    _, ph0, ph1 = same_pads(big_h, kh, stride)
    _, pw0, pw1 = same_pads(big_w, kw, stride)
    ypad = _scatter_core(x, w, stride, big_h + ph0 + ph1, big_w + pw0 + pw1)
    y = ypad[:, :, ph0 : ph0 + big_h, pw0 : pw0 + big_w] + b[None, :, None, None]
    cache = (x, (ph0, ph1, pw0, pw1), w, stride, (big_h, big_w))
    return y, cache


def deconv2d_backward(dy, cache, want_param_grads=True):
    x, (ph0, ph1, pw0, pw1), w, stride, (big_h, big_w) = cache
    dyp = np.pad(dy, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    h, wd = x.shape[2], x.shape[3]
    dx = _gather_core(dyp, w, stride, h, wd)
    if not want_param_grads:
        return dx, None, None
    dw = _weight_core(dyp, x, stride, w.shape[2], w.shape[3])
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def dense_forward(x, w, b):
    """x (N,D), w (D,M), b (M,)."""
    y = x @ w + b
    return y, (x, w)


def dense_backward(dy, cache, want_param_grads=True):
    x, w = cache
    dx = dy @ w.T
    if not want_param_grads:
        return dx, None, None
    return dx, x.T @ dy, dy.sum(axis=0)


def pixel_dense_forward(x, w, b):
    """Per-pixel affine over channels: x (N,C,H,W), w (C,M), b (M,)."""
    y = np.tensordot(x, w, axes=([1], [0])).transpose(0, 3, 1, 2) + b[None, :, None, None]
    return y, (x, w)


def pixel_dense_backward(dy, cache, want_param_grads=True):
    x, w = cache
    dx = np.tensordot(dy, w, axes=([1], [1])).transpose(0, 3, 1, 2)
    if not want_param_grads:
        return dx, None, None
    dw = np.tensordot(x, dy, axes=([0, 2, 3], [0, 2, 3]))
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, run_mean, run_var, train: bool):
    """Per-channel normalization over (N, H, W).

    Train mode normalizes with biased batch statistics and returns updated
    running statistics (momentum 0.9); eval mode uses the running ones.
    """
    axes = (0, 2, 3)
    shape = (1, -1, 1, 1)
    if train:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_mean = BN_MOMENTUM * run_mean + (1.0 - BN_MOMENTUM) * mean
        new_var = BN_MOMENTUM * run_var + (1.0 - BN_MOMENTUM) * var
    else:
        mean = run_mean
        var = run_var
        new_mean, new_var = run_mean, run_var
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean.reshape(shape)) * inv.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    n_eff = x.shape[0] * x.shape[2] * x.shape[3]
    cache = (xhat, inv, gamma, train, n_eff)
    return y, cache, new_mean, new_var


def batchnorm_backward(dy, cache):
    xhat, inv, gamma, train, n_eff = cache
    axes = (0, 2, 3)
    shape = (1, -1, 1, 1)
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma.reshape(shape)
    if train:
        term = (
            n_eff * dxhat
            - dxhat.sum(axis=axes).reshape(shape)
            - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
        )
        dx = term * (inv.reshape(shape) / n_eff)
    else:
        dx = dxhat * inv.reshape(shape)
    return dx, dgamma, dbeta


def dropout_forward(x, rate: float, stream):
    """Inverted dropout with a mask drawn from the given rng stream."""
    mask = (stream.uniform(x.size) >= rate).astype(x.dtype).reshape(x.shape)
    scale = 1.0 / (1.0 - rate)
    return x * mask * scale, (mask, scale)


def dropout_backward(dy, cache):
    mask, scale = cache
    return dy * mask * scale


def activation_forward(x, kind: str, leaky_slope: float = 0.2):
    if kind == "none":
        return x, None
    if kind == "relu":
        y = np.maximum(x, 0.0)
        return y, x
    if kind == "leaky_relu":
        y = np.where(x >= 0.0, x, leaky_slope * x)
        return y, x
    if kind == "tanh":
        y = np.tanh(x)
        return y, y
    if kind == "sigmoid":
        e = np.exp(-np.abs(x))
        y = np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        return y, y
    raise ValueError(f"unknown activation '{kind}'")


def activation_backward(dy, kind: str, cache, leaky_slope: float = 0.2):
    if kind == "none":
        return dy
    if kind == "relu":
        return dy * (cache > 0.0)
    if kind == "leaky_relu":
        return dy * np.where(cache >= 0.0, 1.0, leaky_slope)
    if kind == "tanh":
        return dy * (1.0 - cache * cache)
    if kind == "sigmoid":
        return dy * cache * (1.0 - cache)
    raise ValueError(f"unknown activation '{kind}'")
