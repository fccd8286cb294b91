import numpy as np

from dentgan.network import ops


def naive_conv2d(x, w, b, stride):
    """Direct-summation convolution oracle (same-ceil padding)."""
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh, ph0, _ = ops.same_pads(h, kh, stride)
    ow, pw0, _ = ops.same_pads(wd, kw, stride)
    y = np.zeros((n, oc, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for o in range(oc):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for a in range(kh):
                            for bb in range(kw):
                                yy = i * stride + a - ph0
                                xx = j * stride + bb - pw0
                                if 0 <= yy < h and 0 <= xx < wd:
                                    acc += x[ni, ci, yy, xx] * w[o, ci, a, bb]
                    y[ni, o, i, j] = acc + b[o]
    return y


def naive_deconv2d(x, w, b, stride):
    """Direct-scatter transposed-convolution oracle (output = stride * input)."""
    n, c, h, wd = x.shape
    _, oc, kh, kw = w.shape
    big_h, big_w = stride * h, stride * wd
    _, ph0, ph1 = ops.same_pads(big_h, kh, stride)
    _, pw0, pw1 = ops.same_pads(big_w, kw, stride)
    ypad = np.zeros((n, oc, big_h + ph0 + ph1, big_w + pw0 + pw1), dtype=x.dtype)
    for ni in range(n):
        for ci in range(c):
            for i in range(h):
                for j in range(wd):
                    for o in range(oc):
                        for a in range(kh):
                            for bb in range(kw):
                                ypad[ni, o, i * stride + a, j * stride + bb] += (
                                    x[ni, ci, i, j] * w[ci, o, a, bb]
                                )
    return ypad[:, :, ph0 : ph0 + big_h, pw0 : pw0 + big_w] + b[None, :, None, None]
