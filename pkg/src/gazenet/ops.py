"""Convolution primitives with hand-written gradients."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, ShapeError, as_tensor


def conv2d_shape(h, w, kernel, stride, padding):
    return (h + 2 * padding - kernel[0]) // stride + 1, (w + 2 * padding - kernel[1]) // stride + 1


def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1):
    """Cross-correlation of N x C x H x W input with O x C/groups x kh x kw filters.

    groups == C gives a depthwise convolution, one filter per channel.
    """

    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")

    n, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    if c % groups or o % groups:
        raise ShapeError(f"conv2d: {groups} groups do not divide {c} input / {o} output channels")
    if cg != c // groups:
        raise ShapeError(f"conv2d: weight expects {cg * groups} input channels, input has {c}")

    ho, wo = conv2d_shape(h, w, (kh, kw), stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} does not fit input {h}x{w} "
                         f"with padding {padding}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    win_g = win.reshape(n, groups, cg, ho, wo, kh, kw)
    w_g = weight.data.reshape(groups, o // groups, cg, kh, kw)

    out = np.einsum("ngchwij,gocij->ngohw", win_g, w_g, optimize=True).reshape(n, o, ho, wo)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None, None]

    def backward(g):
        g_g = g.reshape(n, groups, o // groups, ho, wo)

        gw = None
        if weight.requires_grad:
            gw = np.einsum("ngchwij,ngohw->gocij", win_g, g_g, optimize=True).reshape(weight.shape)

        gx = None
        if x.requires_grad:
            gwin = np.einsum("ngohw,gocij->ngchwij", g_g, w_g, optimize=True)
            gwin = gwin.reshape(n, c, ho, wo, kh, kw)
            gxp = np.zeros(xp.shape)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += gwin[..., i, j]
            gx = gxp[:, :, padding:padding + h, padding:padding + w]

        grads = (gx, gw)
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.result(out, parents, backward)


def causal_temporal_conv(x, weight, bias=None):
    """Convolution along time of an N x T x C x H x W sequence.

    weight is O x C x k; output step t sees input steps t-k+1 .. t, with
    zeros before the start of the sequence.
    """

    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 5 or weight.ndim != 3:
        raise ShapeError(f"causal_temporal_conv expects N x T x C x H x W input and "
                         f"O x C x k weight, got {x.shape} and {weight.shape}")

    n, t, c, h, w = x.shape
    o, cw, k = weight.shape
    if cw != c:
        raise ShapeError(f"causal_temporal_conv: weight expects {cw} channels, input has {c}")
    if k < 1:
        raise ShapeError("temporal kernel length must be >= 1")

    xp = np.pad(x.data, ((0, 0), (k - 1, 0), (0, 0), (0, 0), (0, 0)))
    win = sliding_window_view(xp, k, axis=1)      # N x T x C x H x W x k
    out = np.einsum("ntchwi,oci->ntohw", win, weight.data, optimize=True)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, None, :, None, None]

    def backward(g):
        gw = None
        if weight.requires_grad:
            gw = np.einsum("ntchwi,ntohw->oci", win, g, optimize=True)

        gx = None
        if x.requires_grad:
            gwin = np.einsum("ntohw,oci->ntchwi", g, weight.data, optimize=True)
            gxp = np.zeros(xp.shape)
            for i in range(k):
                gxp[:, i:i + t] += gwin[..., i]
            gx = gxp[:, k - 1:]

        grads = (gx, gw)
        if bias is not None:
            grads += (g.sum(axis=(0, 1, 3, 4)),)
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.result(out, parents, backward)
