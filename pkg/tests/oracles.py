"""Brute-force reference implementations used only by the tests.

Each oracle evaluates its defining sum directly with Python loops so that it
shares no code path with the vectorised implementations under test.
"""

import cmath
import math

import numpy as np


def conv1d_direct(signal, kernel, padding):
    """out[i] = sum_{k=-T}^{T} h[k] * f[i - k], f zero-padded, output on valid range."""
    f = [0.0] * padding + list(signal) + [0.0] * padding
    K = len(kernel)
    T = K // 2
    out = []
    for i in range(T, len(f) - T):
        acc = 0.0
        for k in range(-T, T + 1):
            acc += kernel[k + T] * f[i - k]
        out.append(acc)
    return np.array(out)


def conv2d_eq3(x, kernels, bias, stride=1, padding=0):
    """Multi-channel true 2-D convolution sum with centred kernels, quadruple loop."""
    C, H, W = x.shape
    F, _, Kh, Kw = kernels.shape
    Th, Tw = Kh // 2, Kw // 2
    Hp, Wp = H + 2 * padding, W + 2 * padding
    xp = np.zeros((C, Hp, Wp))
    xp[:, padding:padding + H, padding:padding + W] = x
    oh = (Hp - Kh) // stride + 1
    ow = (Wp - Kw) // stride + 1
    out = np.zeros((F, oh, ow))
    for f in range(F):
        for oi in range(oh):
            for oj in range(ow):
                i = oi * stride + Th
                j = oj * stride + Tw
                acc = float(bias[f])
                for c in range(C):
                    for k in range(-Th, Th + 1):
                        for m in range(-Tw, Tw + 1):
                            acc += kernels[f, c, k + Th, m + Tw] * xp[c, i - k, j - m]
                out[f, oi, oj] = acc
    return out


def maxpool_direct(x):
    C, H, W = x.shape
    out = np.zeros((C, H // 2, W // 2))
    for c in range(C):
        for i in range(H // 2):
            for j in range(W // 2):
                out[c, i, j] = max(x[c, 2 * i, 2 * j], x[c, 2 * i, 2 * j + 1],
                                   x[c, 2 * i + 1, 2 * j], x[c, 2 * i + 1, 2 * j + 1])
    return out


def matvec_direct(w, x, b):
    return np.array([sum(w[r][c] * x[c] for c in range(len(x))) + b[r] for r in range(len(b))])


def softmax_direct(y):
    e = [math.exp(v) for v in y]
    s = sum(e)
    return np.array([v / s for v in e])


def dft_direct(frame):
    """Naive O(N^2) DFT, returning the one-sided bins 0..N/2."""
    N = len(frame)
    return np.array([
        sum(frame[n] * cmath.exp(-2j * math.pi * k * n / N) for n in range(N))
        for k in range(N // 2 + 1)
    ])


def dft_matrix_direct(frame):
    """Naive DFT via an explicit N x N matrix (faster oracle for long sweeps)."""
    N = len(frame)
    n = np.arange(N)
    k = np.arange(N // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / N)
    return basis @ np.asarray(frame)
