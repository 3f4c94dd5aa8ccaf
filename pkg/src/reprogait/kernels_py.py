"""Pure numpy causal-convolution kernels.

Reference implementation of the hot inner loops; the compiled module
reprogait._ckernels provides the same two functions with identical
signatures and (up to floating-point associativity) identical results.

Shapes: x is (B, C_in, T), kernel is (C_out, C_in, K), bias is (C_out,),
output is (B, C_out, T).  Convolutions are causal with left zero-padding:

    y[b, o, t] = bias[o] + sum_{c,k} kernel[o, c, k] * x[b, c, t - k*dilation]

where x is treated as zero for negative time indices.  All einsum calls
stay un-optimized on purpose: the per-element reduction order is then
fixed, which keeps batched results identical to batch-of-one results.
"""

import numpy as np


def conv1d_forward(x, kernel, bias, dilation):
    B, C_in, T = x.shape
    C_out, _, K = kernel.shape
    pad = (K - 1) * dilation
    xp = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    y = np.empty((B, C_out, T), dtype=np.float64)
    y[:] = bias[None, :, None]
    for k in range(K):
        lo = pad - k * dilation
        y += np.einsum("oc,bct->bot", kernel[:, :, k], xp[:, :, lo:lo + T])
    return y


def conv1d_backward(x, kernel, dilation, gy):
    """Gradients of a scalar loss w.r.t. x, kernel and bias given gy = dL/dy."""
    B, C_in, T = x.shape
    C_out, _, K = kernel.shape
    pad = (K - 1) * dilation

    gbias = gy.sum(axis=(0, 2))

    xp = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    gkernel = np.empty_like(kernel)
    for k in range(K):
        lo = pad - k * dilation
        gkernel[:, :, k] = np.einsum("bot,bct->oc", gy, xp[:, :, lo:lo + T])

    # dL/dx[b,c,s] = sum_{o,k} kernel[o,c,k] * gy[b,o,s+k*dilation]
    gyp = np.pad(gy, ((0, 0), (0, 0), (0, pad)))
    gx = np.zeros_like(x)
    for k in range(K):
        lo = k * dilation
        gx += np.einsum("oc,bot->bct", kernel[:, :, k], gyp[:, :, lo:lo + T])
    return gx, gkernel, gbias
