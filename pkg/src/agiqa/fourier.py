"""Iterative radix-2 FFT with bit-reversal, vectorized over leading axes.

Sizes are restricted to powers of two; the transform is the unnormalized
forward DFT, X[u,v] = sum_{m,n} x[m,n] exp(-2*pi*i*(u*m/S + v*n/S)).
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, TensorError

__all__ = ["fft2", "fft2_array", "FftSizeError"]


class FftSizeError(ValueError):
    """Input length is not a power of two."""


_REV_CACHE: dict[int, np.ndarray] = {}
_TWIDDLE_CACHE: dict[int, np.ndarray] = {}


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    idx = _REV_CACHE.get(n)
    if idx is None:
        bits = n.bit_length() - 1
        rev = np.zeros(n, dtype=np.intp)
        for i in range(n):
            r = 0
            x = i
            for _ in range(bits):
                r = (r << 1) | (x & 1)
                x >>= 1
            rev[i] = r
        _REV_CACHE[n] = idx = rev
    return idx


def _twiddles(m: int) -> np.ndarray:
    w = _TWIDDLE_CACHE.get(m)
    if w is None:
        half = m // 2
        _TWIDDLE_CACHE[m] = w = np.exp(-2j * np.pi * np.arange(half) / m)
    return w


def _fft_last_axis(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    if not _is_pow2(n):
        raise FftSizeError(f"FFT length {n} is not a power of two")
    x = np.ascontiguousarray(x, dtype=np.complex128)[..., _bit_reverse_indices(n)]
    m = 2
    while m <= n:
        half = m // 2
        w = _twiddles(m)
        blocks = x.reshape(x.shape[:-1] + (n // m, m))
        u = blocks[..., :half]
        t = blocks[..., half:] * w
        x = np.concatenate((u + t, u - t), axis=-1).reshape(x.shape)
        m *= 2
    return x


def fft2_array(x: np.ndarray) -> np.ndarray:
    """2-D FFT of the trailing two axes of a real or complex array."""
    if x.ndim < 2:
        raise FftSizeError("fft2 needs at least two dimensions")
    out = _fft_last_axis(x)
    out = _fft_last_axis(out.swapaxes(-1, -2)).swapaxes(-1, -2)
    return out


def fft2(patch) -> Tensor:
    """Forward 2-D DFT of a square S x S patch; returns an (S, S, 2) tensor.

    The last axis holds (real, imaginary) parts. S must be a power of two.
    """
    data = patch.data if isinstance(patch, Tensor) else np.asarray(patch, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise TensorError(f"fft2 expects a square 2-D patch, got {data.shape}")
    if not _is_pow2(data.shape[0]):
        raise FftSizeError(f"patch size {data.shape[0]} is not a power of two")
    spectrum = fft2_array(data)
    return Tensor(np.stack((spectrum.real, spectrum.imag), axis=-1))
