"""One-sided real DFT, its inverse, and top-K amplitude filtering.

Transforms act on the last axis, so a (..., T) stack of series is processed
in one call. Lengths that are powers of two go through an iterative radix-2
FFT; every other length uses Bluestein's chirp-z reformulation on top of it.
The forward transform is unnormalized and the inverse carries 1/T.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Spectrum", "fft", "ifft", "rdft", "irdft", "amplitude",
    "top_k_indices", "frequency_filter", "max_top_k",
]


@dataclass(frozen=True)
class Spectrum:
    """Non-redundant half of a real signal's DFT.

    ``coefficients`` has ``original_length // 2 + 1`` entries on its last axis.
    """

    coefficients: np.ndarray
    original_length: int

    def __post_init__(self):
        if self.original_length < 1:
            raise ValueError("original_length must be >= 1")
        expected = self.original_length // 2 + 1
        if self.coefficients.shape[-1] != expected:
            raise ValueError(
                f"spectrum of length-{self.original_length} signal needs {expected} "
                f"coefficients, got {self.coefficients.shape[-1]}")


def max_top_k(length: int) -> int:
    """Number of one-sided bins for a real series of ``length`` samples."""
    return length // 2 + 1


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@lru_cache(maxsize=64)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(n // 2) / n)


def _radix2(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    a = x[..., _bit_reverse(n)].astype(np.complex128)
    tw = _twiddles(n)
    size = 2
    while size <= n:
        half = size // 2
        w = tw[:: n // size][:half]
        a = a.reshape(*x.shape[:-1], n // size, size)
        even = a[..., :half]
        odd = a[..., half:] * w
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(x.shape)


@lru_cache(maxsize=64)
def _bluestein_plan(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp phase exact for large k
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1 << (2 * n - 1).bit_length()
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:])[::-1]
    return chirp, _radix2(b), m


def _bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    chirp, b_hat, m = _bluestein_plan(n)
    a = np.zeros((*x.shape[:-1], m), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _ifft_pow2(_radix2(a) * b_hat)
    return conv[..., :n] * chirp


def _ifft_pow2(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    return np.conj(_radix2(np.conj(x))) / n


def fft(x) -> np.ndarray:
    """Unnormalized complex DFT along the last axis, any length >= 1."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("cannot transform an empty series")
    if n == 1:
        return x.astype(np.complex128)
    if _is_pow2(n):
        return _radix2(x)
    return _bluestein(x)


def ifft(x) -> np.ndarray:
    """Inverse of :func:`fft` (carries the 1/T factor)."""
    x = np.asarray(x, dtype=np.complex128)
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def rdft(x) -> Spectrum:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("rdft needs a non-empty series")
    n = x.shape[-1]
    c = fft(x)[..., : n // 2 + 1].copy()
    # a real input has exactly real DC and Nyquist bins; drop rounding residue
    c[..., 0] = c[..., 0].real
    if n % 2 == 0:
        c[..., -1] = c[..., -1].real
    return Spectrum(c, n)


def irdft(s: Spectrum) -> np.ndarray:
    n = s.original_length
    c = s.coefficients
    if c.shape[-1] != n // 2 + 1:
        raise ValueError("spectrum coefficient count does not match its length")
    full = np.empty((*c.shape[:-1], n), dtype=np.complex128)
    full[..., : n // 2 + 1] = c
    full[..., 0] = c[..., 0].real
    if n % 2 == 0:
        full[..., n // 2] = c[..., n // 2].real
    tail = n - (n // 2 + 1)
    if tail:
        full[..., n // 2 + 1:] = np.conj(c[..., 1: tail + 1])[..., ::-1]
    return ifft(full).real


def amplitude(s: Spectrum) -> np.ndarray:
    return np.abs(s.coefficients)


def top_k_indices(amps, k: int) -> np.ndarray:
    """Indices of the ``k`` largest amplitudes, ascending.

    Equal amplitudes resolve toward the lower frequency index. Works row-wise
    on a (..., F) stack.
    """
    amps = np.asarray(amps, dtype=np.float64)
    f = amps.shape[-1]
    if not 1 <= k <= f:
        raise ValueError(f"k={k} outside [1, {f}]")
    order = np.argsort(-amps, axis=-1, kind="stable")[..., :k]
    return np.sort(order, axis=-1)


def frequency_filter(x, k: int, keep_dc: bool = False) -> np.ndarray:
    """Rebuild ``x`` from its ``k`` highest-amplitude one-sided DFT bins.

    With ``keep_dc`` the DC bin is always retained on top of the ``k`` picked
    among the remaining bins, which preserves the series mean.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    kmax = n // 2 + 1
    if not 1 <= k <= kmax:
        raise ValueError(f"k={k} outside [1, {kmax}] for a length-{n} series")
    spec = rdft(x)
    amps = amplitude(spec)
    if keep_dc:
        amps = amps.copy()
        amps[..., 0] = np.inf
        k = min(k + 1, kmax)
    keep = top_k_indices(amps, k)
    mask = np.zeros(amps.shape, dtype=bool)
    np.put_along_axis(mask, keep, True, axis=-1)
    return irdft(Spectrum(np.where(mask, spec.coefficients, 0.0), n))
