"""Multicarrier waveform with one cyclic prefix per OFDM symbol.

Numerology ``mu`` trades frequency against time on a fixed budget:
``2**-mu * M`` subcarriers with ``2**mu`` times the base spacing across
``2**mu * N`` symbols, so every numerology occupies the same bandwidth
and frame duration.  Each symbol carries its own prefix, unlike the
block waveforms in :mod:`transforms` which share one prefix per frame.
"""

from __future__ import annotations

import numpy as np

from .grid import FrameParams, derive_vsb_dims


def ofdm_modulate(grid: np.ndarray, cp_len: int) -> np.ndarray:
    """Unitary-IFFT each symbol column and prepend its cyclic prefix."""
    grid = np.asarray(grid, dtype=complex)
    if grid.ndim != 2:
        raise ValueError("expected a subcarriers-by-symbols grid")
    n_sc = grid.shape[0]
    if not 0 <= cp_len <= n_sc:
        raise ValueError("prefix longer than the symbol body")
    bodies = np.fft.ifft(grid, axis=0, norm="ortho")
    frames = np.concatenate([bodies[n_sc - cp_len :, :], bodies], axis=0)
    return frames.ravel(order="F")


def ofdm_demodulate(
    stream: np.ndarray, num_subcarriers: int, cp_len: int
) -> np.ndarray:
    """Strip per-symbol prefixes and unitary-FFT back to the grid."""
    stream = np.asarray(stream, dtype=complex).ravel()
    step = num_subcarriers + cp_len
    if stream.size == 0 or stream.size % step:
        raise ValueError(f"stream length {stream.size} is not a multiple of {step}")
    frames = stream.reshape(step, -1, order="F")
    return np.fft.fft(frames[cp_len:, :], axis=0, norm="ortho")


def vsb_stream_len(params: FrameParams, mu: int) -> int:
    """Total samples in one frame at numerology ``mu``, prefixes included."""
    n_sc, n_sym, cp_len = derive_vsb_dims(params, mu)
    return (n_sc + cp_len) * n_sym


def vsb_modulate(grid: np.ndarray, params: FrameParams, mu: int) -> np.ndarray:
    """Modulate a numerology-``mu`` grid sized for ``params``."""
    n_sc, n_sym, cp_len = derive_vsb_dims(params, mu)
    grid = np.asarray(grid, dtype=complex)
    if grid.shape != (n_sc, n_sym):
        raise ValueError(f"expected a {n_sc}x{n_sym} grid, got {grid.shape}")
    return ofdm_modulate(grid, cp_len)


def vsb_demodulate(stream: np.ndarray, params: FrameParams, mu: int) -> np.ndarray:
    """Inverse of :func:`vsb_modulate`."""
    n_sc, _, cp_len = derive_vsb_dims(params, mu)
    return ofdm_demodulate(stream, n_sc, cp_len)
