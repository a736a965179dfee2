"""Empirical mode decomposition and the Hilbert energy spectrum.

Sifting subtracts the mean of cubic-spline envelopes of the local maxima
and minima until the normalized change between sift iterates drops below
the stop tolerance; the decomposition ends at a monotone residue or at
`max_imfs`. Envelope boundaries mirror the two nearest extrema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import hilbert

from .stft import Spectrogram, TransformError

_MAX_SIFTS = 100


@dataclass
class ImfSet:
    """Ordered intrinsic mode functions plus the final residue."""

    imfs: list[np.ndarray]
    residue: np.ndarray

    def __len__(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        out = self.residue.copy()
        for c in self.imfs:
            out += c
        return out


def _extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima (plateaus collapse)."""
    d = np.sign(np.diff(x))
    # carry the previous non-zero slope through flats
    for i in range(1, len(d)):
        if d[i] == 0:
            d[i] = d[i - 1]
    turn = np.diff(d)
    maxima = np.where(turn < 0)[0] + 1
    minima = np.where(turn > 0)[0] + 1
    return maxima, minima


def _envelope(idx: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cubic-spline envelope through (idx, vals).

    With two or more extrema the two nearest are mirrored beyond each edge;
    a single extremum falls back to endpoint knots.
    """
    n = len(x)
    if len(idx) >= 2:
        left_x = -idx[:2][::-1]
        left_y = vals[:2][::-1]
        right_x = 2 * (n - 1) - idx[-2:][::-1]
        right_y = vals[-2:][::-1]
        xs = np.concatenate([left_x, idx, right_x])
        ys = np.concatenate([left_y, vals, right_y])
    else:
        xs = np.concatenate([[0], idx, [n - 1]])
        ys = np.concatenate([[x[0]], vals, [x[-1]]])
    xs, keep = np.unique(xs, return_index=True)
    ys = ys[keep]
    bc = "not-a-knot" if len(xs) >= 4 else "natural"
    return CubicSpline(xs, ys, bc_type=bc)(np.arange(n))


def _sift(residue: np.ndarray, sift_stop: float) -> np.ndarray | None:
    """Extract one IMF from `residue`, or None if it is (near) monotone."""
    n = len(residue)
    h = residue.copy()
    for _ in range(_MAX_SIFTS):
        maxima, minima = _extrema(h)
        if len(maxima) + len(minima) < 3 or len(maxima) < 1 or len(minima) < 1:
            return None if np.array_equal(h, residue) else h
        upper = _envelope(maxima, h[maxima], h)
        lower = _envelope(minima, h[minima], h)
        mean = 0.5 * (upper + lower)
        h_new = h - mean
        denom = float(np.sum(h * h))
        if denom == 0.0:
            return None
        sd = float(np.sum(mean * mean)) / denom
        h = h_new
        if sd < sift_stop:
            return h
    return h


def emd(signal, max_imfs: int = 10, sift_stop: float = 0.05) -> ImfSet:
    """Decompose into intrinsic mode functions plus a residue.

    The sum of all IMFs and the residue reproduces the input exactly
    (the residue is maintained by running subtraction).
    """
    x = np.asarray(signal, dtype=float)
    if len(x) < 8:
        raise TransformError("EMD needs at least 8 samples")
    imfs: list[np.ndarray] = []
    residue = x.copy()
    for _ in range(max_imfs):
        maxima, minima = _extrema(residue)
        if len(maxima) + len(minima) < 3 or len(maxima) < 1 or len(minima) < 1:
            break
        imf = _sift(residue, sift_stop)
        if imf is None:
            break
        imfs.append(imf)
        residue = residue - imf
    return ImfSet(imfs=imfs, residue=residue)


def hht_spectrum(imfs: ImfSet, rate: float, n_freq: int = 64,
                 n_time: int = 32) -> Spectrogram:
    """Hilbert energy spectrum: squared instantaneous amplitude binned on a
    time-frequency grid, accumulated over all IMFs."""
    if len(imfs) < 1:
        raise TransformError("need at least one IMF")
    n = len(imfs.residue)
    grid = np.zeros((n_time, n_freq))
    t = np.arange(n - 1) / rate
    t_edges = np.linspace(0.0, (n - 1) / rate, n_time + 1)
    f_edges = np.linspace(0.0, rate / 2.0, n_freq + 1)
    for imf in imfs.imfs:
        analytic = hilbert(imf)
        phase = np.unwrap(np.angle(analytic))
        inst_f = np.diff(phase) * rate / (2.0 * np.pi)
        amp2 = np.abs(analytic[:-1]) ** 2
        fi = np.clip(np.searchsorted(f_edges, np.clip(inst_f, 0.0, rate / 2.0)) - 1, 0, n_freq - 1)
        ti = np.clip(np.searchsorted(t_edges, t) - 1, 0, n_time - 1)
        np.add.at(grid, (ti, fi), amp2)
    frame_times = 0.5 * (t_edges[:-1] + t_edges[1:])
    bin_freqs = 0.5 * (f_edges[:-1] + f_edges[1:])
    return Spectrogram(grid, frame_times, bin_freqs)
