"""Adaptive MIMO receive chain: matched filters, range-Doppler maps, peaks.

Each receive channel is passed through filters matched to every transmit
code (FFT fast correlation, truncated to the lags inside one PRI), windowed
slow-time FFTs turn the pulse stack into per-(Rx, Tx) range-Doppler maps,
and detections are measured as peak power over the mean power of a
surrounding vicinity ring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import SequenceSet
from .scene import RxCapture
from .windows import WindowKind, window


class ReceiverError(ValueError):
    pass


SINR_CAP_DB = 60.0


@dataclass
class RangeDopplerMap:
    """Power map [doppler bin][range bin] for one (Rx, Tx) pair.

    ``cvals`` keeps the pre-power complex slow-time spectrum so detections
    can later form virtual-array snapshots for angle estimation.
    """

    power: np.ndarray
    cvals: np.ndarray
    rx: int
    tx: int
    window_kind: WindowKind
    range_step_m: float

    @property
    def n_doppler(self) -> int:
        return self.power.shape[0]

    @property
    def n_range(self) -> int:
        return self.power.shape[1]

    def range_axis_m(self) -> np.ndarray:
        return self.range_step_m * np.arange(self.n_range)

    def doppler_axis_norm(self) -> np.ndarray:
        return np.arange(self.n_doppler) / self.n_doppler


@dataclass
class Detection:
    range_bin: int
    doppler_bin: int
    peak_power: float
    sinr_db: float
    range_m: float
    angle_deg: float | None = None


def matched_filter_bank(capture: RxCapture, X: SequenceSet) -> np.ndarray:
    """Fast-correlate every pulse with every code: out[rx][tx][pulse][lag].

    out[p, m, q, l] = sum_n conj(x_m[n]) capture[p, q, l + n], zero padded
    beyond the pulse record, truncated to lags 0 .. pri_samples-1.
    """
    s = capture.timing.pri_samples
    n = X.N
    if s < n:
        raise ReceiverError("pulse record shorter than the code")
    L = 1
    while L < s + n - 1:
        L *= 2
    cap_f = np.fft.fft(capture.data, L, axis=2)          # (P, Q, L)
    code_f = np.fft.fft(X.entries, L, axis=1)            # (M, L)
    prod = cap_f[:, None, :, :] * np.conj(code_f)[None, :, None, :]
    out = np.fft.ifft(prod, axis=3)[:, :, :, :s]
    return out


def range_doppler(mf_out: np.ndarray, window_kind: WindowKind,
                  range_step_m: float) -> list[RangeDopplerMap]:
    """Windowed slow-time FFT per range bin; one map per (Rx, Tx) pair."""
    p, m, q, s = mf_out.shape
    if q < 2:
        raise ReceiverError("need at least two pulses for Doppler processing")
    w = window(window_kind, q)
    cvals = np.fft.fft(mf_out * w[None, None, :, None], axis=2)
    maps = []
    for rx in range(p):
        for tx in range(m):
            c = cvals[rx, tx]
            maps.append(RangeDopplerMap(np.abs(c) ** 2, c, rx, tx,
                                        window_kind, range_step_m))
    return maps


def integrate_maps(maps: list[RangeDopplerMap]) -> np.ndarray:
    """Non-coherent sum across the (Rx, Tx) pairs."""
    return np.sum([m.power for m in maps], axis=0)


def _local_maxima(total: np.ndarray) -> np.ndarray:
    """Cells not exceeded by any 8-neighbor (Doppler wraps, range clips)."""
    padded = np.pad(total, ((0, 0), (1, 1)), constant_values=-np.inf)
    best = np.full(total.shape, -np.inf)
    for dd in (-1, 0, 1):
        rolled = np.roll(padded, dd, axis=0)
        for dr in (-1, 0, 1):
            if dd == 0 and dr == 0:
                continue
            best = np.maximum(best, rolled[:, 1 + dr: padded.shape[1] - 1 + dr])
    return total >= best


def _vicinity_mean(total: np.ndarray, d0: int, r0: int,
                   vicinity: int, guard: int) -> float:
    q, s = total.shape
    vh = vicinity // 2
    gh = guard // 2
    dops = (d0 + np.arange(-vh, vh + 1)) % q
    rngs = r0 + np.arange(-vh, vh + 1)
    keep_r = (rngs >= 0) & (rngs < s)
    acc = 0.0
    count = 0
    for i, dd in enumerate(dops):
        for j, rr in enumerate(rngs):
            if not keep_r[j]:
                continue
            if abs(i - vh) <= gh and abs(j - vh) <= gh:
                continue  # guard block around the peak
            acc += total[dd, rr]
            count += 1
    return acc / count if count else 0.0


def detect_and_measure(maps: list[RangeDopplerMap],
                       expected_count: int | None = None,
                       threshold_db: float | None = None,
                       vicinity: int = 11, guard: int = 3) -> list[Detection]:
    """Top-k (or above-threshold) peaks of the integrated map with SINR.

    SINR is peak cell power over the mean of an 11x11 vicinity ring minus a
    3x3 guard block (defaults; both configurable).  Peaks falling inside a
    stronger peak's guard block are suppressed.  ``threshold_db`` is read
    relative to the integrated map's median cell power.
    """
    if not maps:
        raise ReceiverError("no range-Doppler maps supplied")
    if expected_count is None and threshold_db is None:
        raise ReceiverError("give an expected count or a threshold")
    total = integrate_maps(maps)
    q, s = total.shape
    is_peak = _local_maxima(total)
    order = np.argsort(total, axis=None)[::-1]
    floor = float(np.median(total))
    limit = floor * 10.0 ** (threshold_db / 10.0) if threshold_db is not None else None
    gh = guard // 2
    kept: list[tuple[int, int]] = []
    detections: list[Detection] = []
    range_step = maps[0].range_step_m
    for flat in order:
        d0, r0 = np.unravel_index(flat, total.shape)
        if not is_peak[d0, r0]:
            continue
        if limit is not None and total[d0, r0] <= limit:
            break
        too_close = False
        for dk, rk in kept:
            dd = min(abs(d0 - dk), q - abs(d0 - dk))  # Doppler wraps
            if dd <= gh and abs(r0 - rk) <= gh:
                too_close = True
                break
        if too_close:
            continue
        mean = _vicinity_mean(total, int(d0), int(r0), vicinity, guard)
        if mean <= 0.0:
            sinr = SINR_CAP_DB
        else:
            sinr = min(10.0 * np.log10(total[d0, r0] / mean), SINR_CAP_DB)
        detections.append(Detection(int(r0), int(d0), float(total[d0, r0]),
                                    float(sinr), float(r0) * range_step))
        kept.append((int(d0), int(r0)))
        if expected_count is not None and len(detections) >= expected_count:
            break
    return detections


def estimate_doa(detections: list[Detection], maps: list[RangeDopplerMap],
                 spacing_wavelengths: float = 0.5,
                 grid_step_deg: float = 0.5) -> list[Detection]:
    """Beamforming-spectrum argmax over the virtual array, per detection.

    The virtual element for map (rx, tx) sits at (rx + tx) * spacing; with
    fewer than two virtual elements there is nothing to scan.
    """
    if len(maps) < 2:
        raise ReceiverError("angle estimation needs at least 2 virtual elements")
    positions = np.array([(m.rx + m.tx) * spacing_wavelengths for m in maps])
    angles = np.arange(-90.0, 90.0 + grid_step_deg / 2, grid_step_deg)
    steer = np.exp(2j * np.pi * np.outer(np.sin(np.deg2rad(angles)), positions))
    for det in detections:
        snap = np.array([m.cvals[det.doppler_bin, det.range_bin] for m in maps])
        spectrum = np.abs(steer.conj() @ snap) ** 2
        det.angle_deg = float(angles[int(np.argmax(spectrum))])
    return detections
