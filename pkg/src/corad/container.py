"""Self-describing binary containers for waveforms, captures and maps.

All layouts are little-endian and round-trip bit-exactly.

Waveform set (magic ``WVX1``)::

    magic     4s   b"WVX1"
    version   u16  1
    alphabet  u8   0 = continuous, 1 = discrete
    L         u32  phase count (0 when continuous)
    theta     f64
    overs     u32  mask oversampling factor
    n_bands   u32
    bands     n_bands * (f64 lo, f64 hi, u8 weight)
    M, N      u32, u32
    data      M*N*(f64 re, f64 im), row-major

Receive capture (magic ``CPX1``)::

    magic 4s, version u16, channels u32, pulses u32, samples u32,
    sample_rate f64, data channels*pulses*samples*(f64 re, f64 im)

Range-Doppler map (magic ``RDM1``)::

    magic 4s, version u16, rx u32, tx u32, doppler_bins u32, range_bins u32,
    range_step_m f64, window tag u8, data doppler*range f64 (power)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .design import AlphabetKind, PhaseAlphabet, SequenceSet, SpectralMask

WAVEFORM_MAGIC = b"WVX1"
CAPTURE_MAGIC = b"CPX1"
MAP_MAGIC = b"RDM1"


class FormatError(ValueError):
    pass


@dataclass
class WaveformRecord:
    """A designed sequence set plus the context it was designed under."""

    sequences: SequenceSet
    alphabet: PhaseAlphabet
    theta: float
    mask: SpectralMask


def pack_waveform(rec: WaveformRecord) -> bytes:
    x = rec.sequences.entries
    m, n = x.shape
    is_discrete = rec.alphabet.kind is AlphabetKind.DISCRETE
    out = bytearray()
    out += struct.pack("<4sHBId", WAVEFORM_MAGIC, 1,
                       1 if is_discrete else 0,
                       rec.alphabet.L if is_discrete else 0,
                       rec.theta)
    out += struct.pack("<II", rec.mask.oversampling, len(rec.mask.bands))
    for lo, hi, w in rec.mask.bands:
        out += struct.pack("<ddB", lo, hi, w)
    out += struct.pack("<II", m, n)
    inter = np.empty(2 * m * n, dtype="<f8")
    inter[0::2] = x.real.ravel()
    inter[1::2] = x.imag.ravel()
    out += inter.tobytes()
    return bytes(out)


def unpack_waveform(blob: bytes) -> WaveformRecord:
    off = 0
    magic, version, alph, L, theta = struct.unpack_from("<4sHBId", blob, off)
    off += struct.calcsize("<4sHBId")
    if magic != WAVEFORM_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"unsupported version {version}")
    overs, n_bands = struct.unpack_from("<II", blob, off)
    off += 8
    bands = []
    for _ in range(n_bands):
        lo, hi, w = struct.unpack_from("<ddB", blob, off)
        off += struct.calcsize("<ddB")
        bands.append((lo, hi, w))
    m, n = struct.unpack_from("<II", blob, off)
    off += 8
    inter = np.frombuffer(blob, dtype="<f8", count=2 * m * n, offset=off)
    x = (inter[0::2] + 1j * inter[1::2]).reshape(m, n)
    alphabet = (PhaseAlphabet.discrete(L) if alph == 1
                else PhaseAlphabet.continuous())
    return WaveformRecord(SequenceSet(x.copy()), alphabet, theta,
                          SpectralMask(tuple(bands), overs))


def save_waveform(path, rec: WaveformRecord) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_waveform(rec))


def load_waveform(path) -> WaveformRecord:
    with open(path, "rb") as fh:
        return unpack_waveform(fh.read())


def pack_capture(data: np.ndarray, sample_rate: float) -> bytes:
    """data: complex array shaped (channels, pulses, samples)."""
    if data.ndim != 3:
        raise FormatError("capture data must be (channels, pulses, samples)")
    c, q, s = data.shape
    out = bytearray()
    out += struct.pack("<4sHIIId", CAPTURE_MAGIC, 1, c, q, s, sample_rate)
    inter = np.empty(2 * data.size, dtype="<f8")
    inter[0::2] = data.real.ravel()
    inter[1::2] = data.imag.ravel()
    out += inter.tobytes()
    return bytes(out)


def unpack_capture(blob: bytes):
    hdr = struct.calcsize("<4sHIIId")
    magic, version, c, q, s, fs = struct.unpack_from("<4sHIIId", blob, 0)
    if magic != CAPTURE_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"unsupported version {version}")
    inter = np.frombuffer(blob, dtype="<f8", count=2 * c * q * s, offset=hdr)
    data = (inter[0::2] + 1j * inter[1::2]).reshape(c, q, s)
    return data.copy(), fs


def pack_map(power: np.ndarray, rx: int, tx: int, range_step_m: float,
             window_tag: int) -> bytes:
    d, r = power.shape
    out = bytearray()
    out += struct.pack("<4sHIIIIdB", MAP_MAGIC, 1, rx, tx, d, r,
                       range_step_m, window_tag)
    out += np.ascontiguousarray(power, dtype="<f8").tobytes()
    return bytes(out)


def unpack_map(blob: bytes):
    fmt = "<4sHIIIIdB"
    hdr = struct.calcsize(fmt)
    magic, version, rx, tx, d, r, step, wtag = struct.unpack_from(fmt, blob, 0)
    if magic != MAP_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    power = np.frombuffer(blob, dtype="<f8", count=d * r, offset=hdr).reshape(d, r)
    return power.copy(), {"rx": rx, "tx": tx, "range_step_m": step,
                          "window_tag": wtag}
