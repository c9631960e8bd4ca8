"""Baseband emulation of the cabled radar bench.

Builds the pulsed transmit frame from a code set, synthesizes per-target
echoes (delay, per-pulse Doppler phase, array steering, attenuation) and
mixes them with communication interference and seeded complex white noise
into trigger-aligned receive captures.  Everything happens at complex
baseband on the radar sample grid; carrier frequencies are bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 299792458.0


class SceneConfigError(ValueError):
    pass


@dataclass
class RadarTimingConfig:
    sample_rate_hz: float = 40e6
    carrier_hz: float = 2e9
    pri_s: float = 20e-6
    duty_cycle: float = 0.5
    pulses_per_cpi: int = 50
    code_length: int = 400

    def __post_init__(self):
        active = self.pri_s * self.duty_cycle
        chips = self.code_length / self.sample_rate_hz
        if abs(chips - active) > 1e-9 * max(abs(active), 1e-12):
            raise SceneConfigError(
                f"code length {self.code_length} at {self.sample_rate_hz:.3g} Hz "
                f"fills {chips:.3e} s but PRI x duty = {active:.3e} s")

    @property
    def pri_samples(self) -> int:
        return int(round(self.pri_s * self.sample_rate_hz))

    @property
    def range_bin_m(self) -> float:
        return C_LIGHT / (2.0 * self.sample_rate_hz)


@dataclass
class TargetSpec:
    delay_s: float
    doppler_norm: float  # cycles per pulse
    angle_deg: float
    attenuation_db: float

    def __post_init__(self):
        if not (-0.5 <= self.doppler_norm <= 0.5):
            raise SceneConfigError(
                f"normalized Doppler {self.doppler_norm} outside (-0.5, 0.5]")


@dataclass
class ArrayGeometry:
    n_tx: int = 2
    n_rx: int = 2
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise SceneConfigError("need at least one Tx and one Rx element")

    def tx_steering(self, angle_deg: float) -> np.ndarray:
        return self._steer(self.n_tx, angle_deg)

    def rx_steering(self, angle_deg: float) -> np.ndarray:
        return self._steer(self.n_rx, angle_deg)

    def _steer(self, count: int, angle_deg: float) -> np.ndarray:
        k = np.arange(count)
        phase = 2.0 * np.pi * self.spacing_wavelengths * k * np.sin(np.deg2rad(angle_deg))
        return np.exp(1j * phase)


@dataclass
class RxCapture:
    """Per-channel baseband organized [channel][pulse][fast-time sample]."""

    data: np.ndarray
    timing: RadarTimingConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise SceneConfigError("capture must be (channels, pulses, samples)")
        if self.data.shape[2] != self.timing.pri_samples:
            raise SceneConfigError("fast-time length must equal PRI x sample rate")

    @property
    def n_rx(self) -> int:
        return self.data.shape[0]

    @property
    def n_pulses(self) -> int:
        return self.data.shape[1]


def synthesize_frame(entries: np.ndarray, timing: RadarTimingConfig) -> np.ndarray:
    """Pulsed CPI frame per Tx: code chips then off-duty zeros, repeated.

    Returns shape (M, pulses_per_cpi * pri_samples), one sample per chip.
    """
    entries = np.atleast_2d(np.asarray(entries, dtype=np.complex128))
    m, n = entries.shape
    if n != timing.code_length:
        raise SceneConfigError(
            f"sequence length {n} does not match configured code length "
            f"{timing.code_length}")
    s = timing.pri_samples
    frame = np.zeros((m, timing.pulses_per_cpi, s), dtype=np.complex128)
    frame[:, :, :n] = entries[:, None, :]
    return frame.reshape(m, timing.pulses_per_cpi * s)


def apply_target(frames: np.ndarray, target: TargetSpec, geom: ArrayGeometry,
                 timing: RadarTimingConfig) -> np.ndarray:
    """Echo contribution of one reflector on every receive channel.

    The per-pulse Doppler phasor rides on the transmitted pulse index
    (stop-and-hop), the delay is rounded to whole samples, and the two-way
    steering uses half-wavelength phase ramps on Tx and Rx indices.
    """
    frames = np.atleast_2d(frames)
    if target.delay_s >= timing.pri_s:
        raise SceneConfigError(
            f"delay {target.delay_s:.3e} s exceeds the PRI {timing.pri_s:.3e} s")
    m, total = frames.shape
    s = timing.pri_samples
    q = total // s
    shift = int(round(target.delay_s * timing.sample_rate_hz))
    amp = 10.0 ** (-target.attenuation_db / 20.0)
    doppler = np.exp(2j * np.pi * target.doppler_norm * np.arange(q))

    pulsed = frames.reshape(m, q, s) * doppler[None, :, None]
    flat = pulsed.reshape(m, total)
    delayed = np.zeros_like(flat)
    if shift < total:
        delayed[:, shift:] = flat[:, :total - shift]

    a_tx = geom.tx_steering(target.angle_deg)
    a_rx = geom.rx_steering(target.angle_deg)
    tx_sum = np.tensordot(a_tx, delayed, axes=(0, 0))  # sum over Tx elements
    return amp * a_rx[:, None] * tx_sum[None, :]


def mix_capture(echoes: list[np.ndarray], timing: RadarTimingConfig,
                n_rx: int, interference: np.ndarray | None = None,
                interference_power_dbfs: float | None = None,
                noise_power_dbfs: float | None = -300.0,
                seed: int = 0) -> RxCapture:
    """Sum echoes, add aligned interference and seeded circular white noise.

    ``interference`` must already live on the radar sample grid; it is tiled
    or truncated to the capture length and, when a power is commanded,
    rescaled to that mean per-sample power.  ``noise_power_dbfs`` of None
    disables noise.
    """
    total = timing.pulses_per_cpi * timing.pri_samples
    out = np.zeros((n_rx, total), dtype=np.complex128)
    for echo in echoes:
        echo = np.atleast_2d(echo)
        if echo.shape != out.shape:
            raise SceneConfigError(
                f"echo shape {echo.shape} does not match capture {out.shape}")
        out += echo

    if interference is not None:
        intf = np.asarray(interference, dtype=np.complex128).ravel()
        if intf.size < total:
            reps = -(-total // intf.size)
            intf = np.tile(intf, reps)
        intf = intf[:total]
        if interference_power_dbfs is not None:
            cur = np.mean(np.abs(intf) ** 2)
            if cur > 0:
                intf = intf * np.sqrt(10.0 ** (interference_power_dbfs / 10.0) / cur)
        out += intf[None, :]

    if noise_power_dbfs is not None:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(10.0 ** (noise_power_dbfs / 10.0) / 2.0)
        out += sigma * (rng.standard_normal(out.shape)
                        + 1j * rng.standard_normal(out.shape))

    return RxCapture(out.reshape(n_rx, timing.pulses_per_cpi,
                                 timing.pri_samples), timing)
