"""Energy-detection spectrum sensing and the occupancy side channel.

A Welch-style averaged periodogram feeds a per-cell (default 1 MHz) energy
threshold against a median-based noise floor; the resulting busy/free chart
is shipped to the radar as a little-endian framed message.

Occupancy wire format (version 1)::

    magic      4s  b"OCCU"
    version    u16 1
    timestamp  u64 monotonic tick
    start_hz   f64 lower band edge
    res_hz     f64 cell width
    n_cells    u32
    cells      n_cells * u8 (0 free, 1 busy)

Messages travel length-prefixed (u32 byte count, then the payload above).
Receivers deliver charts in timestamp order and drop stale ones.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field

import numpy as np

from .windows import WindowKind, window

OCCUPANCY_MAGIC = b"OCCU"


class InsufficientDataError(ValueError):
    pass


class DeliveryError(RuntimeError):
    pass


@dataclass
class SpectralEstimate:
    """Averaged periodogram with bins in ascending absolute frequency.

    ``bin_power`` is linear, normalized so a unit-amplitude complex tone on a
    bin center peaks at 1.0 (0 dBfs) under the rectangle window.
    """

    center_hz: float
    span_hz: float
    bin_power: np.ndarray
    window_kind: WindowKind
    averaging_count: int

    @property
    def bin_spacing(self) -> float:
        return self.span_hz / self.bin_power.size

    @property
    def start_hz(self) -> float:
        return self.center_hz - self.span_hz / 2.0

    def to_db(self) -> np.ndarray:
        return 10.0 * np.log10(np.maximum(self.bin_power, 1e-300))


@dataclass
class OccupancyChart:
    """Busy/free decision per frequency cell across the analyzed band."""

    resolution_hz: float
    decisions: np.ndarray  # uint8, 1 = busy
    start_hz: float
    timestamp: int

    def __post_init__(self):
        self.decisions = np.asarray(self.decisions, dtype=np.uint8).ravel()

    @property
    def n_cells(self) -> int:
        return self.decisions.size

    @property
    def stop_hz(self) -> float:
        return self.start_hz + self.n_cells * self.resolution_hz

    def cell_edges(self) -> np.ndarray:
        return self.start_hz + self.resolution_hz * np.arange(self.n_cells + 1)

    def busy_intervals(self) -> list[tuple[float, float]]:
        """Merged absolute-frequency intervals of consecutive busy cells."""
        out = []
        run_start = None
        for i, busy in enumerate(self.decisions):
            if busy and run_start is None:
                run_start = self.start_hz + i * self.resolution_hz
            elif not busy and run_start is not None:
                out.append((run_start, self.start_hz + i * self.resolution_hz))
                run_start = None
        if run_start is not None:
            out.append((run_start, self.stop_hz))
        return out


def estimate_spectrum(samples: np.ndarray, window_kind: WindowKind,
                      segment_length: int, averaging_count: int,
                      center_hz: float = 0.0,
                      sample_rate_hz: float = 1.0) -> SpectralEstimate:
    """Mean periodogram over ``averaging_count`` consecutive segments."""
    samples = np.asarray(samples, dtype=np.complex128).ravel()
    needed = segment_length * averaging_count
    if samples.size < needed:
        raise InsufficientDataError(
            f"capture of {samples.size} samples is shorter than "
            f"{segment_length} x {averaging_count}")
    w = window(window_kind, segment_length)
    gain = np.sum(w) ** 2
    acc = np.zeros(segment_length)
    for k in range(averaging_count):
        seg = samples[k * segment_length:(k + 1) * segment_length]
        spec = np.fft.fft(w * seg)
        acc += np.abs(spec) ** 2
    power = np.fft.fftshift(acc / (averaging_count * gain))
    return SpectralEstimate(center_hz, sample_rate_hz, power, window_kind,
                            averaging_count)


def noise_floor(est: SpectralEstimate) -> float:
    """Median bin power: robust to partial occupancy."""
    return float(np.median(est.bin_power))


def threshold_occupancy(est: SpectralEstimate, threshold_db: float,
                        resolution_hz: float = 1e6,
                        timestamp: int = 0) -> OccupancyChart:
    """Mark each cell busy whose mean power exceeds floor + threshold."""
    ratio = resolution_hz / est.bin_spacing
    bins_per_cell = int(round(ratio))
    if abs(ratio - bins_per_cell) > 1e-6 or bins_per_cell < 1:
        raise ValueError("resolution must be an integer multiple of bin spacing")
    if est.bin_power.size % bins_per_cell != 0:
        raise ValueError("cells must tile the analyzed band exactly")
    n_cells = est.bin_power.size // bins_per_cell
    cell_mean = est.bin_power.reshape(n_cells, bins_per_cell).mean(axis=1)
    limit = noise_floor(est) * 10.0 ** (threshold_db / 10.0)
    busy = (cell_mean > limit).astype(np.uint8)
    return OccupancyChart(resolution_hz, busy, est.start_hz, timestamp)


def concat_estimates(parts: list[SpectralEstimate]) -> SpectralEstimate:
    """Stitch adjacent sub-band estimates from a sweep (no overlap handling)."""
    parts = sorted(parts, key=lambda e: e.start_hz)
    spacing = parts[0].bin_spacing
    for prev, nxt in zip(parts, parts[1:]):
        if abs(nxt.bin_spacing - spacing) > 1e-9:
            raise ValueError("sub-band estimates disagree on bin spacing")
        if abs((prev.start_hz + prev.span_hz) - nxt.start_hz) > spacing / 2:
            raise ValueError("sub-band estimates are not contiguous")
    power = np.concatenate([p.bin_power for p in parts])
    span = sum(p.span_hz for p in parts)
    center = parts[0].start_hz + span / 2.0
    return SpectralEstimate(center, span, power, parts[0].window_kind,
                            parts[0].averaging_count)


# ---------------------------------------------------------------------------
# wire format and transport

def serialize_chart(chart: OccupancyChart) -> bytes:
    head = struct.pack("<4sHQddI", OCCUPANCY_MAGIC, 1, chart.timestamp,
                       chart.start_hz, chart.resolution_hz, chart.n_cells)
    return head + chart.decisions.astype("<u1").tobytes()


def deserialize_chart(blob: bytes) -> OccupancyChart:
    fmt = "<4sHQddI"
    hdr = struct.calcsize(fmt)
    magic, version, ts, start, res, n = struct.unpack_from(fmt, blob, 0)
    if magic != OCCUPANCY_MAGIC:
        raise ValueError(f"bad occupancy magic {magic!r}")
    if version != 1:
        raise ValueError(f"unsupported occupancy version {version}")
    cells = np.frombuffer(blob, dtype="<u1", count=n, offset=hdr)
    return OccupancyChart(res, cells.copy(), start, ts)


def frame_message(payload: bytes) -> bytes:
    return struct.pack("<I", len(payload)) + payload


def unframe_messages(buffer: bytearray) -> list[bytes]:
    """Pop complete length-prefixed messages off the front of ``buffer``."""
    out = []
    while len(buffer) >= 4:
        (n,) = struct.unpack_from("<I", buffer, 0)
        if len(buffer) < 4 + n:
            break
        out.append(bytes(buffer[4:4 + n]))
        del buffer[:4 + n]
    return out


class InProcessSink:
    """Message sink for tests: collects frames, optionally failing on demand."""

    def __init__(self):
        self.frames: list[bytes] = []
        self.fail = False

    def send(self, frame: bytes) -> None:
        if self.fail:
            raise DeliveryError("sink unavailable")
        self.frames.append(frame)


class SocketSink:
    """Stream-socket sink carrying length-prefixed occupancy messages."""

    def __init__(self, host: str, port: int, timeout: float = 2.0):
        self._addr = (host, port)
        self._timeout = timeout
        self._sock: socket.socket | None = None

    def send(self, frame: bytes) -> None:
        try:
            if self._sock is None:
                self._sock = socket.create_connection(self._addr, self._timeout)
            self._sock.sendall(frame)
        except OSError as exc:
            self._sock = None
            raise DeliveryError(str(exc)) from exc

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None


class OccupancyPublisher:
    """At-most-once-per-tick publisher that retains charts across failures."""

    def __init__(self, sink):
        self.sink = sink
        self._pending: OccupancyChart | None = None
        self._last_sent: int | None = None

    def publish(self, chart: OccupancyChart | None = None) -> bool:
        """Send the newest chart; on failure keep it for the next attempt."""
        if chart is not None:
            self._pending = chart
        if self._pending is None:
            return True
        if self._last_sent is not None and self._pending.timestamp <= self._last_sent:
            self._pending = None  # already delivered this tick
            return True
        try:
            self.sink.send(frame_message(serialize_chart(self._pending)))
        except DeliveryError:
            return False
        self._last_sent = self._pending.timestamp
        self._pending = None
        return True


class OccupancyReceiver:
    """Reassembles framed messages and yields charts in timestamp order."""

    def __init__(self):
        self._buffer = bytearray()
        self.last_timestamp: int | None = None

    def feed(self, data: bytes) -> list[OccupancyChart]:
        self._buffer.extend(data)
        charts = []
        for payload in unframe_messages(self._buffer):
            chart = deserialize_chart(payload)
            if self.last_timestamp is not None and chart.timestamp <= self.last_timestamp:
                continue  # stale or duplicate
            self.last_timestamp = chart.timestamp
            charts.append(chart)
        return charts
