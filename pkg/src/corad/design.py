"""Constant-modulus MIMO sequence design with spectral notching.

A set of M unit-modulus fast-time sequences (one per transmitter) is shaped
by cyclic coordinate descent against a weighted sum of two costs:

* ``g_c`` -- integrated auto-correlation sidelobes plus total aperiodic
  cross-correlation energy, which keeps the set separable at the receiver.
* ``g_s`` -- energy radiated into masked (occupied) frequency bins of the
  oversampled spectrum, which carves notches over busy bands.

The scalarized objective is ``g = theta*g_s/s_scale + (1-theta)*g_c/c_scale``
with ``theta`` in [0, 1].  The optimizer touches one chip at a time; for a
single chip the objective restricted to its phase is a second-order
trigonometric polynomial, so candidate phases are scored exactly and updates
never increase the objective.  A thread-safe control channel lets callers
retune ``theta`` or the mask between sweeps without restarting.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MODULUS_TOL = 1e-9


class LengthMismatchError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class AlphabetKind(Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class PhaseAlphabet:
    """Admissible chip phases: the full circle, or L evenly spaced points."""

    kind: AlphabetKind = AlphabetKind.CONTINUOUS
    L: int = 0

    def __post_init__(self):
        if self.kind is AlphabetKind.DISCRETE and self.L < 2:
            raise ConfigurationError(f"discrete alphabet needs L >= 2, got {self.L}")

    @staticmethod
    def continuous() -> "PhaseAlphabet":
        return PhaseAlphabet(AlphabetKind.CONTINUOUS)

    @staticmethod
    def discrete(L: int) -> "PhaseAlphabet":
        return PhaseAlphabet(AlphabetKind.DISCRETE, L)

    def table(self) -> np.ndarray | None:
        """Unit phasors of the discrete alphabet, None for continuous."""
        if self.kind is AlphabetKind.CONTINUOUS:
            return None
        ph = 2.0 * np.pi * np.arange(self.L) / self.L
        tbl = np.cos(ph) + 1j * np.sin(ph)
        # snap the axis points so binary/quaternary sets stay exact
        tbl.real[np.abs(tbl.real) < 1e-12] = 0.0
        tbl.imag[np.abs(tbl.imag) < 1e-12] = 0.0
        tbl.real[np.abs(tbl.real - 1) < 1e-12] = 1.0
        tbl.real[np.abs(tbl.real + 1) < 1e-12] = -1.0
        tbl.imag[np.abs(tbl.imag - 1) < 1e-12] = 1.0
        tbl.imag[np.abs(tbl.imag + 1) < 1e-12] = -1.0
        return tbl


@dataclass
class SequenceSet:
    """M x N matrix of unit-modulus chips, one row per transmitter."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.ndim == 1:
            self.entries = self.entries[np.newaxis, :]
        if self.entries.ndim != 2:
            raise ConfigurationError("entries must be an M x N matrix")
        m, n = self.entries.shape
        if m < 1 or n < 2:
            raise ConfigurationError(f"need M >= 1 and N >= 2, got {m} x {n}")
        err = np.max(np.abs(np.abs(self.entries) - 1.0))
        if err > MODULUS_TOL:
            raise ConfigurationError(f"entries deviate from unit modulus by {err:.3e}")

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def copy(self) -> "SequenceSet":
        return SequenceSet(self.entries.copy())


@dataclass(frozen=True)
class SpectralMask:
    """Weighted normalized-frequency intervals; weight 1 marks a band to notch.

    Intervals are half-open subsets of [0, 1) (DFT-bin convention: 0.5 is the
    band edge, frequencies above 0.5 alias to the negative half).  The
    stopband bin set is derived on an ``oversampling * N`` point grid by
    rounding interval edges to the nearest bin boundary.
    """

    bands: tuple = ()
    oversampling: int = 2

    def __post_init__(self):
        if self.oversampling < 1:
            raise ConfigurationError("oversampling factor must be >= 1")
        bands = tuple((float(lo), float(hi), int(w)) for lo, hi, w in self.bands)
        prev_hi = 0.0
        for lo, hi, w in bands:
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigurationError(f"interval [{lo}, {hi}) outside [0, 1)")
            if lo < prev_hi:
                raise ConfigurationError("mask intervals must be sorted and disjoint")
            if w not in (0, 1):
                raise ConfigurationError("mask weights must be 0 or 1")
            prev_hi = hi
        object.__setattr__(self, "bands", bands)

    @staticmethod
    def empty(oversampling: int = 2) -> "SpectralMask":
        return SpectralMask((), oversampling)

    def n_bins(self, n_chips: int) -> int:
        return self.oversampling * n_chips

    def stopband_bins(self, n_chips: int) -> np.ndarray:
        """Indices of occupied bins on the oversampled grid (may be empty)."""
        nf = self.n_bins(n_chips)
        idx = []
        for lo, hi, w in self.bands:
            if w != 1:
                continue
            b0 = int(round(lo * nf))
            b1 = int(round(hi * nf))
            idx.extend(range(b0, min(b1, nf)))
        return np.asarray(sorted(set(idx)), dtype=np.intp)


@dataclass
class DesignConfig:
    """Knobs of the scalarized design problem and its solver."""

    theta: float = 0.75
    alphabet: PhaseAlphabet = field(default_factory=PhaseAlphabet.continuous)
    max_sweeps: int = 40
    rel_tolerance: float = 1e-4
    gs_scale: float | None = None  # None: normalize at the starting point
    gc_scale: float | None = None
    phase_grid: int = 1024

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ConfigurationError(f"theta must lie in [0, 1], got {self.theta}")
        if self.rel_tolerance <= 0:
            raise ConfigurationError("relative tolerance must be positive")
        for s in (self.gs_scale, self.gc_scale):
            if s is not None and s <= 0:
                raise ConfigurationError("normalization scales must be positive")


@dataclass(frozen=True)
class ObjectiveReport:
    """Cost snapshot after one sweep: raw g_s, g_c and the scalarized value."""

    g_s: float
    g_c: float
    scalarized: float
    sweep: int

    @staticmethod
    def build(gs: float, gc: float, theta: float, gs_scale: float,
              gc_scale: float, sweep: int) -> "ObjectiveReport":
        g = theta * gs / gs_scale + (1.0 - theta) * gc / gc_scale
        return ObjectiveReport(gs, gc, g, sweep)


class ControlChannel:
    """Mailbox for retuning a running optimizer from another thread.

    Writers call :meth:`set_theta` / :meth:`set_mask` / :meth:`request_stop`
    at any time; the optimizer drains the mailbox between sweeps.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._theta: float | None = None
        self._mask: SpectralMask | None = None
        self._stop = False

    def set_theta(self, theta: float) -> None:
        if not (0.0 <= theta <= 1.0):
            raise ConfigurationError(f"theta must lie in [0, 1], got {theta}")
        with self._lock:
            self._theta = float(theta)

    def set_mask(self, mask: SpectralMask) -> None:
        with self._lock:
            self._mask = mask

    def request_stop(self) -> None:
        with self._lock:
            self._stop = True

    def take(self):
        """Atomically fetch and clear pending updates."""
        with self._lock:
            out = (self._theta, self._mask, self._stop)
            self._theta = None
            self._mask = None
            self._stop = False
        return out


# ---------------------------------------------------------------------------
# cost functions

def cross_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Aperiodic cross-correlation r(k) = sum_n a[n] conj(b[n+k]).

    Lags run k = -(N-1) .. N-1 with zero padding outside the sequences, so
    the returned vector has length 2N-1 and r(0) sits at index N-1.
    """
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if a.shape != b.shape:
        raise LengthMismatchError(f"length mismatch: {a.size} vs {b.size}")
    return np.convolve(a, np.conj(b[::-1]))[::-1]


def g_c(X: SequenceSet) -> float:
    """Auto-correlation sidelobe energy plus total cross-correlation energy."""
    rows = X.entries
    m_count, n = rows.shape
    total = 0.0
    for m in range(m_count):
        r = cross_correlation(rows[m], rows[m])
        e = np.abs(r) ** 2
        total += float(e.sum() - e[n - 1])  # drop the lag-0 mainlobe
    for m1 in range(m_count):
        for m2 in range(m1 + 1, m_count):
            r = cross_correlation(rows[m1], rows[m2])
            total += 2.0 * float(np.sum(np.abs(r) ** 2))  # both ordered pairs
    return total


def g_s(X: SequenceSet, mask: SpectralMask) -> float:
    """Energy of every row's oversampled spectrum inside the masked bins."""
    bins = mask.stopband_bins(X.N)
    if bins.size == 0:
        return 0.0
    spec = np.fft.fft(X.entries, mask.n_bins(X.N), axis=1)
    return float(np.sum(np.abs(spec[:, bins]) ** 2))


def band_psd(X: SequenceSet, mask: SpectralMask):
    """Mean per-bin power in the stopband and in the rest of the band.

    Returns ``(stop_mean, pass_mean)`` in linear power; either may be NaN if
    the corresponding bin set is empty.
    """
    nf = mask.n_bins(X.N)
    spec = np.abs(np.fft.fft(X.entries, nf, axis=1)) ** 2
    per_bin = spec.mean(axis=0)
    stop = mask.stopband_bins(X.N)
    sel = np.zeros(nf, dtype=bool)
    sel[stop] = True
    stop_mean = float(per_bin[sel].mean()) if sel.any() else float("nan")
    pass_mean = float(per_bin[~sel].mean()) if (~sel).any() else float("nan")
    return stop_mean, pass_mean


def resolve_scales(cfg: DesignConfig, X: SequenceSet, mask: SpectralMask):
    """Normalization pair; unset entries default to the cost at X (or 1)."""
    gs0 = cfg.gs_scale if cfg.gs_scale is not None else g_s(X, mask)
    gc0 = cfg.gc_scale if cfg.gc_scale is not None else g_c(X)
    return (gs0 if gs0 > 0 else 1.0), (gc0 if gc0 > 0 else 1.0)


def scalarized_objective(X: SequenceSet, mask: SpectralMask,
                         cfg: DesignConfig, sweep: int = 0) -> ObjectiveReport:
    """Evaluate the weighted-sum objective at X under the given config."""
    gs_scale = cfg.gs_scale if cfg.gs_scale is not None else 1.0
    gc_scale = cfg.gc_scale if cfg.gc_scale is not None else 1.0
    return ObjectiveReport.build(g_s(X, mask), g_c(X), cfg.theta,
                                 gs_scale, gc_scale, sweep)


# ---------------------------------------------------------------------------
# coordinate-descent optimizer

class _DescentState:
    """Correlations and stopband spectra kept consistent with X during a sweep."""

    def __init__(self, X: np.ndarray, mask: SpectralMask):
        self.X = X
        self.M, self.N = X.shape
        self.nf = mask.n_bins(self.N)
        self.stop_bins = mask.stopband_bins(self.N)
        if self.stop_bins.size:
            n_idx = np.arange(self.N)[:, None]
            self.w_stop = np.exp(-2j * np.pi * n_idx * self.stop_bins[None, :] / self.nf)
        else:
            self.w_stop = np.zeros((self.N, 0), dtype=np.complex128)
        self.refresh()

    def refresh(self) -> None:
        """Recompute correlations/spectra from X, killing incremental drift."""
        X = self.X
        self.r_auto = np.stack([cross_correlation(X[m], X[m]) for m in range(self.M)])
        self.r_cross = {}
        for m1 in range(self.M):
            for m2 in range(m1 + 1, self.M):
                self.r_cross[(m1, m2)] = cross_correlation(X[m1], X[m2])
        if self.stop_bins.size:
            self.d_stop = np.fft.fft(X, self.nf, axis=1)[:, self.stop_bins]
        else:
            self.d_stop = np.zeros((self.M, 0), dtype=np.complex128)

    def exact_costs(self, mask: SpectralMask) -> tuple[float, float]:
        xset = SequenceSet(self.X.copy())
        return g_s(xset, mask), g_c(xset)


def _coord_coeffs(st: _DescentState, m: int, n: int, w_gs: float, w_gc: float):
    """First/second-harmonic coefficients of the objective vs. the chip phase.

    With the chip at z = e^{j phi}, the scalarized objective restricted to
    this coordinate is const + Re(c1 z) + Re(c2 z^2).
    """
    N = st.N
    z0 = st.X[m, n]
    c1 = 0.0 + 0.0j
    c2 = 0.0 + 0.0j
    work = {}
    if w_gc > 0.0:
        u = np.zeros(2 * N - 1, dtype=np.complex128)
        v = np.zeros(2 * N - 1, dtype=np.complex128)
        u[N - 1 - n: 2 * N - 1 - n] = np.conj(st.X[m])
        v[n: n + N] = st.X[m][::-1]
        u[N - 1] = 0.0  # the lag-0 term is constant for unit-modulus chips
        v[N - 1] = 0.0
        b = st.r_auto[m] - u * z0 - v * np.conj(z0)
        a1 = np.sum(np.conj(b) * u + b * np.conj(v))
        a2 = np.sum(u * np.conj(v))
        c1 += w_gc * 2.0 * a1
        c2 += w_gc * 2.0 * a2
        work["u"] = u
        work["v"] = v
        cross = []
        for m2 in range(st.M):
            if m2 == m:
                continue
            if m < m2:
                r = st.r_cross[(m, m2)]
                u2 = np.zeros(2 * N - 1, dtype=np.complex128)
                u2[N - 1 - n: 2 * N - 1 - n] = np.conj(st.X[m2])
                b2 = r - u2 * z0
                c1 += w_gc * 4.0 * np.sum(np.conj(b2) * u2)
                cross.append((m, m2, "z", u2))
            else:
                r = st.r_cross[(m2, m)]
                v2 = np.zeros(2 * N - 1, dtype=np.complex128)
                v2[n: n + N] = st.X[m2][::-1]
                b2 = r - v2 * np.conj(z0)
                c1 += w_gc * 4.0 * np.sum(b2 * np.conj(v2))
                cross.append((m2, m, "zbar", v2))
        work["cross"] = cross
    if w_gs > 0.0 and st.stop_bins.size:
        w_n = st.w_stop[n]
        b_s = st.d_stop[m] - w_n * z0
        c1 += w_gs * 2.0 * np.sum(np.conj(b_s) * w_n)
        work["w_n"] = w_n
    return c1, c2, work


def _apply_update(st: _DescentState, m: int, n: int, z_new: complex, work: dict):
    z0 = st.X[m, n]
    d = z_new - z0
    if "u" in work:
        st.r_auto[m] += work["u"] * d + work["v"] * np.conj(d)
        for m1, m2, kind, vec in work["cross"]:
            if kind == "z":
                st.r_cross[(m1, m2)] += vec * d
            else:
                st.r_cross[(m1, m2)] += vec * np.conj(d)
    if "w_n" in work:
        st.d_stop[m] += work["w_n"] * d
    st.X[m, n] = z_new


def _phase_value(c1: complex, c2: complex, z: np.ndarray | complex):
    return np.real(c1 * z + c2 * z * z)

def _best_continuous(c1: complex, c2: complex, grid: np.ndarray):
    vals = _phase_value(c1, c2, grid)
    k = int(np.argmin(vals))
    phi = np.angle(grid[k])
    span = 2.0 * np.pi / grid.size
    # two local grid refinements around the coarse winner
    for _ in range(2):
        local = phi + np.linspace(-span, span, 65)
        lv = _phase_value(c1, c2, np.exp(1j * local))
        j = int(np.argmin(lv))
        phi = local[j]
        span /= 32.0
    z = np.exp(1j * phi)
    return z, float(_phase_value(c1, c2, z))


def _sweep(st: _DescentState, w_gs: float, w_gc: float,
           alphabet_tbl: np.ndarray | None, grid: np.ndarray) -> int:
    """One cyclic pass over all chips; returns the number of accepted updates."""
    accepted = 0
    for m in range(st.M):
        for n in range(st.N):
            c1, c2, work = _coord_coeffs(st, m, n, w_gs, w_gc)
            z0 = st.X[m, n]
            val0 = float(_phase_value(c1, c2, z0))
            if alphabet_tbl is not None:
                vals = _phase_value(c1, c2, alphabet_tbl)
                k = int(np.argmin(vals))
                z_best, v_best = alphabet_tbl[k], float(vals[k])
            else:
                z_best, v_best = _best_continuous(c1, c2, grid)
            # keep the current phase on ties; accept only real decreases
            if v_best < val0 - 1e-10 * (1.0 + abs(val0)):
                _apply_update(st, m, n, complex(z_best), work)
                accepted += 1
    return accepted


def _snap_to_alphabet(X: np.ndarray, tbl: np.ndarray) -> np.ndarray:
    dist = np.abs(X[..., None] - tbl[None, None, :])
    err = dist.min(axis=-1).max()
    if err > MODULUS_TOL:
        raise ConfigurationError(
            f"starting set deviates from the discrete alphabet by {err:.3e}")
    return tbl[np.argmin(dist, axis=-1)]


def optimize(X0: SequenceSet, mask: SpectralMask, cfg: DesignConfig,
             control: ControlChannel | None = None):
    """Coordinate-descent design from X0; returns (SequenceSet, trace).

    The trace holds one :class:`ObjectiveReport` per sweep (index 0 is the
    starting point), with raw costs recomputed exactly at sweep boundaries.
    For a fixed mask and theta the scalarized values are non-increasing.
    Pending control-channel updates are applied between sweeps; a theta or
    mask change re-normalizes the objective at the current iterate and
    restarts the descent bookkeeping from there.
    """
    theta = cfg.theta
    cur_mask = mask
    tbl = cfg.alphabet.table()
    X = X0.entries.copy()
    if tbl is not None:
        X = _snap_to_alphabet(X, tbl)
    grid = np.exp(2j * np.pi * np.arange(cfg.phase_grid) / cfg.phase_grid)

    st = _DescentState(X, cur_mask)
    gs_scale, gc_scale = resolve_scales(cfg, SequenceSet(X.copy()), cur_mask)
    gs0, gc0 = st.exact_costs(cur_mask)
    trace = [ObjectiveReport.build(gs0, gc0, theta, gs_scale, gc_scale, 0)]
    prev = trace[0].scalarized

    for sweep in range(1, cfg.max_sweeps + 1):
        if control is not None:
            new_theta, new_mask, stop = control.take()
            if stop:
                break
            changed = False
            if new_theta is not None and new_theta != theta:
                theta = new_theta
                changed = True
            if new_mask is not None:
                cur_mask = new_mask
                st = _DescentState(X, cur_mask)
                changed = True
            if changed:
                gs_scale, gc_scale = resolve_scales(
                    DesignConfig(theta=theta, alphabet=cfg.alphabet,
                                 gs_scale=cfg.gs_scale, gc_scale=cfg.gc_scale),
                    SequenceSet(X.copy()), cur_mask)
                gs0, gc0 = st.exact_costs(cur_mask)
                prev = ObjectiveReport.build(gs0, gc0, theta, gs_scale,
                                             gc_scale, sweep - 1).scalarized

        w_gs = theta / gs_scale
        w_gc = (1.0 - theta) / gc_scale
        st.refresh()
        _sweep(st, w_gs, w_gc, tbl, grid)
        gs_v, gc_v = st.exact_costs(cur_mask)
        rep = ObjectiveReport.build(gs_v, gc_v, theta, gs_scale, gc_scale, sweep)
        trace.append(rep)
        if prev <= 0.0:
            break
        rel = (prev - rep.scalarized) / prev
        if rel < cfg.rel_tolerance:
            break
        prev = rep.scalarized

    return SequenceSet(st.X.copy()), trace


def one_sweep(X: SequenceSet, mask: SpectralMask, cfg: DesignConfig,
              gs_scale: float, gc_scale: float):
    """Advance the design by exactly one sweep (the cognitive-loop step).

    Returns ``(SequenceSet, ObjectiveReport)`` with costs evaluated after the
    sweep against the supplied normalization pair.
    """
    tbl = cfg.alphabet.table()
    Xw = X.entries.copy()
    if tbl is not None:
        Xw = _snap_to_alphabet(Xw, tbl)
    grid = np.exp(2j * np.pi * np.arange(cfg.phase_grid) / cfg.phase_grid)
    st = _DescentState(Xw, mask)
    _sweep(st, cfg.theta / gs_scale, (1.0 - cfg.theta) / gc_scale, tbl, grid)
    gs_v, gc_v = st.exact_costs(mask)
    rep = ObjectiveReport.build(gs_v, gc_v, cfg.theta, gs_scale, gc_scale, 0)
    return SequenceSet(st.X.copy()), rep
