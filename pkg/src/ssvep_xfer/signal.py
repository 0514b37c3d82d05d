"""Band-pass design, zero-phase filtering, filter banks and epoching."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from numpy import ndarray
from scipy import signal as sps

DEFAULT_ORDER = 4
DEFAULT_RIPPLE_DB = 0.5
GAZE_SHIFT_S = 0.5
LATENCY_S = 0.14


@dataclass(frozen=True)
class BandpassSpec:
    low_hz: float
    high_hz: float
    order: int = DEFAULT_ORDER
    ripple_db: float = DEFAULT_RIPPLE_DB

    def validate(self, fs: float) -> None:
        if not 0 < self.low_hz < self.high_hz:
            raise ValueError(f"need 0 < low_hz < high_hz, got [{self.low_hz}, {self.high_hz}]")
        if self.high_hz >= fs / 2:
            raise ValueError(
                f"high edge {self.high_hz} Hz is at or beyond Nyquist ({fs / 2} Hz)")
        if self.order < 2:
            raise ValueError("filter order must be >= 2")
        if not self.ripple_db > 0:
            raise ValueError("ripple_db must be > 0")


@dataclass(frozen=True)
class FilterCoefficients:
    b: ndarray
    a: ndarray

    @property
    def padlen(self) -> int:
        # 3 * (polynomial order + 1), the usual odd-extension length
        return 3 * max(len(self.a), len(self.b))


def subband_weight(m: int) -> float:
    """Filter-bank weight of the 1-based sub-band ``m``: ``m**-1.25 + 0.25``."""
    if m < 1:
        raise ValueError("sub-band index is 1-based")
    return m ** -1.25 + 0.25


@dataclass(frozen=True)
class FilterBankSpec:
    bands: tuple[BandpassSpec, ...]
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.bands:
            raise ValueError("filter bank needs at least one band")
        if not self.weights:
            object.__setattr__(self, "weights",
                               tuple(subband_weight(m + 1) for m in range(len(self.bands))))
        if len(self.weights) != len(self.bands):
            raise ValueError("one weight per band required")

    @property
    def n_subbands(self) -> int:
        return len(self.bands)

    def validate(self, fs: float) -> None:
        for band in self.bands:
            band.validate(fs)

    def to_dict(self) -> dict:
        return {
            "bands": [[b.low_hz, b.high_hz, b.order, b.ripple_db] for b in self.bands],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterBankSpec":
        bands = tuple(BandpassSpec(float(lo), float(hi), int(o), float(r))
                      for lo, hi, o, r in d["bands"])
        return cls(bands=bands, weights=tuple(float(w) for w in d["weights"]))


def default_filterbank(fs: float, n_subbands: int = 3, *, low_step: float = 8.0,
                       high_hz: float = 88.0, ceiling_hz: float | None = None,
                       order: int = DEFAULT_ORDER,
                       ripple_db: float = DEFAULT_RIPPLE_DB) -> FilterBankSpec:
    """Overlapping bank: sub-band ``m`` spans ``[low_step * m, high]``.

    The upper edge is clamped to ``min(high_hz, 0.95 * fs / 2, ceiling_hz)``.
    """
    top = min(high_hz, 0.95 * fs / 2)
    if ceiling_hz is not None:
        top = min(top, ceiling_hz)
    bands = []
    for m in range(1, n_subbands + 1):
        lo = low_step * m
        if lo >= top:
            raise ValueError(f"sub-band {m} low edge {lo} Hz reaches the upper edge {top} Hz")
        bands.append(BandpassSpec(lo, top, order, ripple_db))
    return FilterBankSpec(tuple(bands))


def design_bandpass(spec: BandpassSpec, fs: float) -> FilterCoefficients:
    """Chebyshev type I band-pass as ``(b, a)`` polynomials."""
    spec.validate(fs)
    b, a = sps.cheby1(spec.order, spec.ripple_db, [spec.low_hz, spec.high_hz],
                      btype="bandpass", fs=fs)
    if np.abs(np.roots(a)).max() >= 1:
        raise ValueError(f"designed filter for {spec} is unstable")
    return FilterCoefficients(b=b, a=a)


def filtfilt(coeffs: FilterCoefficients, x, zero_phase: bool = True) -> ndarray:
    """Zero-phase filtering along the last axis.

    Uses odd reflection padding of ``coeffs.padlen`` samples. The
    forward-backward and backward-forward passes are averaged so that the
    result commutes exactly with time reversal. ``zero_phase=False`` gives a
    single causal pass instead.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    padlen = coeffs.padlen
    if n <= padlen:
        raise ValueError(f"input length {n} too short: filtering needs more than {padlen} samples")
    if not zero_phase:
        return sps.lfilter(coeffs.b, coeffs.a, x, axis=-1)
    fwd = sps.filtfilt(coeffs.b, coeffs.a, x, axis=-1, padtype="odd", padlen=padlen)
    rev = sps.filtfilt(coeffs.b, coeffs.a, x[..., ::-1], axis=-1,
                       padtype="odd", padlen=padlen)[..., ::-1]
    return (fwd + rev) / 2


class FilterBank:
    """Designed filter bank, reusable across trials."""

    def __init__(self, spec: FilterBankSpec, fs: float, zero_phase: bool = True):
        spec.validate(fs)
        self.spec = spec
        self.fs = fs
        self.zero_phase = zero_phase
        self.coeffs = [design_bandpass(b, fs) for b in spec.bands]

    def __len__(self) -> int:
        return len(self.coeffs)

    def apply(self, x) -> ndarray:
        """Filter ``x`` (any leading shape, samples last) into every sub-band.

        Returns an array with a new leading sub-band axis.
        """
        return np.stack([filtfilt(c, x, self.zero_phase) for c in self.coeffs])


def subband_decompose(trial, bank: FilterBankSpec, fs: float,
                      zero_phase: bool = True) -> list[ndarray]:
    trial = np.asarray(trial, dtype=np.float64)
    if trial.ndim != 2:
        raise ValueError(f"trial must be (n_channels, n_samples), got {trial.shape}")
    return list(FilterBank(bank, fs, zero_phase).apply(trial))


@dataclass(frozen=True)
class EpochWindow:
    onset_s: float
    length_s: float
    fs: float

    def __post_init__(self):
        if self.onset_s < 0:
            raise ValueError("onset must be >= 0")
        if not self.length_s > 0:
            raise ValueError("window length must be > 0")
        if self.n_samples < 2:
            raise ValueError(
                f"window of {self.length_s} s at {self.fs} Hz holds fewer than 2 samples")

    @property
    def start(self) -> int:
        return int(math.floor(self.onset_s * self.fs + 1e-9))

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.length_s * self.fs + 1e-9))


def extract_epoch(continuous, window: EpochWindow) -> ndarray:
    """Copy of samples ``[start, start + n_samples)`` along the last axis."""
    continuous = np.asarray(continuous)
    start, n = window.start, window.n_samples
    total = continuous.shape[-1]
    if start + n > total:
        raise ValueError(
            f"window [{window.onset_s}, {window.onset_s + window.length_s}] s needs "
            f"{start + n} samples, recording has {total}")
    return continuous[..., start:start + n].astype(np.float64, copy=True)
