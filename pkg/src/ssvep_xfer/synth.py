"""Synthetic multi-subject SSVEP data with known cluster structure.

Each stimulus evokes a latent harmonic waveform
``s(t) = sum_k a_k sin(2 pi k f t + k phi + theta_k)``. Subjects of the same
cluster share the per-harmonic offsets ``theta_k`` up to a small jitter;
different clusters draw them independently (scaled by ``cluster_spread``)
or, in quadrature mode, sit 90 degrees apart.
The waveform is mixed into the channels together with spatially coloured
background sources and sensor noise, both pink. ``snr_db`` is a narrow-band
SNR: response power at the harmonics inside 8-40 Hz over the noise power
in 1 Hz windows at the same frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math

import numpy as np
from numpy import ndarray

_BASE_KEY = 7919
_CLUSTER_KEY = 104729
_SUBJECT_KEY = 1299709


@dataclass
class GroundTruth:
    subject_id: int
    cluster_id: int
    latent: ndarray          # (n_stimuli, n_samples), unit-power prototypes
    mixing: ndarray          # (n_channels, n_latent); column 0 carries the SSVEP
    labels: ndarray          # (n_stimuli, n_blocks)
    snr_db: float


@dataclass
class SynthSpec:
    n_subjects: int = 8
    n_stimuli: int = 6
    frequencies: list[float] | None = None
    phases: list[float] | None = None
    fs: float = 250.0
    trial_length_s: float = 1.0
    n_blocks: int = 4
    n_channels: int = 9
    n_harmonics: int = 3
    snr_db: float | list[float] = 0.0
    cluster_ids: list[int] | None = None
    seed: int = 0
    freq_start: float = 8.0
    freq_step: float = 0.2
    phase_step: float = 0.5 * math.pi
    harmonic_decay: float = 1.0
    cluster_spread: float = 1.0
    cluster_mode: str = "random"
    subject_jitter: float = 0.15
    n_background: int = 3
    background_ratio: float = 0.5

    def __post_init__(self):
        if self.frequencies is None:
            self.frequencies = [self.freq_start + self.freq_step * i
                                for i in range(self.n_stimuli)]
        if self.phases is None:
            self.phases = [(self.phase_step * i) % (2 * math.pi) for i in range(self.n_stimuli)]
        if self.cluster_ids is None:
            self.cluster_ids = [0] * self.n_subjects
        self.frequencies = [float(f) for f in self.frequencies]
        self.phases = [float(p) for p in self.phases]
        self.cluster_ids = [int(c) for c in self.cluster_ids]
        if isinstance(self.snr_db, (list, tuple)):
            self.snr_db = [_parse_snr(s) for s in self.snr_db]
        else:
            self.snr_db = _parse_snr(self.snr_db)
        self.validate()

    def validate(self) -> None:
        if self.n_subjects < 1 or self.n_stimuli < 1:
            raise ValueError("need at least one subject and one stimulus")
        if len(self.frequencies) != self.n_stimuli or len(self.phases) != self.n_stimuli:
            raise ValueError("one frequency and one phase per stimulus required")
        if len(set(self.frequencies)) != self.n_stimuli:
            raise ValueError("stimulus frequencies must be distinct")
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        top = self.n_harmonics * max(self.frequencies)
        if self.fs <= 2 * top:
            raise ValueError(
                f"fs={self.fs} Hz violates Nyquist for harmonic {self.n_harmonics} at {top} Hz")
        if len(self.cluster_ids) != self.n_subjects:
            raise ValueError("one cluster id per subject required")
        if isinstance(self.snr_db, list) and len(self.snr_db) != self.n_subjects:
            raise ValueError("one snr_db per subject required")
        if self.n_blocks < 1 or self.n_channels < 1:
            raise ValueError("n_blocks and n_channels must be >= 1")
        if self.cluster_mode not in ("random", "quadrature"):
            raise ValueError("cluster_mode must be 'random' or 'quadrature'")
        if self.n_background < 0:
            raise ValueError("n_background must be >= 0")
        if self.n_background + 1 > self.n_channels and self.n_background > 0:
            raise ValueError("mixing needs n_channels >= n_background + 1 for full column rank")
        if self.n_samples < 2:
            raise ValueError("trial too short")

    @property
    def n_samples(self) -> int:
        return int(round(self.fs * self.trial_length_s))

    def subject_snr(self, subject_id: int) -> float:
        if isinstance(self.snr_db, list):
            return self.snr_db[subject_id]
        return self.snr_db

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = ([_snr_json(s) for s in self.snr_db] if isinstance(self.snr_db, list)
                       else _snr_json(self.snr_db))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth spec keys: {sorted(unknown)}")
        return cls(**d)


def _parse_snr(v) -> float:
    if isinstance(v, str):
        if v.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ValueError(f"bad snr_db {v!r}")
    return float(v)


def _snr_json(v: float):
    return "inf" if math.isinf(v) else v


def pink_noise(rng: np.random.Generator, shape: tuple[int, ...], fs: float) -> ndarray:
    """Unit-variance 1/f noise along the last axis."""
    n = shape[-1]
    spec = rng.standard_normal(shape[:-1] + (n // 2 + 1,)) \
        + 1j * rng.standard_normal(shape[:-1] + (n // 2 + 1,))
    f = np.fft.rfftfreq(n, 1 / fs)
    scale = np.zeros_like(f)
    scale[1:] = 1 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * scale, n=n)
    x -= x.mean(axis=-1, keepdims=True)
    return x / x.std(axis=-1, keepdims=True)


def _pink_density(f: ndarray, n: int, fs: float) -> ndarray:
    """Per-Hz power density of :func:`pink_noise` (unit variance) at ``f``."""
    grid = np.fft.rfftfreq(n, 1 / fs)[1:]
    weights = 1 / grid
    weights[-1] /= 2 if n % 2 == 0 else 1  # Nyquist bin is not doubled
    return (1 / f) / weights.sum() / (fs / n)


def narrowband_noise_gain(spec: SynthSpec, latent_amps: ndarray, latent_std: ndarray,
                          mix_sig: ndarray, noise_var: ndarray, snr_db: float,
                          band: tuple[float, float] = (8.0, 40.0), width: float = 1.0) -> float:
    """Noise scale giving the requested narrow-band SNR.

    SNR is SSVEP power at every response harmonic inside ``band`` over the
    noise power in a ``width``-Hz window at the same frequencies, pooled over
    channels and stimuli.
    """
    sig = noise = 0.0
    for i, f0 in enumerate(spec.frequencies):
        for k in range(1, spec.n_harmonics + 1):
            f = k * f0
            if not band[0] <= f <= band[1]:
                continue
            p_h = (latent_amps[i, k - 1] / latent_std[i]) ** 2 / 2
            sig += p_h * float(mix_sig @ mix_sig)
            noise += float(noise_var.sum()) * _pink_density(np.array(f), spec.n_samples,
                                                             spec.fs) * width
    if sig == 0 or noise == 0:
        raise ValueError(f"no response harmonic falls inside {band} Hz")
    return math.sqrt(sig / noise / 10 ** (snr_db / 10))


def _offsets(spec: SynthSpec, key: list[int]) -> ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed] + key))
    return rng.uniform(-math.pi, math.pi, size=(spec.n_stimuli, spec.n_harmonics))


def cluster_prototype(spec: SynthSpec, cluster_id: int) -> ndarray:
    """Per-(stimulus, harmonic) phase offsets shared by one cluster.

    In ``"quadrature"`` mode cluster ``c`` is shifted by ``c * pi / 2`` at every
    harmonic, so clusters with adjacent ids are uncorrelated.
    """
    base = _offsets(spec, [_BASE_KEY])
    if spec.cluster_mode == "quadrature":
        return base + cluster_id * math.pi / 2
    own = _offsets(spec, [_CLUSTER_KEY, cluster_id])
    return base + spec.cluster_spread * (own - base)


def harmonic_waveform(spec: SynthSpec, offsets: ndarray, amps: ndarray) -> ndarray:
    t = np.arange(spec.n_samples) / spec.fs
    out = np.zeros((spec.n_stimuli, spec.n_samples))
    for i, (f, ph) in enumerate(zip(spec.frequencies, spec.phases)):
        for k in range(1, spec.n_harmonics + 1):
            out[i] += amps[i, k - 1] * np.sin(2 * math.pi * k * f * t + k * ph
                                              + offsets[i, k - 1])
    return out


def gen_subject(spec: SynthSpec, subject_id: int) -> tuple[ndarray, GroundTruth]:
    """Epoch tensor ``(n_stimuli, n_channels, n_samples, n_blocks)`` for one subject."""
    if not 0 <= subject_id < spec.n_subjects:
        raise ValueError(f"subject_id {subject_id} out of range")
    cluster = spec.cluster_ids[subject_id]
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, _SUBJECT_KEY, subject_id]))

    decay = np.arange(1, spec.n_harmonics + 1) ** -spec.harmonic_decay
    amps = decay * (1 + spec.subject_jitter * rng.standard_normal((spec.n_stimuli,
                                                                   spec.n_harmonics)))
    amps = np.abs(amps)
    offsets = cluster_prototype(spec, cluster) \
        + spec.subject_jitter * rng.standard_normal((spec.n_stimuli, spec.n_harmonics))
    latent = harmonic_waveform(spec, offsets, amps)
    latent_std = latent.std(axis=1)
    latent /= latent_std[:, None]

    n_c, n_s, n_b = spec.n_channels, spec.n_samples, spec.n_blocks
    n_lat = 1 + spec.n_background
    while True:
        mixing = rng.standard_normal((n_c, n_lat))
        if np.linalg.matrix_rank(mixing) == min(n_c, n_lat):
            break

    signal = np.einsum("c,fs->fcs", mixing[:, 0], latent)
    signal = np.repeat(signal[..., None], n_b, axis=3)
    snr = spec.subject_snr(subject_id)
    # noise is drawn even when unused so streams stay aligned across SNR settings
    bg = pink_noise(rng, (spec.n_stimuli, n_b, spec.n_background, n_s), spec.fs)
    sensor = pink_noise(rng, (spec.n_stimuli, n_b, n_c, n_s), spec.fs)
    if math.isinf(snr):
        data = signal
    else:
        bg_w = spec.background_ratio / max(1.0, math.sqrt(spec.n_background))
        sensor_w = 1 - spec.background_ratio
        noise = (bg_w * np.einsum("cl,fbls->fbcs", mixing[:, 1:], bg) + sensor_w * sensor)
        noise_var = bg_w ** 2 * (mixing[:, 1:] ** 2).sum(axis=1) + sensor_w ** 2
        gain = narrowband_noise_gain(spec, amps, latent_std, mixing[:, 0], noise_var, snr)
        data = signal + gain * noise.transpose(0, 2, 3, 1)

    labels = np.repeat(np.arange(spec.n_stimuli)[:, None], n_b, axis=1)
    truth = GroundTruth(subject_id, cluster, latent, mixing, labels, snr)
    return data, truth


def gen_dataset(spec: SynthSpec) -> list[tuple[ndarray, GroundTruth]]:
    return [gen_subject(spec, s) for s in range(spec.n_subjects)]
