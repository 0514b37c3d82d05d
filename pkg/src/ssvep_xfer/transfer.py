"""iTRCA / SS-iTRCA training and inference on epoch tensors.

An epoch tensor has shape ``(n_stimuli, n_channels, n_samples, n_blocks)``.
Internally every subject is filtered once into a "prepared" array of shape
``(n_subbands, n_stimuli, n_blocks, n_channels, n_samples)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
from numpy import ndarray

from .numerics import cca_first_pair, corr_rows
from .selection import SelectionConfig, SimilarityReport, select_subjects, similarity
from .signal import FilterBank, FilterBankSpec
from .trca import build_source_template, extract_trc, trca_filter

logger = logging.getLogger(__name__)

ALGORITHMS = ("trca", "itrca", "ss-itrca")


@dataclass(frozen=True)
class LatentWeights:
    w_gs: ndarray
    w_gt: ndarray
    correlation: float


@dataclass(frozen=True)
class StimulusModel:
    """Everything trained for one stimulus in one sub-band."""
    target_filter: ndarray
    target_template: ndarray
    source_template: ndarray
    latent: LatentWeights | None
    source_ids: tuple[int, ...] = ()
    report: SimilarityReport | None = None
    stimulus_index: int = 0

    @property
    def target_trc(self) -> ndarray:
        return self.target_filter @ self.target_template

    @property
    def general_template(self) -> ndarray | None:
        if self.latent is None:
            return None
        return self.latent.w_gs @ self.source_template


@dataclass(frozen=True)
class FeatureVector:
    """Per-trial features; ``rho1``/``rho2``/``rho`` are ``(n_subbands, n_stimuli)``."""
    rho1: ndarray
    rho2: ndarray
    rho: ndarray
    r: ndarray


@dataclass
class TrainedModel:
    per_subband: list[list[StimulusModel]]
    bank: FilterBankSpec
    fs: float
    n_channels: int
    n_samples: int
    algorithm: str = "ss-itrca"
    zero_phase: bool = True
    selection: SelectionConfig | None = None
    config: dict = field(default_factory=dict)

    @property
    def n_stimuli(self) -> int:
        return len(self.per_subband[0])

    def filterbank(self) -> FilterBank:
        return FilterBank(self.bank, self.fs, self.zero_phase)


def check_epoch_tensor(tensor, name: str = "tensor", min_blocks: int = 1) -> ndarray:
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 4:
        raise ValueError(
            f"{name} must be (n_stimuli, n_channels, n_samples, n_blocks), got {tensor.shape}")
    if tensor.shape[0] < 1:
        raise ValueError(f"{name} has an empty stimulus set")
    if tensor.shape[3] < min_blocks:
        raise ValueError(f"{name} has {tensor.shape[3]} block(s); at least {min_blocks} needed")
    if not np.all(np.isfinite(tensor)):
        raise ValueError(f"{name} contains non-finite values")
    return tensor


def prepare(tensor, fb: FilterBank) -> ndarray:
    """Sub-band filter every trial of an epoch tensor."""
    tensor = check_epoch_tensor(tensor)
    return fb.apply(tensor.transpose(0, 3, 1, 2))


def source_instances(prepared_source: ndarray) -> ndarray:
    """Source TRCs, shape ``(n_subbands, n_stimuli, n_samples)``."""
    n_m, n_f, n_b = prepared_source.shape[:3]
    if n_b < 2:
        raise ValueError(f"source subject has {n_b} block(s); TRCA needs at least 2")
    out = np.empty((n_m, n_f, prepared_source.shape[-1]))
    for m in range(n_m):
        for i in range(n_f):
            trials = prepared_source[m, i]
            w = trca_filter(trials, i)
            out[m, i] = extract_trc(w, trials.mean(axis=0))
    return out


def _fit_stimulus(trials: ndarray, src: ndarray | None, selection: SelectionConfig | None,
                  i: int, forced: tuple[int, ...] | None) -> StimulusModel:
    filt = trca_filter(trials, i).weights
    template = trials.mean(axis=0)
    n_s = template.shape[1]
    if src is None or src.shape[0] == 0:
        return StimulusModel(filt, template, np.empty((0, n_s)), None, (), None, i)

    report = None
    if forced is not None:
        chosen = forced
    elif selection is None:
        chosen = tuple(range(src.shape[0]))
    else:
        report = select_subjects(similarity(filt @ template, src), selection)
        chosen = report.selected
    if not chosen:
        return StimulusModel(filt, template, np.empty((0, n_s)), None, (), report, i)

    Y = build_source_template(src[list(chosen)])
    pair = cca_first_pair(Y, template)
    latent = LatentWeights(pair.weight_a, pair.weight_b, pair.correlation)
    return StimulusModel(filt, template, Y, latent, tuple(chosen), report, i)


def fit_prepared(target: ndarray, source_trcs: ndarray | None, bank: FilterBankSpec,
                 fs: float, *, algorithm: str = "ss-itrca",
                 selection: SelectionConfig | None = None,
                 zero_phase: bool = True, config: dict | None = None) -> TrainedModel:
    """Train from pre-filtered data.

    Parameters
    ----------
    target : ndarray, shape (n_subbands, n_stimuli, n_blocks, n_channels, n_samples)
    source_trcs : ndarray, shape (n_sources, n_subbands, n_stimuli, n_samples), or None
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    n_m, n_f, n_b, n_c, n_s = target.shape
    if n_b < 2:
        raise ValueError(f"target has {n_b} training block(s); TRCA needs at least 2")
    if algorithm == "trca":
        source_trcs = None
    elif source_trcs is None or len(source_trcs) == 0:
        raise ValueError(f"{algorithm} needs at least one source subject")
    if algorithm == "ss-itrca" and selection is None:
        selection = SelectionConfig()
    if algorithm != "ss-itrca":
        selection = None
    if source_trcs is not None and source_trcs.shape[1:] != (n_m, n_f, n_s):
        raise ValueError(
            f"source TRCs shaped {source_trcs.shape[1:]}, expected {(n_m, n_f, n_s)}")

    per_subband: list[list[StimulusModel]] = []
    for m in range(n_m):
        row = []
        for i in range(n_f):
            src = None if source_trcs is None else source_trcs[:, m, i]
            forced = None
            if selection is not None and selection.shared and m > 0:
                forced = per_subband[0][i].source_ids
            row.append(_fit_stimulus(target[m, i], src, selection, i, forced))
        per_subband.append(row)
    return TrainedModel(per_subband, bank, fs, n_c, n_s, algorithm, zero_phase,
                        selection, dict(config or {}))


def fit_itrca(target, sources, bank: FilterBankSpec, fs: float, *,
              algorithm: str = "ss-itrca", selection: SelectionConfig | None = None,
              zero_phase: bool = True, config: dict | None = None) -> TrainedModel:
    """Train TRCA, iTRCA or SS-iTRCA from raw epoch tensors.

    ``target`` holds the target subject's training blocks; every entry of
    ``sources`` is one source subject's full tensor. All tensors must share
    stimuli, channels and samples.
    """
    fb = FilterBank(bank, fs, zero_phase)
    target = check_epoch_tensor(target, "target", 2)
    prepared = prepare(target, fb)
    src = None
    if algorithm != "trca":
        sources = list(sources or [])
        for k, s in enumerate(sources):
            s = check_epoch_tensor(s, f"source {k}", 2)
            if s.shape[:3] != target.shape[:3]:
                raise ValueError(
                    f"source {k} shaped {s.shape[:3]}, target shaped {target.shape[:3]}")
        src = np.stack([source_instances(prepare(s, fb)) for s in sources]) if sources else None
    return fit_prepared(prepared, src, bank, fs, algorithm=algorithm, selection=selection,
                        zero_phase=zero_phase, config=config)


def combine_feature(rho1, rho2):
    """``sign(rho1) rho1^2 + sign(rho2) rho2^2`` (elementwise)."""
    rho1 = np.asarray(rho1, dtype=np.float64)
    rho2 = np.asarray(rho2, dtype=np.float64)
    out = np.sign(rho1) * rho1 ** 2 + np.sign(rho2) * rho2 ** 2
    return float(out) if out.ndim == 0 else out


def fb_combine(per_subband_rho, weights):
    """Weighted sum over the leading sub-band axis."""
    rho = np.asarray(per_subband_rho, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if rho.shape[0] != weights.size:
        raise ValueError(f"{rho.shape[0]} sub-band values but {weights.size} weights")
    out = np.tensordot(weights, rho, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def subject_general_feature(model: StimulusModel, test_subband) -> float:
    return float(_general(model, np.asarray(test_subband, dtype=np.float64)[None])[0])


def subject_specific_feature(model: StimulusModel, test_subband) -> float:
    return float(_specific(model, np.asarray(test_subband, dtype=np.float64)[None])[0])


def _check_len(model: StimulusModel, trials: ndarray) -> None:
    if trials.shape[-1] != model.target_template.shape[1]:
        raise ValueError(
            f"test trial has {trials.shape[-1]} samples, model expects "
            f"{model.target_template.shape[1]}")


def _general(model: StimulusModel, trials: ndarray) -> ndarray:
    _check_len(model, trials)
    tpl = model.general_template
    if tpl is None:
        return np.zeros(trials.shape[0])
    return corr_rows(np.einsum("c,ncs->ns", model.latent.w_gt, trials), tpl)


def _specific(model: StimulusModel, trials: ndarray) -> ndarray:
    _check_len(model, trials)
    proj = np.einsum("c,ncs->ns", model.target_filter, trials)
    return corr_rows(proj, model.target_trc)


def features(model: TrainedModel, trials) -> list[FeatureVector]:
    """Feature vectors for a batch of ``(n_trials, n_channels, n_samples)`` trials."""
    trials = np.asarray(trials, dtype=np.float64)
    if trials.ndim == 2:
        trials = trials[None]
    if trials.ndim != 3 or trials.shape[1:] != (model.n_channels, model.n_samples):
        raise ValueError(
            f"trials shaped {trials.shape[1:]}, model expects "
            f"{(model.n_channels, model.n_samples)}")
    return features_prepared(model, model.filterbank().apply(trials))


def features_prepared(model: TrainedModel, sub: ndarray) -> list[FeatureVector]:
    """Features from already sub-band filtered trials ``(n_subbands, n_trials, n_c, n_s)``."""
    n_m, n_f = len(model.per_subband), model.n_stimuli
    if sub.shape[0] != n_m:
        raise ValueError(f"{sub.shape[0]} sub-bands supplied, model has {n_m}")
    n_trials = sub.shape[1]
    rho1 = np.empty((n_trials, n_m, n_f))
    rho2 = np.empty_like(rho1)
    for m, row in enumerate(model.per_subband):
        for i, sm in enumerate(row):
            rho1[:, m, i] = _general(sm, sub[m])
            rho2[:, m, i] = _specific(sm, sub[m])
    rho = combine_feature(rho1, rho2)
    weights = np.asarray(model.bank.weights)
    r = np.einsum("m,nmf->nf", weights, rho)
    return [FeatureVector(rho1[k], rho2[k], rho[k], r[k]) for k in range(n_trials)]


def labels_from(fvs: list[FeatureVector]) -> ndarray:
    # np.argmax returns the first maximum, i.e. the lowest stimulus index on ties
    return np.array([int(np.argmax(f.r)) for f in fvs], dtype=int)


def predict(model: TrainedModel, trials) -> tuple[ndarray, list[FeatureVector]]:
    fvs = features(model, trials)
    return labels_from(fvs), fvs


def classify(model: TrainedModel, test_trial) -> tuple[int, FeatureVector]:
    labels, fvs = predict(model, np.asarray(test_trial, dtype=np.float64)[None])
    return int(labels[0]), fvs[0]
