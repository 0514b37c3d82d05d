"""Similarity-based source-subject selection."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from numpy import ndarray

from .numerics import safe_corr

TRIGGER_MODES = ("absolute", "signed")


@dataclass(frozen=True)
class SelectionConfig:
    """Selection parameters.

    ``trigger_mode="absolute"`` activates selection when any ``|c| > gamma``;
    ``"signed"`` compares the raw signed similarity instead. ``shared``
    reuses the first sub-band's selection for every sub-band.
    """
    gamma: float = 0.5
    c_lb: float = 0.9
    enabled: bool = True
    trigger_mode: str = "absolute"
    shared: bool = False

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0 <= self.c_lb <= 1:
            raise ValueError(f"c_lb must lie in [0, 1], got {self.c_lb}")
        if self.trigger_mode not in TRIGGER_MODES:
            raise ValueError(f"trigger_mode must be one of {TRIGGER_MODES}")


@dataclass(frozen=True)
class SimilarityReport:
    raw: ndarray
    normalized: ndarray
    selected: tuple[int, ...]
    triggered: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["raw"] = [float(v) for v in self.raw]
        d["normalized"] = [float(v) for v in self.normalized]
        d["selected"] = list(self.selected)
        return d


def similarity(target_trc, source_trcs) -> ndarray:
    """Pearson correlation of the target TRC with every source TRC.

    A constant TRC yields similarity 0.
    """
    target_trc = np.asarray(target_trc, dtype=np.float64).ravel()
    source_trcs = [np.asarray(s, dtype=np.float64).ravel() for s in source_trcs]
    if not source_trcs:
        raise ValueError("need at least one source TRC")
    for k, s in enumerate(source_trcs):
        if s.size != target_trc.size:
            raise ValueError(f"source TRC {k} has length {s.size}, target has {target_trc.size}")
    return np.array([safe_corr(target_trc, s) for s in source_trcs])


def select_subjects(raw, config: SelectionConfig = SelectionConfig()) -> SimilarityReport:
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.size == 0:
        raise ValueError("empty similarity vector")
    everyone = tuple(range(raw.size))
    mags = np.abs(raw)
    c_max = mags.max()
    trigger_stat = mags if config.trigger_mode == "absolute" else raw
    normalized = mags / c_max if c_max > 0 else np.zeros_like(mags)

    triggered = bool(config.enabled and c_max > 0 and np.any(trigger_stat > config.gamma))
    if config.enabled and config.c_lb >= 1:
        # nothing can exceed a normalized similarity of 1, triggered or not
        selected: tuple[int, ...] = ()
    elif not triggered or config.c_lb == 0:
        # c_lb == 0 keeps every source, including exact zeros
        selected = everyone
    else:
        selected = tuple(int(n) for n in np.flatnonzero(normalized > config.c_lb))
    return SimilarityReport(raw, normalized, selected, triggered)
