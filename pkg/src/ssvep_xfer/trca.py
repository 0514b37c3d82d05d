"""Task-related component analysis (single-filter TRCA).

Trial stacks are arrays of shape ``(n_blocks, n_channels, n_samples)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy import ndarray

from .numerics import solve_rayleigh


@dataclass(frozen=True)
class SpatialFilter:
    weights: ndarray
    eigenvalue: float = float("nan")
    stimulus_index: int | None = None


def _check_trials(trials, min_blocks: int) -> ndarray:
    trials = np.asarray(trials, dtype=np.float64)
    if trials.ndim != 3:
        raise ValueError(f"trials must be (n_blocks, n_channels, n_samples), got {trials.shape}")
    if trials.shape[0] < min_blocks:
        raise ValueError(f"need at least {min_blocks} block(s), got {trials.shape[0]}")
    if trials.shape[2] < 2:
        raise ValueError("need at least 2 samples per trial")
    return trials


def grand_average(trials) -> ndarray:
    """Element-wise mean over blocks."""
    return _check_trials(trials, 1).mean(axis=0)


def trca_matrices(trials) -> tuple[ndarray, ndarray]:
    """Inter-trial covariance sum ``S`` and trial covariance sum ``Q``.

    ``S`` sums ``Cov(X_h1, X_h2)`` over every ordered pair ``h1 != h2``;
    ``Q`` sums ``Cov(X_h, X_h)``.
    """
    trials = _check_trials(trials, 2)
    n_s = trials.shape[2]
    centred = trials - trials.mean(axis=2, keepdims=True)
    # sum over all ordered pairs (incl. h1 == h2) is Cov(sum X, sum X)
    total = centred.sum(axis=0)
    full = total @ total.T / (n_s - 1)
    Q = np.einsum("hcs,hds->cd", centred, centred) / (n_s - 1)
    S = full - Q
    return (S + S.T) / 2, (Q + Q.T) / 2


def trca_filter(trials, stimulus_index: int | None = None) -> SpatialFilter:
    S, Q = trca_matrices(trials)
    pair = solve_rayleigh(S, Q)
    return SpatialFilter(weights=pair.eigenvector, eigenvalue=pair.eigenvalue,
                         stimulus_index=stimulus_index)


def extract_trc(spatial_filter, template) -> ndarray:
    """Project a ``(n_channels, n_samples)`` template onto one component."""
    w = np.asarray(getattr(spatial_filter, "weights", spatial_filter), dtype=np.float64).ravel()
    template = np.asarray(template, dtype=np.float64)
    if template.ndim != 2 or template.shape[0] != w.size:
        raise ValueError(
            f"filter length {w.size} does not match template shape {template.shape}")
    return w @ template


def build_source_template(trcs) -> ndarray:
    """Stack source TRCs row-wise in the given order."""
    rows = [np.asarray(t, dtype=np.float64).ravel() for t in trcs]
    if not rows:
        raise ValueError("no TRCs to stack")
    n = rows[0].size
    for k, r in enumerate(rows):
        if r.size != n:
            raise ValueError(f"TRC {k} has length {r.size}, expected {n}")
    return np.vstack(rows)
