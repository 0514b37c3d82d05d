"""Leave-one-subject-out / leave-one-block-out evaluation, accuracy and ITR."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np
from numpy import ndarray

from .selection import SelectionConfig
from .signal import GAZE_SHIFT_S, FilterBank, FilterBankSpec
from .transfer import (ALGORITHMS, check_epoch_tensor, features_prepared, fit_prepared,
                       labels_from, prepare, source_instances)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fold:
    target: int
    test_block: int
    train_blocks: tuple[int, ...]


@dataclass(frozen=True)
class CvPlan:
    n_subjects: int
    n_blocks: int
    n_target_blocks: int
    folds: tuple[Fold, ...]


def build_cv_plan(n_subjects: int, n_blocks: int, n_target_blocks: int) -> CvPlan:
    """LOSO outer loop, LOBO inner loop.

    For test block ``b`` the target trains on the ``n_target_blocks`` blocks
    that follow ``b`` cyclically.
    """
    if n_subjects < 2:
        raise ValueError("need at least 2 subjects for leave-one-subject-out")
    if not 1 <= n_target_blocks <= n_blocks - 1:
        raise ValueError(
            f"n_target_blocks must lie in [1, {n_blocks - 1}], got {n_target_blocks}")
    folds = []
    for s in range(n_subjects):
        for b in range(n_blocks):
            train = tuple((b + k) % n_blocks for k in range(1, n_target_blocks + 1))
            folds.append(Fold(s, b, train))
    return CvPlan(n_subjects, n_blocks, n_target_blocks, tuple(folds))


def itr(p: float, n_f: int, t_seconds: float) -> float:
    """Information transfer rate in bits/min, clamped at 0 below chance."""
    if not 0 <= p <= 1:
        raise ValueError(f"accuracy must lie in [0, 1], got {p}")
    if n_f < 2:
        raise ValueError("need at least 2 targets")
    if not t_seconds > 0:
        raise ValueError("selection time must be > 0")
    if p <= 1 / n_f:
        return 0.0
    bits = math.log2(n_f) + p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n_f - 1))
    return max(0.0, bits * 60 / t_seconds)


@dataclass
class FoldResult:
    fold: Fold
    predictions: list[int] = field(default_factory=list)
    truth: list[int] = field(default_factory=list)
    error: str | None = None
    selected: list[list[list[int]]] | None = None
    features: ndarray | None = None
    train_s: float = 0.0
    infer_s: float = 0.0

    def to_dict(self) -> dict:
        d = {
            "target": self.fold.target,
            "test_block": self.fold.test_block,
            "train_blocks": list(self.fold.train_blocks),
            "predictions": self.predictions,
            "truth": self.truth,
            "error": self.error,
        }
        if self.selected is not None:
            d["selected"] = self.selected
        return d


@dataclass
class EvalReport:
    algorithm: str
    folds: list[FoldResult]
    confusion: ndarray
    accuracy: float
    itr_bits_per_min: float
    per_subject_accuracy: list[float | None]
    t_select_s: float
    config: dict = field(default_factory=dict)

    @property
    def n_failures(self) -> int:
        return sum(f.error is not None for f in self.folds)

    @property
    def predictions(self) -> ndarray:
        return np.concatenate([np.asarray(f.predictions, dtype=int) for f in self.folds])

    @property
    def features(self) -> ndarray | None:
        blocks = [f.features for f in self.folds if f.features is not None]
        return np.concatenate(blocks) if blocks else None

    def timings(self) -> dict:
        ok = [f for f in self.folds if f.error is None]
        return {
            "train_s": [f.train_s for f in ok],
            "infer_s": [f.infer_s for f in ok],
        }

    def to_dict(self, with_timings: bool = True) -> dict:
        d = {
            "algorithm": self.algorithm,
            "accuracy": self.accuracy,
            "itr_bits_per_min": self.itr_bits_per_min,
            "t_select_s": self.t_select_s,
            "per_subject_accuracy": self.per_subject_accuracy,
            "confusion": self.confusion.tolist(),
            "n_failures": self.n_failures,
            "folds": [f.to_dict() for f in self.folds],
            "config": self.config,
        }
        if with_timings:
            d["timings"] = self.timings()
        return d


class _Prepared:
    """Sub-band filtered data and source TRCs, computed once per run."""

    def __init__(self, dataset, bank: FilterBankSpec, fs: float, zero_phase: bool,
                 need_sources: bool):
        fb = FilterBank(bank, fs, zero_phase)
        self.data = [prepare(x, fb) for x in dataset]
        self.trcs = None
        if need_sources:
            self.trcs = [source_instances(p) for p in self.data]


def _run_fold(fold: Fold, prep: _Prepared, algo: str, bank: FilterBankSpec, fs: float,
              selection, zero_phase: bool, keep_features: bool) -> FoldResult:
    res = FoldResult(fold)
    try:
        target = prep.data[fold.target]
        train = target[:, :, list(fold.train_blocks)]
        sources = None
        others = [s for s in range(len(prep.data)) if s != fold.target]
        if prep.trcs is not None:
            sources = np.stack([prep.trcs[s] for s in others])
        t0 = time.perf_counter()
        model = fit_prepared(train, sources, bank, fs, algorithm=algo, selection=selection,
                             zero_phase=zero_phase)
        t1 = time.perf_counter()
        test = target[:, :, fold.test_block]
        fvs = features_prepared(model, test)
        labels = labels_from(fvs)
        t2 = time.perf_counter()
        res.train_s, res.infer_s = t1 - t0, t2 - t1
        res.predictions = [int(v) for v in labels]
        res.truth = list(range(test.shape[1]))
        if keep_features:
            res.features = np.stack([f.r for f in fvs])
        if algo == "ss-itrca":
            res.selected = [[[others[k] for k in sm.source_ids] for sm in row]
                            for row in model.per_subband]
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.warning("fold target=%d test_block=%d failed: %s",
                       fold.target, fold.test_block, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def run_eval(dataset, plan: CvPlan, algo: str, *, fs: float, bank: FilterBankSpec,
             selection: SelectionConfig | None = None, zero_phase: bool = True,
             t_select_s: float | None = None, jobs: int = 1,
             keep_features: bool = False, config: dict | None = None) -> EvalReport:
    """Cross-validate ``algo`` on ``dataset`` (one epoch tensor per subject).

    ``t_select_s`` defaults to the window length plus the 0.5 s gaze shift.
    Per-fold failures are recorded in the report instead of raised.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    dataset = [check_epoch_tensor(x, f"subject {k}") for k, x in enumerate(dataset)]
    if len(dataset) != plan.n_subjects:
        raise ValueError(f"plan expects {plan.n_subjects} subjects, got {len(dataset)}")
    shape = dataset[0].shape
    for k, x in enumerate(dataset):
        if x.shape != shape[:3] + (plan.n_blocks,):
            raise ValueError(
                f"subject {k} tensor shaped {x.shape}, expected {shape[:3] + (plan.n_blocks,)}")
    n_f, _, n_s, _ = shape
    if t_select_s is None:
        t_select_s = n_s / fs + GAZE_SHIFT_S

    prep = _Prepared(dataset, bank, fs, zero_phase, need_sources=algo != "trca")
    run = lambda f: _run_fold(f, prep, algo, bank, fs, selection, zero_phase, keep_features)  # noqa: E731
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(run, plan.folds))
    else:
        folds = [run(f) for f in plan.folds]

    confusion = np.zeros((n_f, n_f), dtype=int)
    per_subject = np.zeros((plan.n_subjects, 2), dtype=int)
    for f in folds:
        for t, p in zip(f.truth, f.predictions):
            confusion[t, p] += 1
            per_subject[f.fold.target] += (int(t == p), 1)
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    # None marks a subject whose folds all failed
    subj_acc = [float(c / n) if n else None for c, n in per_subject]
    return EvalReport(algo, folds, confusion, accuracy, itr(accuracy, n_f, t_select_s),
                      subj_acc, t_select_s, dict(config or {}))
