"""scikit-learn style wrappers around the functional training code."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .selection import SelectionConfig
from .signal import BandpassSpec, FilterBankSpec, default_filterbank
from .transfer import features, fit_itrca, labels_from
from .validation import check_trials, trials_to_tensor


class TRCA(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Filter-bank TRCA classifier.

    Parameters
    ----------
    fs : float
        Sampling rate in Hz.
    n_subbands : int
        Number of filter-bank sub-bands when ``bands`` is not given.
    bands : list of (low_hz, high_hz), optional
        Explicit sub-band edges.
    filter_order, ripple_db : Chebyshev type I design parameters.
    zero_phase : bool
        Forward-backward filtering when True.

    Attributes
    ----------
    classes_ : ndarray
    model_ : TrainedModel
    """

    _algorithm = "trca"

    def __init__(self, fs=250.0, n_subbands=3, bands=None, filter_order=4, ripple_db=0.5,
                 zero_phase=True):
        self.fs = fs
        self.n_subbands = n_subbands
        self.bands = bands
        self.filter_order = filter_order
        self.ripple_db = ripple_db
        self.zero_phase = zero_phase

    def _bank(self) -> FilterBankSpec:
        if self.bands is None:
            return default_filterbank(self.fs, self.n_subbands, order=self.filter_order,
                                      ripple_db=self.ripple_db)
        return FilterBankSpec(tuple(BandpassSpec(float(lo), float(hi), self.filter_order,
                                                 self.ripple_db) for lo, hi in self.bands))

    def _selection(self):
        return None

    def _fit(self, X, y, sources):
        tensor, self.classes_ = trials_to_tensor(X, y)
        if tensor.shape[3] < 2:
            raise ValueError("every class needs at least 2 training trials")
        src = []
        for k, (Xs, ys) in enumerate(sources or []):
            t, _ = trials_to_tensor(Xs, ys, self.classes_)
            src.append(t)
        self.model_ = fit_itrca(tensor, src, self._bank(), self.fs,
                                algorithm=self._algorithm, selection=self._selection(),
                                zero_phase=self.zero_phase, config=self.get_params())
        self.n_features_in_ = tensor.shape[1]
        return self

    def fit(self, X, y):
        """Fit on trials ``X`` of shape (n_trials, n_channels, n_samples)."""
        return self._fit(X, y, None)

    def decision_function(self, X):
        """Filter-bank scores ``r``, shape (n_trials, n_classes)."""
        check_is_fitted(self, "model_")
        fvs = features(self.model_, check_trials(X))
        return np.stack([f.r for f in fvs])

    def transform(self, X):
        return self.decision_function(X)

    def predict(self, X):
        check_is_fitted(self, "model_")
        fvs = features(self.model_, check_trials(X))
        return self.classes_[labels_from(fvs)]


class ITRCA(TRCA):
    """Instance-based transfer TRCA.

    ``fit`` takes the target's trials plus ``sources``, a list of
    ``(X_source, y_source)`` pairs with the same classes and trial shape.
    """

    _algorithm = "itrca"

    def fit(self, X, y, sources=None):
        if not sources:
            raise ValueError(f"{type(self).__name__} needs at least one source subject")
        return self._fit(X, y, sources)


class SSITRCA(ITRCA):
    """iTRCA with similarity-based source-subject selection.

    Parameters
    ----------
    gamma : float
        Trigger: selection activates once some source similarity exceeds it.
    c_lb : float
        Lower boundary on normalized similarity for a source to be kept.
    trigger_mode : {"absolute", "signed"}
    shared_selection : bool
        Reuse the first sub-band's selection in every sub-band.
    """

    _algorithm = "ss-itrca"

    def __init__(self, fs=250.0, n_subbands=3, bands=None, filter_order=4, ripple_db=0.5,
                 zero_phase=True, gamma=0.5, c_lb=0.9, trigger_mode="absolute",
                 shared_selection=False):
        super().__init__(fs=fs, n_subbands=n_subbands, bands=bands, filter_order=filter_order,
                         ripple_db=ripple_db, zero_phase=zero_phase)
        self.gamma = gamma
        self.c_lb = c_lb
        self.trigger_mode = trigger_mode
        self.shared_selection = shared_selection

    def _selection(self):
        return SelectionConfig(gamma=self.gamma, c_lb=self.c_lb,
                               trigger_mode=self.trigger_mode, shared=self.shared_selection)
