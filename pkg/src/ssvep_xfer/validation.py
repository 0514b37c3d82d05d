"""Input checks and conversions between trial arrays and epoch tensors."""
from __future__ import annotations

import numpy as np
from numpy import ndarray


def check_trials(X, name: str = "X") -> ndarray:
    """Return ``X`` as a finite float64 array of shape (n_trials, n_channels, n_samples)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise ValueError(f"{name} must be (n_trials, n_channels, n_samples), got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} has no trials")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return X


def trials_to_tensor(X, y, classes=None) -> tuple[ndarray, ndarray]:
    """Group labelled trials into an epoch tensor.

    Every class must have the same number of trials; their order within a
    class becomes the block order.

    Returns
    -------
    tensor : ndarray, shape (n_classes, n_channels, n_samples, n_blocks)
    classes : ndarray
    """
    X = check_trials(X)
    y = np.asarray(y).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} trials but y has {y.shape[0]} labels")
    classes = np.unique(y) if classes is None else np.asarray(classes)
    groups = [X[y == c] for c in classes]
    counts = {len(g) for g in groups}
    if 0 in counts:
        raise ValueError("every class needs at least one trial")
    if len(counts) != 1:
        raise ValueError(f"unbalanced classes: trials per class {sorted(counts)}")
    return np.stack(groups).transpose(0, 2, 3, 1), classes


def tensor_to_trials(tensor) -> tuple[ndarray, ndarray]:
    """Inverse of :func:`trials_to_tensor`; labels are stimulus indices."""
    tensor = np.asarray(tensor)
    n_f, n_c, n_s, n_b = tensor.shape
    X = tensor.transpose(3, 0, 1, 2).reshape(n_b * n_f, n_c, n_s)
    y = np.tile(np.arange(n_f), n_b)
    return X, y
