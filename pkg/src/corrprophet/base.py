"""Estimator-style base classes for online selection policies.

A policy is fitted on the known distributions (``fit``) and then decides on
realized arrival streams, one row per realization (``predict`` /
``select``).  Decisions on a row only ever look at that row's prefix, so the
vectorized evaluation is equivalent to running the policy online.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted


def check_arrivals(X, n: int | None = None) -> np.ndarray:
    """Validate a (num_realizations, n) matrix of nonnegative arrival values."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_features=1)
    if n is not None and X.shape[1] != n:
        raise ValueError(f"expected {n} arrivals per row, got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("arrival values must be nonnegative")
    return X


def first_taken(X: np.ndarray, threshold: float, include=None, strict: bool = False) -> np.ndarray:
    """Index of the first arrival passing the threshold in each row, or -1."""
    ok = X > threshold if strict else X >= threshold
    if include is not None:
        ok &= include[None, :]
    idx = np.argmax(ok, axis=1)
    return np.where(ok[np.arange(X.shape[0]), idx], idx, -1)


class OnlinePolicy(BaseEstimator):
    """Base class; subclasses implement ``select`` returning a take mask."""

    #: maximum number of arrivals the policy may keep
    budget_ = 1

    def select(self, X) -> np.ndarray:
        raise NotImplementedError

    def reward(self, X) -> np.ndarray:
        X = check_arrivals(X)
        return np.where(self.select(X), X, 0.0).sum(axis=1)

    def transcript(self) -> dict:
        return {"policy": type(self).__name__, "params": _jsonable(self.get_params())}


class SingleItemPolicy(OnlinePolicy):
    """Takes at most one arrival; ``predict`` gives its index or -1."""

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def select(self, X) -> np.ndarray:
        X = check_arrivals(X)
        idx = self.predict(X)
        mask = np.zeros(X.shape, dtype=bool)
        rows = np.flatnonzero(idx >= 0)
        mask[rows, idx[rows]] = True
        return mask


class InclusionThresholdPolicy(SingleItemPolicy):
    """Shared logic for policies that end up as (threshold, inclusion set).

    Subclasses set ``threshold_``, ``inclusion_set_`` (tuple or None),
    ``n_arrivals_`` and ``strict`` during ``fit``.
    """

    strict = False

    def _inclusion_mask(self, n):
        if self.inclusion_set_ is None:
            return None
        mask = np.zeros(n, dtype=bool)
        mask[list(self.inclusion_set_)] = True
        return mask

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        X = check_arrivals(X, self.n_arrivals_)
        return first_taken(X, self.threshold_, self._inclusion_mask(X.shape[1]), self.strict)

    def check_transcript(self, X, idx) -> None:
        """Assert the inclusion-threshold contract on decisions ``idx``."""
        X = np.asarray(X)
        taken = np.flatnonzero(idx >= 0)
        vals = X[taken, idx[taken]]
        if self.strict:
            assert np.all(vals > self.threshold_), "taken value not above threshold"
        else:
            assert np.all(vals >= self.threshold_), "taken value below threshold"
        if self.inclusion_set_ is not None:
            assert np.all(np.isin(idx[taken], self.inclusion_set_)), "took an excluded arrival"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)
