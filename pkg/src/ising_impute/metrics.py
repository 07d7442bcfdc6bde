"""Replication-level accuracy and edge-recovery metrics.

Recovery metrics look only at off-diagonal pairs ``j < l`` and pool the
indicator counts over replications before forming rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ising import as_ising_matrix


@dataclass(frozen=True)
class ReplicationSet:
    """True matrix and ``K >= 1`` estimates of it."""

    truth: np.ndarray
    estimates: np.ndarray

    def __post_init__(self):
        truth = as_ising_matrix(self.truth)
        est = np.asarray(self.estimates, dtype=np.float64)
        if est.ndim == 2:
            est = est[None]
        J = truth.shape[0]
        if est.ndim != 3 or est.shape[1:] != (J, J):
            raise ValidationError(f"estimates must have shape (K, {J}, {J})")
        if est.shape[0] < 1:
            raise ValidationError("need at least one estimate")
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "estimates", est)

    @property
    def n_reps(self) -> int:
        return self.estimates.shape[0]

    @property
    def dim(self) -> int:
        return self.truth.shape[0]

    def edge_values(self):
        """``(truth, estimates)`` restricted to the pairs ``j < l``."""
        r, c = np.triu_indices(self.dim, k=1)
        return self.truth[r, c], self.estimates[:, r, c]


def mse_bias(reps: ReplicationSet):
    """Per-parameter MSE and bias as two ``(J, J)`` arrays."""
    err = reps.estimates - reps.truth
    return np.mean(err**2, axis=0), np.mean(err, axis=0)


def _edge_support(reps: ReplicationSet):
    truth, est = reps.edge_values()
    positive = truth != 0
    if positive.all() or not positive.any():
        raise ValidationError("truth must contain both zero and nonzero edges for ROC analysis")
    return positive, np.abs(est)


def default_thresholds(reps: ReplicationSet) -> np.ndarray:
    """0, every distinct ``|s_hat|`` over edges and replications, and inf."""
    _, est = reps.edge_values()
    return np.unique(np.concatenate([[0.0], np.abs(est).ravel(), [np.inf]]))


def roc_curve(reps: ReplicationSet, thresholds=None) -> np.ndarray:
    """Rows ``(tau, TPR, FPR)``, an edge counting as selected when ``|s_hat| > tau``.

    Counts are pooled over all replications and pairs ``j < l``.
    """
    positive, mag = _edge_support(reps)
    tau = default_thresholds(reps) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    if tau.ndim != 1 or np.any(np.diff(tau) < 0):
        raise ValidationError("thresholds must be a sorted one-dimensional array")
    pos = mag[:, positive].ravel()
    neg = mag[:, ~positive].ravel()
    tpr = (pos[None, :] > tau[:, None]).sum(axis=1) / pos.size
    fpr = (neg[None, :] > tau[:, None]).sum(axis=1) / neg.size
    return np.column_stack([tau, tpr, fpr])


def auc(curve) -> float:
    """Trapezoidal area under a ``(tau, TPR, FPR)`` curve.

    The endpoints ``(0, 0)`` and ``(1, 1)`` are added; ties in FPR are
    ordered by TPR so vertical segments contribute nothing.
    """
    curve = np.asarray(curve, dtype=np.float64)
    fpr = np.concatenate([[0.0], curve[:, 2], [1.0]])
    tpr = np.concatenate([[0.0], curve[:, 1], [1.0]])
    order = np.lexsort((tpr, fpr))
    x, y = fpr[order], tpr[order]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def jaccard(reps: ReplicationSet, tau: float) -> float:
    """Pooled ``|selected & true| / |selected | true|``; 0 if the union is empty."""
    if not tau > 0:
        raise ValidationError("jaccard threshold must be positive")
    truth, est = reps.edge_values()
    selected = np.abs(est) > tau
    true = np.broadcast_to(truth != 0, selected.shape)
    union = np.sum(selected | true)
    if union == 0:
        return 0.0
    return float(np.sum(selected & true) / union)


def edge_mse(reps: ReplicationSet) -> np.ndarray:
    """MSE of each off-diagonal parameter, ordered as ``np.triu_indices(J, 1)``."""
    mse, _ = mse_bias(reps)
    return mse[np.triu_indices(reps.dim, k=1)]
