"""Exact evaluation of the Ising model on binary response vectors.

The parameter matrix ``S`` is symmetric.  Off-diagonal entries are edge
weights; the diagonal entries enter the exponent as ``s_jj * y_j / 2``, so
the logistic intercept of item ``j`` given the rest is ``s_jj / 2``.

Everything that sums over all ``2**J`` response patterns is restricted to
``J <= MAX_ENUM_ITEMS`` and is evaluated in the log domain.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from .errors import DimensionTooLargeError, ValidationError

MAX_ENUM_ITEMS = 20
_CHUNK_BITS = 16


def as_ising_matrix(S, *, atol: float = 0.0) -> np.ndarray:
    """Validate ``S`` as a square symmetric float matrix and return a copy.

    With ``atol > 0`` a nearly symmetric input is symmetrized; otherwise
    exact symmetry is required.
    """
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise ValidationError(f"Ising matrix must be square with J >= 1, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValidationError("Ising matrix has non-finite entries")
    if atol > 0:
        if np.max(np.abs(S - S.T)) > atol:
            raise ValidationError("Ising matrix is not symmetric")
        S = 0.5 * (S + S.T)
    elif not np.array_equal(S, S.T):
        raise ValidationError("Ising matrix is not symmetric")
    return S


def _check_enumerable(J: int) -> None:
    if J > MAX_ENUM_ITEMS:
        raise DimensionTooLargeError(
            f"exact enumeration supports J <= {MAX_ENUM_ITEMS}, got J={J}"
        )


def _as_binary_vector(y, J: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (J,):
        raise ValidationError(f"pattern must have length {J}, got shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("pattern entries must be 0 or 1")
    return y.astype(np.float64)


def all_patterns(J: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Binary patterns with codes ``start..stop-1`` as rows of a uint8 array.

    Item ``j`` (0-based) is bit ``j`` of the code, so code 1 is ``(1,0,...,0)``.
    """
    stop = 2**J if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(J)) & 1).astype(np.uint8)


def pattern_codes(Y) -> np.ndarray:
    """Inverse of :func:`all_patterns`: integer code of each row of ``Y``."""
    Y = np.asarray(Y, dtype=np.int64)
    return Y @ (np.int64(1) << np.arange(Y.shape[1], dtype=np.int64))


def log_weights(Y, S: np.ndarray) -> np.ndarray:
    """Unnormalized log-probabilities ``y'Sy / 2`` for each row of ``Y``."""
    Y = np.asarray(Y, dtype=np.float64)
    return 0.5 * np.einsum("ij,jk,ik->i", Y, S, Y)


def log_normalizing_constant(S) -> float:
    """``log c(S)`` by a chunked log-sum-exp over all patterns."""
    S = as_ising_matrix(S)
    J = S.shape[0]
    _check_enumerable(J)
    total = 2**J
    step = 2 ** min(J, _CHUNK_BITS)
    acc = -np.inf
    for start in range(0, total, step):
        lw = log_weights(all_patterns(J, start, min(start + step, total)), S)
        acc = np.logaddexp(acc, logsumexp(lw))
    return float(acc)


def normalizing_constant(S) -> float:
    """Sum of ``exp(y'Sy/2)`` over all ``2**J`` binary patterns."""
    return float(np.exp(log_normalizing_constant(S)))


def log_pmf(y, S) -> float:
    """Log-probability of the binary pattern ``y``."""
    S = as_ising_matrix(S)
    yv = _as_binary_vector(y, S.shape[0])
    return float(0.5 * yv @ S @ yv - log_normalizing_constant(S))


def pattern_log_probs(S) -> np.ndarray:
    """Log-probabilities of every pattern, indexed by pattern code."""
    S = as_ising_matrix(S)
    J = S.shape[0]
    _check_enumerable(J)
    lw = log_weights(all_patterns(J), S)
    return lw - logsumexp(lw)


def conditional_logit(j: int, y, row) -> float:
    """``s_jj/2 + sum_{k != j} s_jk y_k``: the log-odds of ``y_j = 1``."""
    row = np.asarray(row, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if row.ndim != 1 or y.shape != row.shape:
        raise ValidationError(
            f"row and pattern must be vectors of equal length, got {row.shape} and {y.shape}"
        )
    if not 0 <= j < row.shape[0]:
        raise ValidationError(f"item index {j} out of range for J={row.shape[0]}")
    return float(row @ y - row[j] * y[j] + 0.5 * row[j])


def conditional_success_prob(j: int, y, row) -> float:
    """P(Y_j = 1 | y_{-j}) under the row ``s_j`` of the parameter matrix.

    ``y[j]`` is ignored.
    """
    return float(expit(conditional_logit(j, y, row)))


def conditional_logits(Y, S) -> np.ndarray:
    """All conditional logits at once: entry ``(i, j)`` is the log-odds of
    ``y_ij = 1`` given the other entries of row ``i``."""
    Y = np.asarray(Y, dtype=np.float64)
    d = np.diag(S)
    return Y @ S - Y * d + 0.5 * d


def pseudo_log_likelihood(Y, S) -> float:
    """Sum over rows and items of the log conditional (logistic) likelihood.

    Parameters
    ----------
    Y : array_like, shape (N, J)
        Complete binary data; missing cells are not allowed.
    S : array_like, shape (J, J)
        Symmetric parameter matrix.
    """
    S = as_ising_matrix(S)
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[1] != S.shape[0]:
        raise ValidationError(f"data shape {Y.shape} does not match J={S.shape[0]}")
    if not np.all((Y == 0) | (Y == 1)):
        raise ValidationError("pseudo-likelihood requires complete binary data")
    eta = conditional_logits(Y, S)
    # log p(y | eta) = y*eta - log(1 + e^eta) = log_expit(+-eta)
    return float(np.sum(log_expit(np.where(Y == 1, eta, -eta))))
