"""Recovering Ising parameters when items 1 and 2 are screening items.

When both screening answers are 0 the remaining items go unobserved, so the
data identify only the probabilities of patterns with ``y1 = 1`` or
``y2 = 1`` plus the aggregate ``P(Y1 = 0, Y2 = 0)``.  These quantities still
pin down the full parameter matrix; :func:`recover_from_restricted` carries
out that reconstruction explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from .errors import RecoveryError, ValidationError
from .ising import MAX_ENUM_ITEMS, all_patterns, as_ising_matrix, log_weights, pattern_log_probs
from .vech import vech_index, vech_inverse, vech_length

BASELINE_CODE = 1  # y_d = (1, 0, ..., 0)


@dataclass(frozen=True)
class RestrictedDistribution:
    """Probabilities of the screened-in patterns and of the screened-out event.

    ``codes[k]`` is the integer code (bit ``j`` = item ``j``) of the pattern
    whose probability is ``probs[k]``.
    """

    dim: int
    codes: np.ndarray
    probs: np.ndarray
    prob_00: float
    _lookup: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = 3 * 2 ** (self.dim - 2)
        if self.codes.shape != (expected,) or self.probs.shape != (expected,):
            raise ValidationError(f"expected {expected} screened-in patterns for J={self.dim}")
        if np.any(self.probs <= 0) or not self.prob_00 > 0:
            raise ValidationError("all probabilities must be strictly positive")
        object.__setattr__(
            self, "_lookup", {int(c): k for k, c in enumerate(self.codes)}
        )

    @property
    def patterns(self) -> np.ndarray:
        return ((self.codes[:, None] >> np.arange(self.dim)) & 1).astype(np.uint8)

    def total(self) -> float:
        return float(self.probs.sum() + self.prob_00)

    def prob(self, y) -> float:
        y = np.asarray(y, dtype=np.int64)
        code = int(y @ (1 << np.arange(self.dim)))
        if code & 3 == 0:
            raise KeyError("patterns with y1 = y2 = 0 are only available in aggregate")
        return float(self.probs[self._lookup[code]])


def restricted_distribution(S) -> RestrictedDistribution:
    S = as_ising_matrix(S)
    J = S.shape[0]
    if J < 3:
        raise ValidationError("the screening construction needs J >= 3")
    if J > MAX_ENUM_ITEMS:
        raise ValidationError(f"J={J} exceeds the enumeration bound {MAX_ENUM_ITEMS}")
    logp = pattern_log_probs(S)
    codes = np.arange(2**J, dtype=np.int64)
    screened_in = (codes & 3) != 0
    return RestrictedDistribution(
        dim=J,
        codes=codes[screened_in],
        probs=np.exp(logp[screened_in]),
        prob_00=float(np.exp(logsumexp(logp[~screened_in]))),
    )


def _features(Y: np.ndarray, J: int) -> np.ndarray:
    """Rows ``f(y)`` with ``f(y) @ vech(S) == y'Sy / 2``."""
    F = np.zeros((Y.shape[0], vech_length(J)))
    Yf = Y.astype(np.float64)
    for j in range(J):
        F[:, vech_index(j, j, J)] = 0.5 * Yf[:, j]
        for k in range(j + 1, J):
            F[:, vech_index(k, j, J)] = Yf[:, j] * Yf[:, k]
    return F


def recover_from_restricted(r: RestrictedDistribution, *, tol: float = 1e-8) -> np.ndarray:
    """Reconstruct the parameter matrix that generated ``r``.

    Log-ratios of screened-in pattern probabilities against the baseline
    ``(1, 0, ..., 0)`` are linear in the parameters and fix everything except
    one direction in ``(s11, s12, s22)``; along that direction the solution
    is affine in ``s11``.  The remaining scalar ``s11`` is then found by
    bisection from the probability of the screened-out event, which is a
    strictly decreasing function of ``s11``.

    Raises
    ------
    RecoveryError
        If the linear system is rank deficient, the scalar equation cannot be
        bracketed, or the final residual exceeds ``tol``.
    """
    J = r.dim
    K = vech_length(J)
    codes = r.codes
    # Patterns supported on {1, 2} plus at most two further items suffice.
    rest = codes >> 2
    n_rest = np.array([bin(int(c)).count("1") for c in rest])
    use = (n_rest <= 2) & (codes != BASELINE_CODE)
    Y_eq = ((codes[use][:, None] >> np.arange(J)) & 1).astype(np.uint8)
    log_p_base = np.log(r.prob(np.eye(J, dtype=np.int64)[0]))
    L = np.log(r.probs[use]) - log_p_base

    G = _features(Y_eq, J)
    G[:, 0] -= 0.5  # subtract f(y_d), which is s11 / 2
    G_rest = G[:, 1:]
    if np.linalg.matrix_rank(G_rest) < K - 1:
        raise RecoveryError("log-ratio equations are rank deficient")
    sol, *_ = np.linalg.lstsq(G_rest, np.column_stack([L, -G[:, 0]]), rcond=None)
    a0, a1 = sol[:, 0], sol[:, 1]

    def alpha_at(u: float) -> np.ndarray:
        return np.concatenate([[u], a0 + a1 * u])

    Y0 = all_patterns(J - 2) if J > 2 else np.zeros((1, 0), dtype=np.uint8)
    Y0 = np.hstack([np.zeros((Y0.shape[0], 2), dtype=np.uint8), Y0])
    target = np.log(r.prob_00) - log_p_base

    def residual(u: float) -> float:
        S = vech_inverse(alpha_at(u))
        return float(logsumexp(log_weights(Y0, S)) - 0.5 * u - target)

    # If the screened-out block does not move with s11 the root is explicit.
    seed = 2.0 * residual(0.0)
    lo, hi = seed - 50.0, seed + 50.0
    width = 50.0
    for _ in range(30):
        f_lo, f_hi = residual(lo), residual(hi)
        if f_lo > 0 > f_hi:
            break
        width *= 2.0
        lo, hi = seed - width, seed + width
    else:
        raise RecoveryError("could not bracket s11; input is not generated by an Ising model")
    if f_lo == 0.0:
        u = lo
    elif f_hi == 0.0:
        u = hi
    else:
        u = bisect(residual, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)

    alpha = alpha_at(u)
    lin_res = np.max(np.abs(G @ alpha - L)) if L.size else 0.0
    scal_res = abs(residual(u))
    if max(lin_res, scal_res) > tol:
        raise RecoveryError(
            f"recovery residual {max(lin_res, scal_res):.3g} exceeds {tol:g}; inconsistent input"
        )
    return vech_inverse(alpha)
