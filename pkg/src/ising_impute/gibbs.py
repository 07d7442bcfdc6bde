"""Pólya-Gamma Gibbs transitions for the logistic and pseudo-likelihood posteriors.

Two conditionally Gaussian updates live here:

* ``sample_beta`` -- one item's unconstrained logistic coefficients
  ``beta_j`` (the imputation model), and
* ``sample_alpha`` -- the half-vectorized symmetric matrix ``alpha =
  vech(S)`` under the pseudo-likelihood.

In both, item ``j``'s design matrix is the data with column ``j`` replaced
by the constant 1/2, which makes coefficient ``j`` act as ``s_jj / 2``.
Posterior precisions are factored once with Cholesky; covariances are never
inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import SPDError, ValidationError
from .ising import as_ising_matrix, conditional_logits
from .polyagamma import as_generator, sample_pg
from .vech import TransformSet, vech_inverse, vech_length


@dataclass(frozen=True)
class PriorSpec:
    """Independent zero-mean normal priors.

    ``slope_variance`` applies to edge parameters (off-diagonal entries and
    the slopes of each ``beta_j``), ``intercept_variance`` to the diagonal.
    """

    slope_variance: float = 1.0
    intercept_variance: float = 100.0

    def __post_init__(self):
        for name in ("slope_variance", "intercept_variance"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v!r}")

    def beta_precision(self, J: int, j: int) -> np.ndarray:
        tau = np.full(J, 1.0 / self.slope_variance)
        tau[j] = 1.0 / self.intercept_variance
        return tau

    def alpha_precision(self, J: int) -> np.ndarray:
        """Diagonal of ``sum_j T_j' D_j T_j``: each edge sits in two columns."""
        transforms = TransformSet.build(J)
        tau = np.zeros(vech_length(J))
        for j in range(J):
            np.add.at(tau, transforms.column_index[j], self.beta_precision(J, j))
        return tau


def cholesky(A) -> np.ndarray:
    """Lower Cholesky factor of ``A``; raises :class:`SPDError` on failure."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise SPDError(pivot=info - 1)
    if info < 0:
        raise ValidationError(f"invalid argument {-info} to dpotrf")
    return L


def spd_solve(A, B) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A``.

    One Cholesky factorization followed by a forward and a backward
    triangular solve.
    """
    L = cholesky(A)
    B = np.asarray(B, dtype=np.float64)
    X, info = lapack.dpotrs(L, B, lower=1)
    if info != 0:
        raise ValidationError(f"dpotrs failed with info={info}")
    return X


@dataclass(frozen=True)
class GaussianPosterior:
    """N(mean, covariance) stored through the Cholesky factor of the precision.

    ``precision_factor`` is lower triangular with
    ``precision_factor @ precision_factor.T == inv(covariance)``.
    """

    mean: np.ndarray
    precision_factor: np.ndarray

    @property
    def precision(self) -> np.ndarray:
        return self.precision_factor @ self.precision_factor.T

    @property
    def covariance(self) -> np.ndarray:
        L = self.precision_factor
        Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
        return Linv.T @ Linv

    def sample(self, rng) -> np.ndarray:
        z = as_generator(rng).standard_normal(self.mean.shape[0])
        return self.mean + solve_triangular(self.precision_factor.T, z, lower=False)

    @classmethod
    def from_canonical(cls, precision, linear) -> "GaussianPosterior":
        """Build from precision ``P`` and linear term ``b`` (mean = P^-1 b)."""
        L = cholesky(precision)
        y = solve_triangular(L, linear, lower=True)
        mean = solve_triangular(L.T, y, lower=False)
        return cls(mean=mean, precision_factor=L)


def _complete_binary(Y) -> np.ndarray:
    Y = np.asarray(Y)
    if Y.ndim != 2:
        raise ValidationError(f"data must be a 2-D array, got shape {Y.shape}")
    if not np.all((Y == 0) | (Y == 1)):
        raise ValidationError("complete binary data required (no missing cells)")
    return Y.astype(np.float64)


def beta_design(Y, j: int) -> np.ndarray:
    """``Y - kappa_j e_j'``: the data with column ``j`` set to 1/2."""
    X = _complete_binary(Y)
    if not 0 <= j < X.shape[1]:
        raise ValidationError(f"item index {j} out of range")
    X[:, j] = 0.5
    return X


def _design_inplace(Yf: np.ndarray, j: int, buf: np.ndarray) -> np.ndarray:
    np.copyto(buf, Yf)
    buf[:, j] = 0.5
    return buf


def _beta_canonical(X: np.ndarray, kappa: np.ndarray, omega: np.ndarray, tau: np.ndarray):
    P = (X * omega[:, None]).T @ X
    P[np.diag_indices_from(P)] += tau
    return P, X.T @ kappa


def beta_posterior(Y, j: int, omega, prior: PriorSpec) -> GaussianPosterior:
    """Conditional Gaussian of ``beta_j`` given Pólya-Gamma weights ``omega``."""
    X = beta_design(Y, j)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (X.shape[0],):
        raise ValidationError(f"omega must have length {X.shape[0]}")
    if np.any(omega <= 0):
        raise ValidationError("Pólya-Gamma weights must be positive")
    kappa = np.asarray(Y, dtype=np.float64)[:, j] - 0.5
    P, b = _beta_canonical(X, kappa, omega, prior.beta_precision(X.shape[1], j))
    return GaussianPosterior.from_canonical(P, b)


def beta_step(Yf: np.ndarray, j: int, tau: np.ndarray, beta_prev: np.ndarray,
              rng: np.random.Generator, buf: np.ndarray | None = None) -> np.ndarray:
    """Unchecked PG transition for ``beta_j``; ``Yf`` is float64 and complete."""
    X = _design_inplace(Yf, j, np.empty_like(Yf) if buf is None else buf)
    omega = sample_pg(X @ beta_prev, rng)
    P, b = _beta_canonical(X, Yf[:, j] - 0.5, omega, tau)
    return GaussianPosterior.from_canonical(P, b).sample(rng)


def sample_beta(Y, j: int, prior: PriorSpec, beta_prev, rng) -> np.ndarray:
    """One Pólya-Gamma Gibbs transition for item ``j``'s logistic coefficients.

    Draws ``omega_i ~ PG(1, x_i' beta_prev)`` for every row, then ``beta``
    from the resulting Gaussian conditional.
    """
    Yf = _complete_binary(Y)
    J = Yf.shape[1]
    if not 0 <= j < J:
        raise ValidationError(f"item index {j} out of range")
    beta_prev = np.asarray(beta_prev, dtype=np.float64)
    if beta_prev.shape != (J,):
        raise ValidationError(f"beta must have length {J}")
    return beta_step(Yf, j, prior.beta_precision(J, j), beta_prev, as_generator(rng))


def omega_logit_matrix(Y, S) -> np.ndarray:
    """``Y S - (Y - 1/2) o 1 diag(S)'``: every row/item conditional logit."""
    Yf = _complete_binary(Y)
    S = as_ising_matrix(S)
    if Yf.shape[1] != S.shape[0]:
        raise ValidationError(f"data has {Yf.shape[1]} items but S is {S.shape[0]}x{S.shape[0]}")
    return conditional_logits(Yf, S)


def _alpha_canonical(Yf: np.ndarray, Omega: np.ndarray, tau_alpha: np.ndarray,
                     transforms: TransformSet):
    N, J = Yf.shape
    K = vech_length(J)
    P = np.zeros((K, K))
    b = np.zeros(K)
    X = np.empty_like(Yf)
    for j in range(J):
        _design_inplace(Yf, j, X)
        w = Omega[:, j]
        idx = transforms.column_index[j]
        # T_j' (X' D X) T_j and T_j' X' kappa as scatter-adds
        P[np.ix_(idx, idx)] += (X * w[:, None]).T @ X
        b[idx] += X.T @ (Yf[:, j] - 0.5)
    P[np.diag_indices_from(P)] += tau_alpha
    return P, b


def alpha_posterior(Y, Omega, prior: PriorSpec, transforms: TransformSet | None = None) -> GaussianPosterior:
    """Joint Gaussian conditional of ``alpha = vech(S)`` given all weights.

    The stacked design ``M`` (``NJ`` rows) is never materialized; its Gram
    matrix is accumulated column block by column block.
    """
    Yf = _complete_binary(Y)
    N, J = Yf.shape
    Omega = np.asarray(Omega, dtype=np.float64)
    if Omega.shape != (N, J):
        raise ValidationError(f"Omega must have shape {(N, J)}, got {Omega.shape}")
    if np.any(Omega <= 0):
        raise ValidationError("Pólya-Gamma weights must be positive")
    transforms = transforms or TransformSet.build(J)
    P, b = _alpha_canonical(Yf, Omega, prior.alpha_precision(J), transforms)
    return GaussianPosterior.from_canonical(P, b)


def alpha_step(Yf: np.ndarray, S_prev: np.ndarray, tau_alpha: np.ndarray,
               transforms: TransformSet, rng: np.random.Generator) -> np.ndarray:
    """Unchecked PG transition for ``S``; returns the new symmetric matrix."""
    Omega = sample_pg(conditional_logits(Yf, S_prev), rng)
    P, b = _alpha_canonical(Yf, Omega, tau_alpha, transforms)
    return vech_inverse(GaussianPosterior.from_canonical(P, b).sample(rng))


def sample_alpha(Y, prior: PriorSpec, S_prev, rng, transforms: TransformSet | None = None) -> np.ndarray:
    """One Pólya-Gamma Gibbs transition for the Ising matrix.

    Draws ``N x J`` weights at the logits implied by ``S_prev`` and then
    ``alpha`` jointly; the returned matrix is symmetric by construction.
    """
    Yf = _complete_binary(Y)
    S_prev = as_ising_matrix(S_prev)
    J = Yf.shape[1]
    if S_prev.shape[0] != J:
        raise ValidationError("S_prev does not match the number of items")
    transforms = transforms or TransformSet.build(J)
    return alpha_step(Yf, S_prev, prior.alpha_precision(J), transforms, as_generator(rng))
