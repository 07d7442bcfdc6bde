"""Half-vectorization of symmetric matrices and the associated selectors.

``vech`` stacks the lower triangle column by column:
``(s11, s21, ..., sJ1, s22, ..., sJ2, ..., sJJ)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError


def vech_length(J: int) -> int:
    return J * (J + 1) // 2


def dim_from_vech_length(n: int) -> int:
    J = (math.isqrt(8 * n + 1) - 1) // 2
    if n < 1 or vech_length(J) != n:
        raise ValidationError(f"length {n} is not of the form J(J+1)/2")
    return J


def vech_index(i: int, j: int, J: int) -> int:
    """Position of ``s_ij`` (0-based, either triangle) inside ``vech(S)``."""
    if i < j:
        i, j = j, i
    return j * J - j * (j - 1) // 2 + (i - j)


@lru_cache(maxsize=64)
def _lower_indices(J: int):
    # column-major lower triangle == row-major upper triangle of S.T
    cols, rows = np.triu_indices(J)
    return rows, cols


def vech(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"vech needs a square matrix, got shape {S.shape}")
    rows, cols = _lower_indices(S.shape[0])
    return S[rows, cols].copy()


def vech_inverse(alpha) -> np.ndarray:
    """Rebuild the symmetric matrix from its half-vectorization."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1:
        raise ValidationError("half-vectorization must be one-dimensional")
    J = dim_from_vech_length(alpha.shape[0])
    rows, cols = _lower_indices(J)
    S = np.empty((J, J))
    S[rows, cols] = alpha
    S[cols, rows] = alpha
    return S


def duplication_matrix(J: int) -> np.ndarray:
    """The ``J^2 x J(J+1)/2`` 0/1 matrix with ``D @ vech(S) == vec(S)``.

    ``vec`` stacks columns, so row ``j*J + i`` of ``D`` picks ``s_ij``.
    """
    D = np.zeros((J * J, vech_length(J)))
    for j in range(J):
        for i in range(J):
            D[j * J + i, vech_index(i, j, J)] = 1.0
    return D


@dataclass(frozen=True)
class TransformSet:
    """Duplication matrix and per-column selectors ``T_j = E_j D``.

    ``column_index[j]`` lists the positions in ``alpha`` of column ``j`` of
    ``S``; it is the sparse form of ``T_j`` used in the samplers.
    """

    dim: int
    duplication: np.ndarray
    selectors: np.ndarray  # (J, J, K)
    column_index: np.ndarray  # (J, J) integer

    @classmethod
    def build(cls, J: int) -> "TransformSet":
        return _transform_set(J)

    def selection_matrix(self, j: int) -> np.ndarray:
        """``E_j``: the ``J x J^2`` block selector of column ``j`` in ``vec(S)``."""
        J = self.dim
        E = np.zeros((J, J * J))
        E[:, j * J:(j + 1) * J] = np.eye(J)
        return E


@lru_cache(maxsize=32)
def _transform_set(J: int) -> TransformSet:
    if J < 1:
        raise ValidationError("J must be positive")
    D = duplication_matrix(J)
    idx = np.array([[vech_index(k, j, J) for k in range(J)] for j in range(J)], dtype=np.intp)
    T = np.stack([D[j * J:(j + 1) * J] for j in range(J)])
    for arr in (D, T, idx):
        arr.setflags(write=False)
    return TransformSet(dim=J, duplication=D, selectors=T, column_index=idx)
