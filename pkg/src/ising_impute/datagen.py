"""Simulated Ising data and the missingness mechanisms of the three studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import MISSING, ObservedDataset
from .errors import DimensionTooLargeError, ValidationError
from .ising import all_patterns, as_ising_matrix, pattern_log_probs
from .polyagamma import as_generator

MAX_EXACT_SAMPLING_ITEMS = 16
MISSINGNESS_KINDS = ("MCAR", "MAR_ANCHOR", "SCREENING")


# Lower-triangle entries (row, column, value), 1-based, zero elsewhere.
_STUDY_I_EDGES = [
    (2, 1, -0.737), (3, 2, -0.408), (4, 3, 0.619),
    (5, 1, 0.769), (6, 1, 0.791), (6, 5, 0.741),
]
_STUDY_II_EDGES = [
    (2, 1, 0.500), (3, 2, 0.514), (4, 3, 0.865),
    (5, 1, 1.115), (6, 1, 1.151), (6, 5, 1.068),
]
_STUDY_III_EDGES = [
    (3, 2, -0.96), (4, 2, 1.00), (4, 3, 0.5), (5, 1, 0.48), (6, 3, 0.95),
    (6, 5, 0.47), (7, 4, 0.55), (7, 5, -0.92), (8, 6, 0.98), (8, 7, 0.74),
    (9, 1, -0.41), (9, 3, -0.54), (10, 3, -0.47), (10, 7, -0.83), (10, 9, -0.41),
    (11, 3, -0.74), (11, 4, 0.52), (11, 5, -0.55), (11, 6, 0.85), (11, 8, 0.75),
    (11, 9, -0.98), (12, 1, -0.54), (12, 3, 0.77), (12, 6, 0.41), (12, 10, -0.74),
    (13, 6, -0.8), (13, 7, 0.56), (13, 10, -0.78), (14, 7, 0.95), (14, 13, -0.96),
    (15, 5, -0.97), (15, 8, 0.78),
]
_STUDIES = {"I": (6, _STUDY_I_EDGES), "II": (6, _STUDY_II_EDGES), "III": (15, _STUDY_III_EDGES)}

# P(item j missing | y6), rows indexed by the value of y6, columns items 1-5
STUDY_I_MISSING_TABLE = np.array([
    [0.0, 0.1, 0.1, 0.0, 0.3],
    [0.2, 0.0, 0.1, 0.1, 0.2],
])


def normalize_study_id(study_id) -> str:
    sid = str(study_id).strip().upper()
    aliases = {"1": "I", "2": "II", "3": "III"}
    sid = aliases.get(sid, sid)
    if sid not in _STUDIES:
        raise ValidationError(f"unknown study {study_id!r}; expected I, II or III")
    return sid


def load_true_parameters(study_id) -> np.ndarray:
    """True parameter matrix of simulation study I, II or III (intercepts 0)."""
    J, edges = _STUDIES[normalize_study_id(study_id)]
    S = np.zeros((J, J))
    for i, j, v in edges:
        S[i - 1, j - 1] = S[j - 1, i - 1] = v
    return S


@dataclass(frozen=True)
class MissingnessSpec:
    """How cells of a complete dataset are masked.

    ``MCAR``
        every cell outside ``protected_cols`` is missing independently with
        probability ``mcar_rate``.
    ``MAR_ANCHOR``
        the anchor column is always observed; cell ``(i, j)`` is missing with
        probability ``anchor_table[y_i,anchor][k]``, where ``k`` enumerates the
        non-anchor columns in order.
    ``SCREENING``
        rows whose ``screen_cols`` are all 0 have every ``target_col`` missing.

    Column indices are 0-based.
    """

    kind: str
    mcar_rate: float = 0.0
    protected_cols: tuple[int, ...] = ()
    anchor_col: int | None = None
    anchor_table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    screen_cols: tuple[int, ...] = ()
    target_cols: tuple[int, ...] = ()

    @classmethod
    def mcar(cls, rate: float, protected_cols=()) -> "MissingnessSpec":
        return cls(kind="MCAR", mcar_rate=float(rate), protected_cols=tuple(protected_cols))

    @classmethod
    def mar_anchor(cls, anchor_col: int, table) -> "MissingnessSpec":
        table = np.asarray(table, dtype=float)
        return cls(kind="MAR_ANCHOR", anchor_col=int(anchor_col),
                   anchor_table=tuple(tuple(map(float, r)) for r in table))

    @classmethod
    def screening(cls, screen_cols, target_cols) -> "MissingnessSpec":
        return cls(kind="SCREENING", screen_cols=tuple(screen_cols), target_cols=tuple(target_cols))

    def validate(self, J: int) -> None:
        if self.kind not in MISSINGNESS_KINDS:
            raise ValidationError(f"unknown missingness kind {self.kind!r}")
        if self.kind == "MCAR":
            if not 0.0 <= self.mcar_rate <= 1.0:
                raise ValidationError("mcar_rate must lie in [0, 1]")
            if any(not 0 <= c < J for c in self.protected_cols):
                raise ValidationError("protected column out of range")
        elif self.kind == "MAR_ANCHOR":
            if self.anchor_col is None or not 0 <= self.anchor_col < J:
                raise ValidationError("anchor_col out of range")
            table = np.asarray(self.anchor_table, dtype=float)
            if table.shape != (2, J - 1):
                raise ValidationError(f"anchor_table must be 2 x {J - 1}")
            if np.any((table < 0) | (table > 1)):
                raise ValidationError("anchor_table probabilities must lie in [0, 1]")
        else:
            cols = set(self.screen_cols) | set(self.target_cols)
            if not self.screen_cols or any(not 0 <= c < J for c in cols):
                raise ValidationError("screening columns out of range")
            if set(self.screen_cols) & set(self.target_cols):
                raise ValidationError("screen and target columns overlap")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "MCAR":
            d.update(mcar_rate=self.mcar_rate, protected_cols=list(self.protected_cols))
        elif self.kind == "MAR_ANCHOR":
            d.update(anchor_col=self.anchor_col, anchor_table=[list(r) for r in self.anchor_table])
        else:
            d.update(screen_cols=list(self.screen_cols), target_cols=list(self.target_cols))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MissingnessSpec":
        kind = str(d["kind"]).upper()
        if kind == "MCAR":
            return cls.mcar(d.get("mcar_rate", 0.0), d.get("protected_cols", ()))
        if kind == "MAR_ANCHOR":
            return cls.mar_anchor(d["anchor_col"], d["anchor_table"])
        if kind == "SCREENING":
            return cls.screening(d["screen_cols"], d["target_cols"])
        raise ValidationError(f"unknown missingness kind {kind!r}")


def study_missingness(study_id) -> MissingnessSpec:
    sid = normalize_study_id(study_id)
    if sid == "I":
        return MissingnessSpec.mar_anchor(5, STUDY_I_MISSING_TABLE)
    if sid == "II":
        return MissingnessSpec.screening((0, 1), (2, 3, 4, 5))
    return MissingnessSpec.mcar(0.5)


def sample_ising_exact(S, N: int, rng) -> np.ndarray:
    """``N`` i.i.d. patterns by inverse-CDF lookup over all ``2**J`` patterns."""
    S = as_ising_matrix(S)
    J = S.shape[0]
    if J > MAX_EXACT_SAMPLING_ITEMS:
        raise DimensionTooLargeError(
            f"exact sampling supports J <= {MAX_EXACT_SAMPLING_ITEMS}; use sample_ising_gibbs"
        )
    cdf = np.cumsum(np.exp(pattern_log_probs(S)))
    u = as_generator(rng).random(int(N)) * cdf[-1]
    codes = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return all_patterns(J)[codes]


def sample_ising_gibbs(S, N: int, burn_in_sweeps: int = 500, rng=None) -> np.ndarray:
    """Approximate draws: each row runs its own single-site Gibbs chain from
    a uniform start, so rows are independent."""
    S = as_ising_matrix(S)
    if burn_in_sweeps < 1:
        raise ValidationError("burn_in_sweeps must be at least 1")
    rng = as_generator(rng)
    J = S.shape[0]
    Y = rng.integers(0, 2, size=(int(N), J)).astype(np.float64)
    d = np.diag(S)
    for _ in range(burn_in_sweeps):
        for j in range(J):
            eta = Y @ S[:, j] - Y[:, j] * d[j] + 0.5 * d[j]
            Y[:, j] = rng.random(Y.shape[0]) < expit(eta)
    return Y.astype(np.uint8)


def apply_missingness(Y, spec: MissingnessSpec, rng) -> ObservedDataset:
    """Mask cells of the complete data ``Y``; observed values are untouched.

    Rows that end up entirely missing are dropped (counted in
    ``ObservedDataset.dropped_rows``).
    """
    Y = np.asarray(Y)
    if Y.ndim != 2 or not np.all((Y == 0) | (Y == 1)):
        raise ValidationError("apply_missingness needs complete binary data")
    N, J = Y.shape
    spec.validate(J)
    rng = as_generator(rng)
    mask = np.zeros((N, J), dtype=bool)
    if spec.kind == "MCAR":
        maskable = np.ones(J, dtype=bool)
        maskable[list(spec.protected_cols)] = False
        mask = (rng.random((N, J)) < spec.mcar_rate) & maskable
    elif spec.kind == "MAR_ANCHOR":
        others = [c for c in range(J) if c != spec.anchor_col]
        probs = np.asarray(spec.anchor_table)[Y[:, spec.anchor_col].astype(int)]
        mask[:, others] = rng.random((N, J - 1)) < probs
    else:
        screened_out = np.all(Y[:, list(spec.screen_cols)] == 0, axis=1)
        mask[np.ix_(screened_out, list(spec.target_cols))] = True
    cells = np.where(mask, MISSING, Y).astype(np.int8)
    return ObservedDataset.from_array(cells, drop_empty_rows=True)
