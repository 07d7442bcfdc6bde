"""Binary response data with missing cells."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

MISSING = -1


@dataclass(frozen=True, eq=False)
class ObservedDataset:
    """An ``N x J`` int8 matrix with cells in ``{0, 1, MISSING}``.

    Rows with every cell missing carry no information and are rejected;
    :meth:`from_array` can drop them instead (``dropped_rows`` counts them).
    """

    cells: np.ndarray
    dropped_rows: int = 0
    missing_sets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.shape[1] < 1:
            raise ValidationError(f"dataset must be N x J with J >= 1, got shape {cells.shape}")
        if not np.all((cells == 0) | (cells == 1) | (cells == MISSING)):
            raise ValidationError("cells must be 0, 1 or MISSING")
        cells = cells.astype(np.int8)
        cells.setflags(write=False)
        miss = cells == MISSING
        if cells.shape[0] and np.any(miss.all(axis=1)):
            raise ValidationError("dataset contains rows with every item missing")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(
            self, "missing_sets", tuple(np.flatnonzero(miss[:, j]) for j in range(cells.shape[1]))
        )

    @classmethod
    def from_array(cls, cells, *, drop_empty_rows: bool = False) -> "ObservedDataset":
        cells = np.asarray(cells)
        dropped = 0
        if drop_empty_rows and cells.ndim == 2 and cells.shape[0]:
            empty = np.all(cells == MISSING, axis=1)
            dropped = int(empty.sum())
            cells = cells[~empty]
        return cls(cells=cells, dropped_rows=dropped)

    @property
    def n_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def n_items(self) -> int:
        return self.cells.shape[1]

    @property
    def missing_mask(self) -> np.ndarray:
        return self.cells == MISSING

    @property
    def n_missing(self) -> int:
        return int(self.missing_mask.sum())

    def is_complete(self) -> bool:
        return self.n_missing == 0

    def complete_rows(self) -> np.ndarray:
        return ~self.missing_mask.any(axis=1)
