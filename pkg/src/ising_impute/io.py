"""File formats: datasets, parameter matrices, draws, networks and manifests.

Floats are always written with ``repr``, the shortest decimal string that
parses back to the same double, so numeric files are byte-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .dataset import MISSING, ObservedDataset
from .errors import ValidationError
from .identifiability import RestrictedDistribution
from .ising import as_ising_matrix
from .vech import vech_length

NA = "NA"


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return NA
    return repr(x)


def _fmt_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    if x is None:
        return NA
    return str(x)


def write_csv(path, header, rows) -> None:
    """Write rows with the module's float formatting; ``None``/NaN become NA."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_cell(v) for v in row])


def read_csv_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


# datasets

def item_header(J: int) -> list[str]:
    return [f"item_{j + 1}" for j in range(J)]


def write_dataset(path, data) -> None:
    cells = data.cells if isinstance(data, ObservedDataset) else np.asarray(data)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(item_header(cells.shape[1])) + "\n")
        for row in cells:
            fh.write(",".join(NA if v == MISSING else str(int(v)) for v in row) + "\n")


def read_dataset(path, *, drop_empty_rows: bool = False) -> ObservedDataset:
    """Parse a dataset CSV (header ``item_1..item_J``; cells ``0``, ``1`` or ``NA``)."""
    header, rows = read_csv_rows(path)
    J = len(header)
    if header != item_header(J):
        raise ValidationError(f"{path}: header must be item_1,...,item_{J}")
    lookup = {"0": 0, "1": 1, NA: MISSING}
    cells = np.empty((len(rows), J), dtype=np.int8)
    for i, row in enumerate(rows):
        if len(row) != J:
            raise ValidationError(f"{path}: line {i + 2} has {len(row)} fields, expected {J}")
        try:
            cells[i] = [lookup[v] for v in row]
        except KeyError as exc:
            raise ValidationError(f"{path}: line {i + 2}: invalid cell {exc.args[0]!r}") from None
    return ObservedDataset.from_array(cells, drop_empty_rows=drop_empty_rows)


# matrices and JSON

def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(_dumps(to_jsonable(obj)))


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def write_matrix_json(path, S, **meta) -> None:
    S = np.asarray(S, dtype=np.float64)
    write_json(path, {**meta, "dim": S.shape[0], "matrix": S})


def read_matrix_json(path) -> np.ndarray:
    d = read_json(path)
    if "matrix" not in d:
        raise ValidationError(f"{path}: missing 'matrix' field")
    return as_ising_matrix(np.asarray(d["matrix"], dtype=np.float64))


def vech_names(J: int) -> list[str]:
    """Column names ``s_i_j`` (1-based, ``i >= j``) in half-vectorization order."""
    return [f"s_{i + 1}_{j + 1}" for j in range(J) for i in range(j, J)]


def write_draws(path, per_parameter_chains) -> None:
    """Retained draws, one row per (chain, draw) in half-vectorized form."""
    x = np.asarray(per_parameter_chains)
    K = x.shape[2]
    J = int((math.isqrt(8 * K + 1) - 1) // 2)
    if vech_length(J) != K:
        raise ValidationError("draw width is not a half-vectorization length")
    rows = ([c, m, *x[c, m]] for c in range(x.shape[0]) for m in range(x.shape[1]))
    write_csv(path, ["chain", "draw", *vech_names(J)], rows)


def read_draws(path) -> np.ndarray:
    header, rows = read_csv_rows(path)
    arr = np.array([[float(v) for v in r] for r in rows])
    n_chains = int(arr[:, 0].max()) + 1
    return arr[:, 2:].reshape(n_chains, -1, len(header) - 2)


# networks

def write_dot(path, S, threshold: float = 0.5, name: str = "ising") -> None:
    """Undirected graph of edges with ``|s_jl| > threshold``.

    Positive edges are blue, negative edges orange; ``weight`` holds the
    signed value and ``penwidth`` scales with its magnitude.
    """
    S = as_ising_matrix(S)
    J = S.shape[0]
    lines = [f"graph {name} {{", "  node [shape=circle];"]
    lines += [f'  {j + 1} [label="item_{j + 1}"];' for j in range(J)]
    for j in range(J):
        for l in range(j + 1, J):
            w = S[j, l]
            if abs(w) > threshold:
                color = "blue" if w > 0 else "orange"
                lines.append(
                    f"  {j + 1} -- {l + 1} [weight={fmt_float(w)}, color={color}, "
                    f"penwidth={fmt_float(round(1 + 2 * abs(w), 3))}];"
                )
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


# restricted distributions

def write_restricted_table(path, r: RestrictedDistribution) -> None:
    """Probability table: one row per screened-in pattern and one aggregate row
    ``0,0,NA,...,NA`` holding P(y1 = 0, y2 = 0)."""
    J = r.dim
    rows = [[*map(int, y), p] for y, p in zip(r.patterns, r.probs)]
    rows.append([0, 0, *([None] * (J - 2)), r.prob_00])
    write_csv(path, [*item_header(J), "prob"], rows)


def read_restricted_table(path) -> RestrictedDistribution:
    header, rows = read_csv_rows(path)
    J = len(header) - 1
    if header != [*item_header(J), "prob"] or J < 3:
        raise ValidationError(f"{path}: header must be item_1,...,item_J,prob with J >= 3")
    codes, probs, p00 = [], [], None
    weights = 1 << np.arange(J)
    for i, row in enumerate(rows):
        if len(row) != J + 1:
            raise ValidationError(f"{path}: line {i + 2} has the wrong number of fields")
        try:
            p = float(row[-1])
        except ValueError:
            raise ValidationError(f"{path}: line {i + 2}: bad probability {row[-1]!r}") from None
        items = row[:-1]
        if items[:2] == ["0", "0"]:
            if any(v != NA for v in items[2:]) or p00 is not None:
                raise ValidationError(f"{path}: exactly one aggregate row 0,0,NA,... is allowed")
            p00 = p
            continue
        if any(v not in ("0", "1") for v in items):
            raise ValidationError(f"{path}: line {i + 2}: screened-in patterns must be fully observed")
        codes.append(int(np.array([int(v) for v in items]) @ weights))
        probs.append(p)
    if p00 is None:
        raise ValidationError(f"{path}: missing the aggregate row for y1 = y2 = 0")
    order = np.argsort(codes)
    codes = np.asarray(codes, dtype=np.int64)[order]
    if np.unique(codes).size != codes.size:
        raise ValidationError(f"{path}: duplicate patterns")
    return RestrictedDistribution(dim=J, codes=codes, probs=np.asarray(probs)[order], prob_00=p00)


# manifests

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digests(paths) -> dict:
    return {str(p): sha256_file(p) for p in sorted(map(str, paths)) if os.path.exists(p)}
