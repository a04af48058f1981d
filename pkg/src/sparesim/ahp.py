"""Pairwise-comparison matrices, criterion weights and consistency checks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

# Random-matrix inconsistency index, indexed by matrix dimension 1..9.
RMII_TABLE = (0.0, 0.0, 0.58, 0.9, 1.12, 1.24, 1.32, 1.41, 1.45)

METHODS = ("eigenvector", "column_normalization", "row_geometric_mean")

MAX_DIM = 15
RECIPROCITY_RTOL = 1e-9
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
ACCEPTABLE_IR = 0.1


class AHPError(ValueError):
    """Raised for malformed judgment matrices or degenerate weights."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairwiseMatrix:
    entries: np.ndarray
    criteria: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CriterionWeights:
    weights: np.ndarray
    method: str

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class ConsistencyReport:
    lambda_max: float
    ii: float
    rmii: float
    ir: float
    acceptable: bool


def validate_pairwise(raw, criteria: Sequence[str] = ()) -> PairwiseMatrix:
    """Check a raw judgment matrix and freeze it.

    Only the structural rules are enforced (square, positive, unit
    diagonal, reciprocal). Transitive consistency is measured by
    :func:`consistency`, not required here.
    """
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AHPError(f"pairwise matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    if not 1 <= n <= MAX_DIM:
        raise AHPError(f"matrix dimension must be in 1..{MAX_DIM}, got {n}")
    if not np.all(np.isfinite(a)):
        raise AHPError("pairwise matrix contains non-finite entries")
    if np.any(a <= 0):
        i, j = np.argwhere(a <= 0)[0]
        raise AHPError(f"entry ({i}, {j}) = {a[i, j]} is not strictly positive")
    diag = np.diag(a)
    if not np.all(diag == 1.0):
        i = int(np.flatnonzero(diag != 1.0)[0])
        raise AHPError(f"diagonal entry ({i}, {i}) = {diag[i]} is not 1")
    prod = a * a.T
    bad = np.abs(prod - 1.0) > RECIPROCITY_RTOL
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AHPError(
            f"reciprocity violated at ({i}, {j}): {a[i, j]} * {a[j, i]} = {prod[i, j]}"
        )
    if criteria and len(criteria) != n:
        raise AHPError(f"{len(criteria)} criterion names for a {n}x{n} matrix")
    a.setflags(write=False)
    return PairwiseMatrix(a, tuple(criteria))


def _power_iteration(a: np.ndarray) -> np.ndarray:
    w = np.full(a.shape[0], 1.0 / a.shape[0])
    for _ in range(POWER_MAX_ITER):
        nxt = a @ w
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w)) < POWER_TOL:
            return nxt
        w = nxt
    raise ConvergenceError(
        f"power iteration did not converge in {POWER_MAX_ITER} iterations"
    )


def compute_weights(m: PairwiseMatrix, method: str = "eigenvector") -> CriterionWeights:
    a = m.entries
    if method == "eigenvector":
        w = _power_iteration(a)
    elif method == "column_normalization":
        w = (a / a.sum(axis=0)).mean(axis=1)
    elif method == "row_geometric_mean":
        w = np.exp(np.log(a).mean(axis=1))
    else:
        raise AHPError(f"unknown weight method {method!r}; expected one of {METHODS}")
    w = w / w.sum()
    w.setflags(write=False)
    return CriterionWeights(w, method)


def rmii(n: int) -> float:
    """Random-matrix inconsistency index for an ``n``-criteria matrix."""
    if not 1 <= n <= len(RMII_TABLE):
        raise AHPError(f"no random-matrix index tabulated for n={n} (table covers 1..9)")
    return RMII_TABLE[n - 1]


def consistency(m: PairwiseMatrix, w: CriterionWeights) -> ConsistencyReport:
    a = m.entries
    n = m.n
    weights = np.asarray(w.weights, dtype=float)
    if len(weights) != n:
        raise AHPError(f"{len(weights)} weights for a {n}x{n} matrix")
    if np.any(weights <= 0):
        raise AHPError("degenerate weights: a zero weight makes the eigenvalue ratio undefined")
    lambda_max = float(np.mean((a @ weights) / weights))
    ii = (lambda_max - n) / (n - 1) if n > 1 else 0.0
    index = rmii(n)
    ir = ii / index if index > 0 else 0.0
    return ConsistencyReport(lambda_max, ii, index, ir, ir <= ACCEPTABLE_IR)


def load_pairwise(path: str | Path) -> PairwiseMatrix:
    """Load ``{"criteria": [...], "matrix": [[...], ...]}`` from JSON."""
    doc = json.loads(Path(path).read_text())
    try:
        criteria, matrix = doc["criteria"], doc["matrix"]
    except (KeyError, TypeError) as exc:
        raise AHPError(f"{path}: expected keys 'criteria' and 'matrix'") from exc
    return validate_pairwise(matrix, criteria)


def write_weights_csv(path: str | Path, criteria: Sequence[str], w: CriterionWeights) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["criterion", "weight"])
        for name, value in zip(criteria, w.weights):
            out.writerow([name, repr(float(value))])
