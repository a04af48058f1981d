"""Integrated ABC classification: AHP-weighted criteria plus consumption value."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._fmt import num as _fmt
from .ahp import CriterionWeights

CRITERIA = (
    "critical_degree",
    "item_consumption",
    "lead_time_score",
    "availability",
    "inventory_turnover",
)
QUALITATIVE_WEIGHT = 6.0 / 7.0
QUANTITATIVE_WEIGHT = 1.0 / 7.0
DEFAULT_CUTS = (0.80, 0.95)
# absorbs float error in running sums, e.g. 0.8 + 0.15 > 0.95
CUT_TOL = 1e-9
AGGREGATIONS = ("mean", "last", "total")

OPTIONAL_COLUMNS = ("lead_time_months", "holding", "ordering", "shortage")


class ClassifyError(ValueError):
    pass


@dataclass(frozen=True)
class ItemRecord:
    id: str
    criterion_values: tuple[float, ...]
    annual_consumption: tuple[float, ...]
    unit_price: float
    lead_time_months: float | None = None
    holding: float | None = None
    ordering: float | None = None
    shortage: float | None = None

    def __post_init__(self):
        if not self.annual_consumption:
            raise ClassifyError(f"item {self.id!r}: no consumption history")
        if any(v < 0 for v in self.criterion_values):
            raise ClassifyError(f"item {self.id!r}: negative criterion score")
        if any(v < 0 for v in self.annual_consumption):
            raise ClassifyError(f"item {self.id!r}: negative consumption")
        if self.unit_price < 0:
            raise ClassifyError(f"item {self.id!r}: negative unit price")


@dataclass(frozen=True)
class ScoredItem:
    id: str
    r: float
    k: float
    g: float


@dataclass(frozen=True)
class AbcAssignment:
    id: str
    cls: str
    rank: int
    cumulative_value_share: float
    item: ScoredItem = field(repr=False, compare=False, default=None)


def normalize_criteria(items: Sequence[ItemRecord], criteria: Sequence[str] = CRITERIA) -> np.ndarray:
    """Divide every criterion column by its column sum."""
    if not items:
        raise ClassifyError("no items to normalize")
    v = np.array([it.criterion_values for it in items], dtype=float)
    if v.ndim != 2 or v.shape[1] != len(criteria):
        raise ClassifyError(
            f"expected {len(criteria)} criterion values per item, got shape {v.shape}"
        )
    sums = v.sum(axis=0)
    for j, s in enumerate(sums):
        if not s > 0:
            raise ClassifyError(f"criterion {criteria[j]!r} is zero for every item")
    return v / sums


def qualitative_rank(v: np.ndarray, w: CriterionWeights | Sequence[float]) -> np.ndarray:
    weights = np.asarray(getattr(w, "weights", w), dtype=float)
    if v.shape[1] != len(weights):
        raise ClassifyError(f"{v.shape[1]} criterion columns but {len(weights)} weights")
    return v @ weights


def quantitative_value(items: Sequence[ItemRecord], aggregation: str = "mean") -> np.ndarray:
    """Consumption value (aggregated quantity times price) normalized to sum 1."""
    if aggregation == "mean":
        qty = [float(np.mean(it.annual_consumption)) for it in items]
    elif aggregation == "last":
        qty = [float(it.annual_consumption[-1]) for it in items]
    elif aggregation == "total":
        qty = [float(np.sum(it.annual_consumption)) for it in items]
    else:
        raise ClassifyError(f"unknown aggregation {aggregation!r}")
    raw = np.array(qty) * np.array([it.unit_price for it in items], dtype=float)
    total = raw.sum()
    if not total > 0:
        raise ClassifyError("every item has zero consumption value")
    return raw / total


def combined_value(r: float, k: float) -> float:
    return QUALITATIVE_WEIGHT * r + QUANTITATIVE_WEIGHT * k


def score_items(
    items: Sequence[ItemRecord],
    w: CriterionWeights | Sequence[float],
    aggregation: str = "mean",
) -> list[ScoredItem]:
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise ClassifyError("item ids are not unique")
    r = qualitative_rank(normalize_criteria(items), w)
    k = quantitative_value(items, aggregation)
    return [
        ScoredItem(i, float(ri), float(ki), combined_value(float(ri), float(ki)))
        for i, ri, ki in zip(ids, r, k)
    ]


def abc_classify(
    scored: Sequence[ScoredItem], cuts: tuple[float, float] = DEFAULT_CUTS
) -> list[AbcAssignment]:
    """Pareto split by descending combined value.

    An item is A while the running share stays at or below the first cut,
    B while at or below the second, C beyond. The top-ranked item is always
    A. Equal values are ordered by ascending id.
    """
    a_cut, b_cut = cuts
    if not 0 < a_cut < b_cut < 1:
        raise ClassifyError(f"cuts must satisfy 0 < a < b < 1, got {cuts}")
    if not scored:
        raise ClassifyError("nothing to classify")
    order = sorted(scored, key=lambda s: (-s.g, s.id))
    g = np.array([s.g for s in order])
    total = g.sum()
    if not total > 0:
        raise ClassifyError("combined values sum to zero")
    cum = np.cumsum(g) / total
    cum[-1] = 1.0
    out = []
    for rank, (s, share) in enumerate(zip(order, cum), start=1):
        if rank == 1 or share <= a_cut + CUT_TOL:
            cls = "A"
        elif share <= b_cut + CUT_TOL:
            cls = "B"
        else:
            cls = "C"
        out.append(AbcAssignment(s.id, cls, rank, float(share), s))
    return out


def _float_or_none(text: str | None) -> float | None:
    if text is None or text.strip() == "":
        return None
    return float(text)


def read_items_csv(path: str | Path, criteria: Sequence[str] = CRITERIA) -> list[ItemRecord]:
    """Parse the item master file.

    Columns: ``id``, the criterion scores, ``unit_price`` and one or more
    ``consumption_y<k>`` year columns. ``lead_time_months``, ``holding``,
    ``ordering`` and ``shortage`` are recognised when present.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("id", *criteria, "unit_price") if c not in header]
        if missing:
            raise ClassifyError(f"{path}: missing columns {missing}")
        years = [c for c in header if c.startswith("consumption_y")]
        if not years:
            raise ClassifyError(f"{path}: no consumption_y<k> columns")
        years.sort(key=lambda c: int(c[len("consumption_y"):]))
        items = []
        for lineno, row in enumerate(reader, start=2):
            try:
                extra = {c: _float_or_none(row.get(c)) for c in OPTIONAL_COLUMNS}
                history = tuple(float(row[c]) for c in years if row[c].strip() != "")
                items.append(
                    ItemRecord(
                        id=row["id"].strip(),
                        criterion_values=tuple(float(row[c]) for c in criteria),
                        annual_consumption=history,
                        unit_price=float(row["unit_price"]),
                        **extra,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ClassifyError(f"{path}:{lineno}: {exc}") from exc
    if not items:
        raise ClassifyError(f"{path}: no item rows")
    return items


def write_items_csv(path: str | Path, items: Iterable[ItemRecord], criteria: Sequence[str] = CRITERIA) -> None:
    items = list(items)
    n_years = max(len(it.annual_consumption) for it in items)
    extras = [c for c in OPTIONAL_COLUMNS if any(getattr(it, c) is not None for it in items)]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["id", *criteria, "unit_price", *extras,
                      *(f"consumption_y{k}" for k in range(1, n_years + 1))])
        for it in items:
            hist = [_fmt(v) for v in it.annual_consumption]
            hist += [""] * (n_years - len(hist))
            out.writerow([it.id, *(_fmt(v) for v in it.criterion_values), _fmt(it.unit_price),
                          *(_fmt(getattr(it, c)) for c in extras), *hist])


def write_classification_csv(path: str | Path, assignments: Sequence[AbcAssignment]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["id", "R", "K", "G", "rank", "cumulative_share", "class"])
        for a in assignments:
            s = a.item
            out.writerow([a.id, repr(s.r), repr(s.k), repr(s.g), a.rank,
                          repr(a.cumulative_value_share), a.cls])

