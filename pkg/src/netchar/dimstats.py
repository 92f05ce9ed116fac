"""Dimensional data analysis: per-variable summary rows, relevance
classification, and exemplar records built from modal values."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .assoc import AssocArray, split_col, variable_of
from .join import DERIVED_VARIABLES, JoinedWindow, NOGREY_VARIABLE

# Whole-matrix summary pseudo-variables: statistics at variable granularity
# rather than value granularity.
SUMMARY_META = "caidaGreyMeta"
SUMMARY_NOGREY = "caidaNoGrey"


@dataclass
class DimStatsRow:
    """One row of the dimensional-analysis table.

    maxfrac is kept at full precision; reports round to 3 significant
    digits.  ``tied`` marks a lexicographic tie-break on maxval.
    """

    date: str
    variable: str
    nrow: int
    ncol: int
    nnz: int
    maxval: str
    maxcount: int
    maxfrac: float
    tied: bool = False


class Relevance(str, Enum):
    IRRELEVANT = "irrelevant"
    LOW_CARDINALITY = "relevant_low_cardinality"
    HIGH_CARDINALITY = "relevant_high_cardinality"


@dataclass(frozen=True)
class RelevanceThresholds:
    # A variable whose modal value covers nearly everything carries no
    # information; ~10 vs ~10,000 unique values get different treatments.
    irrelevance: float = 0.98
    high_cardinality: int = 1000


@dataclass
class ExemplarRecord:
    """Most common value of each variable for one collection date."""

    date: str
    assignments: dict[str, tuple[str, int, float]] = field(default_factory=dict)


def _empty_row(date: str, variable: str) -> DimStatsRow:
    return DimStatsRow(date=date, variable=variable, nrow=0, ncol=0, nnz=0,
                       maxval="", maxcount=0, maxfrac=0.0)


def _argmax_count(counts: dict[str, int]) -> tuple[str, int, bool]:
    best_key = ""
    best = -1
    tied = False
    for key in sorted(counts):
        value = counts[key]
        if value > best:
            best_key, best, tied = key, value, False
        elif value == best:
            tied = True
    return best_key, best, tied


def _value_level_row(date: str, variable: str, sliced: AssocArray) -> DimStatsRow:
    if sliced.nnz == 0:
        return _empty_row(date, variable)
    sums = sliced.col_sums()
    best_col, best, tied = _argmax_count(sums)
    return DimStatsRow(
        date=date,
        variable=variable,
        nrow=sliced.nrow,
        ncol=sliced.ncol,
        nnz=sliced.nnz,
        maxval=split_col(best_col)[1],
        maxcount=best,
        maxfrac=best / sliced.nnz,
        tied=tied,
    )


def _summary_row(date: str, variable: str, array: AssocArray) -> DimStatsRow:
    # Variable granularity: each canonical variable acts as one "value"
    # counted by the number of distinct sources carrying it, so a
    # multi-valued variable (several ports per source) does not outweigh
    # the many-to-one ones.  Derived columns are excluded so the variable
    # count stays canonical.
    rows_per_variable: dict[str, set[str]] = defaultdict(set)
    rows: set[str] = set()
    nnz = 0
    for row, col, _ in array.triples():
        var = variable_of(col)
        if var in DERIVED_VARIABLES:
            continue
        rows_per_variable[var].add(row)
        rows.add(row)
        nnz += 1
    if nnz == 0:
        return _empty_row(date, variable)
    counts = {var: len(members) for var, members in rows_per_variable.items()}
    best_var, best, tied = _argmax_count(counts)
    return DimStatsRow(
        date=date,
        variable=variable,
        nrow=len(rows),
        ncol=len(counts),
        nnz=nnz,
        maxval=best_var,
        maxcount=best,
        maxfrac=best / nnz,
        tied=tied,
    )


def dim_table(joined: JoinedWindow, variable: str) -> DimStatsRow:
    """Summary row for one variable of one joined window.

    nrow counts distinct sources carrying the variable, ncol its distinct
    values, nnz its nonzero entries; maxval is the value with the greatest
    column sum (ties broken lexicographically smallest and flagged) and
    maxfrac = maxcount / nnz.  An absent variable yields a zero row.
    """
    if variable == SUMMARY_META:
        return _summary_row(joined.window_id, variable, joined.meta)
    if variable == SUMMARY_NOGREY:
        return _summary_row(joined.window_id, variable, joined.no_grey)
    array = joined.no_grey if variable == NOGREY_VARIABLE else joined.meta
    return _value_level_row(joined.window_id, variable, array.select_cols(variable + "|"))


def dim_table_from_array(date: str, variable: str, array: AssocArray) -> DimStatsRow:
    """As dim_table, but over a bare array (used on deserialized windows)."""
    if variable in (SUMMARY_META, SUMMARY_NOGREY):
        return _summary_row(date, variable, array)
    return _value_level_row(date, variable, array.select_cols(variable + "|"))


def classify_relevance(row: DimStatsRow,
                       thresholds: RelevanceThresholds = RelevanceThresholds()) -> Relevance:
    """Partition variables by how much further analysis they can support."""
    if row.ncol <= 1 or row.maxfrac > thresholds.irrelevance:
        return Relevance.IRRELEVANT
    if row.ncol >= thresholds.high_cardinality:
        return Relevance.HIGH_CARDINALITY
    return Relevance.LOW_CARDINALITY


# Exemplars only make sense for variables with a meaningful modal value:
# degenerate single-valued variables and near-unique ones (for instance
# full-resolution timestamps) are excluded, as are the whole-matrix
# summary pseudo-variables and derived columns.
EXEMPLAR_MIN_MAXFRAC = 0.01


def exemplar_eligible(row: DimStatsRow, min_maxfrac: float = EXEMPLAR_MIN_MAXFRAC) -> bool:
    if row.variable in (SUMMARY_META, SUMMARY_NOGREY) or row.variable in DERIVED_VARIABLES:
        return False
    return row.ncol > 1 and row.maxfrac >= min_maxfrac


def exemplar(rows: Iterable[DimStatsRow]) -> list[ExemplarRecord]:
    """Fold per-variable rows into one exemplar record per date."""
    by_date: dict[str, ExemplarRecord] = {}
    for row in rows:
        if row.nnz == 0:
            continue
        record = by_date.setdefault(row.date, ExemplarRecord(date=row.date))
        record.assignments[row.variable] = (row.maxval, row.maxcount, row.maxfrac)
    return [by_date[date] for date in sorted(by_date)]


def narrative(record: ExemplarRecord) -> str:
    """One-line description of an exemplar record."""
    parts = []
    for variable in sorted(record.assignments):
        value, _, frac = record.assignments[variable]
        if variable in ("srcPacket", NOGREY_VARIABLE):
            low = int(value)
            value = "1 packet" if low == 1 else f"{low}-{2 * low - 1} packets"
        parts.append(f"{variable}={value} ({100 * frac:.1f}%)")
    return f"Most common profile for {record.date}: " + ", ".join(parts)


def all_variables(joined: JoinedWindow) -> list[str]:
    """Report order: summary rows first, then canonical variables present."""
    variables = [SUMMARY_NOGREY, SUMMARY_META]
    seen = {variable_of(c) for c in joined.meta.col_keys}
    variables.extend(v for v in sorted(seen) if v not in DERIVED_VARIABLES)
    if joined.no_grey.nnz:
        variables.append(NOGREY_VARIABLE)
    return variables
