"""Hypersparse string-keyed associative arrays.

An :class:`AssocArray` stores a sparse count matrix as explicit
(row, col, val) triples with string keys on both axes.  Column keys follow
the ``variable|value`` convention, which turns "slice out one variable"
into a plain prefix filter.  Arrays are immutable once built and safe to
share between threads.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Iterator, Mapping

from .errors import ParseError

COL_SEP = "|"

# Percent-escaping for the value part of a column key.  "|" would break the
# variable|value split; "%" must be escaped so decoding is unambiguous; tab,
# LF and CR would break the TSV triple format.
_ESCAPES = [("%", "%25"), (COL_SEP, "%7C"), ("\t", "%09"), ("\n", "%0A"), ("\r", "%0D")]


def escape_value(value: str) -> str:
    for raw, enc in _ESCAPES:
        value = value.replace(raw, enc)
    return value


def unescape_value(value: str) -> str:
    for raw, enc in reversed(_ESCAPES[1:]):
        value = value.replace(enc, raw)
    return value.replace("%25", "%")


def make_col(variable: str, value: str) -> str:
    """Build a ``variable|value`` column key, escaping the value part."""
    if not variable or COL_SEP in variable:
        raise ValueError(f"invalid variable name {variable!r}")
    return variable + COL_SEP + escape_value(str(value))


def split_col(col: str) -> tuple[str, str]:
    """Inverse of :func:`make_col`; value comes back unescaped."""
    variable, sep, value = col.partition(COL_SEP)
    if not sep:
        return col, ""
    return variable, unescape_value(value)


def variable_of(col: str) -> str:
    return col.partition(COL_SEP)[0]


class AssocArray:
    """Immutable sparse count matrix keyed by strings in both dimensions.

    Duplicate (row, col) input triples are summed during construction.  Key
    order is bytewise lexicographic, so iteration is deterministic across
    platforms.
    """

    __slots__ = ("_data", "_row_keys", "_col_keys")

    def __init__(self, data: Mapping[tuple[str, str], int],
                 row_keys: tuple[str, ...], col_keys: tuple[str, ...]):
        # Internal constructor; use build() to aggregate and validate.
        self._data = data
        self._row_keys = row_keys
        self._col_keys = col_keys

    @classmethod
    def build(cls, triples: Iterable[tuple[str, str, int]]) -> "AssocArray":
        """Aggregate (row, col, val) triples into an array.

        Duplicate (row, col) pairs are summed.  Empty keys and non-positive
        values are rejected.
        """
        data: dict[tuple[str, str], int] = defaultdict(int)
        for row, col, val in triples:
            if not row or not col:
                raise ValueError(f"empty key in triple ({row!r}, {col!r}, {val!r})")
            if val < 1:
                raise ValueError(f"non-positive value in triple ({row!r}, {col!r}, {val!r})")
            data[(row, col)] += int(val)
        row_keys = tuple(sorted({r for r, _ in data}))
        col_keys = tuple(sorted({c for _, c in data}))
        return cls(dict(data), row_keys, col_keys)

    @classmethod
    def empty(cls) -> "AssocArray":
        return cls({}, (), ())

    # -- dimensions ----------------------------------------------------

    @property
    def row_keys(self) -> tuple[str, ...]:
        return self._row_keys

    @property
    def col_keys(self) -> tuple[str, ...]:
        return self._col_keys

    @property
    def nrow(self) -> int:
        return len(self._row_keys)

    @property
    def ncol(self) -> int:
        return len(self._col_keys)

    @property
    def nnz(self) -> int:
        return len(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssocArray):
            return NotImplemented
        return self._data == other._data

    def __repr__(self) -> str:
        return f"AssocArray(nrow={self.nrow}, ncol={self.ncol}, nnz={self.nnz})"

    # -- access ----------------------------------------------------------

    def get(self, row: str, col: str, default: int = 0) -> int:
        return self._data.get((row, col), default)

    def triples(self) -> Iterator[tuple[str, str, int]]:
        """Iterate triples in (row, col) lexicographic order."""
        for key in sorted(self._data):
            yield key[0], key[1], self._data[key]

    def total(self) -> int:
        """Sum of all values."""
        return sum(self._data.values())

    # -- operations --------------------------------------------------------

    def select_cols(self, prefix: str) -> "AssocArray":
        """Sub-array of triples whose column key starts with ``prefix``."""
        if prefix == "":
            return self
        data = {k: v for k, v in self._data.items() if k[1].startswith(prefix)}
        row_keys = tuple(sorted({r for r, _ in data}))
        col_keys = tuple(sorted({c for _, c in data}))
        return AssocArray(data, row_keys, col_keys)

    def col_sums(self) -> dict[str, int]:
        """Total value per column key."""
        sums: dict[str, int] = defaultdict(int)
        for (_, col), val in self._data.items():
            sums[col] += val
        return {c: sums[c] for c in self._col_keys}

    def row_degrees(self) -> dict[str, int]:
        """Number of nonzero entries per row key."""
        deg: dict[str, int] = defaultdict(int)
        for (row, _) in self._data:
            deg[row] += 1
        return {r: deg[r] for r in self._row_keys}

    def row_sums(self) -> dict[str, int]:
        """Total value per row key (companion mode to :meth:`row_degrees`)."""
        sums: dict[str, int] = defaultdict(int)
        for (row, _), val in self._data.items():
            sums[row] += val
        return {r: sums[r] for r in self._row_keys}

    def col_degrees(self) -> dict[str, int]:
        """Number of nonzero entries (distinct rows) per column key."""
        deg: dict[str, int] = defaultdict(int)
        for (_, col) in self._data:
            deg[col] += 1
        return {c: deg[c] for c in self._col_keys}

    # -- serialization -------------------------------------------------

    def to_tsv(self, fh) -> None:
        """Write ``row<TAB>col<TAB>val`` lines (UTF-8, LF, no header)."""
        for row, col, val in self.triples():
            if "\t" in row or "\n" in row or "\r" in row:
                raise ValueError(f"row key {row!r} not representable in TSV")
            if "\t" in col or "\n" in col or "\r" in col:
                raise ValueError(f"col key {col!r} not representable in TSV")
            fh.write(f"{row}\t{col}\t{val}\n")

    @classmethod
    def from_tsv(cls, fh) -> "AssocArray":
        def parse(lines):
            for lineno, line in enumerate(lines, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
                try:
                    val = int(parts[2])
                except ValueError:
                    raise ParseError(f"non-integer value {parts[2]!r}", lineno) from None
                yield parts[0], parts[1], val

        return cls.build(parse(fh))
