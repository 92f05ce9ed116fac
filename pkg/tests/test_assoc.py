import io
import random

import pytest
from hypothesis import given, strategies as st

from netchar.assoc import AssocArray, escape_value, make_col, split_col, unescape_value, variable_of
from netchar.errors import ParseError


def test_build_empty():
    a = AssocArray.build([])
    assert a.nnz == 0
    assert a.nrow == 0
    assert a.ncol == 0
    assert a.row_keys == ()
    assert a.col_keys == ()


def test_build_sums_duplicates():
    a = AssocArray.build([("a", "x", 1), ("a", "x", 2), ("b", "y", 1)])
    assert a.nnz == 2
    assert a.get("a", "x") == 3
    assert a.nrow == 2
    assert a.ncol == 2


def test_build_shared_column():
    a = AssocArray.build([("a", "x", 1), ("b", "x", 1)])
    assert a.ncol == 1
    assert a.col_sums() == {"x": 2}


@pytest.mark.parametrize("triple", [("", "x", 1), ("a", "", 1), ("a", "x", 0)])
def test_build_rejects_bad_triples(triple):
    with pytest.raises(ValueError):
        AssocArray.build([triple])


def test_select_cols_prefix():
    a = AssocArray.build([("a", "os|linux", 1), ("b", "asn|AS1", 2)])
    sliced = a.select_cols("os|")
    assert sliced.col_keys == ("os|linux",)
    assert sliced.row_keys == ("a",)
    assert sliced.nnz == 1


def test_select_cols_empty_prefix_is_identity():
    a = AssocArray.build([("a", "x", 1), ("b", "y", 2)])
    assert a.select_cols("") == a


def test_select_cols_no_match():
    a = AssocArray.build([("a", "x", 1)])
    sliced = a.select_cols("zzz|")
    assert sliced.nnz == 0
    assert sliced.nrow == 0


def test_select_cols_idempotent():
    a = AssocArray.build([("a", "os|linux", 1), ("a", "os|win", 1), ("b", "asn|AS1", 2)])
    once = a.select_cols("os|")
    assert once.select_cols("os|") == once


def test_col_sums():
    assert AssocArray.build([]).col_sums() == {}
    a = AssocArray.build([("a", "x", 3), ("b", "x", 1), ("b", "y", 2)])
    assert a.col_sums() == {"x": 4, "y": 2}
    assert AssocArray.build([("a", "x", 5)]).col_sums() == {"x": 5}


def test_row_degrees_and_sums():
    a = AssocArray.build([("a", "x", 1), ("a", "y", 1)])
    assert a.row_degrees() == {"a": 2}
    assert a.row_sums() == {"a": 2}
    b = AssocArray.build([("a", "x", 7)])
    assert b.row_degrees() == {"a": 1}
    assert b.row_sums() == {"a": 7}


def test_row_modes_match_exhaustive_scan():
    rng = random.Random(5)
    triples = [(f"r{rng.randrange(20)}", f"c{rng.randrange(30)}", rng.randrange(1, 9))
               for _ in range(100)]
    a = AssocArray.build(triples)
    cells = {}
    for row, col, val in triples:
        cells[(row, col)] = cells.get((row, col), 0) + val
    degrees, sums = {}, {}
    for (row, _), val in cells.items():
        degrees[row] = degrees.get(row, 0) + 1
        sums[row] = sums.get(row, 0) + val
    assert a.row_degrees() == degrees
    assert a.row_sums() == sums


def test_col_degrees():
    a = AssocArray.build([("a", "x", 5), ("b", "x", 1), ("b", "y", 2)])
    assert a.col_degrees() == {"x": 2, "y": 1}


@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("wxyz"),
                          st.integers(1, 50)), max_size=40),
       st.randoms(use_true_random=False))
def test_build_invariant_under_permutation(triples, rnd):
    shuffled = list(triples)
    rnd.shuffle(shuffled)
    assert AssocArray.build(shuffled) == AssocArray.build(triples)
    assert AssocArray.build(shuffled).col_keys == AssocArray.build(triples).col_keys


def test_conservation_of_totals():
    rng = random.Random(11)
    triples = [(f"r{rng.randrange(40)}", f"c{rng.randrange(40)}", rng.randrange(1, 5))
               for _ in range(500)]
    a = AssocArray.build(triples)
    total = sum(v for _, _, v in triples)
    assert sum(a.col_sums().values()) == total
    assert sum(a.row_sums().values()) == total
    assert a.total() == total


def test_dims_match_set_oracle():
    rng = random.Random(23)
    for _ in range(20):
        n = rng.randrange(0, 2000)
        triples = [(f"r{rng.randrange(100)}", f"c{rng.randrange(100)}", 1)
                   for _ in range(n)]
        a = AssocArray.build(triples)
        pairs = {(r, c) for r, c, _ in triples}
        assert a.nnz == len(pairs)
        assert a.nrow == len({r for r, _ in pairs})
        assert a.ncol == len({c for _, c in pairs})


def test_tsv_round_trip():
    a = AssocArray.build([("10.0.0.1", "os|Windows 7/8", 3), ("10.0.0.2", "asn|AS4134", 1)])
    buf = io.StringIO()
    a.to_tsv(buf)
    assert buf.getvalue() == "10.0.0.1\tos|Windows 7/8\t3\n10.0.0.2\tasn|AS4134\t1\n"
    assert AssocArray.from_tsv(io.StringIO(buf.getvalue())) == a


def test_tsv_rejects_unrepresentable_keys():
    a = AssocArray.build([("a\tb", "x", 1)])
    with pytest.raises(ValueError):
        a.to_tsv(io.StringIO())


def test_from_tsv_reports_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        AssocArray.from_tsv(io.StringIO("a\tx\t1\nbroken line\n"))
    with pytest.raises(ParseError, match="line 1"):
        AssocArray.from_tsv(io.StringIO("a\tx\tnotanumber\n"))


def test_make_col_split_col():
    assert make_col("os", "Windows 7/8") == "os|Windows 7/8"
    assert split_col("os|Windows 7/8") == ("os", "Windows 7/8")
    assert variable_of("os|Windows 7/8") == "os"
    # values containing the separator are escaped and recovered
    col = make_col("note", "a|b%c")
    assert "|" not in col.split("|", 1)[1]
    assert split_col(col) == ("note", "a|b%c")
    with pytest.raises(ValueError):
        make_col("bad|name", "v")


@given(st.text(max_size=60))
def test_escape_round_trip(value):
    assert unescape_value(escape_value(value)) == value
    escaped = escape_value(value)
    assert "|" not in escaped and "\t" not in escaped and "\n" not in escaped
