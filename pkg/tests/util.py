"""Independent oracle implementations used by the tests.

These deliberately avoid the package's own data structures and code paths:
dimensional statistics are recomputed with nested dicts straight from the
triple list, and the anonymizer is re-derived bit-by-bit from its
definition on top of the cryptography AES primitive.
"""

from __future__ import annotations

import ipaddress

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from scipy import stats


def chisquare_pvalue(observed: np.ndarray, expected: np.ndarray) -> float:
    """Chi-square p-value with sparse cells (< 5 expected) folded together."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    keep = expected >= 5
    if (~keep).any():
        observed = np.append(observed[keep], observed[~keep].sum())
        expected = np.append(expected[keep], expected[~keep].sum())
    expected = expected * observed.sum() / expected.sum()
    return float(stats.chisquare(observed, expected).pvalue)


def lcp_bits(a: int, b: int, width: int = 32) -> int:
    """Length of the common bit prefix of two width-bit integers."""
    diff = a ^ b
    if diff == 0:
        return width
    return width - diff.bit_length()


def straight_line_cryptopan(key: bytes, addr: str) -> str:
    """Bit-string transliteration of the prefix-preserving construction."""
    assert len(key) == 32
    encrypt = Cipher(algorithms.AES(key[:16]), modes.ECB()).encryptor().update
    pad = encrypt(key[16:])
    pad_bits = "".join(f"{byte:08b}" for byte in pad)
    addr_bits = f"{int(ipaddress.IPv4Address(addr)):032b}"
    out_bits = ""
    for i in range(32):
        block_bits = addr_bits[:i] + pad_bits[i:]
        block = int(block_bits, 2).to_bytes(16, "big")
        msb = encrypt(block)[0] >> 7
        out_bits += str(int(addr_bits[i]) ^ msb)
    return str(ipaddress.IPv4Address(int(out_bits, 2)))


def brute_force_dimstats(triples, variable):
    """Nested-map recomputation of one variable's dimensional statistics.

    Input triples are (row, "variable|value", val).  Returns a dict with
    nrow/ncol/nnz/maxval/maxcount/maxfrac computed from scratch.
    """
    prefix = variable + "|"
    per_value = {}
    per_cell = {}
    rows = set()
    for row, col, val in triples:
        if not col.startswith(prefix):
            continue
        key = (row, col)
        per_cell[key] = per_cell.get(key, 0) + val
        rows.add(row)
    if not per_cell:
        return {"nrow": 0, "ncol": 0, "nnz": 0, "maxval": "", "maxcount": 0, "maxfrac": 0.0}
    for (_, col), val in per_cell.items():
        per_value[col] = per_value.get(col, 0) + val
    nnz = len(per_cell)
    best_col = min(col for col, count in per_value.items()
                   if count == max(per_value.values()))
    maxcount = per_value[best_col]
    return {
        "nrow": len(rows),
        "ncol": len(per_value),
        "nnz": nnz,
        "maxval": best_col[len(prefix):],
        "maxcount": maxcount,
        "maxfrac": maxcount / nnz,
    }
