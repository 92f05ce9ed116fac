# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Crypto-PAn kernel.

Implements AES-128 single-block encryption and the 32-round
prefix-preserving anonymization loop entirely in C, so batch calls run
without per-bit Python overhead.  Must stay bit-identical to the pure
backend in ``_cryptopan_pure.py``.
"""

from libc.stdint cimport uint8_t, uint32_t
from libc.string cimport memcpy

import numpy as np

# FIPS-197 S-box.
_SBOX_BYTES = bytes.fromhex(
    "637c777bf26b6fc53001672bfed7ab76"
    "ca82c97dfa5947f0add4a2af9ca472c0"
    "b7fd9326363ff7cc34a5e5f171d83115"
    "04c723c31896059a071280e2eb27b275"
    "09832c1a1b6e5aa0523bd6b329e32f84"
    "53d100ed20fcb15b6acbbe394a4c58cf"
    "d0efaafb434d338545f9027f503c9fa8"
    "51a3408f929d38f5bcb6da2110fff3d2"
    "cd0c13ec5f974417c4a77e3d645d1973"
    "60814fdc222a908846eeb814de5e0bdb"
    "e0323a0a4906245cc2d3ac629195e479"
    "e7c8376d8dd54ea96c56f4ea657aae08"
    "ba78252e1ca6b4c6e8dd741f4bbd8b8a"
    "703eb5664803f60e613557b986c11d9e"
    "e1f8981169d98e949b1e87e9ce5528df"
    "8ca1890dbfe6426841992d0fb054bb16"
)

cdef uint8_t SBOX[256]
memcpy(SBOX, <const uint8_t*><const char*>_SBOX_BYTES, 256)


cdef inline uint8_t xtime(uint8_t x) noexcept nogil:
    return <uint8_t>((x << 1) ^ (0x1B if x & 0x80 else 0))


cdef void expand_key(const uint8_t *key, uint8_t *rk) noexcept nogil:
    """AES-128 key schedule: 16-byte key -> 176 bytes of round keys."""
    cdef int i
    cdef uint8_t t0, t1, t2, t3, prev
    cdef uint8_t rcon = 0x01
    memcpy(rk, key, 16)
    for i in range(16, 176, 4):
        t0 = rk[i - 4]
        t1 = rk[i - 3]
        t2 = rk[i - 2]
        t3 = rk[i - 1]
        if i % 16 == 0:
            prev = t0
            t0 = SBOX[t1] ^ rcon
            t1 = SBOX[t2]
            t2 = SBOX[t3]
            t3 = SBOX[prev]
            rcon = xtime(rcon)
        rk[i] = rk[i - 16] ^ t0
        rk[i + 1] = rk[i - 15] ^ t1
        rk[i + 2] = rk[i - 14] ^ t2
        rk[i + 3] = rk[i - 13] ^ t3


cdef void encrypt_block(const uint8_t *rk, const uint8_t *inp, uint8_t *out) noexcept nogil:
    """Encrypt one 16-byte block (state laid out column-major, FIPS order)."""
    cdef uint8_t s[16]
    cdef uint8_t t[16]
    cdef int i, rnd, c
    cdef uint8_t a0, a1, a2, a3
    for i in range(16):
        s[i] = inp[i] ^ rk[i]
    for rnd in range(1, 10):
        # SubBytes + ShiftRows: row r of column c comes from column (c + r) % 4.
        for c in range(4):
            t[4 * c] = SBOX[s[4 * c]]
            t[4 * c + 1] = SBOX[s[4 * ((c + 1) & 3) + 1]]
            t[4 * c + 2] = SBOX[s[4 * ((c + 2) & 3) + 2]]
            t[4 * c + 3] = SBOX[s[4 * ((c + 3) & 3) + 3]]
        # MixColumns + AddRoundKey.
        for c in range(4):
            a0 = t[4 * c]
            a1 = t[4 * c + 1]
            a2 = t[4 * c + 2]
            a3 = t[4 * c + 3]
            s[4 * c] = xtime(a0) ^ xtime(a1) ^ a1 ^ a2 ^ a3 ^ rk[16 * rnd + 4 * c]
            s[4 * c + 1] = a0 ^ xtime(a1) ^ xtime(a2) ^ a2 ^ a3 ^ rk[16 * rnd + 4 * c + 1]
            s[4 * c + 2] = a0 ^ a1 ^ xtime(a2) ^ xtime(a3) ^ a3 ^ rk[16 * rnd + 4 * c + 2]
            s[4 * c + 3] = xtime(a0) ^ a0 ^ a1 ^ a2 ^ xtime(a3) ^ rk[16 * rnd + 4 * c + 3]
    for c in range(4):
        out[4 * c] = SBOX[s[4 * c]] ^ rk[160 + 4 * c]
        out[4 * c + 1] = SBOX[s[4 * ((c + 1) & 3) + 1]] ^ rk[160 + 4 * c + 1]
        out[4 * c + 2] = SBOX[s[4 * ((c + 2) & 3) + 2]] ^ rk[160 + 4 * c + 2]
        out[4 * c + 3] = SBOX[s[4 * ((c + 3) & 3) + 3]] ^ rk[160 + 4 * c + 3]


def aes_encrypt(key: bytes, block: bytes) -> bytes:
    """Single-block AES-128 encryption (exposed for validation tests)."""
    if len(key) != 16 or len(block) != 16:
        raise ValueError("aes_encrypt expects a 16-byte key and block")
    cdef uint8_t rk[176]
    cdef uint8_t out[16]
    expand_key(<const uint8_t*><const char*>key, rk)
    encrypt_block(rk, <const uint8_t*><const char*>block, out)
    return bytes(out[:16])


cdef class Kernel:
    """Keyed prefix-preserving permutation on 32-bit addresses."""

    cdef uint8_t _rk[176]
    cdef uint32_t _pad4
    cdef uint8_t _padtail[12]

    def __init__(self, key: bytes):
        if len(key) != 32:
            raise ValueError("Crypto-PAn key must be exactly 32 bytes")
        cdef const uint8_t *kb = <const uint8_t*><const char*>key
        cdef uint8_t pad[16]
        expand_key(kb, self._rk)
        encrypt_block(self._rk, kb + 16, pad)
        self._pad4 = ((<uint32_t>pad[0]) << 24) | ((<uint32_t>pad[1]) << 16) \
            | ((<uint32_t>pad[2]) << 8) | <uint32_t>pad[3]
        memcpy(self._padtail, &pad[4], 12)

    cdef uint32_t _anon(self, uint32_t addr) noexcept nogil:
        cdef uint8_t block[16]
        cdef uint8_t enc[16]
        cdef uint32_t flips = 0
        cdef uint32_t mask, first
        cdef int p
        memcpy(&block[4], self._padtail, 12)
        for p in range(32):
            mask = (<uint32_t>0xFFFFFFFF) << (32 - p) if p else 0
            first = (addr & mask) | (self._pad4 & ~mask)
            block[0] = <uint8_t>(first >> 24)
            block[1] = <uint8_t>(first >> 16)
            block[2] = <uint8_t>(first >> 8)
            block[3] = <uint8_t>first
            encrypt_block(self._rk, block, enc)
            flips = (flips << 1) | (enc[0] >> 7)
        return flips ^ addr

    def anonymize(self, addr) -> int:
        if not 0 <= addr <= 0xFFFFFFFF:
            raise ValueError(f"address {addr!r} out of 32-bit range")
        return self._anon(<uint32_t>addr)

    def anonymize_many(self, addrs):
        arr = np.ascontiguousarray(addrs, dtype=np.uint32)
        out_arr = np.empty(arr.shape[0], dtype=np.uint32)
        cdef const uint32_t[::1] inp = arr
        cdef uint32_t[::1] out = out_arr
        cdef Py_ssize_t i, n = inp.shape[0]
        with nogil:
            for i in range(n):
                out[i] = self._anon(inp[i])
        return out_arr
