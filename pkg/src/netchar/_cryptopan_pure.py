"""Pure-Python Crypto-PAn kernel backed by the ``cryptography`` AES.

Bit-identical to the compiled kernel in ``_cryptopan.pyx``; selected at
import time by :mod:`netchar.cryptopan` when the extension is unavailable
or explicitly disabled.
"""

from __future__ import annotations

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


class Kernel:
    """Keyed prefix-preserving permutation on 32-bit addresses.

    The 32-byte key splits into a 16-byte AES key and a 16-byte pad seed.
    The pad P = AES(key, seed) is derived once; each anonymization then runs
    32 single-block encryptions, one per address bit.
    """

    __slots__ = ("_cipher_key", "_padtail", "_blocks")

    def __init__(self, key: bytes):
        if len(key) != 32:
            raise ValueError("Crypto-PAn key must be exactly 32 bytes")
        self._cipher_key = bytes(key[:16])
        pad = self._encryptor()(bytes(key[16:32]))
        pad4 = int.from_bytes(pad[:4], "big")
        self._padtail = bytes(pad[4:16])
        # For prefix length p: keep the first p address bits, fill the rest
        # of the leading 32 bits from the pad.
        self._blocks = []
        for p in range(32):
            mask = (0xFFFFFFFF << (32 - p)) & 0xFFFFFFFF if p else 0
            self._blocks.append((mask, pad4 & ~mask & 0xFFFFFFFF))

    def _encryptor(self):
        # ECB here is the raw block permutation, not a data-hiding mode; the
        # Crypto-PAn construction is defined in terms of single-block E(k, .).
        return Cipher(algorithms.AES(self._cipher_key), modes.ECB()).encryptor().update

    def _anonymize_with(self, encrypt, addr: int) -> int:
        tail = self._padtail
        flips = 0
        for mask, pad_fill in self._blocks:
            first = (addr & mask) | pad_fill
            block = first.to_bytes(4, "big") + tail
            flips = (flips << 1) | (encrypt(block)[0] >> 7)
        return flips ^ addr

    def anonymize(self, addr: int) -> int:
        if not 0 <= addr <= 0xFFFFFFFF:
            raise ValueError(f"address {addr!r} out of 32-bit range")
        # Fresh encryptor per call keeps this safe for concurrent callers.
        return self._anonymize_with(self._encryptor(), addr)

    def anonymize_many(self, addrs) -> np.ndarray:
        arr = np.ascontiguousarray(addrs, dtype=np.uint32)
        encrypt = self._encryptor()
        out = np.empty(arr.shape[0], dtype=np.uint32)
        anon = self._anonymize_with
        for i, addr in enumerate(arr):
            out[i] = anon(encrypt, int(addr))
        return out
