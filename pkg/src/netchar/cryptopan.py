"""Prefix-preserving IPv4 anonymization (Crypto-PAn).

Two interchangeable kernels implement the same keyed construction: a
compiled Cython extension and a pure-Python fallback.  The compiled one is
used when available; set ``NETCHAR_PURE_PYTHON=1`` to force the fallback.
Both are bit-exact, so files anonymized under either backend (or by other
conforming implementations) can be cross-correlated as long as the same
256-bit key is used.

Key file format: 64 hexadecimal characters on a single line.  The first 32
encode the AES cipher key, the last 32 the pad seed.
"""

from __future__ import annotations

import os
import secrets
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _cryptopan_pure

try:
    from . import _cryptopan as _compiled
except ImportError:  # extension not built
    _compiled = None

_FORCE_PURE = os.environ.get("NETCHAR_PURE_PYTHON", "") not in ("", "0")

#: Name of the kernel new CryptoPan instances use by default.
DEFAULT_BACKEND = "compiled" if (_compiled is not None and not _FORCE_PURE) else "pure"

DEFAULT_CACHE_SIZE = 1 << 16

KEY_BYTES = 32


def available_backends() -> dict[str, object]:
    backends = {"pure": _cryptopan_pure.Kernel}
    if _compiled is not None:
        backends["compiled"] = _compiled.Kernel
    return backends


def ip_to_int(text: str) -> int:
    """Parse a dotted-quad IPv4 address to its 32-bit integer value."""
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"invalid IPv4 address {text!r}")
    value = 0
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            raise ValueError(f"invalid IPv4 address {text!r}")
        octet = int(part)
        if octet > 255:
            raise ValueError(f"invalid IPv4 address {text!r}")
        value = (value << 8) | octet
    return value


def int_to_ip(value: int) -> str:
    if not 0 <= value <= 0xFFFFFFFF:
        raise ValueError(f"address {value!r} out of 32-bit range")
    return f"{value >> 24}.{(value >> 16) & 255}.{(value >> 8) & 255}.{value & 255}"


class AnonKey:
    """256-bit anonymization key (cipher key + pad seed)."""

    __slots__ = ("_key", "_mapper")

    def __init__(self, key: bytes):
        if len(key) != KEY_BYTES:
            raise ValueError(f"anonymization key must be {KEY_BYTES} bytes, got {len(key)}")
        self._key = bytes(key)
        self._mapper = None

    @classmethod
    def from_hex(cls, text: str) -> "AnonKey":
        text = text.strip()
        try:
            key = bytes.fromhex(text)
        except ValueError:
            raise ValueError("key must be hexadecimal") from None
        return cls(key)

    @classmethod
    def load(cls, path) -> "AnonKey":
        text = Path(path).read_text(encoding="utf-8").strip()
        if len(text) != 2 * KEY_BYTES:
            raise ValueError(f"key file {path} must hold {2 * KEY_BYTES} hex characters")
        return cls.from_hex(text)

    @classmethod
    def generate(cls) -> "AnonKey":
        return cls(secrets.token_bytes(KEY_BYTES))

    def save(self, path) -> None:
        Path(path).write_text(self.hex + "\n", encoding="utf-8")

    @property
    def key(self) -> bytes:
        return self._key

    @property
    def hex(self) -> str:
        return self._key.hex()

    def mapper(self) -> "CryptoPan":
        """Default CryptoPan instance for this key (pad derived once)."""
        if self._mapper is None:
            self._mapper = CryptoPan(self)
        return self._mapper

    def __eq__(self, other):
        if not isinstance(other, AnonKey):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)


class CryptoPan:
    """Keyed prefix-preserving mapper over IPv4 addresses.

    Stateless after construction apart from an optional bounded LRU memo
    (real traces repeat sources heavily); the memo never changes results.
    """

    def __init__(self, key: AnonKey | bytes, backend: str | None = None,
                 cache_size: int | None = DEFAULT_CACHE_SIZE):
        key_bytes = key.key if isinstance(key, AnonKey) else bytes(key)
        backend = backend or DEFAULT_BACKEND
        try:
            kernel_cls = available_backends()[backend]
        except KeyError:
            raise ValueError(f"unknown Crypto-PAn backend {backend!r}") from None
        self.backend = backend
        self._kernel = kernel_cls(key_bytes)
        if cache_size:
            self.anonymize_int = lru_cache(maxsize=cache_size)(self._kernel.anonymize)
        else:
            self.anonymize_int = self._kernel.anonymize

    def anonymize(self, addr: str) -> str:
        """Anonymize one dotted-quad address."""
        return int_to_ip(self.anonymize_int(ip_to_int(addr)))

    def anonymize_ints(self, addrs) -> np.ndarray:
        """Anonymize a batch of integer addresses (bypasses the memo)."""
        return self._kernel.anonymize_many(addrs)


def anonymize_ip(key: AnonKey, addr: str | int) -> str | int:
    """Anonymize a single address under ``key``; type of input is preserved."""
    mapper = key.mapper()
    if isinstance(addr, int):
        return mapper.anonymize_int(addr)
    return mapper.anonymize(addr)


def anonymize_stream(key: AnonKey, addrs: Iterable[str] | Sequence[str]) -> list[str]:
    """Elementwise anonymization of dotted-quad addresses, order preserved."""
    mapper = key.mapper()
    return [mapper.anonymize(addr) for addr in addrs]
