"""
Módulo de anonimización de direcciones
Permutación con llave sobre [0, 2^bits): red Feistel balanceada de 4 rondas.
Para anchos impares se usa cycle-walking sobre el ancho par siguiente.
"""

from __future__ import annotations

import hashlib
import logging
from functools import lru_cache

import numpy as np

logger = logging.getLogger(__name__)

ROUNDS = 4
KEY_BYTES = 16


@lru_cache(maxsize=16)
def _round_tables(key: bytes, half_bits: int) -> tuple:
    """Tablas pseudoaleatorias F_i: [0, 2^h) -> [0, 2^h), una por ronda."""
    tables = []
    size = 1 << half_bits
    for i in range(ROUNDS):
        seed = hashlib.blake2b(
            f"feistel-round-{i}-h{half_bits}".encode(), key=key, digest_size=32
        ).digest()
        rng = np.random.default_rng(int.from_bytes(seed, 'little'))
        table = rng.integers(0, size, size=size, dtype=np.uint64)
        table.flags.writeable = False
        tables.append(table)
    return tuple(tables)


class AddressAnonymizer:
    """
    Biyección con llave sobre el espacio de direcciones.

    Con bits=32 divide cada dirección en dos mitades de 16 bits y aplica 4 rondas
    L, R -> R, L xor F_i(R).
    """

    def __init__(self, key: bytes, bits: int = 32):
        """
        Args:
            key: Llave de 128 bits
            bits: Ancho del espacio de direcciones (1..32)
        """
        if len(key) != KEY_BYTES:
            raise ValueError(f"La llave debe tener {KEY_BYTES} bytes, tiene {len(key)}")
        if not 1 <= bits <= 32:
            raise ValueError(f"Ancho fuera de [1, 32]: {bits}")
        self.key = bytes(key)
        self.bits = bits
        self.width = bits + (bits % 2)
        self.half = self.width // 2
        self.mask = np.uint64((1 << self.half) - 1)
        self.limit = np.uint64(1 << bits)
        self.tables = _round_tables(self.key, self.half)

    def _encrypt(self, x: np.ndarray) -> np.ndarray:
        shift = np.uint64(self.half)
        left = x >> shift
        right = x & self.mask
        for table in self.tables:
            left, right = right, left ^ table[right.astype(np.intp)]
        return (left << shift) | right

    def _decrypt(self, y: np.ndarray) -> np.ndarray:
        shift = np.uint64(self.half)
        left = y >> shift
        right = y & self.mask
        for table in reversed(self.tables):
            left, right = right ^ table[left.astype(np.intp)], left
        return (left << shift) | right

    def _walk(self, values: np.ndarray, step) -> np.ndarray:
        out = step(values)
        if self.width == self.bits:
            return out
        pending = out >= self.limit
        while np.any(pending):
            out[pending] = step(out[pending])
            pending = out >= self.limit
        return out

    def _as_array(self, addresses) -> np.ndarray:
        arr = np.asarray(addresses, dtype=np.uint64)
        if arr.size and int(arr.max()) >= int(self.limit):
            raise ValueError(f"Dirección fuera de [0, 2^{self.bits})")
        return arr

    def anonymize_array(self, addresses) -> np.ndarray:
        """Anonimiza un arreglo de direcciones; devuelve uint32."""
        arr = self._as_array(addresses)
        return self._walk(arr.ravel(), self._encrypt).reshape(arr.shape).astype(np.uint32)

    def deanonymize_array(self, addresses) -> np.ndarray:
        arr = self._as_array(addresses)
        return self._walk(arr.ravel(), self._decrypt).reshape(arr.shape).astype(np.uint32)

    def anonymize(self, addr: int) -> int:
        return int(self.anonymize_array([addr])[0])

    def deanonymize(self, addr: int) -> int:
        return int(self.deanonymize_array([addr])[0])


def anonymize(addr: int, key: bytes) -> int:
    """Anonimiza una dirección de 32 bits."""
    return AddressAnonymizer(key, 32).anonymize(addr)


def deanonymize(addr: int, key: bytes) -> int:
    return AddressAnonymizer(key, 32).deanonymize(addr)
