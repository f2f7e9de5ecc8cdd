"""
Módulo de matrices hiperdispersas
Kernel de matrices de tráfico en formato coordenado canónico (COO ordenado por fila, columna).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_LOG2_DIM = 32
COUNT_DTYPE = np.uint64
INDEX_DTYPE = np.uint32


# ========== ERRORES ==========

class HypersparseError(Exception):
    """Error base del kernel hiperdisperso."""


class MatrixConstructionError(HypersparseError):
    """Datos de entrada inválidos al construir una matriz."""


class DimensionMismatchError(HypersparseError):
    """Las matrices no comparten el mismo espacio de direcciones."""


class CountOverflowError(HypersparseError):
    """La suma de conteos desborda 64 bits."""


# ========== TIPOS ==========

@dataclass(frozen=True)
class SparseVector:
    """Vector disperso: índices ordenados y sus valores (sin ceros explícitos)."""

    indices: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)

    def total(self) -> int:
        return int(self.values.sum(dtype=COUNT_DTYPE)) if self.values.size else 0

    def max(self) -> int:
        return int(self.values.max()) if self.values.size else 0

    def to_dict(self) -> dict:
        return {int(i): int(v) for i, v in zip(self.indices, self.values)}


@dataclass(frozen=True)
class AddressSet:
    """
    Conjunto de direcciones para máscaras diagonales.

    Es un rango inclusivo (lo, hi) o una lista explícita ordenada y sin duplicados.
    """

    lo: Optional[int] = None
    hi: Optional[int] = None
    explicit: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.explicit is not None:
            if self.lo is not None or self.hi is not None:
                raise ValueError("AddressSet es un rango o una lista, no ambos")
            values = tuple(int(v) for v in self.explicit)
            if any(v < 0 for v in values):
                raise ValueError("Las direcciones no pueden ser negativas")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError("La lista explícita debe estar ordenada y sin duplicados")
            object.__setattr__(self, 'explicit', values)
        else:
            if self.lo is None or self.hi is None:
                raise ValueError("Un rango necesita lo y hi")
            if self.lo < 0 or self.lo > self.hi:
                raise ValueError(f"Rango inválido: ({self.lo}, {self.hi})")

    @classmethod
    def range(cls, lo: int, hi: int) -> "AddressSet":
        return cls(lo=int(lo), hi=int(hi))

    @classmethod
    def of(cls, indices: Iterable[int]) -> "AddressSet":
        return cls(explicit=tuple(sorted(set(int(i) for i in indices))))

    @classmethod
    def full(cls, log2_dim: int) -> "AddressSet":
        return cls(lo=0, hi=(1 << log2_dim) - 1)

    @property
    def is_range(self) -> bool:
        return self.explicit is None

    def max_index(self) -> int:
        if self.is_range:
            return self.hi
        return self.explicit[-1] if self.explicit else -1

    def contains(self, indices: np.ndarray) -> np.ndarray:
        """Máscara booleana de pertenencia para un arreglo de índices."""
        if self.is_range:
            return (indices >= self.lo) & (indices <= self.hi)
        return np.isin(indices, np.asarray(self.explicit, dtype=np.int64))

    def __str__(self) -> str:
        if self.is_range:
            return f"{self.lo}-{self.hi}"
        return ",".join(str(v) for v in self.explicit)


def _keys(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return (rows.astype(np.uint64) << np.uint64(32)) | cols.astype(np.uint64)


def _check_dims(a: "TrafficMatrix", b: "TrafficMatrix") -> None:
    if a.log2_dim != b.log2_dim:
        raise DimensionMismatchError(
            f"Dimensiones incompatibles: 2^{a.log2_dim} vs 2^{b.log2_dim}"
        )


class TrafficMatrix:
    """
    Matriz de tráfico hiperdispersa 2^k x 2^k con conteos enteros positivos.

    Las filas son fuentes y las columnas destinos. Las entradas se guardan en tres
    arreglos paralelos (rows, cols, counts) ordenados por (row, col), sin claves
    duplicadas ni ceros explícitos.
    """

    __slots__ = ('log2_dim', 'rows', 'cols', 'counts')

    def __init__(self, log2_dim: int = MAX_LOG2_DIM,
                 rows: Optional[np.ndarray] = None,
                 cols: Optional[np.ndarray] = None,
                 counts: Optional[np.ndarray] = None):
        """
        Crea una matriz a partir de arreglos ya canónicos.

        Args:
            log2_dim: Ancho del espacio de direcciones (k)
            rows: Índices de fila ordenados
            cols: Índices de columna
            counts: Conteos positivos

        Para datos sin ordenar usar matrix_from_pairs o from_entries.
        """
        if not 1 <= log2_dim <= MAX_LOG2_DIM:
            raise MatrixConstructionError(f"log2_dim fuera de rango [1, 32]: {log2_dim}")
        self.log2_dim = int(log2_dim)
        self.rows = np.asarray(rows if rows is not None else [], dtype=INDEX_DTYPE)
        self.cols = np.asarray(cols if cols is not None else [], dtype=INDEX_DTYPE)
        self.counts = np.asarray(counts if counts is not None else [], dtype=COUNT_DTYPE)
        if not (self.rows.size == self.cols.size == self.counts.size):
            raise MatrixConstructionError("rows, cols y counts deben tener el mismo largo")

    # ---------- construcción ----------

    @classmethod
    def empty(cls, log2_dim: int = MAX_LOG2_DIM) -> "TrafficMatrix":
        return cls(log2_dim)

    @classmethod
    def from_entries(cls, entries: dict, log2_dim: int) -> "TrafficMatrix":
        """Construye desde un dict {(row, col): count}; descarta conteos en cero."""
        items = sorted((k, v) for k, v in entries.items() if v)
        if any(v < 0 for _, v in items):
            raise MatrixConstructionError("Los conteos deben ser no negativos")
        rows = np.array([k[0] for k, _ in items], dtype=np.int64)
        cols = np.array([k[1] for k, _ in items], dtype=np.int64)
        _check_bounds(rows, cols, log2_dim)
        counts = np.array([v for _, v in items], dtype=COUNT_DTYPE)
        return cls(log2_dim, rows, cols, counts)

    @property
    def dim(self) -> int:
        return 1 << self.log2_dim

    def copy(self) -> "TrafficMatrix":
        return TrafficMatrix(self.log2_dim, self.rows.copy(), self.cols.copy(), self.counts.copy())

    def keys(self) -> np.ndarray:
        return _keys(self.rows, self.cols)

    def to_dict(self) -> dict:
        return {(int(r), int(c)): int(v) for r, c, v in zip(self.rows, self.cols, self.counts)}

    def to_dense(self) -> np.ndarray:
        """Arreglo denso; solo para espacios pequeños (k <= 12)."""
        if self.log2_dim > 12:
            raise ValueError("to_dense solo está disponible para log2_dim <= 12")
        dense = np.zeros((self.dim, self.dim), dtype=COUNT_DTYPE)
        dense[self.rows.astype(np.int64), self.cols.astype(np.int64)] = self.counts
        return dense

    def is_canonical(self) -> bool:
        """Verifica los invariantes: orden estricto, conteos >= 1, índices en rango."""
        keys = self.keys()
        if keys.size > 1 and not np.all(keys[1:] > keys[:-1]):
            return False
        if self.counts.size and int(self.counts.min()) < 1:
            return False
        limit = self.dim
        if self.rows.size and (int(self.rows.max()) >= limit or int(self.cols.max()) >= limit):
            return False
        return True

    # ---------- operadores ----------

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrafficMatrix):
            return NotImplemented
        return (self.log2_dim == other.log2_dim
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.counts, other.counts))

    def __add__(self, other: "TrafficMatrix") -> "TrafficMatrix":
        return add(self, other)

    def __iadd__(self, other: "TrafficMatrix") -> "TrafficMatrix":
        add_in_place(self, other)
        return self

    def __repr__(self) -> str:
        return f"TrafficMatrix(log2_dim={self.log2_dim}, nnz={nnz(self)}, total={total_count(self)})"


def _check_bounds(rows: np.ndarray, cols: np.ndarray, log2_dim: int) -> None:
    limit = 1 << log2_dim
    bad = (rows < 0) | (rows >= limit) | (cols < 0) | (cols >= limit)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise MatrixConstructionError(
            f"Par fuera de rango en la posición {i}: ({int(rows[i])}, {int(cols[i])}) "
            f"para un espacio de 2^{log2_dim}"
        )


def matrix_from_pairs(pairs, log2_dim: int = MAX_LOG2_DIM) -> TrafficMatrix:
    """
    Construye la matriz de tráfico contando cada par (fuente, destino).

    Args:
        pairs: Secuencia de pares (src, dst) o arreglo de forma (n, 2)
        log2_dim: Ancho del espacio de direcciones

    Returns:
        TrafficMatrix con la multiplicidad de cada par como conteo
    """
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return TrafficMatrix.empty(log2_dim)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise MatrixConstructionError(f"Se esperaban pares (src, dst), forma recibida: {arr.shape}")
    return matrix_from_arrays(arr[:, 0], arr[:, 1], log2_dim)


def matrix_from_arrays(src: np.ndarray, dst: np.ndarray, log2_dim: int = MAX_LOG2_DIM) -> TrafficMatrix:
    """Variante de matrix_from_pairs con arreglos de fuentes y destinos separados."""
    src = np.asarray(src)
    dst = np.asarray(dst)
    if src.shape != dst.shape:
        raise MatrixConstructionError("src y dst deben tener el mismo largo")
    if src.size == 0:
        return TrafficMatrix.empty(log2_dim)
    _check_bounds(src.astype(np.int64), dst.astype(np.int64), log2_dim)
    keys, counts = np.unique(_keys(src, dst), return_counts=True)
    return TrafficMatrix(
        log2_dim,
        (keys >> np.uint64(32)).astype(INDEX_DTYPE),
        (keys & np.uint64(0xFFFFFFFF)).astype(INDEX_DTYPE),
        counts.astype(COUNT_DTYPE),
    )


# ========== SUMA ==========

def _merge(a: TrafficMatrix, b: TrafficMatrix):
    _check_dims(a, b)
    if b.counts.size == 0:
        return a.rows, a.cols, a.counts
    if a.counts.size == 0:
        return b.rows, b.cols, b.counts
    keys = np.concatenate([a.keys(), b.keys()])
    counts = np.concatenate([a.counts, b.counts])
    # dos corridas ordenadas: el sort estable las fusiona linealmente
    order = np.argsort(keys, kind='stable')
    keys = keys[order]
    counts = counts[order]
    starts = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
    sums = np.add.reduceat(counts, starts)
    if np.any(sums < np.maximum.reduceat(counts, starts)):
        raise CountOverflowError("La suma de conteos desborda uint64")
    merged = keys[starts]
    return (
        (merged >> np.uint64(32)).astype(INDEX_DTYPE),
        (merged & np.uint64(0xFFFFFFFF)).astype(INDEX_DTYPE),
        sums,
    )


def add(a: TrafficMatrix, b: TrafficMatrix) -> TrafficMatrix:
    """Suma entrada por entrada; el resultado es una matriz nueva."""
    rows, cols, counts = _merge(a, b)
    return TrafficMatrix(a.log2_dim, rows.copy(), cols.copy(), counts.copy())


def add_in_place(a_t: TrafficMatrix, a: TrafficMatrix) -> None:
    """A_t += A. Requiere acceso exclusivo a a_t."""
    a_t.rows, a_t.cols, a_t.counts = (x.copy() for x in _merge(a_t, a))


def sum_matrices(matrices: Iterable[TrafficMatrix], log2_dim: int = MAX_LOG2_DIM) -> TrafficMatrix:
    """Acumula una secuencia de matrices partiendo de la matriz cero."""
    a_t = TrafficMatrix.empty(log2_dim)
    for m in matrices:
        add_in_place(a_t, m)
    return a_t


# ========== REDUCCIONES ==========

def total_count(a: TrafficMatrix) -> int:
    return int(a.counts.sum(dtype=COUNT_DTYPE)) if a.counts.size else 0


def nnz(a: TrafficMatrix) -> int:
    return int(a.counts.size)


def max_count(a: TrafficMatrix) -> int:
    return int(a.counts.max()) if a.counts.size else 0


def _grouped(index: np.ndarray, values: Optional[np.ndarray], presorted: bool) -> SparseVector:
    if index.size == 0:
        return SparseVector(np.empty(0, dtype=INDEX_DTYPE), np.empty(0, dtype=COUNT_DTYPE))
    if presorted:
        order = None
        idx = index
    else:
        order = np.argsort(index, kind='stable')
        idx = index[order]
    starts = np.flatnonzero(np.concatenate(([True], idx[1:] != idx[:-1])))
    if values is None:
        sizes = np.diff(np.append(starts, idx.size)).astype(COUNT_DTYPE)
    else:
        vals = values if order is None else values[order]
        sizes = np.add.reduceat(vals, starts)
    return SparseVector(idx[starts].astype(INDEX_DTYPE), sizes.astype(COUNT_DTYPE))


def row_reduce(a: TrafficMatrix) -> SparseVector:
    """Paquetes por fuente."""
    return _grouped(a.rows, a.counts, presorted=True)


def col_reduce(a: TrafficMatrix) -> SparseVector:
    """Paquetes por destino."""
    return _grouped(a.cols, a.counts, presorted=False)


def row_degree(a: TrafficMatrix) -> SparseVector:
    """Fan-out: destinos distintos por fuente."""
    return _grouped(a.rows, None, presorted=True)


def col_degree(a: TrafficMatrix) -> SparseVector:
    """Fan-in: fuentes distintas por destino."""
    return _grouped(a.cols, None, presorted=False)


# ========== MÁSCARA DIAGONAL ==========

def diag_mask(a: TrafficMatrix, src: AddressSet, dst: AddressSet) -> TrafficMatrix:
    """
    Selecciona el subrango src x dst, equivalente a D_src · A · D_dst.

    Args:
        a: Matriz de tráfico
        src: Direcciones fuente a conservar
        dst: Direcciones destino a conservar

    Returns:
        Matriz con las entradas de A cuya fila está en src y columna en dst
    """
    keep = src.contains(a.rows) & dst.contains(a.cols)
    return TrafficMatrix(a.log2_dim, a.rows[keep], a.cols[keep], a.counts[keep])

