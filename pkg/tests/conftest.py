"""Fixtures comunes y oráculos densos para las pruebas."""

import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

# Agregar src al path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from hypersparse.matrix import TrafficMatrix, matrix_from_arrays
from pipeline.config import ChallengeConfig


# ========== ORÁCULOS ==========

def dense_from_pairs(src, dst, log2_dim: int) -> np.ndarray:
    dense = np.zeros((1 << log2_dim, 1 << log2_dim), dtype=np.uint64)
    np.add.at(dense, (np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)), 1)
    return dense


def dense_stats(dense: np.ndarray) -> tuple:
    """Las nueve propiedades calculadas sobre el arreglo denso."""
    if not dense.any():
        return (0,) * 9
    pattern = dense > 0
    row_sums = dense.sum(axis=1)
    col_sums = dense.sum(axis=0)
    return (
        int(dense.sum()),
        int(np.count_nonzero(dense)),
        int(dense.max()),
        int(np.count_nonzero(row_sums)),
        int(row_sums.max()),
        int(pattern.sum(axis=1).max()),
        int(np.count_nonzero(col_sums)),
        int(col_sums.max()),
        int(pattern.sum(axis=0).max()),
    )


def tally(src, dst) -> Counter:
    return Counter(zip((int(s) for s in src), (int(d) for d in dst)))


def matrix_tally(matrices) -> Counter:
    total: Counter = Counter()
    for m in matrices:
        total.update(m.to_dict())
    return total


def random_pairs(rng: np.random.Generator, log2_dim: int, max_pairs: int = 500):
    """Pares aleatorios; a veces concentrados en un rincón para forzar repeticiones."""
    n = int(rng.integers(0, max_pairs + 1))
    span = 1 << log2_dim
    if rng.random() < 0.5:
        span = max(1, span >> int(rng.integers(0, log2_dim + 1)))
    src = rng.integers(0, span, size=n)
    dst = rng.integers(0, span, size=n)
    return src, dst


def random_matrix(rng: np.random.Generator, log2_dim: int = 8, max_pairs: int = 500) -> TrafficMatrix:
    src, dst = random_pairs(rng, log2_dim, max_pairs)
    return matrix_from_arrays(src, dst, log2_dim)


# ========== FIXTURES ==========

@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def tiny_cfg():
    """64 paquetes por ventana, 4 por matriz, 4 matrices por archivo, espacio de 2^8."""
    return ChallengeConfig(np_packets=64, nv=4, nmat_per_file=4, log2_dim=8,
                           n_sources=16, n_destinations=16)


@pytest.fixture
def small_cfg():
    """Ventanas de 2^12 paquetes repartidas en 4 archivos."""
    return ChallengeConfig(np_packets=1 << 12, nv=1 << 8, nmat_per_file=4,
                           n_sources=1 << 8, n_destinations=1 << 8)
