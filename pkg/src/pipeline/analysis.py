"""
Módulo de suma y análisis
Lee los archivos tar de una ventana, acumula A_t += A[j] y calcula las nueve
propiedades de red sobre la matriz agregada.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence

from dmap.maps import Dmap, global_ind
from hypersparse.matrix import (
    MAX_LOG2_DIM,
    HypersparseError,
    TrafficMatrix,
    add_in_place,
    col_degree,
    col_reduce,
    diag_mask,
    max_count,
    nnz,
    row_degree,
    row_reduce,
    total_count,
)
from hypersparse.store import iter_archive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkStats:
    """Las nueve propiedades de una matriz de tráfico agregada."""

    valid_packets: int = 0
    unique_links: int = 0
    max_link_packets: int = 0
    unique_sources: int = 0
    max_source_packets: int = 0
    max_source_fanout: int = 0
    unique_destinations: int = 0
    max_dest_packets: int = 0
    max_dest_fanin: int = 0

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in self.field_names())

    def violations(self) -> List[str]:
        """Desigualdades del tipo que no se cumplen (vacía si el registro es consistente)."""
        problems = []
        if self.unique_links > self.valid_packets:
            problems.append("unique_links > valid_packets")
        if not self.max_link_packets <= self.max_source_packets <= self.valid_packets:
            problems.append("max_link_packets <= max_source_packets <= valid_packets")
        if not self.max_link_packets <= self.max_dest_packets <= self.valid_packets:
            problems.append("max_link_packets <= max_dest_packets <= valid_packets")
        if self.max_source_fanout > self.unique_destinations:
            problems.append("max_source_fanout > unique_destinations")
        if self.max_dest_fanin > self.unique_sources:
            problems.append("max_dest_fanin > unique_sources")
        if (self.valid_packets == 0) != all(v == 0 for v in self.as_tuple()):
            problems.append("valid_packets = 0 <=> todo en cero")
        return problems


# ========== SUMA ==========

class WindowSumError(Exception):
    """Fallo al leer un archivo durante la suma de una ventana."""

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = path


def _sum_paths(paths: Sequence, log2_dim: int, timings: Optional[Dict[str, float]]) -> TrafficMatrix:
    a_t = TrafficMatrix.empty(log2_dim)
    read_s = sum_s = 0.0
    for path in paths:
        try:
            matrices = iter_archive(path)
            while True:
                t0 = time.perf_counter()
                try:
                    matrix = next(matrices)
                except StopIteration:
                    read_s += time.perf_counter() - t0
                    break
                t1 = time.perf_counter()
                add_in_place(a_t, matrix)
                sum_s += time.perf_counter() - t1
                read_s += t1 - t0
        except HypersparseError as e:
            raise WindowSumError(f"Error leyendo {path}: {e}", path=path) from e
        logger.debug(f"✓ Sumado {path}")
    if timings is not None:
        timings['read'] = timings.get('read', 0.0) + read_s
        timings['sum'] = timings.get('sum', 0.0) + sum_s
    return a_t


def sum_window(archive_paths: Sequence, log2_dim: Optional[int] = None, n_threads: int = 1,
               timings: Optional[Dict[str, float]] = None) -> TrafficMatrix:
    """
    Suma todas las matrices de todos los archivos de una ventana.

    A_t parte de la matriz cero. Con n_threads > 1 cada hilo suma un bloque
    contiguo de archivos en su propio acumulador y luego se reducen en orden;
    la suma entera hace que el resultado no dependa de la cantidad de hilos.

    Args:
        archive_paths: Archivos tar de la ventana, en orden
        log2_dim: Ancho del espacio; si es None se toma de la primera matriz
        n_threads: Hilos de suma
        timings: Dict opcional donde se acumulan segundos por fase

    Returns:
        La matriz agregada A_t
    """
    paths = list(archive_paths)
    if log2_dim is None:
        log2_dim = _first_log2_dim(paths)
    n_threads = max(1, min(int(n_threads), len(paths) or 1))

    if n_threads == 1:
        return _sum_paths(paths, log2_dim, timings)

    thread_map = Dmap([n_threads, 1])
    parts = [[paths[i] for i in global_ind(thread_map, [len(paths), 1], 0, tid)]
             for tid in range(n_threads)]
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=n_threads, thread_name_prefix="suma") as pool:
        partials = list(pool.map(lambda part: _sum_paths(part, log2_dim, None), parts))
    a_t = partials[0]
    for partial in partials[1:]:
        add_in_place(a_t, partial)
    if timings is not None:
        timings['sum'] = timings.get('sum', 0.0) + (time.perf_counter() - t0)
    return a_t


def _first_log2_dim(paths: Sequence) -> int:
    for path in paths:
        try:
            for matrix in iter_archive(path):
                return matrix.log2_dim
        except HypersparseError as e:
            raise WindowSumError(f"Error leyendo {path}: {e}", path=path) from e
    return MAX_LOG2_DIM


# ========== ANÁLISIS ==========

def analyze(a_t: TrafficMatrix) -> NetworkStats:
    """
    Calcula las nueve propiedades de red reutilizando las reducciones.

    Args:
        a_t: Matriz de tráfico (completa o enmascarada)

    Returns:
        NetworkStats
    """
    if nnz(a_t) == 0:
        return NetworkStats()
    src_packets = row_reduce(a_t)
    dst_packets = col_reduce(a_t)
    fanout = row_degree(a_t)
    fanin = col_degree(a_t)
    return NetworkStats(
        valid_packets=total_count(a_t),
        unique_links=nnz(a_t),
        max_link_packets=max_count(a_t),
        unique_sources=len(src_packets),
        max_source_packets=src_packets.max(),
        max_source_fanout=fanout.max(),
        unique_destinations=len(dst_packets),
        max_dest_packets=dst_packets.max(),
        max_dest_fanin=fanin.max(),
    )


def subrange_analyze(a_t: TrafficMatrix, subranges) -> List[NetworkStats]:
    """Aplica analyze a diag_mask(A_t, src, dst) para cada subrango."""
    return [analyze(diag_mask(a_t, sub.src, sub.dst)) for sub in subranges]
