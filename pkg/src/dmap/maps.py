"""
Módulo de mapas de distribución
Grilla de procesadores, distribución y lista de procesadores; cada proceso calcula
qué índices globales le pertenecen sin comunicarse con los demás.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


# ========== ERRORES ==========

class DmapError(Exception):
    """Error base de mapas."""


class UnknownProcessorError(DmapError):
    pass


class DistributionNotSupportedError(DmapError):
    pass


class AmbiguousOwnerError(DmapError):
    pass


# ========== DISTRIBUCIONES ==========

@dataclass(frozen=True)
class Block:
    """Bloques contiguos de tamaño ceil(N/P)."""

    def block_size(self, extent: int, nprocs: int) -> int:
        return max(1, math.ceil(extent / nprocs))


@dataclass(frozen=True)
class Cyclic:
    """Índices repartidos de a uno, en ronda."""

    def block_size(self, extent: int, nprocs: int) -> int:
        return 1


@dataclass(frozen=True)
class BlockCyclic:
    """Bloques de tamaño fijo repartidos en ronda."""

    size: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise DmapError(f"El tamaño de bloque debe ser >= 1: {self.size}")

    def block_size(self, extent: int, nprocs: int) -> int:
        return self.size


@dataclass(frozen=True)
class BlockOverlap:
    """Bloques con solapamiento; no soportado."""

    overlap: int = 1


Distribution = Union[Block, Cyclic, BlockCyclic]

_NAMES = {'block': Block, 'cyclic': Cyclic, 'blockcyclic': BlockCyclic}


def parse_distribution(text: str) -> Distribution:
    """
    Interpreta 'block', 'cyclic', 'blockcyclic' o 'blockcyclic(b)'.

    Args:
        text: Nombre de la distribución (sin distinguir mayúsculas)

    Returns:
        Instancia de la distribución
    """
    name = text.strip().lower().replace('-', '').replace('_', '')
    size = None
    if '(' in name and name.endswith(')'):
        name, arg = name[:-1].split('(', 1)
        size = int(arg)
    elif name.startswith('blockcyclic') and name != 'blockcyclic':
        size = int(name[len('blockcyclic'):])
        name = 'blockcyclic'
    if name == 'blockoverlap':
        raise DistributionNotSupportedError("La distribución block-overlap no está soportada")
    if name not in _NAMES:
        raise DmapError(f"Distribución desconocida: {text!r}")
    if name == 'blockcyclic':
        return BlockCyclic(size if size is not None else 1)
    if size is not None:
        raise DmapError(f"La distribución {name} no acepta tamaño de bloque")
    return _NAMES[name]()


def distribution_label(dist: Distribution) -> str:
    if isinstance(dist, BlockCyclic):
        return f"blockcyclic({dist.size})"
    return type(dist).__name__.lower()


# ========== MAPA ==========

class Dmap:
    """
    Mapa de distribución: grilla de procesadores, distribución por dimensión y
    lista de procesadores.

    La coordenada de grilla de un procesador es su posición en procs, recorrida en
    orden de columnas (la primera dimensión varía más rápido).
    """

    def __init__(self, grid: Sequence[int], dist=None, procs: Optional[Sequence[int]] = None):
        """
        Args:
            grid: Procesadores por dimensión, p.ej. [Np, 1]
            dist: Distribución única, lista por dimensión, o None/{} para Block
            procs: Identificadores distintos de procesador; por defecto range(prod(grid))
        """
        self.grid: Tuple[int, ...] = tuple(int(g) for g in grid)
        if not self.grid or any(g < 1 for g in self.grid):
            raise DmapError(f"Grilla inválida: {list(grid)}")
        self.dist: Tuple[Distribution, ...] = self._normalize_dist(dist)
        nprocs = math.prod(self.grid)
        self.procs: Tuple[int, ...] = tuple(int(p) for p in (procs if procs is not None else range(nprocs)))
        if len(self.procs) != nprocs:
            raise DmapError(f"La lista tiene {len(self.procs)} procesadores y la grilla {nprocs}")
        if len(set(self.procs)) != len(self.procs):
            raise DmapError("Los procesadores deben ser distintos")

    def _normalize_dist(self, dist) -> Tuple[Distribution, ...]:
        if dist is None or dist == {} or dist == []:
            dists = [Block()] * len(self.grid)
        elif isinstance(dist, (list, tuple)):
            if len(dist) != len(self.grid):
                raise DmapError("Se necesita una distribución por dimensión de la grilla")
            dists = list(dist)
        else:
            dists = [dist] * len(self.grid)
        resolved = []
        for d in dists:
            if isinstance(d, str):
                d = parse_distribution(d)
            if isinstance(d, BlockOverlap):
                raise DistributionNotSupportedError("La distribución block-overlap no está soportada")
            if not isinstance(d, (Block, Cyclic, BlockCyclic)):
                raise DmapError(f"Distribución desconocida: {d!r}")
            resolved.append(d)
        return tuple(resolved)

    @property
    def nprocs(self) -> int:
        return len(self.procs)

    def coords(self, pid: int) -> Tuple[int, ...]:
        """Coordenada de grilla del procesador pid."""
        try:
            position = self.procs.index(pid)
        except ValueError:
            raise UnknownProcessorError(f"El procesador {pid} no pertenece al mapa {list(self.procs)}")
        return tuple(int(c) for c in np.unravel_index(position, self.grid, order='F'))

    def _check_dim(self, shape: Sequence[int], dim: int) -> None:
        if not 0 <= dim < len(shape):
            raise DmapError(f"Dimensión {dim} fuera de rango para forma {list(shape)}")
        if dim >= len(self.grid):
            raise DmapError(f"La grilla {list(self.grid)} no tiene dimensión {dim}")
        if shape[dim] < 0:
            raise DmapError(f"Extensión negativa: {shape[dim]}")

    def __repr__(self) -> str:
        dists = ", ".join(distribution_label(d) for d in self.dist)
        return f"Dmap(grid={list(self.grid)}, dist=[{dists}], procs={list(self.procs)})"


def _owned(extent: int, nprocs: int, coord: int, dist: Distribution) -> np.ndarray:
    if extent == 0:
        return np.empty(0, dtype=np.int64)
    b = dist.block_size(extent, nprocs)
    indices = np.arange(extent, dtype=np.int64)
    return indices[(indices // b) % nprocs == coord]


def global_ind(dmap: Dmap, shape: Sequence[int], dim: int, pid: int) -> List[int]:
    """
    Índices globales a lo largo de dim que le tocan a pid.

    Args:
        dmap: Mapa de distribución
        shape: Extensión por dimensión del arreglo
        dim: Dimensión consultada (desde 0)
        pid: Procesador

    Returns:
        Lista ordenada de índices globales (vacía si N < N_p deja a pid sin trabajo)
    """
    dmap._check_dim(shape, dim)
    coord = dmap.coords(pid)[dim]
    owned = _owned(int(shape[dim]), dmap.grid[dim], coord, dmap.dist[dim])
    return owned.tolist()


def owner(dmap: Dmap, shape: Sequence[int], dim: int, index: int) -> int:
    """Procesador dueño del índice global a lo largo de dim."""
    dmap._check_dim(shape, dim)
    extent = int(shape[dim])
    if not 0 <= index < extent:
        raise DmapError(f"Índice {index} fuera de [0, {extent})")
    others = math.prod(g for d, g in enumerate(dmap.grid) if d != dim)
    if others != 1:
        raise AmbiguousOwnerError(
            f"La grilla {list(dmap.grid)} reparte otras dimensiones; el dueño no es único"
        )
    nprocs = dmap.grid[dim]
    b = dmap.dist[dim].block_size(extent, nprocs)
    coord = (index // b) % nprocs
    coords = [0] * len(dmap.grid)
    coords[dim] = coord
    position = int(np.ravel_multi_index(tuple(coords), dmap.grid, order='F'))
    return dmap.procs[position]
