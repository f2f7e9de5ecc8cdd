"""
Módulo de procesamiento de listas de ventanas
process_filelist completa el paso de leer, sumar y analizar para cada ventana
asignada a un proceso por el mapa, sin comunicación entre procesos.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import pandas as pd

from dmap.maps import Dmap, global_ind
from hypersparse.matrix import total_count

from .analysis import NetworkStats, analyze, subrange_analyze, sum_window
from .config import ChallengeConfig

logger = logging.getLogger(__name__)

PHASES = ('sum', 'analyze', 'read')


@dataclass(frozen=True)
class WindowDescriptor:
    """Una ventana de tiempo y sus archivos tar principales."""

    window_id: int
    archives: tuple

    @classmethod
    def from_dict(cls, data: dict) -> "WindowDescriptor":
        return cls(int(data['window_id']), tuple(str(p) for p in data['archives']))


@dataclass(frozen=True)
class BenchRecord:
    """Una medición de tiempo de una fase para una ventana."""

    phase: str
    window_id: int
    pid: int
    n_procs: int
    n_threads: int
    wall_seconds: float
    packets_processed: int

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"Fase desconocida: {self.phase}")
        if not self.wall_seconds > 0:
            raise ValueError(f"wall_seconds debe ser > 0: {self.wall_seconds}")


@dataclass
class WindowResult:
    """Resultado de una ventana: estadísticas o el error que la hizo fallar."""

    window_id: int
    stats: Optional[NetworkStats] = None
    subranges: List[NetworkStats] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_line(self) -> str:
        """Una línea JSON: window_id, las nueve estadísticas y los grupos de subrango."""
        record: Dict[str, object] = {'window_id': self.window_id}
        if self.ok:
            record.update(self.stats.to_dict())
            record['subranges'] = [s.to_dict() for s in self.subranges]
        else:
            record['error'] = self.error
        return json.dumps(record, separators=(',', ':'))

    @classmethod
    def from_line(cls, line: str) -> "WindowResult":
        data = json.loads(line)
        if 'error' in data:
            return cls(int(data['window_id']), error=data['error'])
        names = NetworkStats.field_names()
        return cls(
            int(data['window_id']),
            NetworkStats(**{n: int(data[n]) for n in names}),
            [NetworkStats(**{n: int(s[n]) for n in names}) for s in data.get('subranges', [])],
        )


def _elapsed(t0: float) -> float:
    return max(time.perf_counter() - t0, 1e-9)


def file_map(n_procs: int, dist=None) -> Dmap:
    """Mapa [Np, 1] sobre la lista de ventanas, procesadores 0..Np-1."""
    return Dmap([n_procs, 1], dist, range(n_procs))


def owned_windows(filelist: Sequence[WindowDescriptor], dmap: Dmap, pid: int) -> List[WindowDescriptor]:
    my_i_global = global_ind(dmap, [len(filelist), 1], 0, pid)
    return [filelist[i] for i in my_i_global]


def process_filelist(filelist: Sequence[WindowDescriptor], dmap: Dmap, pid: int,
                     cfg: ChallengeConfig, out_path=None, n_threads: int = 1,
                     bench: Optional[List[BenchRecord]] = None) -> List[WindowResult]:
    """
    Lee, suma y analiza las ventanas que el mapa le asigna a pid.

    Args:
        filelist: Ventanas en orden global
        dmap: Mapa de distribución sobre [len(filelist), 1]
        pid: Procesador que ejecuta
        cfg: Configuración del reto (log2_dim y subrangos)
        out_path: Archivo de resultados de este pid (se crea aunque quede vacío)
        n_threads: Hilos para la suma de cada ventana
        bench: Lista opcional donde se agregan las mediciones por fase

    Returns:
        Resultados por ventana propia, en orden de window_id
    """
    mine = owned_windows(filelist, dmap, pid)
    logger.info(f"Proceso {pid}/{dmap.nprocs}: {len(mine)} de {len(filelist)} ventanas")

    results: List[WindowResult] = []
    for descriptor in mine:
        try:
            timings: Dict[str, float] = {}
            t0 = time.perf_counter()
            a_t = sum_window(descriptor.archives, cfg.log2_dim, n_threads, timings)
            sum_wall = _elapsed(t0)

            t1 = time.perf_counter()
            stats = analyze(a_t)
            subs = subrange_analyze(a_t, cfg.subranges)
            analyze_wall = _elapsed(t1)

            results.append(WindowResult(descriptor.window_id, stats, subs))
            if bench is not None:
                packets = total_count(a_t)
                common = dict(window_id=descriptor.window_id, pid=pid, n_procs=dmap.nprocs,
                              n_threads=n_threads, packets_processed=packets)
                if 'read' in timings:
                    read_wall = max(timings['read'], 1e-9)
                    bench.append(BenchRecord('read', wall_seconds=read_wall, **common))
                    bench.append(BenchRecord('sum', wall_seconds=max(timings['sum'], 1e-9), **common))
                else:
                    bench.append(BenchRecord('sum', wall_seconds=sum_wall, **common))
                bench.append(BenchRecord('analyze', wall_seconds=analyze_wall, **common))
            logger.info(f"✓ Ventana {descriptor.window_id}: {stats.valid_packets} paquetes válidos")
        except Exception as e:
            logger.error(f"✗ Ventana {descriptor.window_id}: {e}", exc_info=True)
            results.append(WindowResult(descriptor.window_id, error=str(e)))

    results.sort(key=lambda r: r.window_id)
    if out_path is not None:
        write_stats_file(out_path, results)
    return results


# ========== ARCHIVOS DE RESULTADOS ==========

def write_stats_file(path, results: Iterable[WindowResult]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [r.to_line() for r in sorted(results, key=lambda r: r.window_id)]
    path.write_text("".join(line + "\n" for line in lines), encoding='utf-8')
    return path


def read_stats_lines(path) -> List[WindowResult]:
    text = Path(path).read_text(encoding='utf-8')
    return [WindowResult.from_line(line) for line in text.splitlines() if line.strip()]


def merge_stats_files(paths: Iterable, out_path) -> List[WindowResult]:
    """Concatena archivos de resultados por pid y los ordena por window_id."""
    results: List[WindowResult] = []
    for path in paths:
        results.extend(read_stats_lines(path))
    ids = [r.window_id for r in results]
    if len(ids) != len(set(ids)):
        raise ValueError("Hay ventanas repetidas entre los archivos a combinar")
    write_stats_file(out_path, results)
    return sorted(results, key=lambda r: r.window_id)


def read_stats_file(path) -> pd.DataFrame:
    """
    Carga un archivo de resultados como tabla: una fila por ventana y subrango.

    La columna 'subrange' vale -1 para la matriz completa.
    """
    rows = []
    for result in read_stats_lines(path):
        if not result.ok:
            rows.append({'window_id': result.window_id, 'subrange': -1, 'error': result.error})
            continue
        rows.append({'window_id': result.window_id, 'subrange': -1, **result.stats.to_dict()})
        for i, sub in enumerate(result.subranges):
            rows.append({'window_id': result.window_id, 'subrange': i, **sub.to_dict()})
    columns = ['window_id', 'subrange'] + NetworkStats.field_names()
    df = pd.DataFrame(rows)
    for col in columns:
        if col not in df.columns:
            df[col] = pd.Series(dtype='Int64')
    return df
