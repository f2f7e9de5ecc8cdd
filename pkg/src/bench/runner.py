"""
Módulo de ejecución paralela
Un proceso por pid: cada uno calcula con el mapa qué ventanas le tocan y escribe
sus propios archivos de resultados y tiempos. El lanzador solo espera y combina.
"""

from __future__ import annotations

import logging
import os
import subprocess
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import pandas as pd

from dmap.maps import distribution_label, parse_distribution
from pipeline.config import ChallengeConfig
from pipeline.process import BenchRecord, file_map, merge_stats_files, process_filelist

from .generate import load_manifest

logger = logging.getLogger(__name__)

BENCH_COLUMNS = [f.name for f in fields(BenchRecord)]
ENTRY_SCRIPT = Path(__file__).resolve().parent.parent / "challenge.py"

DEFAULT_THREAD_SWEEP = (1, 2, 4, 8, 16)
DEFAULT_PROC_SWEEP = (1, 2, 4, 8)


def stats_file_name(pid: int) -> str:
    return f"stats_p{pid:03d}.jsonl"


def bench_file_name(pid: int) -> str:
    return f"bench_p{pid:03d}.csv"


def write_bench_csv(path, records: Iterable[BenchRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame([asdict(r) for r in records], columns=BENCH_COLUMNS)
    df.to_csv(path, index=False, encoding='utf-8')
    return path


def cmd_run(manifest, cfg: ChallengeConfig, pid: int, n_procs: int, dist: str = "block",
            n_threads: int = 1, out=".") -> bool:
    """
    Ejecuta process_filelist para un pid.

    Equivale a Filemap = Dmap([Np,1], dist, range(Np)) sobre la lista de ventanas.

    Returns:
        True si todas las ventanas propias terminaron sin error
    """
    out = Path(out)
    filelist = load_manifest(manifest)
    dmap = file_map(n_procs, parse_distribution(dist))
    bench: List[BenchRecord] = []
    results = process_filelist(filelist, dmap, pid, cfg, out / stats_file_name(pid), n_threads, bench)
    write_bench_csv(out / bench_file_name(pid), bench)
    failed = [r.window_id for r in results if not r.ok]
    if failed:
        logger.error(f"✗ Proceso {pid}: ventanas con error {failed}")
        return False
    logger.info(f"✓ Proceso {pid}: {len(results)} ventanas procesadas")
    return True


def cmd_merge(stats_dir, out_path) -> Path:
    """Combina los stats_p*.jsonl de un directorio en un único archivo ordenado."""
    stats_dir = Path(stats_dir)
    paths = sorted(stats_dir.glob("stats_p*.jsonl"))
    results = merge_stats_files(paths, out_path)
    logger.info(f"✓ {len(results)} ventanas combinadas desde {len(paths)} archivos en {out_path}")
    return Path(out_path)


def concat_bench_csvs(paths: Sequence, out_path) -> Path:
    frames = [pd.read_csv(p) for p in paths]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=BENCH_COLUMNS)
    df = df[BENCH_COLUMNS].sort_values(['window_id', 'phase', 'pid'], kind='stable')
    out_path = Path(out_path)
    df.to_csv(out_path, index=False, encoding='utf-8')
    return out_path


def worker_command(manifest, config_path: Optional[Path], pid: int, n_procs: int, dist: str,
                   n_threads: int, out) -> List[str]:
    command = [sys.executable, str(ENTRY_SCRIPT), "run", "--manifest", str(manifest),
               "--pid", str(pid), "--np", str(n_procs), "--dist", dist,
               "--threads", str(n_threads), "--out", str(out)]
    if config_path is not None:
        command += ["--config", str(config_path)]
    return command


def cmd_launch(manifest, cfg: ChallengeConfig, n_procs: int, n_threads: int = 1,
               dist: str = "block", out=".") -> bool:
    """
    Lanza n_procs procesos locales, cada uno con cmd_run para su pid.

    Espera a todos, combina los resultados ordenados por window_id en
    stats_merged.jsonl y concatena los tiempos en bench.csv.

    Returns:
        True si ningún proceso terminó con error
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    config_path = cfg.save(out / "launch.env")
    label = distribution_label(parse_distribution(dist))
    logger.info("=" * 60)
    logger.info(f"LANZANDO {n_procs} PROCESOS x {n_threads} HILOS ({label})")
    logger.info("=" * 60)

    env = dict(os.environ)
    workers = []
    for pid in range(n_procs):
        env_pid = dict(env, HT_PID=str(pid), HT_NP=str(n_procs))
        command = worker_command(manifest, config_path, pid, n_procs, dist, n_threads, out)
        workers.append((pid, subprocess.Popen(command, env=env_pid)))

    failed = []
    for pid, proc in workers:
        code = proc.wait()
        if code != 0:
            failed.append(pid)
            logger.error(f"✗ Proceso {pid} terminó con código {code}")

    stats_paths = [out / stats_file_name(pid) for pid in range(n_procs)]
    existing = [p for p in stats_paths if p.exists()]
    merge_stats_files(existing, out / "stats_merged.jsonl")
    bench_paths = [out / bench_file_name(pid) for pid in range(n_procs)]
    concat_bench_csvs([p for p in bench_paths if p.exists()], out / "bench.csv")

    if failed:
        logger.error(f"✗ Procesos con error: {failed}")
        return False
    logger.info(f"✓ Resultados combinados en {out / 'stats_merged.jsonl'}")
    return True


def cmd_sweep(manifest, cfg: ChallengeConfig, out, dist: str = "block",
              thread_counts: Sequence[int] = DEFAULT_THREAD_SWEEP,
              proc_counts: Sequence[int] = DEFAULT_PROC_SWEEP,
              fixed_threads: int = 1) -> List[Path]:
    """
    Barrido de escalamiento: primero hilos con un proceso, luego procesos con
    hilos fijos. Devuelve los bench.csv generados.
    """
    out = Path(out)
    runs = [(1, t) for t in thread_counts] + [(p, fixed_threads) for p in proc_counts]
    seen = set()
    csvs = []
    for n_procs, n_threads in runs:
        if (n_procs, n_threads) in seen:
            continue
        seen.add((n_procs, n_threads))
        run_dir = out / f"np{n_procs:02d}_nt{n_threads:02d}"
        if not cmd_launch(manifest, cfg, n_procs, n_threads, dist, run_dir):
            raise RuntimeError(f"El barrido falló en np={n_procs}, nt={n_threads}")
        csvs.append(run_dir / "bench.csv")
    return csvs
