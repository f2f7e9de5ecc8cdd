"""
Script principal del reto de tráfico anonimizado
Orquesta generación, construcción, suma/análisis en paralelo, combinación y reportes.

Uso:
    python src/challenge.py generate --seed 1 --windows 8 --out data/packets
    python src/challenge.py build --packets data/packets --out data/archives
    python src/challenge.py run --manifest data/archives --pid 0 --np 2 --out data/run
    python src/challenge.py launch --manifest data/archives --np 4 --threads 2 --out data/run
    python src/challenge.py merge --stats data/run --out data/run/stats_merged.jsonl
    python src/challenge.py report data/sweep/*/bench.csv --out data/report
    python src/challenge.py sweep --manifest data/archives --out data/sweep
"""

import argparse
import logging
import sys
from pathlib import Path

# Agregar src al path
sys.path.insert(0, str(Path(__file__).parent))

from bench.generate import cmd_build, cmd_generate, manifest_config
from bench.report import cmd_report
from bench.runner import DEFAULT_PROC_SWEEP, DEFAULT_THREAD_SWEEP, cmd_launch, cmd_merge, cmd_run, cmd_sweep
from pipeline.config import load_config, parse_int, worker_identity

logger = logging.getLogger("challenge")


def _config_overrides(args) -> dict:
    return dict(
        np_packets=parse_int(args.np_packets) if args.np_packets else None,
        nv=parse_int(args.nv) if args.nv else None,
        nmat_per_file=parse_int(args.nmat_per_file) if args.nmat_per_file else None,
        log2_dim=args.log2_dim,
        anon_key=bytes.fromhex(args.anon_key) if args.anon_key else None,
        anonymize=False if args.no_anonymize else None,
        subranges=args.subranges,
        zipf_exponent=args.zipf,
        invalid_fraction=args.invalid_fraction,
    )


def _config(args, manifest=None):
    overrides = _config_overrides(args)
    if args.config is None and manifest is not None:
        return manifest_config(manifest, **overrides)
    return load_config(args.config, **overrides)


def run_generate(args) -> bool:
    cfg = _config(args)
    cmd_generate(args.seed, args.windows, cfg, args.out)
    return True


def run_build(args) -> bool:
    cfg = _config(args)
    cmd_build(args.packets, cfg, args.out)
    return True


def run_run(args) -> bool:
    pid, n_procs = worker_identity(args.pid, args.np)
    cfg = _config(args, args.manifest)
    return cmd_run(args.manifest, cfg, pid, n_procs, args.dist, args.threads, args.out)


def run_launch(args) -> bool:
    cfg = _config(args, args.manifest)
    return cmd_launch(args.manifest, cfg, args.np, args.threads, args.dist, args.out)


def run_merge(args) -> bool:
    cmd_merge(args.stats, args.out)
    return True


def run_report(args) -> bool:
    cmd_report(args.csvs, args.out)
    return True


def run_sweep(args) -> bool:
    cfg = _config(args, args.manifest)
    csvs = cmd_sweep(args.manifest, cfg, args.out, args.dist,
                     args.thread_counts, args.proc_counts, args.fixed_threads)
    cmd_report(csvs, Path(args.out) / "report")
    return True


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuración (sobrescriben el archivo)")
    group.add_argument("--config", type=Path, help="archivo clave=valor")
    group.add_argument("--np-packets", help="paquetes por ventana (admite 2^n)")
    group.add_argument("--nv", help="paquetes por matriz")
    group.add_argument("--nmat-per-file", help="matrices por archivo tar")
    group.add_argument("--log2-dim", type=int, help="ancho del espacio de direcciones")
    group.add_argument("--anon-key", help="llave de 128 bits en hexadecimal")
    group.add_argument("--no-anonymize", action="store_true", help="no anonimizar direcciones")
    group.add_argument("--subranges", help="'src_lo-src_hi:dst_lo-dst_hi;...'")
    group.add_argument("--zipf", type=float, help="exponente Zipf del generador")
    group.add_argument("--invalid-fraction", type=float, help="fracción de paquetes inválidos")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Reto de tráfico anonimizado: construir, sumar y analizar")
    parser.add_argument("-v", "--verbose", action="store_true", help="logs en nivel DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generar paquetes sintéticos y registro de verdad")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--windows", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(handler=run_generate)

    p = sub.add_parser("build", help="anonimizar, construir matrices y guardar tar")
    p.add_argument("--packets", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(handler=run_build)

    p = sub.add_parser("run", help="leer, sumar y analizar las ventanas de un pid")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--pid", type=int, help="por defecto $HT_PID")
    p.add_argument("--np", type=int, help="por defecto $HT_NP")
    p.add_argument("--dist", default="block", help="block | cyclic | blockcyclic(b)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    _add_config_flags(p)
    p.set_defaults(handler=run_run)

    p = sub.add_parser("launch", help="lanzar varios procesos locales y combinar")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--np", type=int, default=1)
    p.add_argument("--dist", default="block")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(handler=run_launch)

    p = sub.add_parser("merge", help="combinar resultados por pid")
    p.add_argument("--stats", type=Path, required=True, help="directorio con stats_p*.jsonl")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=run_merge)

    p = sub.add_parser("report", help="tabla y gráfico de escalamiento")
    p.add_argument("csvs", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=run_report)

    p = sub.add_parser("sweep", help="barrido de hilos y procesos + reporte")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dist", default="block")
    p.add_argument("--thread-counts", type=int, nargs="+", default=list(DEFAULT_THREAD_SWEEP))
    p.add_argument("--proc-counts", type=int, nargs="+", default=list(DEFAULT_PROC_SWEEP))
    p.add_argument("--fixed-threads", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(handler=run_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        success = args.handler(args)
    except Exception as e:
        logger.error(f"Error en '{args.command}': {str(e)}", exc_info=True)
        success = False
    return 0 if success else 1


if __name__ == "__main__":
    sys.exit(main())
