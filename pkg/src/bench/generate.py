"""
Módulo de generación de datos sintéticos y construcción de archivos
Sustituye la captura real: genera flujos de paquetes con popularidad Zipf y
una fracción configurable de paquetes inválidos, y luego construye los tar.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

import numpy as np

from pipeline.config import ChallengeConfig, load_config
from pipeline.process import WindowDescriptor
from pipeline.window import PACKET_DTYPE, build_window, read_packets, save_window, write_packets

logger = logging.getLogger(__name__)

GEN_CHUNK = 1 << 20
TRUTH_FILE = "truth.json"
MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "challenge.env"


def packet_file_name(window_id: int) -> str:
    return f"packets_w{window_id:04d}.bin"


class PacketGenerator:
    """
    Generador de paquetes sintéticos de una corrida.

    Fuentes y destinos se eligen de poblaciones fijas con rango de popularidad
    Zipf(cfg.zipf_exponent); cada paquete es inválido con probabilidad
    cfg.invalid_fraction. Cada ventana depende solo de (seed, window_id, cfg).
    """

    def __init__(self, seed: int, cfg: ChallengeConfig):
        self.seed = seed
        self.cfg = cfg

    def _population(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, 1 << self.cfg.log2_dim, size=size, dtype=np.uint64).astype(np.uint32)

    def window(self, window_id: int) -> Iterator[np.ndarray]:
        """Paquetes de una ventana, en lotes de hasta GEN_CHUNK."""
        cfg = self.cfg
        rng = np.random.default_rng([self.seed, window_id])
        sources = self._population(rng, cfg.n_sources)
        destinations = self._population(rng, cfg.n_destinations)
        remaining = cfg.np_packets
        while remaining > 0:
            n = min(GEN_CHUNK, remaining)
            batch = np.empty(n, dtype=PACKET_DTYPE)
            src_rank = (rng.zipf(cfg.zipf_exponent, n) - 1) % cfg.n_sources
            dst_rank = (rng.zipf(cfg.zipf_exponent, n) - 1) % cfg.n_destinations
            batch['src'] = sources[src_rank]
            batch['dst'] = destinations[dst_rank]
            batch['valid'] = (rng.random(n) >= cfg.invalid_fraction).astype(np.uint8)
            remaining -= n
            yield batch

    def write_window(self, window_id: int, out: Path) -> Dict:
        """Escribe el archivo de paquetes de una ventana y devuelve su registro de verdad."""
        valid = 0
        path = out / packet_file_name(window_id)

        def counted(batches):
            nonlocal valid
            for batch in batches:
                valid += int(np.count_nonzero(batch['valid']))
                yield batch

        total = write_packets(path, counted(self.window(window_id)))
        logger.info(f"✓ Ventana {window_id}: {total} paquetes, {valid} válidos")
        return {'window_id': window_id, 'file': path.name, 'packets': total, 'valid_packets': valid}

    def write(self, n_windows: int, out) -> Dict:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        logger.info("=" * 60)
        logger.info("GENERANDO PAQUETES SINTÉTICOS")
        logger.info("=" * 60)

        windows = [self.write_window(window_id, out) for window_id in range(n_windows)]
        truth = {'seed': self.seed, 'n_windows': n_windows, 'windows': windows}
        (out / TRUTH_FILE).write_text(json.dumps(truth, indent=2), encoding='utf-8')
        self.cfg.save(out / CONFIG_FILE)
        logger.info(f"✓ Registro de verdad en {out / TRUTH_FILE}")
        return truth


def generate_window(seed: int, window_id: int, cfg: ChallengeConfig) -> Iterator[np.ndarray]:
    """Genera los paquetes de una ventana en lotes."""
    return PacketGenerator(seed, cfg).window(window_id)


def cmd_generate(seed: int, n_windows: int, cfg: ChallengeConfig, out) -> Dict:
    """
    Escribe un archivo de paquetes por ventana y el registro de verdad.

    Args:
        seed: Semilla
        n_windows: Cantidad de ventanas
        cfg: Configuración (Np, generador)
        out: Directorio de salida

    Returns:
        El registro de verdad (también guardado como truth.json)
    """
    return PacketGenerator(seed, cfg).write(n_windows, out)


class ArchiveBuilder:
    """Construye y guarda los archivos tar de cada ventana en un directorio."""

    def __init__(self, cfg: ChallengeConfig, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def _packet_files(packets_dir: Path) -> List[Tuple[int, Path]]:
        truth_path = packets_dir / TRUTH_FILE
        if truth_path.exists():
            truth = json.loads(truth_path.read_text(encoding='utf-8'))
            return [(w['window_id'], packets_dir / w['file']) for w in truth['windows']]
        return [(i, p) for i, p in enumerate(sorted(packets_dir.glob("packets_w*.bin")))]

    def build_one(self, window_id: int, path: Path) -> Dict:
        """Anonimiza, construye y guarda una ventana; devuelve su entrada del manifiesto."""
        manifests = save_window(build_window(read_packets(path), self.cfg), self.cfg, window_id, self.out_dir)
        main = [m for m in manifests if m.range_id is None]
        masked = [m for m in manifests if m.range_id is not None]
        return {
            'window_id': window_id,
            'archives': [m.path.name for m in main],
            'subrange_archives': [{'range_id': m.range_id, 'archive': m.path.name} for m in masked],
            'matrices': sum(len(m.members) for m in main),
        }

    def build(self, packets_dir) -> Dict:
        logger.info("=" * 60)
        logger.info("CONSTRUYENDO MATRICES DE TRÁFICO")
        logger.info("=" * 60)

        windows = [self.build_one(window_id, path)
                   for window_id, path in self._packet_files(Path(packets_dir))]
        self.cfg.save(self.out_dir / CONFIG_FILE)
        manifest = {'config': CONFIG_FILE, 'windows': windows}
        (self.out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2), encoding='utf-8')
        total_archives = sum(len(w['archives']) for w in windows)
        logger.info(f"✓ {len(windows)} ventanas, {total_archives} archivos principales en {self.out_dir}")
        return manifest


def cmd_build(packets_dir, cfg: ChallengeConfig, out_dir) -> Dict:
    """
    Pasos 3 a 5 para cada archivo de paquetes: anonimizar, construir y guardar.

    Escribe manifest.json con los archivos de cada ventana y la configuración usada.
    """
    return ArchiveBuilder(cfg, out_dir).build(packets_dir)


def load_manifest(path) -> List[WindowDescriptor]:
    """Lee manifest.json y devuelve las ventanas con rutas absolutas."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    data = json.loads(path.read_text(encoding='utf-8'))
    base = path.parent
    return [
        WindowDescriptor(int(w['window_id']), tuple(str(base / a) for a in w['archives']))
        for w in sorted(data['windows'], key=lambda w: w['window_id'])
    ]


def manifest_config(path, **overrides) -> ChallengeConfig:
    """Configuración con la que se construyó el manifiesto, más ajustes."""
    path = Path(path)
    base = path if path.is_dir() else path.parent
    cfg_path = base / CONFIG_FILE
    return load_config(cfg_path if cfg_path.exists() else None, **overrides)
