"""
Módulo de ventanas de tiempo
Pasos 3 a 5 del reto: anonimizar direcciones, construir matrices de tráfico cada
Nv paquetes y guardarlas en archivos tar de NmatPerFile matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

from hypersparse.matrix import TrafficMatrix, diag_mask, matrix_from_arrays
from hypersparse.store import ArchiveManifest, archive_name, write_archive

from .anonymize import AddressAnonymizer
from .config import ChallengeConfig

logger = logging.getLogger(__name__)

PACKET_DTYPE = np.dtype([('src', '<u4'), ('dst', '<u4'), ('valid', 'u1')])
READ_CHUNK = 1 << 20


@dataclass(frozen=True)
class PacketRecord:
    """Un paquete: dirección fuente, dirección destino y validez."""

    src: int
    dst: int
    valid: bool = True


def records_to_batch(records: Iterable[PacketRecord]) -> np.ndarray:
    """Convierte registros sueltos al arreglo estructurado PACKET_DTYPE."""
    records = list(records)
    batch = np.empty(len(records), dtype=PACKET_DTYPE)
    batch['src'] = [r.src for r in records]
    batch['dst'] = [r.dst for r in records]
    batch['valid'] = [1 if r.valid else 0 for r in records]
    return batch


def batch_to_records(batch: np.ndarray) -> List[PacketRecord]:
    return [PacketRecord(int(s), int(d), bool(v)) for s, d, v in zip(batch['src'], batch['dst'], batch['valid'])]


# ========== ARCHIVOS DE PAQUETES ==========

def write_packets(path, batches: Iterable[np.ndarray]) -> int:
    """Escribe registros (u32 src, u32 dst, u8 valid) little-endian; devuelve la cantidad."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    total = 0
    with open(path, 'wb') as f:
        for batch in batches:
            f.write(np.ascontiguousarray(batch, dtype=PACKET_DTYPE).tobytes())
            total += len(batch)
    return total


def read_packets(path, chunk: int = READ_CHUNK) -> Iterator[np.ndarray]:
    """Lee un archivo de paquetes en lotes de a lo sumo chunk registros."""
    path = Path(path)
    size = path.stat().st_size
    if size % PACKET_DTYPE.itemsize:
        raise ValueError(f"{path} no contiene un número entero de registros de {PACKET_DTYPE.itemsize} bytes")
    with open(path, 'rb') as f:
        while True:
            data = f.read(chunk * PACKET_DTYPE.itemsize)
            if not data:
                break
            yield np.frombuffer(data, dtype=PACKET_DTYPE)


# ========== CONSTRUCCIÓN ==========

def _as_batches(packets) -> Iterator[np.ndarray]:
    if isinstance(packets, np.ndarray):
        yield packets
        return
    pending: List[PacketRecord] = []
    for item in packets:
        if isinstance(item, PacketRecord):
            pending.append(item)
            if len(pending) >= READ_CHUNK:
                yield records_to_batch(pending)
                pending = []
        else:
            if pending:
                yield records_to_batch(pending)
                pending = []
            yield np.asarray(item, dtype=PACKET_DTYPE)
    if pending:
        yield records_to_batch(pending)


def _chunk_matrix(chunk: np.ndarray, cfg: ChallengeConfig,
                  anonymizer: Optional[AddressAnonymizer]) -> TrafficMatrix:
    valid = chunk[chunk['valid'] != 0]
    src = valid['src']
    dst = valid['dst']
    if anonymizer is not None:
        src = anonymizer.anonymize_array(src)
        dst = anonymizer.anonymize_array(dst)
    return matrix_from_arrays(src, dst, cfg.log2_dim)


def make_anonymizer(cfg: ChallengeConfig) -> Optional[AddressAnonymizer]:
    if not cfg.anonymize:
        return None
    return AddressAnonymizer(cfg.anon_key, cfg.log2_dim)


def build_window(packets: Union[np.ndarray, Iterable], cfg: ChallengeConfig) -> Iterator[TrafficMatrix]:
    """
    Construye las matrices de una ventana.

    Los cortes cada Nv paquetes cuentan todos los paquetes (válidos o no); los
    inválidos se descartan y los válidos se anonimizan (src y dst con la misma
    permutación). Se consumen a lo sumo Np paquetes.

    Args:
        packets: Arreglo PACKET_DTYPE, lotes de arreglos o PacketRecord sueltos
        cfg: Configuración del reto

    Yields:
        Una TrafficMatrix por cada bloque de Nv paquetes (la última puede ser corta)
    """
    anonymizer = make_anonymizer(cfg)
    buffer = np.empty(0, dtype=PACKET_DTYPE)
    consumed = 0
    for batch in _as_batches(packets):
        remaining = cfg.np_packets - consumed
        if remaining <= 0:
            logger.warning(f"Paquetes sobrantes ignorados: la ventana ya tiene Np={cfg.np_packets}")
            break
        batch = batch[:remaining]
        consumed += len(batch)
        buffer = np.concatenate([buffer, batch]) if buffer.size else batch
        n_full = len(buffer) // cfg.nv
        for i in range(n_full):
            yield _chunk_matrix(buffer[i * cfg.nv:(i + 1) * cfg.nv], cfg, anonymizer)
        buffer = buffer[n_full * cfg.nv:]
    if buffer.size:
        yield _chunk_matrix(buffer, cfg, anonymizer)


# ========== GUARDADO ==========

def _groups(matrices: Iterable[TrafficMatrix], size: int) -> Iterator[List[TrafficMatrix]]:
    group: List[TrafficMatrix] = []
    for m in matrices:
        group.append(m)
        if len(group) == size:
            yield group
            group = []
    if group:
        yield group


def save_window(matrices: Union[Sequence[TrafficMatrix], Iterable[TrafficMatrix]],
                cfg: ChallengeConfig, window_id: int, out_dir) -> List[ArchiveManifest]:
    """
    Guarda las matrices de una ventana en archivos tar.

    Cada grupo de NmatPerFile matrices va a w%04d_a%04d.tar. Con subrangos, cada
    grupo enmascarado con diag_mask va además a w%04d_a%04d_r%02d.tar; las matrices
    enmascaradas se descartan apenas se escribe su archivo.

    Args:
        matrices: Matrices en orden (lista o generador)
        cfg: Configuración del reto
        window_id: Identificador de la ventana
        out_dir: Directorio de salida

    Returns:
        Manifiestos de los archivos escritos: primero los principales en orden,
        luego los de subrango (por archivo y por subrango)
    """
    out_dir = Path(out_dir)
    main: List[ArchiveManifest] = []
    masked: List[ArchiveManifest] = []
    for archive_index, group in enumerate(_groups(matrices, cfg.nmat_per_file)):
        path = out_dir / archive_name(window_id, archive_index)
        main.append(write_archive(group, window_id, archive_index, path, cfg.nmat_per_file))
        for range_id, sub in enumerate(cfg.subranges):
            sub_group = [diag_mask(m, sub.src, sub.dst) for m in group]
            sub_path = out_dir / archive_name(window_id, archive_index, range_id)
            masked.append(write_archive(sub_group, window_id, archive_index, sub_path,
                                        cfg.nmat_per_file, range_id=range_id))
    if len(main) != cfg.archives_per_window:
        logger.warning(
            f"Ventana {window_id}: {len(main)} archivos escritos, se esperaban {cfg.archives_per_window}"
        )
    logger.info(f"✓ Ventana {window_id}: {len(main)} archivos principales, {len(masked)} de subrango")
    return main + masked
