"""
Módulo de almacenamiento de matrices
Serialización binaria (.htmx) y empaquetado de grupos de matrices en archivos tar.
"""

from __future__ import annotations

import io
import logging
import re
import struct
import tarfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .matrix import (
    COUNT_DTYPE,
    INDEX_DTYPE,
    MAX_LOG2_DIM,
    HypersparseError,
    TrafficMatrix,
)

logger = logging.getLogger(__name__)

MAGIC = b"HTMX"
VERSION = 1
HEADER = struct.Struct("<4sBBHQ")
TRIPLE_DTYPE = np.dtype([('row', '<u4'), ('col', '<u4'), ('count', '<u8')])

MEMBER_PATTERN = re.compile(r"^m(\d{5,})\.htmx$")


# ========== ERRORES ==========

class MatrixDecodeError(HypersparseError):
    """Error base al decodificar bytes .htmx."""


class MagicMismatchError(MatrixDecodeError):
    pass


class UnsupportedVersionError(MatrixDecodeError):
    pass


class InvalidHeaderError(MatrixDecodeError):
    pass


class TruncatedMatrixError(MatrixDecodeError):
    pass


class TrailingBytesError(MatrixDecodeError):
    pass


class IndexBoundsError(MatrixDecodeError):
    pass


class UnsortedEntriesError(MatrixDecodeError):
    pass


class DuplicateEntryError(MatrixDecodeError):
    pass


class ZeroCountError(MatrixDecodeError):
    pass


class ArchiveError(HypersparseError):
    """Error base de archivos tar de matrices."""

    def __init__(self, message: str, path: Optional[Path] = None, member: Optional[str] = None):
        super().__init__(message)
        self.path = path
        self.member = member


class ArchiveNotFoundError(ArchiveError):
    pass


class MalformedArchiveError(ArchiveError):
    pass


class MalformedMemberError(ArchiveError):
    pass


class ArchiveWriteError(ArchiveError):
    pass


class ArchiveCapacityError(ArchiveError):
    pass


# ========== NOMBRES ==========

def member_name(matrix_index: int) -> str:
    return f"m{matrix_index:05d}.htmx"


def archive_name(window_id: int, archive_index: int, range_id: Optional[int] = None) -> str:
    if range_id is None:
        return f"w{window_id:04d}_a{archive_index:04d}.tar"
    return f"w{window_id:04d}_a{archive_index:04d}_r{range_id:02d}.tar"


@dataclass
class ArchiveManifest:
    """Descripción de un archivo tar escrito."""

    window_id: int
    archive_index: int
    members: List[str] = field(default_factory=list)
    path: Optional[Path] = None
    range_id: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            'window_id': self.window_id,
            'archive_index': self.archive_index,
            'range_id': self.range_id,
            'path': str(self.path) if self.path is not None else None,
            'members': list(self.members),
        }


# ========== SERIALIZACIÓN ==========

def serialize_matrix(a: TrafficMatrix) -> bytes:
    """
    Serializa una matriz al formato .htmx.

    Cabecera: magic "HTMX", u8 versión, u8 log2_dim, u16 reservado, u64 nnz;
    luego nnz tripletas (u32 row, u32 col, u64 count), todo little-endian.
    """
    payload = np.empty(a.counts.size, dtype=TRIPLE_DTYPE)
    payload['row'] = a.rows
    payload['col'] = a.cols
    payload['count'] = a.counts
    return HEADER.pack(MAGIC, VERSION, a.log2_dim, 0, a.counts.size) + payload.tobytes()


def deserialize_matrix(data: bytes) -> TrafficMatrix:
    """
    Decodifica bytes .htmx validando cabecera, largo, orden y límites.

    Returns:
        TrafficMatrix canónica

    Raises:
        MatrixDecodeError: subclase específica según el defecto encontrado
    """
    if len(data) < HEADER.size:
        raise TruncatedMatrixError(f"Cabecera incompleta: {len(data)} bytes")
    magic, version, log2_dim, reserved, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MagicMismatchError(f"Magic inválido: {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"Versión no soportada: {version}")
    if not 1 <= log2_dim <= MAX_LOG2_DIM or reserved != 0:
        raise InvalidHeaderError(f"Cabecera inválida: log2_dim={log2_dim}, reservado={reserved}")

    expected = HEADER.size + count * TRIPLE_DTYPE.itemsize
    if len(data) < expected:
        raise TruncatedMatrixError(f"Se esperaban {expected} bytes, hay {len(data)}")
    if len(data) > expected:
        raise TrailingBytesError(f"{len(data) - expected} bytes sobrantes tras {count} tripletas")

    triples = np.frombuffer(data, dtype=TRIPLE_DTYPE, count=count, offset=HEADER.size)
    rows = triples['row'].astype(INDEX_DTYPE)
    cols = triples['col'].astype(INDEX_DTYPE)
    counts = triples['count'].astype(COUNT_DTYPE)

    limit = 1 << log2_dim
    if count and (int(rows.max()) >= limit or int(cols.max()) >= limit):
        raise IndexBoundsError(f"Índice fuera de 2^{log2_dim}")
    if count and int(counts.min()) == 0:
        raise ZeroCountError("Conteo cero explícito")
    if count > 1:
        keys = (rows.astype(np.uint64) << np.uint64(32)) | cols.astype(np.uint64)
        if np.any(keys[1:] == keys[:-1]):
            raise DuplicateEntryError("Clave (row, col) duplicada")
        if np.any(keys[1:] < keys[:-1]):
            raise UnsortedEntriesError("Tripletas fuera de orden (row, col)")
    return TrafficMatrix(log2_dim, rows, cols, counts)


# ========== ARCHIVOS TAR ==========

def _tarinfo(name: str, size: int) -> tarfile.TarInfo:
    info = tarfile.TarInfo(name)
    info.size = size
    info.mtime = 0
    info.mode = 0o644
    info.uid = info.gid = 0
    info.uname = info.gname = ""
    info.type = tarfile.REGTYPE
    return info


def write_archive(matrices: Sequence[TrafficMatrix], window_id: int, archive_index: int,
                  path, matrices_per_file: Optional[int] = None,
                  range_id: Optional[int] = None) -> ArchiveManifest:
    """
    Escribe un grupo de matrices en un tar ustar determinista.

    Args:
        matrices: Matrices en orden
        window_id: Ventana de tiempo
        archive_index: Índice del archivo dentro de la ventana
        path: Ruta del tar a crear
        matrices_per_file: NmatPerFile; por defecto len(matrices)
        range_id: Subrango al que pertenece (None para el archivo principal)

    Returns:
        ArchiveManifest con los nombres de miembros escritos
    """
    path = Path(path)
    per_file = matrices_per_file if matrices_per_file is not None else len(matrices)
    if len(matrices) > per_file:
        raise ArchiveCapacityError(
            f"{len(matrices)} matrices exceden NmatPerFile={per_file}", path=path
        )

    manifest = ArchiveManifest(window_id, archive_index, path=path, range_id=range_id)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tarfile.open(path, mode="w", format=tarfile.USTAR_FORMAT) as tar:
            for j, matrix in enumerate(matrices):
                name = member_name(archive_index * per_file + j)
                data = serialize_matrix(matrix)
                tar.addfile(_tarinfo(name, len(data)), io.BytesIO(data))
                manifest.members.append(name)
    except OSError as e:
        raise ArchiveWriteError(f"No se pudo escribir {path}: {e}", path=path) from e

    logger.debug(f"✓ {path.name}: {len(manifest.members)} matrices")
    return manifest


def iter_archive(path) -> Iterator[TrafficMatrix]:
    """
    Recorre un tar de matrices decodificando un miembro a la vez.

    Los nombres deben seguir el esquema m%05d.htmx en orden estrictamente creciente.
    """
    path = Path(path)
    if not path.exists():
        raise ArchiveNotFoundError(f"Archivo no encontrado: {path}", path=path)
    try:
        tar = tarfile.open(path, mode="r:")
    except tarfile.TarError as e:
        raise MalformedArchiveError(f"Tar inválido {path}: {e}", path=path) from e

    with tar:
        previous = -1
        try:
            for info in tar:
                if info.isdir():
                    continue
                match = MEMBER_PATTERN.match(info.name)
                if not info.isfile() or match is None:
                    raise MalformedMemberError(
                        f"Miembro inesperado {info.name!r} en {path}", path=path, member=info.name
                    )
                index = int(match.group(1))
                if index <= previous:
                    raise MalformedArchiveError(
                        f"Miembros fuera de orden en {path}: {info.name}", path=path, member=info.name
                    )
                previous = index
                try:
                    handle = tar.extractfile(info)
                    data = handle.read() if handle is not None else b""
                except tarfile.TarError as e:
                    raise MalformedMemberError(
                        f"Miembro {info.name} de {path} incompleto: {e}", path=path, member=info.name
                    ) from e
                try:
                    matrix = deserialize_matrix(data)
                except MatrixDecodeError as e:
                    raise MalformedMemberError(
                        f"Miembro {info.name} de {path} corrupto: {e}", path=path, member=info.name
                    ) from e
                yield matrix
        except tarfile.TarError as e:
            raise MalformedArchiveError(f"Tar inválido {path}: {e}", path=path) from e


def read_archive(path) -> List[TrafficMatrix]:
    """Lee todas las matrices de un tar, en orden de miembro."""
    return list(iter_archive(path))
