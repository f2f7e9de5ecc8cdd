"""
Módulo de configuración del reto
Constantes de ventana (Np, Nv, NmatPerFile), espacio de direcciones, llave de
anonimización y subrangos. Se lee de archivos clave=valor con python-dotenv.
"""

from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from dotenv import dotenv_values, find_dotenv, load_dotenv

from hypersparse.matrix import MAX_LOG2_DIM, AddressSet

logger = logging.getLogger(__name__)

DEFAULT_ANON_KEY = bytes.fromhex("5a17c0de2b3e4f60718293a4b5c6d7e8")

ENV_KEYS = {
    'NP_PACKETS': 'np_packets',
    'NV': 'nv',
    'NMAT_PER_FILE': 'nmat_per_file',
    'LOG2_DIM': 'log2_dim',
    'ANON_KEY': 'anon_key',
    'ANONYMIZE': 'anonymize',
    'SUBRANGES': 'subranges',
    'ZIPF_EXPONENT': 'zipf_exponent',
    'INVALID_FRACTION': 'invalid_fraction',
    'N_SOURCES': 'n_sources',
    'N_DESTINATIONS': 'n_destinations',
}


class ConfigError(Exception):
    """Configuración inválida."""


@dataclass(frozen=True)
class Subrange:
    """Bloque src x dst de la matriz para análisis por subrango."""

    src: AddressSet
    dst: AddressSet

    def __str__(self) -> str:
        return f"{self.src}:{self.dst}"


@dataclass(frozen=True)
class ChallengeConfig:
    """
    Parámetros del reto.

    np_packets: paquetes por ventana (Np)
    nv: paquetes por matriz (Nv)
    nmat_per_file: matrices por archivo tar (NmatPerFile)
    """

    np_packets: int = 1 << 30
    nv: int = 1 << 17
    nmat_per_file: int = 1 << 6
    log2_dim: int = MAX_LOG2_DIM
    anon_key: bytes = DEFAULT_ANON_KEY
    subranges: Tuple[Subrange, ...] = field(default_factory=tuple)
    anonymize: bool = True
    zipf_exponent: float = 1.2
    invalid_fraction: float = 0.0
    n_sources: int = 1 << 16
    n_destinations: int = 1 << 16

    def __post_init__(self):
        object.__setattr__(self, 'subranges', tuple(self.subranges))
        self.validate()

    # ---------- presets ----------

    @classmethod
    def challenge(cls, **overrides) -> "ChallengeConfig":
        """Valores del reto: 2^30 paquetes, 2^17 por matriz, 2^6 matrices por archivo."""
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "ChallengeConfig":
        """Escala de escritorio: la forma del reto dividida por 2^10."""
        values = dict(np_packets=1 << 20, nv=1 << 12, nmat_per_file=1 << 4)
        values.update(overrides)
        return cls(**values)

    # ---------- derivados ----------

    @property
    def packets_per_archive(self) -> int:
        return self.nv * self.nmat_per_file

    @property
    def matrices_per_window(self) -> int:
        return math.ceil(self.np_packets / self.nv)

    @property
    def archives_per_window(self) -> int:
        return math.ceil(self.np_packets / self.packets_per_archive)

    def with_overrides(self, **overrides) -> "ChallengeConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean) if clean else self

    def validate(self) -> None:
        for name in ('np_packets', 'nv', 'nmat_per_file', 'n_sources', 'n_destinations'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} debe ser positivo: {getattr(self, name)}")
        if not 1 <= self.log2_dim <= MAX_LOG2_DIM:
            raise ConfigError(f"log2_dim fuera de [1, 32]: {self.log2_dim}")
        if len(self.anon_key) != 16:
            raise ConfigError(f"La llave de anonimización debe tener 16 bytes, tiene {len(self.anon_key)}")
        if not 0.0 <= self.invalid_fraction <= 1.0:
            raise ConfigError(f"invalid_fraction fuera de [0, 1]: {self.invalid_fraction}")
        if self.zipf_exponent <= 1.0:
            raise ConfigError(f"El exponente Zipf debe ser > 1: {self.zipf_exponent}")
        limit = 1 << self.log2_dim
        for sub in self.subranges:
            if sub.src.max_index() >= limit or sub.dst.max_index() >= limit:
                raise ConfigError(f"Subrango {sub} fuera del espacio 2^{self.log2_dim}")
        if self.np_packets % self.packets_per_archive:
            logger.warning(
                f"Nv·NmatPerFile={self.packets_per_archive} no divide Np={self.np_packets}; "
                f"el último archivo de cada ventana quedará incompleto"
            )

    # ---------- archivos clave=valor ----------

    def to_env_text(self) -> str:
        lines = [
            f"NP_PACKETS={self.np_packets}",
            f"NV={self.nv}",
            f"NMAT_PER_FILE={self.nmat_per_file}",
            f"LOG2_DIM={self.log2_dim}",
            f"ANON_KEY={self.anon_key.hex()}",
            f"ANONYMIZE={'true' if self.anonymize else 'false'}",
            f"SUBRANGES={format_subranges(self.subranges)}",
            f"ZIPF_EXPONENT={self.zipf_exponent!r}",
            f"INVALID_FRACTION={self.invalid_fraction!r}",
            f"N_SOURCES={self.n_sources}",
            f"N_DESTINATIONS={self.n_destinations}",
        ]
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_env_text(), encoding='utf-8')
        return path


# ========== PARSEO ==========

def parse_int(text: str) -> int:
    """Acepta enteros, 2^n y 2**n."""
    value = str(text).strip().replace('_', '')
    match = re.fullmatch(r"(\d+)\s*(?:\^|\*\*)\s*(\d+)", value)
    if match:
        return int(match.group(1)) ** int(match.group(2))
    try:
        return int(value, 0)
    except ValueError:
        raise ConfigError(f"Entero inválido: {text!r}")


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ('1', 'true', 'yes', 'si', 'sí', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"Booleano inválido: {text!r}")


def _parse_address_set(text: str, log2_dim: int) -> AddressSet:
    text = text.strip()
    if text == '*':
        return AddressSet.full(log2_dim)
    if ',' in text:
        return AddressSet.of(parse_int(v) for v in text.split(','))
    if '-' in text:
        lo, hi = text.split('-', 1)
        return AddressSet.range(parse_int(lo), parse_int(hi))
    value = parse_int(text)
    return AddressSet.range(value, value)


def parse_subranges(text: Optional[str], log2_dim: int = MAX_LOG2_DIM) -> Tuple[Subrange, ...]:
    """
    Interpreta 'src_lo-src_hi:dst_lo-dst_hi;...'.

    Cada lado puede ser un rango a-b, un número, una lista a,b,c o '*' (todo el espacio).
    """
    if not text or not text.strip():
        return ()
    subranges = []
    for chunk in text.split(';'):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ':' not in chunk:
            raise ConfigError(f"Subrango sin ':' -> {chunk!r}")
        src, dst = chunk.split(':', 1)
        try:
            subranges.append(Subrange(_parse_address_set(src, log2_dim), _parse_address_set(dst, log2_dim)))
        except ValueError as e:
            raise ConfigError(f"Subrango inválido {chunk!r}: {e}")
    return tuple(subranges)


def format_subranges(subranges) -> str:
    return ";".join(str(s) for s in subranges)


def _convert(values: Dict[str, str]) -> dict:
    out: dict = {}
    for key, raw in values.items():
        if raw is None:
            continue
        name = ENV_KEYS.get(key.upper())
        if name is None:
            logger.warning(f"Clave de configuración desconocida ignorada: {key}")
            continue
        if name in ('zipf_exponent', 'invalid_fraction'):
            out[name] = float(raw)
        elif name == 'anon_key':
            try:
                out[name] = bytes.fromhex(raw.strip())
            except ValueError:
                raise ConfigError(f"ANON_KEY debe ser hexadecimal: {raw!r}")
        elif name == 'anonymize':
            out[name] = parse_bool(raw)
        elif name == 'subranges':
            out[name] = raw
        else:
            out[name] = parse_int(raw)
    return out


def load_config(path=None, base: Optional[ChallengeConfig] = None, **overrides) -> ChallengeConfig:
    """
    Carga la configuración desde un archivo clave=valor.

    Args:
        path: Archivo de configuración (opcional)
        base: Configuración de partida; por defecto los valores de escritorio
        overrides: Valores que tienen prioridad (p.ej. banderas de la CLI)

    Returns:
        ChallengeConfig validada
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Archivo de configuración no encontrado: {path}")
        values = _convert(dotenv_values(path))
        logger.info(f"✓ Configuración cargada desde {path}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    base = base if base is not None else ChallengeConfig.desk()
    # los subrangos en texto se expanden con el log2_dim final
    if isinstance(values.get('subranges'), str):
        values['subranges'] = parse_subranges(values['subranges'], values.get('log2_dim', base.log2_dim))
    try:
        return replace(base, **values)
    except TypeError as e:
        raise ConfigError(str(e))


def worker_identity(pid: Optional[int], n_procs: Optional[int]) -> Tuple[int, int]:
    """
    Resuelve (pid, np) desde banderas o variables HT_PID / HT_NP.

    Las variables pueden venir de un archivo .env en el directorio actual.
    """
    load_dotenv(find_dotenv(usecwd=True))
    if pid is None:
        pid = os.environ.get('HT_PID')
    if n_procs is None:
        n_procs = os.environ.get('HT_NP', '1')
    if pid is None:
        pid = 0
    pid, n_procs = int(pid), int(n_procs)
    if n_procs < 1 or not 0 <= pid < n_procs:
        raise ConfigError(f"Identidad de proceso inválida: pid={pid}, np={n_procs}")
    return pid, n_procs
