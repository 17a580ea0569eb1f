"""
Disk cache for :class:`SpectralData`.

File layout (one file per key, ``<key>.ethspec``)::

    8 bytes   magic  b"ETHSPEC\\0"
    4 bytes   format version, uint32 little-endian
    8 bytes   header length N, uint64 little-endian
    N bytes   UTF-8 JSON header: key, meta, array table, payload sha256
    ...       raw little-endian arrays ("<f8" or "<c16"), in table order

Writes go to a temporary file in the cache directory followed by an atomic
rename, so concurrent readers never observe a partial entry.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
import warnings
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .spectral import SpectralData

log = logging.getLogger(__name__)

MAGIC = b"ETHSPEC\0"
FORMAT_VERSION = 1
SUFFIX = ".ethspec"
CACHE_ENV = "ETHSCALE_CACHE_DIR"


class CacheCorrupt(ValueError):
    pass


class CacheWarning(UserWarning):
    pass


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ethscale"


def spectrum_key(hamiltonian: dict, sector: str, observable: dict,
                 code_version: str = __version__) -> str:
    """Hex digest identifying one spectrum; any parameter change changes it."""
    blob = json.dumps({"hamiltonian": hamiltonian, "sector": sector, "observable": observable,
                       "code_version": code_version, "format": FORMAT_VERSION},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _dtype_tag(a: np.ndarray) -> str:
    return "<c16" if np.iscomplexobj(a) else "<f8"


def encode(key: str, data: SpectralData) -> bytes:
    arrays = {"eigenvalues": np.asarray(data.eigenvalues, dtype="<f8"),
              "o_eig": np.ascontiguousarray(data.o_eig, dtype=_dtype_tag(data.o_eig))}
    table, chunks, offset = [], [], 0
    h = hashlib.sha256()
    for name, a in arrays.items():
        raw = a.tobytes(order="C")
        table.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                      "offset": offset, "nbytes": len(raw)})
        h.update(raw)
        chunks.append(raw)
        offset += len(raw)
    header = {"key": key, "energy_offset": data.energy_offset, "meta": data.meta,
              "arrays": table, "payload_sha256": h.hexdigest()}
    hbytes = json.dumps(header, sort_keys=True).encode()
    return b"".join([MAGIC, struct.pack("<IQ", FORMAT_VERSION, len(hbytes)), hbytes, *chunks])


def read_header(path: Path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise CacheCorrupt("bad magic")
    raw = fh.read(12)
    if len(raw) != 12:
        raise CacheCorrupt("truncated preamble")
    version, hlen = struct.unpack("<IQ", raw)
    if version != FORMAT_VERSION:
        raise CacheCorrupt(f"unsupported format version {version}")
    hbytes = fh.read(hlen)
    if len(hbytes) != hlen:
        raise CacheCorrupt("truncated header")
    try:
        return json.loads(hbytes)
    except json.JSONDecodeError as exc:
        raise CacheCorrupt(f"unreadable header: {exc}") from exc


def load(path: Path, key: str | None = None) -> SpectralData:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        payload = fh.read()
    if key is not None and header.get("key") != key:
        raise CacheCorrupt("key mismatch")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CacheCorrupt("payload checksum mismatch")
    arrays = {}
    for entry in header["arrays"]:
        chunk = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if len(chunk) != entry["nbytes"]:
            raise CacheCorrupt(f"truncated array {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
    return SpectralData(arrays["eigenvalues"], arrays["o_eig"], header["energy_offset"], header["meta"])


class SpectrumCache:
    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()

    def path(self, key: str) -> Path:
        return self.directory / f"{key}{SUFFIX}"

    def get(self, key: str) -> SpectralData | None:
        path = self.path(key)
        if not path.exists():
            return None
        return load(path, key)

    def put(self, key: str, data: SpectralData) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        blob = encode(key, data)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=f".{key[:16]}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp, self.path(key))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return self.path(key)

    def entries(self) -> list[Path]:
        if not self.directory.exists():
            return []
        return sorted(self.directory.glob(f"*{SUFFIX}"))

    def remove(self, prefix: str = "") -> int:
        n = 0
        for path in self.entries():
            if path.name.startswith(prefix):
                path.unlink()
                n += 1
        return n

    def get_or_compute(self, key: str, compute: Callable[[], SpectralData]) -> tuple[SpectralData, bool]:
        """Return ``(data, hit)``. Corrupt or unreadable entries are recomputed and rewritten."""
        try:
            cached = self.get(key)
        except (CacheCorrupt, OSError, KeyError, ValueError) as exc:
            warnings.warn(f"discarding cache entry {key[:12]}: {exc}", CacheWarning, stacklevel=2)
            cached = None
        if cached is not None:
            return cached, True
        data = compute()
        try:
            self.put(key, data)
        except OSError as exc:
            warnings.warn(f"could not write cache entry {key[:12]}: {exc}", CacheWarning, stacklevel=2)
        return data, False


def cache_get_or_compute(key: str, compute: Callable[[], SpectralData],
                         directory: str | os.PathLike | None = None) -> SpectralData:
    return SpectrumCache(directory).get_or_compute(key, compute)[0]
