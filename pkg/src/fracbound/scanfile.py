"""Binary scan files.

Layout (all integers little-endian)::

    b"FTBS"                 magic
    u8                      format version (1)
    u32                     manifest length in bytes
    manifest                UTF-8 JSON object
    bits                    ceil((2**n_max + 1) / 8) bytes, LSB-first, zero padded
    intensities (optional)  (2**n_max + 1) float64 values
    u64                     BLAKE2b-64 digest of every preceding byte

The manifest records the loss, the run configuration and the grid, so a
file fully describes the scan it holds.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .engine import DivergenceScan, GDConfig
from .errors import IntegrityError, VersionError
from .landscape import LossSpec

MAGIC = b"FTBS"
FORMAT_VERSION = 1
SCHEMA_VERSION = 1
_HEAD = struct.Struct("<4sBI")
_DIGEST_SIZE = 8


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_DIGEST_SIZE).digest()


def bit_payload_size(n_max: int) -> int:
    return (2**n_max + 1 + 7) // 8


def manifest_for(scan: DivergenceScan) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": scan.spec.to_dict(),
        "config": scan.config.to_dict(),
        "s_min": scan.s_min,
        "s_max": scan.s_max,
        "n_max": scan.n_max,
        "has_intensities": scan.intensities is not None,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "tool_version": __version__,
    }


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to a temporary sibling of ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_scan(scan: DivergenceScan) -> bytes:
    manifest = json.dumps(manifest_for(scan), sort_keys=True).encode("utf-8")
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, len(manifest)), manifest,
             np.packbits(scan.bits, bitorder="little").tobytes()]
    if scan.intensities is not None:
        parts.append(scan.intensities.astype("<f8").tobytes())
    body = b"".join(parts)
    return body + _digest(body)


def write_scan(scan: DivergenceScan, path) -> None:
    atomic_write_bytes(path, encode_scan(scan))


def decode_scan(data: bytes) -> tuple[DivergenceScan, dict]:
    """Parse a scan file's bytes; returns the scan and its manifest."""
    if len(data) < _HEAD.size + _DIGEST_SIZE:
        raise IntegrityError("file too short to be a scan file")
    magic, version, mlen = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise IntegrityError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported scan format version {version}")
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if _digest(body) != digest:
        raise IntegrityError("checksum mismatch (file truncated or corrupted)")

    offset = _HEAD.size
    try:
        manifest = json.loads(body[offset:offset + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"unreadable manifest: {exc}") from None
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise VersionError(f"unsupported manifest schema {manifest.get('schema_version')!r}")
    offset += mlen

    try:
        n_max = int(manifest["n_max"])
        has_intensities = bool(manifest["has_intensities"])
        spec = LossSpec.from_dict(manifest["spec"])
        config = GDConfig.from_dict(manifest["config"])
        s_min, s_max = float(manifest["s_min"]), float(manifest["s_max"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"malformed manifest: {exc}") from None
    n_points = 2**n_max + 1
    nbytes = bit_payload_size(n_max)
    expected = offset + nbytes + (8 * n_points if has_intensities else 0)
    if len(body) != expected:
        raise IntegrityError(f"payload size {len(body) - offset} does not match n_max={n_max}")
    packed = np.frombuffer(body, dtype=np.uint8, count=nbytes, offset=offset)
    unpacked = np.unpackbits(packed, bitorder="little")
    if unpacked[n_points:].any():
        raise IntegrityError("non-zero padding bits")
    offset += nbytes
    intensities = None
    if has_intensities:
        intensities = np.frombuffer(body, dtype="<f8", count=n_points, offset=offset).astype(np.float64)

    scan = DivergenceScan(
        spec=spec,
        config=config,
        s_min=s_min,
        s_max=s_max,
        n_max=n_max,
        bits=unpacked[:n_points].astype(np.bool_),
        intensities=intensities,
    )
    return scan, manifest


def read_scan(path) -> DivergenceScan:
    return decode_scan(Path(path).read_bytes())[0]


def read_manifest(path) -> dict:
    return decode_scan(Path(path).read_bytes())[1]
