"""Versioned file formats: the binary tensor container and JSON records.

A tensor container is a directory holding ``manifest.json`` plus one raw file
per tensor with little-endian IEEE-754 doubles, real and imaginary parts
interleaved, in row-major order of the axes listed in the manifest.
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import msgspec
import numpy as np

from .errors import ConfigError


__all__ = [
    "FORMAT_VERSION",
    "TensorEntry",
    "Manifest",
    "write_container",
    "read_container",
    "write_json",
    "read_json",
    "check_version",
]

FORMAT_VERSION = "1.0"

_DTYPE = np.dtype("<c16")

T = TypeVar("T")


class TensorEntry(msgspec.Struct):
    file: str
    shape: List[int]
    axes: List[str]

class Manifest(msgspec.Struct):
    format_version: str
    kind: str
    tensors: Dict[str, TensorEntry]
    bonds: Dict[str, int] = {}
    metadata: Dict[str, Any] = {}
    created: str = ""


def check_version(version: str, what: str) -> None:
    """Rejects documents whose major version this build does not know."""
    major = str(version).split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise ConfigError(f"{what}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_container(directory, kind: str, tensors: Dict[str, np.ndarray],
                    axes: Dict[str, List[str]], bonds: Optional[Dict[str, int]] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, array in tensors.items():
        file_name = f"{name}.bin"
        np.ascontiguousarray(array, dtype=_DTYPE).tofile(path / file_name)
        entries[name] = TensorEntry(file=file_name, shape=list(array.shape), axes=list(axes[name]))
    manifest = Manifest(
        format_version=FORMAT_VERSION,
        kind=kind,
        tensors=entries,
        bonds=dict(bonds or {}),
        metadata=dict(metadata or {}),
        created=_now(),
    )
    (path / "manifest.json").write_bytes(msgspec.json.format(msgspec.json.encode(manifest)))
    return path


def read_container(directory, kind: str) -> tuple:
    """Returns ``(tensors, manifest)`` of a container of the given kind."""
    path = Path(directory)
    try:
        manifest = msgspec.json.decode((path / "manifest.json").read_bytes(), type=Manifest)
    except (OSError, msgspec.DecodeError) as e:
        raise ConfigError(f"Cannot read tensor container {path}: {e}")
    check_version(manifest.format_version, str(path))
    if manifest.kind != kind:
        raise ConfigError(f"{path} holds a {manifest.kind!r} container, expected {kind!r}")
    tensors = {}
    for name, entry in manifest.tensors.items():
        data = np.fromfile(path / entry.file, dtype=_DTYPE)
        expected = int(np.prod(entry.shape)) if entry.shape else 1
        if data.size != expected:
            raise ConfigError(f"{path / entry.file}: {data.size} entries, manifest expects {expected}")
        tensors[name] = data.astype(np.complex128).reshape(entry.shape)
    return tensors, manifest


def write_json(path, record: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(msgspec.json.format(msgspec.json.encode(record)))
    return path


def read_json(path, type: Type[T]) -> T:
    """Decodes a versioned JSON record, naming the offending field on failure."""
    try:
        record = msgspec.json.decode(Path(path).read_bytes(), type=type)
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}")
    except msgspec.ValidationError as e:
        raise ConfigError(f"{path}: {e}")
    except msgspec.DecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}")
    version = getattr(record, "format_version", None)
    if version is not None:
        check_version(version, str(path))
    return record
