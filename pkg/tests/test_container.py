import json

import msgspec
import numpy as np
import pytest
from numpy.testing import assert_allclose

from bangbang_ipeps.container import (
    FORMAT_VERSION,
    check_version,
    read_container,
    read_json,
    write_container,
    write_json,
)
from bangbang_ipeps.errors import ConfigError


class Record(msgspec.Struct):
    value: float
    format_version: str = FORMAT_VERSION


@pytest.fixture
def container(tmp_path, rng):
    t = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    path = write_container(tmp_path / "c", "ipeps", {"T": t}, {"T": ["a", "b"]},
                           bonds={"x": 3}, metadata={"seed": 1})
    return path, t


def test_tensor_files_are_interleaved_doubles(container):
    path, t = container
    raw = np.fromfile(path / "T.bin", dtype="<f8")
    assert raw.size == 2 * t.size
    assert_allclose(raw[0::2], t.real.reshape(-1))
    assert_allclose(raw[1::2], t.imag.reshape(-1))


def test_read_container(container):
    path, t = container
    tensors, manifest = read_container(path, "ipeps")
    assert_allclose(tensors["T"], t)
    assert manifest.bonds == {"x": 3}
    assert manifest.metadata == {"seed": 1}
    assert manifest.tensors["T"].axes == ["a", "b"]


def test_wrong_kind(container):
    with pytest.raises(ConfigError, match="boundary"):
        read_container(container[0], "boundary")


def test_unknown_major_version(container):
    path, _ = container
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["format_version"] = "2.0"
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ConfigError, match="format_version"):
        read_container(path, "ipeps")


def test_truncated_tensor_file(container):
    path, _ = container
    (path / "T.bin").write_bytes(b"\0" * 16)
    with pytest.raises(ConfigError, match="manifest expects"):
        read_container(path, "ipeps")


def test_check_version_accepts_minor_bumps():
    check_version("1.7", "record")
    with pytest.raises(ConfigError):
        check_version("0.9", "record")


def test_json_records(tmp_path):
    path = write_json(tmp_path / "r.json", Record(value=1.5))
    assert read_json(path, Record).value == 1.5
    path.write_text('{"value": "high"}')
    with pytest.raises(ConfigError, match="value"):
        read_json(path, Record)
    path.write_text('{"value": 1.0, "format_version": "3.0"}')
    with pytest.raises(ConfigError):
        read_json(path, Record)
