import io
import struct
import tarfile

import pytest

from conftest import random_matrix
from hypersparse.matrix import TrafficMatrix
from hypersparse.store import (
    HEADER,
    ArchiveCapacityError,
    ArchiveNotFoundError,
    DuplicateEntryError,
    IndexBoundsError,
    InvalidHeaderError,
    MagicMismatchError,
    MalformedArchiveError,
    MalformedMemberError,
    TrailingBytesError,
    TruncatedMatrixError,
    UnsortedEntriesError,
    UnsupportedVersionError,
    ZeroCountError,
    archive_name,
    deserialize_matrix,
    member_name,
    read_archive,
    serialize_matrix,
    write_archive,
)


def _raw(log2_dim, triples, version=1, magic=b"HTMX", reserved=0):
    body = b"".join(struct.pack("<IIQ", r, c, v) for r, c, v in triples)
    return HEADER.pack(magic, version, log2_dim, reserved, len(triples)) + body


def _tar_with(path, members):
    with tarfile.open(path, mode="w", format=tarfile.USTAR_FORMAT) as tar:
        for name, data in members:
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    return path


# ---------- formato .htmx ----------

def test_empty_matrix_bytes():
    data = serialize_matrix(TrafficMatrix.empty(8))
    assert data == b"HTMX" + bytes([1, 8, 0, 0]) + (0).to_bytes(8, "little")


def test_single_entry_bytes():
    data = serialize_matrix(TrafficMatrix.from_entries({(1, 2): 2}, 8))
    assert data == _raw(8, [(1, 2, 2)])
    assert len(data) == 16 + 16


def test_round_trip_random(rng):
    for _ in range(100):
        a = random_matrix(rng, int(rng.integers(1, 33)) if rng.random() < 0.2 else 8)
        data = serialize_matrix(a)
        b = deserialize_matrix(data)
        assert b == a
        assert serialize_matrix(b) == data


@pytest.mark.parametrize("data, error", [
    (_raw(8, [(1, 2, 2)], magic=b"XXXX"), MagicMismatchError),
    (_raw(8, [(1, 2, 2)], version=2), UnsupportedVersionError),
    (_raw(0, []), InvalidHeaderError),
    (_raw(33, []), InvalidHeaderError),
    (_raw(8, [], reserved=1), InvalidHeaderError),
    (b"HTMX\x01", TruncatedMatrixError),
    (_raw(8, [(1, 2, 2)])[:-1], TruncatedMatrixError),
    (_raw(8, [(1, 2, 2)]) + b"\x00", TrailingBytesError),
    (_raw(2, [(0, 0, 1), (4, 0, 1)]), IndexBoundsError),
    (_raw(2, [(0, 0, 1), (1, 0, 0)]), ZeroCountError),
    (_raw(2, [(1, 0, 1), (1, 0, 2)]), DuplicateEntryError),
    (_raw(2, [(1, 0, 1), (0, 3, 2)]), UnsortedEntriesError),
])
def test_decode_errors(data, error):
    with pytest.raises(error):
        deserialize_matrix(data)


# ---------- archivos tar ----------

def test_names():
    assert member_name(0) == "m00000.htmx"
    assert member_name(123456) == "m123456.htmx"
    assert archive_name(3, 12) == "w0003_a0012.tar"
    assert archive_name(3, 12, 1) == "w0003_a0012_r01.tar"


def test_sixteen_members(tmp_path, rng):
    matrices = [random_matrix(rng) for _ in range(16)]
    manifest = write_archive(matrices, 0, 0, tmp_path / archive_name(0, 0), 16)
    expected = [f"m{i:05d}.htmx" for i in range(16)]
    assert manifest.members == expected
    with tarfile.open(manifest.path) as tar:
        assert tar.getnames() == expected
    assert read_archive(manifest.path) == matrices


def test_member_index_continues_across_archives(tmp_path, rng):
    matrices = [random_matrix(rng) for _ in range(4)]
    manifest = write_archive(matrices, 0, 2, tmp_path / "a.tar", 16)
    assert manifest.members == ["m00032.htmx", "m00033.htmx", "m00034.htmx", "m00035.htmx"]


def test_empty_archive(tmp_path):
    manifest = write_archive([], 0, 0, tmp_path / "empty.tar")
    assert manifest.members == []
    assert read_archive(manifest.path) == []


def test_archive_bytes_are_deterministic(tmp_path, rng):
    matrices = [random_matrix(rng) for _ in range(8)]
    first = write_archive(matrices, 1, 0, tmp_path / "one" / "x.tar", 8)
    second = write_archive(matrices, 1, 0, tmp_path / "two" / "x.tar", 8)
    assert first.path.read_bytes() == second.path.read_bytes()
    with tarfile.open(first.path) as tar:
        for info in tar:
            assert (info.mtime, info.uid, info.gid, info.mode) == (0, 0, 0, 0o644)


def test_capacity(tmp_path):
    with pytest.raises(ArchiveCapacityError):
        write_archive([TrafficMatrix.empty(4)] * 3, 0, 0, tmp_path / "x.tar", 2)


def test_missing_archive(tmp_path):
    with pytest.raises(ArchiveNotFoundError) as info:
        read_archive(tmp_path / "nope.tar")
    assert info.value.path == tmp_path / "nope.tar"


def test_not_a_tar(tmp_path):
    path = tmp_path / "junk.tar"
    path.write_bytes(b"esto no es un tar " * 64)
    with pytest.raises(MalformedArchiveError):
        read_archive(path)


def test_corrupted_member_is_named(tmp_path):
    good = serialize_matrix(TrafficMatrix.from_entries({(0, 1): 1}, 4))
    path = _tar_with(tmp_path / "bad.tar", [("m00000.htmx", good), ("m00001.htmx", b"XXXX" + good[4:])])
    with pytest.raises(MalformedMemberError) as info:
        read_archive(path)
    assert info.value.member == "m00001.htmx"
    assert isinstance(info.value.__cause__, MagicMismatchError)


def test_truncated_member_is_named(tmp_path, rng):
    manifest = write_archive([random_matrix(rng), random_matrix(rng)], 0, 0, tmp_path / "cut.tar")
    with tarfile.open(manifest.path) as tar:
        second = tar.getmember("m00001.htmx")
    data = manifest.path.read_bytes()
    manifest.path.write_bytes(data[:second.offset_data + 4])
    with pytest.raises(MalformedMemberError) as info:
        read_archive(manifest.path)
    assert info.value.member == "m00001.htmx"
    assert info.value.path == manifest.path


def test_unexpected_member_name(tmp_path):
    good = serialize_matrix(TrafficMatrix.empty(4))
    path = _tar_with(tmp_path / "odd.tar", [("notas.txt", good)])
    with pytest.raises(MalformedMemberError) as info:
        read_archive(path)
    assert info.value.member == "notas.txt"


def test_members_out_of_order(tmp_path):
    good = serialize_matrix(TrafficMatrix.empty(4))
    path = _tar_with(tmp_path / "order.tar", [("m00001.htmx", good), ("m00000.htmx", good)])
    with pytest.raises(MalformedArchiveError):
        read_archive(path)
