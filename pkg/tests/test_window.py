import numpy as np
import pytest

from conftest import matrix_tally, tally
from hypersparse.matrix import TrafficMatrix, matrix_from_pairs, sum_matrices, total_count
from hypersparse.store import read_archive
from pipeline.anonymize import AddressAnonymizer
from pipeline.config import ChallengeConfig, parse_subranges
from pipeline.window import (
    PACKET_DTYPE,
    PacketRecord,
    batch_to_records,
    build_window,
    read_packets,
    records_to_batch,
    save_window,
    write_packets,
)


def _batch(n, valid=1, start=0):
    batch = np.empty(n, dtype=PACKET_DTYPE)
    batch['src'] = np.arange(start, start + n) % 256
    batch['dst'] = (np.arange(start, start + n) * 7) % 256
    batch['valid'] = valid
    return batch


def _cfg(**overrides):
    values = dict(np_packets=64, nv=4, nmat_per_file=4, log2_dim=8)
    values.update(overrides)
    return ChallengeConfig(**values)


def test_chunks_of_nv():
    matrices = list(build_window(_batch(8), _cfg(np_packets=8)))
    assert [total_count(m) for m in matrices] == [4, 4]


def test_all_invalid_window():
    matrices = list(build_window(_batch(16, valid=0), _cfg(np_packets=16)))
    assert len(matrices) == 4
    assert all(total_count(m) == 0 for m in matrices)
    assert total_count(sum_matrices(matrices, 8)) == 0


def test_boundaries_count_invalid_packets():
    batch = _batch(8)
    batch['valid'][[0, 2]] = 0
    matrices = list(build_window(batch, _cfg(np_packets=8)))
    assert [total_count(m) for m in matrices] == [2, 4]


def test_short_final_matrix():
    matrices = list(build_window(_batch(10), _cfg(np_packets=16)))
    assert [total_count(m) for m in matrices] == [4, 4, 2]


def test_extra_packets_are_ignored():
    batches = [_batch(6), _batch(6, start=6)]
    matrices = list(build_window(iter(batches), _cfg(np_packets=8)))
    assert [total_count(m) for m in matrices] == [4, 4]


def test_records_and_batches_agree():
    cfg = _cfg(np_packets=8)
    records = [PacketRecord(1, 2), PacketRecord(3, 4, valid=False), PacketRecord(1, 2)] * 2 + [PacketRecord(5, 6)] * 2
    assert batch_to_records(records_to_batch(records)) == records
    from_records = list(build_window(iter(records), cfg))
    from_batch = list(build_window(records_to_batch(records), cfg))
    assert from_records == from_batch


def test_without_anonymization_keeps_addresses():
    records = [PacketRecord(1, 2), PacketRecord(1, 2), PacketRecord(3, 0), PacketRecord(0, 0, False)]
    (matrix,) = build_window(iter(records), _cfg(np_packets=4, anonymize=False, log2_dim=2))
    assert matrix == matrix_from_pairs([(1, 2), (1, 2), (3, 0)], 2)


def test_window_tally_matches_anonymized_pairs(rng):
    cfg = ChallengeConfig(np_packets=1 << 14, nv=1 << 10, nmat_per_file=4)
    batch = np.empty(cfg.np_packets, dtype=PACKET_DTYPE)
    batch['src'] = rng.integers(0, 1 << 32, size=cfg.np_packets, dtype=np.uint64)
    batch['dst'] = rng.integers(0, 1 << 12, size=cfg.np_packets)
    batch['valid'] = rng.random(cfg.np_packets) < 0.9

    matrices = list(build_window(batch, cfg))
    assert len(matrices) == cfg.matrices_per_window

    anonymizer = AddressAnonymizer(cfg.anon_key)
    valid = batch[batch['valid'] != 0]
    expected = tally(anonymizer.anonymize_array(valid['src']), anonymizer.anonymize_array(valid['dst']))
    assert matrix_tally(matrices) == expected


def test_packet_file_round_trip(tmp_path):
    batch = _batch(10)
    path = tmp_path / "p.bin"
    assert write_packets(path, [batch[:4], batch[4:]]) == 10
    assert path.stat().st_size == 10 * PACKET_DTYPE.itemsize
    chunks = list(read_packets(path, chunk=3))
    assert [len(c) for c in chunks] == [3, 3, 3, 1]
    assert np.array_equal(np.concatenate(chunks), batch)


def test_packet_file_with_partial_record(tmp_path):
    path = tmp_path / "p.bin"
    path.write_bytes(b"\x00" * (PACKET_DTYPE.itemsize + 1))
    with pytest.raises(ValueError):
        list(read_packets(path))


def test_desk_window_archive_count(tmp_path):
    cfg = ChallengeConfig.desk()
    matrices = [TrafficMatrix.from_entries({(i, 0): 1}, 32) for i in range(cfg.matrices_per_window)]
    manifests = save_window(matrices, cfg, 0, tmp_path)
    assert len(manifests) == 16
    assert [m.path.name for m in manifests] == [f"w0000_a{i:04d}.tar" for i in range(16)]
    assert all(len(m.members) == 16 for m in manifests)


def test_desk_window_with_subranges(tmp_path):
    cfg = ChallengeConfig.desk(subranges=parse_subranges("0-127:*;128-255:*"))
    matrices = [TrafficMatrix.from_entries({(i, 0): 1}, 32) for i in range(cfg.matrices_per_window)]
    manifests = save_window(iter(matrices), cfg, 3, tmp_path)
    main = [m for m in manifests if m.range_id is None]
    masked = [m for m in manifests if m.range_id is not None]
    assert (len(main), len(masked)) == (16, 32)
    assert len(list(tmp_path.glob("*.tar"))) == 48
    assert masked[0].path.name == "w0003_a0000_r00.tar"
    first = sum_matrices(read_archive(masked[0].path), 32)
    second = sum_matrices(read_archive(masked[1].path), 32)
    assert total_count(first) == 16
    assert total_count(second) == 0


def test_saved_window_sums_like_memory(tmp_path, tiny_cfg, rng):
    batch = np.empty(tiny_cfg.np_packets, dtype=PACKET_DTYPE)
    batch['src'] = rng.integers(0, 256, size=tiny_cfg.np_packets)
    batch['dst'] = rng.integers(0, 256, size=tiny_cfg.np_packets)
    batch['valid'] = 1
    matrices = list(build_window(batch, tiny_cfg))
    manifests = save_window(matrices, tiny_cfg, 0, tmp_path)
    assert len(manifests) == tiny_cfg.archives_per_window
    from_disk = sum_matrices((m for man in manifests for m in read_archive(man.path)), 8)
    assert from_disk == sum_matrices(matrices, 8)
    assert total_count(from_disk) == tiny_cfg.np_packets
