import json
import math
import time

import numpy as np
import pytest

import challenge
from bench.generate import (
    MANIFEST_FILE,
    TRUTH_FILE,
    ArchiveBuilder,
    PacketGenerator,
    cmd_build,
    cmd_generate,
    generate_window,
    load_manifest,
    manifest_config,
    packet_file_name,
)
from bench.report import BenchCsvError, ScalingReport, cmd_report, load_bench_csv, scaling_table
from bench.runner import (
    BENCH_COLUMNS,
    bench_file_name,
    cmd_launch,
    cmd_merge,
    cmd_run,
    write_bench_csv,
)
from hypersparse.matrix import total_count
from pipeline.analysis import sum_window
from pipeline.config import ChallengeConfig, parse_subranges
from pipeline.process import BenchRecord, read_stats_lines
from visualization.dashboard_escalamiento import load_scaling


def _cfg(**overrides):
    values = dict(np_packets=1 << 10, nv=1 << 6, nmat_per_file=4,
                  n_sources=1 << 6, n_destinations=1 << 6, invalid_fraction=0.2)
    values.update(overrides)
    return ChallengeConfig(**values)


@pytest.fixture
def built(tmp_path):
    """Cuatro ventanas generadas y construidas."""
    cfg = _cfg()
    truth = cmd_generate(5, 4, cfg, tmp_path / "packets")
    cmd_build(tmp_path / "packets", cfg, tmp_path / "archives")
    return tmp_path / "archives", truth


# ---------- generación ----------

def test_generate_is_deterministic(tmp_path):
    cfg = _cfg()
    first = cmd_generate(3, 2, cfg, tmp_path / "a")
    second = cmd_generate(3, 2, cfg, tmp_path / "b")
    assert first == second
    for w in range(2):
        name = packet_file_name(w)
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / TRUTH_FILE).exists()


def test_windows_differ():
    cfg = _cfg()
    a = np.concatenate(list(generate_window(1, 0, cfg)))
    b = np.concatenate(list(generate_window(1, 1, cfg)))
    assert not np.array_equal(a, b)


def test_generator_windows_match_function():
    generator = PacketGenerator(4, _cfg())
    for w in range(3):
        assert np.array_equal(np.concatenate(list(generator.window(w))),
                              np.concatenate(list(generate_window(4, w, _cfg()))))


def test_no_invalid_packets(tmp_path):
    truth = cmd_generate(0, 1, _cfg(invalid_fraction=0.0), tmp_path)
    assert truth['windows'][0]['valid_packets'] == 1 << 10


def test_invalid_fraction_is_binomial():
    n = 1 << 20
    cfg = ChallengeConfig.desk(invalid_fraction=0.25)
    valid = sum(int(np.count_nonzero(b['valid'])) for b in generate_window(9, 0, cfg))
    sigma = math.sqrt(n * 0.25 * 0.75)
    assert abs(valid - 0.75 * n) <= 4 * sigma


# ---------- construcción ----------

def test_build_counts(built):
    archives, truth = built
    manifest = json.loads((archives / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert len(manifest['windows']) == 4
    for window in manifest['windows']:
        assert len(window['archives']) == 4
        assert window['subrange_archives'] == []
        assert window['matrices'] == 16
    assert not list(archives.glob("*_r*.tar"))
    assert manifest_config(archives) == _cfg()


def test_build_with_subranges_and_short_window(tmp_path):
    cfg = _cfg(np_packets=1000, subranges=parse_subranges("0-2^31:*;5:*"))
    cmd_generate(2, 1, cfg, tmp_path / "p")
    manifest = cmd_build(tmp_path / "p", cfg, tmp_path / "a")
    (window,) = manifest['windows']
    assert len(window['archives']) == math.ceil(1000 / (64 * 4))
    assert len(window['subrange_archives']) == 2 * len(window['archives'])
    assert window['matrices'] == math.ceil(1000 / 64)


def test_builder_entry_per_window(tmp_path):
    cfg = _cfg()
    PacketGenerator(6, cfg).write(2, tmp_path / "p")
    builder = ArchiveBuilder(cfg, tmp_path / "a")
    entry = builder.build_one(1, tmp_path / "p" / packet_file_name(1))
    assert entry['window_id'] == 1
    assert entry['archives'] == [f"w0001_a{i:04d}.tar" for i in range(4)]
    assert all((tmp_path / "a" / name).exists() for name in entry['archives'])
    assert not (tmp_path / "a" / MANIFEST_FILE).exists()


def test_manifest_paths_are_usable(built):
    archives, truth = built
    filelist = load_manifest(archives / MANIFEST_FILE)
    assert [w.window_id for w in filelist] == [0, 1, 2, 3]
    for window, record in zip(filelist, truth['windows']):
        a_t = sum_window(window.archives, 32)
        assert total_count(a_t) == record['valid_packets']


# ---------- ejecución ----------

def test_run_split_matches_serial(built, tmp_path):
    archives, truth = built
    cfg = manifest_config(archives)
    assert cmd_run(archives, cfg, 0, 1, out=tmp_path / "serial")
    elapsed = []
    for pid in range(2):
        t0 = time.perf_counter()
        assert cmd_run(archives, cfg, pid, 2, "cyclic", 2, tmp_path / "split")
        elapsed.append(time.perf_counter() - t0)
    serial = cmd_merge(tmp_path / "serial", tmp_path / "serial.jsonl")
    split = cmd_merge(tmp_path / "split", tmp_path / "split.jsonl")
    assert serial.read_bytes() == split.read_bytes()

    results = read_stats_lines(serial)
    assert [r.stats.valid_packets for r in results] == [w['valid_packets'] for w in truth['windows']]

    bench = load_bench_csv(tmp_path / "split" / bench_file_name(1))
    assert list(bench.columns) == BENCH_COLUMNS
    assert sorted(bench[bench['phase'] == 'sum']['window_id']) == [1, 3]

    # las fases medidas de cada pid caben en su tiempo total
    for pid in range(2):
        bench = load_bench_csv(tmp_path / "split" / bench_file_name(pid))
        assert 0 < bench['wall_seconds'].sum() < elapsed[pid]


def test_run_reports_failure(built, tmp_path):
    archives, _ = built
    next(archives.glob("w0002_*.tar")).unlink()
    assert not cmd_run(archives, manifest_config(archives), 0, 1, out=tmp_path)
    lines = (tmp_path / "stats_p000.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    assert '"error"' in lines[2]


@pytest.mark.slow
def test_launch_matches_serial(built, tmp_path):
    archives, truth = built
    cfg = manifest_config(archives)
    assert cmd_run(archives, cfg, 0, 1, out=tmp_path / "serial")
    serial = cmd_merge(tmp_path / "serial", tmp_path / "serial.jsonl")
    for n_procs in (2, 4):
        out = tmp_path / f"np{n_procs}"
        assert cmd_launch(archives, cfg, n_procs, 1, "block", out)
        assert (out / "stats_merged.jsonl").read_bytes() == serial.read_bytes()
        bench = load_bench_csv(out / "bench.csv")
        assert (bench['phase'] == 'sum').sum() == len(truth['windows'])
        assert set(bench['n_procs']) == {n_procs}


@pytest.mark.slow
def test_sweep_threads_then_processes(built, tmp_path):
    archives, _ = built
    out = tmp_path / "sweep"
    assert challenge.main(["sweep", "--manifest", str(archives), "--out", str(out),
                           "--thread-counts", "1", "2", "--proc-counts", "1", "2"]) == 0
    runs = sorted(p.name for p in out.glob("np*_nt*"))
    assert runs == ["np01_nt01", "np01_nt02", "np02_nt01"]
    merged = [(out / run / "stats_merged.jsonl").read_bytes() for run in runs]
    assert merged[1:] == merged[:1] * 2
    for run in runs:
        assert (out / run / "bench.csv").exists()

    table = load_scaling(str(out / "report" / "scaling.csv"))
    assert list(zip(table['n_procs'], table['n_threads'])) == [(1, 1), (1, 2), (2, 1)]
    assert table.iloc[0]['speedup'] == 1.0
    assert (out / "report" / "scaling.txt").exists()


@pytest.mark.slow
def test_desk_scale_conservation(tmp_path):
    cfg = ChallengeConfig.desk(invalid_fraction=0.05)
    truth = cmd_generate(11, 1, cfg, tmp_path / "packets")
    cmd_build(tmp_path / "packets", cfg, tmp_path / "archives")
    (window,) = load_manifest(tmp_path / "archives")
    assert len(window.archives) == 1 << 4
    a_t = sum_window(window.archives, cfg.log2_dim, n_threads=4)
    assert total_count(a_t) == truth['windows'][0]['valid_packets']


# ---------- reportes ----------

def _bench(path, n_procs, n_threads=1, sum_s=1.0, analyze_s=0.5, windows=4):
    records = []
    for w in range(windows):
        pid = w * n_procs // windows
        for phase, wall in (('sum', sum_s), ('analyze', analyze_s)):
            records.append(BenchRecord(phase, w, pid, n_procs, n_threads, wall, 100))
    return write_bench_csv(path, records)


def test_report_speedup(tmp_path):
    csvs = [_bench(tmp_path / "np1.csv", 1), _bench(tmp_path / "np4.csv", 4)]
    table = cmd_report(csvs, tmp_path / "report")
    base, four = table.iloc[0], table.iloc[1]
    assert (base['speedup'], base['efficiency']) == (1.0, 1.0)
    assert four['n_procs'] == 4
    assert four['speedup'] == pytest.approx(4.0, abs=1e-9)
    assert four['efficiency'] == pytest.approx(1.0, abs=1e-9)
    assert four['throughput_pps'] == pytest.approx(400 / 1.5)
    for name in ("scaling.txt", "scaling.csv", "plot_scaling.py"):
        assert (tmp_path / "report" / name).exists()
    text = (tmp_path / "report" / "scaling.txt").read_text(encoding="utf-8")
    assert "la suma tarda más que el análisis: sí" in text


def test_report_single_baseline(tmp_path):
    table = cmd_report([_bench(tmp_path / "b.csv", 1)], tmp_path / "r")
    assert len(table) == 1
    assert table.iloc[0]['speedup'] == 1.0
    assert table.iloc[0]['efficiency'] == 1.0


def test_phase_comparison(tmp_path):
    slow_analysis = ScalingReport.from_csvs([_bench(tmp_path / "a.csv", 1, sum_s=0.2, analyze_s=0.5)])
    comparison = slow_analysis.phase_comparison()
    assert comparison['mean_sum_s'] == pytest.approx(0.2)
    assert comparison['mean_analyze_s'] == pytest.approx(0.5)
    assert not comparison['sum_exceeds_analyze']
    assert "la suma tarda más que el análisis: no" in slow_analysis.lines(slow_analysis.table())[-1]


def test_identical_timings_give_equal_throughput(tmp_path):
    frames = [load_bench_csv(_bench(tmp_path / "a.csv", 1, 1)),
              load_bench_csv(_bench(tmp_path / "b.csv", 1, 2))]
    table = scaling_table(frames)
    assert table.iloc[0]['throughput_pps'] == table.iloc[1]['throughput_pps']


@pytest.mark.parametrize("body, line", [
    ("phase,window\nsum,0\n", 1),
    ("{header}\nsum,x,0,1,1,1.0,10\n", 2),
    ("{header}\nsum,0,0,1,1,1.0,10\nbogus,1,0,1,1,1.0,10\n", 3),
    ("{header}\nsum,0,0,1,1,1.0,10\nanalyze,0,0,1,1,0,10\n", 3),
])
def test_malformed_csv_reports_line(tmp_path, body, line):
    path = tmp_path / "bench.csv"
    path.write_text(body.format(header=",".join(BENCH_COLUMNS)), encoding="utf-8")
    with pytest.raises(BenchCsvError) as info:
        load_bench_csv(path)
    assert info.value.line == line


def test_report_needs_input(tmp_path):
    with pytest.raises(BenchCsvError):
        cmd_report([], tmp_path)


# ---------- línea de comandos ----------

def test_cli_pipeline(tmp_path):
    sizes = ["--np-packets", "2^10", "--nv", "2^6", "--nmat-per-file", "4"]
    assert challenge.main(["generate", "--seed", "1", "--windows", "2",
                           "--out", str(tmp_path / "p")] + sizes) == 0
    assert challenge.main(["build", "--packets", str(tmp_path / "p"),
                           "--out", str(tmp_path / "a")] + sizes) == 0
    for pid in range(2):
        assert challenge.main(["run", "--manifest", str(tmp_path / "a"), "--pid", str(pid),
                               "--np", "2", "--out", str(tmp_path / "run")]) == 0
    assert challenge.main(["merge", "--stats", str(tmp_path / "run"),
                           "--out", str(tmp_path / "merged.jsonl")]) == 0
    assert len(read_stats_lines(tmp_path / "merged.jsonl")) == 2
    assert challenge.main(["report", str(tmp_path / "run" / bench_file_name(0)),
                           "--out", str(tmp_path / "report")]) == 0


def test_cli_failure_exit_code(tmp_path):
    assert challenge.main(["run", "--manifest", str(tmp_path / "nada"), "--pid", "0", "--np", "1"]) == 1
