import struct

import numpy as np
import pytest

from belltags import (SITE_A, SITE_B, SettingSchedule, TagFormatError, TagStream,
                      demo_config, read_tags, schedule_path, simulate_spdc, write_tags)
from belltags.quantum import SpdcConfig

from oracles import random_run


def empty_run(duration=0):
    sched = SettingSchedule((), (), duration) if duration == 0 else SettingSchedule(
        ((0, duration, 1),), ((0, duration, 1),), duration)
    empty = lambda site: TagStream(site, np.array([], dtype=np.int64),
                                   np.array([], dtype=np.uint8), duration,
                                   exposure_ps=sched.exposures())
    return empty(SITE_A), empty(SITE_B), sched


@pytest.mark.parametrize("fmt", ["binary", "csv"])
def test_empty_roundtrip(tmp_path, fmt):
    a, b, sched = empty_run()
    path = tmp_path / f"empty.{fmt}"
    write_tags(a, b, sched, path, fmt)
    a2, b2, sched2 = read_tags(path, fmt)
    assert len(a2) == len(b2) == 0
    assert a2.duration_ps == 0
    assert (a2, b2, sched2) == (a, b, sched)


def test_single_record(tmp_path):
    sched = SettingSchedule(((0, 100, 1),), ((0, 100, 2),), 100)
    a = TagStream(SITE_A, np.array([0]), np.array([1]), 100, exposure_ps=sched.exposures())
    b = TagStream(SITE_B, np.array([], dtype=np.int64), np.array([], dtype=np.uint8), 100,
                  exposure_ps=sched.exposures())
    path = tmp_path / "one.btag"
    write_tags(a, b, sched, path)
    a2, b2, _ = read_tags(path)
    assert len(a2) == 1 and len(b2) == 0
    assert int(a2.times_ps[0]) == 0 and int(a2.settings[0]) == 1


def test_non_monotonic_rejected(tmp_path):
    path = tmp_path / "bad.btag"
    header = struct.pack("<4sHHQQ", b"BTG1", 1, 0, 100, 2)
    records = struct.pack("<QBB", 10, 0, 1) + struct.pack("<QBB", 5, 0, 1)
    path.write_bytes(header + records)
    schedule_path(path).write_bytes(b"BSC1" + struct.pack("<QQBB", 0, 100, 0, 1)
                                    + struct.pack("<QQBB", 0, 100, 1, 1))
    with pytest.raises(TagFormatError, match="non-monotonic at index 1"):
        read_tags(path)


def test_truncated_record_reports_offset(tmp_path):
    path = tmp_path / "trunc.btag"
    header = struct.pack("<4sHHQQ", b"BTG1", 1, 0, 100, 1)
    path.write_bytes(header + b"\x00" * 7)  # record needs 10 bytes
    with pytest.raises(TagFormatError) as err:
        read_tags(path)
    assert err.value.byte_offset == 24


def test_unknown_site_code_rejected(tmp_path):
    path = tmp_path / "site.btag"
    header = struct.pack("<4sHHQQ", b"BTG1", 1, 0, 100, 1)
    path.write_bytes(header + struct.pack("<QBB", 0, 7, 1))
    with pytest.raises(TagFormatError, match="unknown site code 7"):
        read_tags(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "magic.btag"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    schedule_path(path).write_bytes(b"BSC1")
    with pytest.raises(TagFormatError, match="bad magic"):
        read_tags(path)


def test_setting_outside_schedule_rejected(tmp_path):
    # header/records well-formed, but the tag's setting label contradicts the schedule
    path = tmp_path / "mismatch.btag"
    header = struct.pack("<4sHHQQ", b"BTG1", 1, 0, 100, 1)
    path.write_bytes(header + struct.pack("<QBB", 50, 0, 2))
    schedule_path(path).write_bytes(b"BSC1" + struct.pack("<QQBB", 0, 100, 0, 1)
                                    + struct.pack("<QQBB", 0, 100, 1, 1))
    with pytest.raises(TagFormatError, match="schedule"):
        read_tags(path)


def test_binary_write_is_deterministic(tmp_path):
    cfg = SpdcConfig(pair_rate_hz=50_000.0, duration_ps=24_000_000, n_cycles=1, seed=3)
    a, b, sched = simulate_spdc(cfg)
    p1, p2 = tmp_path / "r1.btag", tmp_path / "r2.btag"
    write_tags(a, b, sched, p1)
    write_tags(a, b, sched, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert schedule_path(p1).read_bytes() == schedule_path(p2).read_bytes()


@pytest.mark.parametrize("seed", range(6))
def test_random_roundtrips_field_exact(tmp_path, seed):
    rng = np.random.default_rng(seed)
    a, b, sched = random_run(rng)
    for fmt in ("binary", "csv"):
        path = tmp_path / f"run{seed}.{fmt}"
        write_tags(a, b, sched, path, fmt)
        a2, b2, sched2 = read_tags(path, fmt)
        assert (a2, b2, sched2) == (a, b, sched)


def test_csv_binary_csv_identical(tmp_path):
    rng = np.random.default_rng(77)
    a, b, sched = random_run(rng)
    csv1 = tmp_path / "first.csv"
    write_tags(a, b, sched, csv1, "csv")
    a2, b2, sched2 = read_tags(csv1, "csv")
    mid = tmp_path / "mid.btag"
    write_tags(a2, b2, sched2, mid, "binary")
    a3, b3, sched3 = read_tags(mid, "binary")
    csv2 = tmp_path / "second.csv"
    write_tags(a3, b3, sched3, csv2, "csv")
    assert csv1.read_text() == csv2.read_text()
    assert schedule_path(csv1, "csv").read_text() == schedule_path(csv2, "csv").read_text()


def test_csv_preserves_epoch_label(tmp_path):
    rng = np.random.default_rng(5)
    a, b, sched = random_run(rng, label="calib-42")
    path = tmp_path / "lbl.csv"
    write_tags(a, b, sched, path, "csv")
    assert path.read_text().startswith("# epoch_label: calib-42\n")
    a2, _, _ = read_tags(path, "csv")
    assert a2.epoch_label == "calib-42"


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        read_tags(tmp_path / "nope.btag")
