"""Readers and writers for the on-disk tag formats.

Binary tag file (little-endian):
  header : magic "BTG1", version u16 (= 1), resolution code u16 (= 0, ps),
           duration_ps u64, record count u64
  record : time_ps u64, site u8 (0 = A, 1 = B), setting u8 (1 or 2); 10 bytes.
Records are sorted by time (site A first on ties).  The setting schedule is
a sidecar next to the tag file (``<path>.sched``, magic "BSC1") holding
18-byte records (start u64, end u64, site u8, setting u8), site A intervals
first.

CSV alternative: tag rows ``time_ps,site,setting`` with sites "A"/"B" and a
``<path>.sched.csv`` sidecar with rows ``start_ps,end_ps,site,setting``.
An optional leading ``# epoch_label: ...`` comment carries the stream label;
binary files do not store the label.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .events import SITE_A, SITE_B, SettingSchedule, TagStream, validate_stream

TAG_MAGIC = b"BTG1"
SCHED_MAGIC = b"BSC1"
FORMATS = ("binary", "csv")

_HEADER = struct.Struct("<4sHHQQ")
_TAG_DTYPE = np.dtype([("time", "<u8"), ("site", "u1"), ("setting", "u1")])
_SCHED_DTYPE = np.dtype([("start", "<u8"), ("end", "<u8"), ("site", "u1"), ("setting", "u1")])

_CSV_TAG_HEADER = "time_ps,site,setting"
_CSV_SCHED_HEADER = "start_ps,end_ps,site,setting"


class TagFormatError(ValueError):
    """Malformed tag or schedule data; carries a byte offset or record index."""

    def __init__(self, message: str, byte_offset: int | None = None, index: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset
        self.index = index


def schedule_path(path: str | Path, fmt: str = "binary") -> Path:
    """Sidecar location for the schedule belonging to a tag file."""
    _check_format(fmt)
    suffix = ".sched" if fmt == "binary" else ".sched.csv"
    return Path(str(path) + suffix)


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def read_tags(path: str | Path, fmt: str = "binary"):
    """Load a tag file and its schedule sidecar.

    Returns (stream_a, stream_b, schedule), validated: sorted times, settings
    matching the schedule, exposures attached.  Malformed input raises
    TagFormatError; missing files raise OSError.
    """
    _check_format(fmt)
    if fmt == "binary":
        times, sites, settings, duration = _read_tag_records_binary(Path(path))
        schedule = _read_schedule_binary(schedule_path(path, fmt))
        label = ""
    else:
        times, sites, settings, label = _read_tag_records_csv(Path(path))
        schedule = _read_schedule_csv(schedule_path(path, fmt))
        duration = schedule.duration_ps
    if schedule.duration_ps != duration:
        raise TagFormatError(
            f"schedule duration {schedule.duration_ps} != tag header duration {duration}")
    exposures = schedule.exposures()
    streams = []
    for site, code in ((SITE_A, 0), (SITE_B, 1)):
        mask = sites == code
        stream = TagStream(site, times[mask], settings[mask], duration, label, exposures)
        report = validate_stream(stream, schedule)
        if not report.ok:
            raise TagFormatError(f"invalid stream {site}: {report}")
        streams.append(stream)
    return streams[0], streams[1], schedule


def write_tags(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule,
               path: str | Path, fmt: str = "binary") -> None:
    """Serialize both streams and the schedule; deterministic byte output."""
    _check_format(fmt)
    if stream_a.site != SITE_A or stream_b.site != SITE_B:
        raise ValueError("write_tags expects (stream_a, stream_b) in that order")
    if not (stream_a.duration_ps == stream_b.duration_ps == schedule.duration_ps):
        raise ValueError("stream and schedule durations disagree")
    times = np.concatenate([stream_a.times_ps, stream_b.times_ps])
    sites = np.concatenate([np.zeros(len(stream_a), np.uint8), np.ones(len(stream_b), np.uint8)])
    settings = np.concatenate([stream_a.settings, stream_b.settings])
    order = np.lexsort((sites, times))
    times, sites, settings = times[order], sites[order], settings[order]
    label = stream_a.epoch_label or stream_b.epoch_label
    if fmt == "binary":
        recs = np.empty(times.size, dtype=_TAG_DTYPE)
        recs["time"], recs["site"], recs["setting"] = times, sites, settings
        header = _HEADER.pack(TAG_MAGIC, 1, 0, schedule.duration_ps, times.size)
        Path(path).write_bytes(header + recs.tobytes())
        _write_schedule_binary(schedule, schedule_path(path, fmt))
    else:
        buf = io.StringIO()
        if label:
            buf.write(f"# epoch_label: {label}\n")
        buf.write(_CSV_TAG_HEADER + "\n")
        site_names = (SITE_A, SITE_B)
        for t, c, s in zip(times.tolist(), sites.tolist(), settings.tolist()):
            buf.write(f"{t},{site_names[c]},{s}\n")
        Path(path).write_text(buf.getvalue())
        _write_schedule_csv(schedule, schedule_path(path, fmt))


# -- binary ------------------------------------------------------------------

def _read_tag_records_binary(path: Path):
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise TagFormatError(f"truncated header: {len(raw)} bytes", byte_offset=len(raw))
    magic, version, resolution, duration, count = _HEADER.unpack_from(raw)
    if magic != TAG_MAGIC:
        raise TagFormatError(f"bad magic {magic!r}", byte_offset=0)
    if version != 1:
        raise TagFormatError(f"unsupported version {version}")
    if resolution != 0:
        raise TagFormatError(f"unsupported resolution code {resolution}")
    body = raw[_HEADER.size:]
    if len(body) % _TAG_DTYPE.itemsize:
        offset = _HEADER.size + (len(body) // _TAG_DTYPE.itemsize) * _TAG_DTYPE.itemsize
        raise TagFormatError(f"truncated record at byte offset {offset}", byte_offset=offset)
    recs = np.frombuffer(body, dtype=_TAG_DTYPE)
    if recs.size != count:
        raise TagFormatError(f"header promises {count} records, file holds {recs.size}")
    if recs.size and int(recs["time"].max()) >= 2 ** 63:
        raise TagFormatError("time_ps overflows signed 64-bit range")
    times = recs["time"].astype(np.int64)
    sites = recs["site"].copy()
    settings = recs["setting"].copy()
    _check_codes_and_order(times, sites, settings)
    return times, sites, settings, int(duration)


def _check_codes_and_order(times, sites, settings):
    bad_site = np.nonzero(sites > 1)[0]
    if bad_site.size:
        i = int(bad_site[0])
        raise TagFormatError(f"unknown site code {int(sites[i])} at index {i}", index=i)
    bad_setting = np.nonzero((settings != 1) & (settings != 2))[0]
    if bad_setting.size:
        i = int(bad_setting[0])
        raise TagFormatError(f"unknown setting code {int(settings[i])} at index {i}", index=i)
    if times.size >= 2:
        drops = np.nonzero(np.diff(times) < 0)[0]
        if drops.size:
            i = int(drops[0]) + 1
            raise TagFormatError(f"non-monotonic at index {i}", index=i)


def _read_schedule_binary(path: Path) -> SettingSchedule:
    raw = path.read_bytes()
    if len(raw) < len(SCHED_MAGIC):
        raise TagFormatError(f"truncated schedule header: {len(raw)} bytes", byte_offset=len(raw))
    if raw[:4] != SCHED_MAGIC:
        raise TagFormatError(f"bad schedule magic {raw[:4]!r}", byte_offset=0)
    body = raw[4:]
    if len(body) % _SCHED_DTYPE.itemsize:
        offset = 4 + (len(body) // _SCHED_DTYPE.itemsize) * _SCHED_DTYPE.itemsize
        raise TagFormatError(f"truncated schedule record at byte offset {offset}", byte_offset=offset)
    recs = np.frombuffer(body, dtype=_SCHED_DTYPE)
    return _schedule_from_rows(
        [(int(r["start"]), int(r["end"]), int(r["site"]), int(r["setting"])) for r in recs])


def _write_schedule_binary(schedule: SettingSchedule, path: Path) -> None:
    rows = _schedule_rows(schedule)
    recs = np.empty(len(rows), dtype=_SCHED_DTYPE)
    for i, (start, end, site_code, setting) in enumerate(rows):
        recs[i] = (start, end, site_code, setting)
    path.write_bytes(SCHED_MAGIC + recs.tobytes())


# -- csv ---------------------------------------------------------------------

def _read_tag_records_csv(path: Path):
    label = ""
    site_codes = {SITE_A: 0, SITE_B: 1}
    times, sites, settings = [], [], []
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    start = 0
    if lines and lines[0].startswith("#"):
        comment = lines[0][1:].strip()
        if comment.startswith("epoch_label:"):
            label = comment[len("epoch_label:"):].strip()
        start = 1
    if start >= len(lines) or lines[start] != _CSV_TAG_HEADER:
        raise TagFormatError(f"expected header {_CSV_TAG_HEADER!r}")
    for i, row in enumerate(csv.reader(lines[start + 1:])):
        if not row:
            continue
        if len(row) != 3:
            raise TagFormatError(f"malformed row at index {i}: {row!r}", index=i)
        t_text, site, s_text = row
        if site not in site_codes:
            raise TagFormatError(f"unknown site code {site!r} at index {i}", index=i)
        try:
            t, s = int(t_text), int(s_text)
        except ValueError:
            raise TagFormatError(f"non-integer field at index {i}: {row!r}", index=i) from None
        if s not in (1, 2):
            raise TagFormatError(f"unknown setting code {s} at index {i}", index=i)
        if t < 0:
            raise TagFormatError(f"negative time at index {i}", index=i)
        times.append(t)
        sites.append(site_codes[site])
        settings.append(s)
    times = np.array(times, dtype=np.int64)
    sites = np.array(sites, dtype=np.uint8)
    settings = np.array(settings, dtype=np.uint8)
    _check_codes_and_order(times, sites, settings)
    return times, sites, settings, label


def _read_schedule_csv(path: Path) -> SettingSchedule:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != _CSV_SCHED_HEADER:
        raise TagFormatError(f"expected schedule header {_CSV_SCHED_HEADER!r}")
    rows = []
    site_codes = {SITE_A: 0, SITE_B: 1}
    for i, row in enumerate(csv.reader(lines[1:])):
        if not row:
            continue
        if len(row) != 4:
            raise TagFormatError(f"malformed schedule row at index {i}: {row!r}", index=i)
        start_text, end_text, site, s_text = row
        if site not in site_codes:
            raise TagFormatError(f"unknown site code {site!r} in schedule row {i}", index=i)
        try:
            rows.append((int(start_text), int(end_text), site_codes[site], int(s_text)))
        except ValueError:
            raise TagFormatError(f"non-integer schedule field at row {i}", index=i) from None
    return _schedule_from_rows(rows)


def _write_schedule_csv(schedule: SettingSchedule, path: Path) -> None:
    buf = io.StringIO()
    buf.write(_CSV_SCHED_HEADER + "\n")
    site_names = (SITE_A, SITE_B)
    for start, end, site_code, setting in _schedule_rows(schedule):
        buf.write(f"{start},{end},{site_names[site_code]},{setting}\n")
    path.write_text(buf.getvalue())


# -- shared ------------------------------------------------------------------

def _schedule_rows(schedule: SettingSchedule) -> list[tuple[int, int, int, int]]:
    rows = [(s, e, 0, v) for s, e, v in schedule.intervals_a]
    rows += [(s, e, 1, v) for s, e, v in schedule.intervals_b]
    return rows


def _schedule_from_rows(rows) -> SettingSchedule:
    by_site: dict[int, list] = {0: [], 1: []}
    for start, end, site_code, setting in rows:
        if site_code not in by_site:
            raise TagFormatError(f"unknown site code {site_code} in schedule")
        by_site[site_code].append((start, end, setting))
    ends = [iv[1] for ivs in by_site.values() for iv in ivs]
    duration = max(ends) if ends else 0
    try:
        return SettingSchedule(tuple(by_site[0]), tuple(by_site[1]), duration)
    except ValueError as exc:
        raise TagFormatError(f"invalid schedule: {exc}") from exc
