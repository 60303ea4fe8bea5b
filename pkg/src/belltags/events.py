"""Data model for time-tagged Bell-test records.

All times are integer picoseconds since the run epoch.  A TagStream holds
one site's detections; the SettingSchedule records which analyzer setting
was active when, per site.  Loaded objects are immutable and can be shared
freely between concurrent analysis passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

SITE_A = "A"
SITE_B = "B"
SITES = (SITE_A, SITE_B)
SETTINGS = (1, 2)

# Setting combinations (alice, bob) in canonical cycle order.
COMBINATIONS = ((1, 1), (1, 2), (2, 1), (2, 2))


@dataclass(frozen=True)
class DetectionEvent:
    """A single detector click: when, at which site, under which local setting."""

    time_ps: int
    site: str
    setting: int

    def __post_init__(self) -> None:
        if self.site not in SITES:
            raise ValueError(f"unknown site {self.site!r}")
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.time_ps < 0:
            raise ValueError("time_ps must be non-negative")


@dataclass(frozen=True)
class SettingSchedule:
    """Per-site analyzer setting intervals.

    Each site's intervals are (start_ps, end_ps, setting) triples that tile
    [0, duration_ps) exactly: contiguous, non-overlapping, half-open.
    """

    intervals_a: tuple[tuple[int, int, int], ...]
    intervals_b: tuple[tuple[int, int, int], ...]
    duration_ps: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals_a",
                           tuple((int(s), int(e), int(v)) for s, e, v in self.intervals_a))
        object.__setattr__(self, "intervals_b",
                           tuple((int(s), int(e), int(v)) for s, e, v in self.intervals_b))
        if self.duration_ps < 0:
            raise ValueError("duration_ps must be non-negative")
        for site, ivs in ((SITE_A, self.intervals_a), (SITE_B, self.intervals_b)):
            self._check_tiling(site, ivs)

    def _check_tiling(self, site: str, intervals) -> None:
        cursor = 0
        for i, (start, end, setting) in enumerate(intervals):
            if setting not in SETTINGS:
                raise ValueError(f"site {site} interval {i}: unknown setting {setting}")
            if start != cursor:
                raise ValueError(f"site {site} interval {i}: starts at {start}, expected {cursor}")
            if end <= start:
                raise ValueError(f"site {site} interval {i}: empty or inverted")
            cursor = end
        if cursor != self.duration_ps:
            raise ValueError(f"site {site} intervals end at {cursor}, duration is {self.duration_ps}")

    def intervals(self, site: str) -> tuple[tuple[int, int, int], ...]:
        if site == SITE_A:
            return self.intervals_a
        if site == SITE_B:
            return self.intervals_b
        raise ValueError(f"unknown site {site!r}")

    @cached_property
    def _lookup(self) -> dict:
        tables = {}
        for site in SITES:
            ivs = self.intervals(site)
            starts = np.array([iv[0] for iv in ivs], dtype=np.int64)
            settings = np.array([iv[2] for iv in ivs], dtype=np.uint8)
            tables[site] = (starts, settings)
        return tables

    def setting_at(self, site: str, time_ps: int) -> int:
        """Setting active at time_ps; the final instant maps to the last interval."""
        return int(self.settings_at(site, np.array([time_ps], dtype=np.int64))[0])

    def settings_at(self, site: str, times_ps: np.ndarray) -> np.ndarray:
        starts, settings = self._lookup[site]
        times_ps = np.asarray(times_ps, dtype=np.int64)
        if len(starts) == 0:
            if times_ps.size:
                raise ValueError("schedule has no intervals")
            return np.zeros(0, dtype=np.uint8)
        if times_ps.size and (times_ps.min() < 0 or times_ps.max() > self.duration_ps):
            raise ValueError("time outside [0, duration_ps]")
        idx = np.searchsorted(starts, times_ps, side="right") - 1
        return settings[idx]

    @cached_property
    def combination_segments(self) -> tuple[tuple[int, int, int, int], ...]:
        """Maximal intervals where both settings are constant: (start, end, a, b)."""
        segs = []
        ia = ib = 0
        cursor = 0
        while ia < len(self.intervals_a) and ib < len(self.intervals_b):
            end = min(self.intervals_a[ia][1], self.intervals_b[ib][1])
            segs.append((cursor, end, self.intervals_a[ia][2], self.intervals_b[ib][2]))
            cursor = end
            if self.intervals_a[ia][1] == end:
                ia += 1
            if self.intervals_b[ib][1] == end:
                ib += 1
        return tuple(segs)

    def exposures(self) -> dict[tuple[int, int], int]:
        """Total overlap time per setting combination, in ps."""
        exp = {c: 0 for c in COMBINATIONS}
        for start, end, a, b in self.combination_segments:
            exp[(a, b)] += end - start
        return exp

    def with_swapped_settings(self, site: str) -> "SettingSchedule":
        """Same schedule with the given site's setting labels 1 and 2 exchanged."""
        flip = {1: 2, 2: 1}
        ivs = tuple((s, e, flip[v]) for s, e, v in self.intervals(site))
        if site == SITE_A:
            return SettingSchedule(ivs, self.intervals_b, self.duration_ps)
        return SettingSchedule(self.intervals_a, ivs, self.duration_ps)


@dataclass(frozen=True, eq=False)
class TagStream:
    """One site's detection record.

    times_ps must be non-decreasing (ties allowed) for analysis; this is
    checked on file load and reported by validate_stream, not enforced here,
    so that a validator can inspect broken streams.
    """

    site: str
    times_ps: np.ndarray
    settings: np.ndarray
    duration_ps: int
    epoch_label: str = ""
    exposure_ps: dict[tuple[int, int], int] | None = None

    def __post_init__(self) -> None:
        if self.site not in SITES:
            raise ValueError(f"unknown site {self.site!r}")
        times = np.asarray(self.times_ps, dtype=np.int64).ravel()
        settings = np.asarray(self.settings, dtype=np.uint8).ravel()
        if times.shape != settings.shape:
            raise ValueError("times_ps and settings must have equal length")
        bad = (settings != 1) & (settings != 2)
        if bad.any():
            raise ValueError(f"unknown setting {int(settings[bad.argmax()])} at index {int(bad.argmax())}")
        times.setflags(write=False)
        settings.setflags(write=False)
        object.__setattr__(self, "times_ps", times)
        object.__setattr__(self, "settings", settings)

    def __len__(self) -> int:
        return int(self.times_ps.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (self.site == other.site
                and self.duration_ps == other.duration_ps
                and self.epoch_label == other.epoch_label
                and self.exposure_ps == other.exposure_ps
                and np.array_equal(self.times_ps, other.times_ps)
                and np.array_equal(self.settings, other.settings))

    def events(self) -> Iterator[DetectionEvent]:
        for t, s in zip(self.times_ps.tolist(), self.settings.tolist()):
            yield DetectionEvent(t, self.site, s)

    @classmethod
    def from_events(cls, site: str, events: Iterable[DetectionEvent], duration_ps: int,
                    epoch_label: str = "",
                    exposure_ps: dict[tuple[int, int], int] | None = None) -> "TagStream":
        events = list(events)
        for ev in events:
            if ev.site != site:
                raise ValueError(f"event for site {ev.site} in stream {site}")
        times = np.array([ev.time_ps for ev in events], dtype=np.int64)
        settings = np.array([ev.setting for ev in events], dtype=np.uint8)
        return cls(site, times, settings, duration_ps, epoch_label, exposure_ps)

    def is_sorted(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.times_ps) >= 0))


@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # non_monotonic | out_of_range | schedule_mismatch | exposure_mismatch
    index: int | None
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, kind: str, index: int | None, message: str) -> None:
        self.issues.append(ValidationIssue(kind, index, message))

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(issue.message for issue in self.issues[:5]) + (
            f" (+{len(self.issues) - 5} more)" if len(self.issues) > 5 else "")


def validate_stream(stream: TagStream, schedule: SettingSchedule | None = None) -> ValidationReport:
    """Pure consistency check of one stream; empty report means valid.

    Reports non-monotonic times, out-of-range times, events whose setting
    label disagrees with the schedule interval covering their time, and
    exposure metadata that does not add up to the stream duration.
    """
    report = ValidationReport()
    times = stream.times_ps
    if times.size >= 2:
        drops = np.nonzero(np.diff(times) < 0)[0]
        for i in drops.tolist():
            report.add("non_monotonic", i + 1,
                       f"non-monotonic at index {i + 1}: {int(times[i + 1])} after {int(times[i])}")
    in_range = (times >= 0) & (times <= stream.duration_ps)
    for i in np.nonzero(~in_range)[0].tolist():
        report.add("out_of_range", i,
                   f"time {int(times[i])} out of range [0, {stream.duration_ps}] at index {i}")
    if schedule is not None:
        if schedule.duration_ps != stream.duration_ps:
            report.add("schedule_mismatch", None,
                       f"schedule duration {schedule.duration_ps} != stream duration {stream.duration_ps}")
        elif times.size:
            idx = np.nonzero(in_range)[0]
            expected = schedule.settings_at(stream.site, times[idx])
            for k in np.nonzero(stream.settings[idx] != expected)[0].tolist():
                i = int(idx[k])
                report.add("schedule_mismatch", i,
                           f"event at index {i} labelled setting {int(stream.settings[i])}, "
                           f"schedule says {int(expected[k])}")
    if stream.exposure_ps is not None:
        total = sum(stream.exposure_ps.values())
        if total != stream.duration_ps:
            report.add("exposure_mismatch", None,
                       f"exposures sum to {total}, duration is {stream.duration_ps}")
    return report
