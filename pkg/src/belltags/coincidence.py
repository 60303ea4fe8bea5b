"""Pair identification: moving window, fixed time slots, window sum.

All three methods consume two sorted TagStreams plus the setting schedule
and produce per-combination coincidence and singles tallies.  Matching is
always confined to segments on which both sites' settings are constant;
pairs are never formed across a segment border.

Windows are integer picoseconds and must be even, so the strict predicate
|t_a - t_b| < window/2 is exact in integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import COMBINATIONS, SettingSchedule, TagStream

METHOD_MOVING = "moving_window"
METHOD_SLOTS = "fixed_slots"
METHOD_WINSUM = "window_sum"
METHODS = (METHOD_MOVING, METHOD_SLOTS, METHOD_WINSUM)

PAIR_CSV_HEADER = "segment,setting_a,setting_b,t_a_ps,t_b_ps"


def _check_window(value: int, name: str) -> int:
    value = int(value)
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if value % 2:
        raise ValueError(f"{name} must be even (strict half-window in integer ps), got {value}")
    return value


@dataclass(frozen=True)
class AnalysisConfig:
    """Method choice plus its window parameters.

    moving_window / fixed_slots use tau_ps; fixed_slots also takes
    slot_offset_ps.  window_sum takes tau1_ps (a1b1), tau2_ps (a1b2),
    tau3_ps (a2b1); the a2b2 window is their sum.
    """

    method: str
    tau_ps: int | None = None
    slot_offset_ps: int = 0
    tau1_ps: int | None = None
    tau2_ps: int | None = None
    tau3_ps: int | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.method in (METHOD_MOVING, METHOD_SLOTS):
            if self.tau_ps is None:
                raise ValueError(f"{self.method} requires tau_ps")
            object.__setattr__(self, "tau_ps", _check_window(self.tau_ps, "tau_ps"))
        if self.method == METHOD_SLOTS and self.slot_offset_ps < 0:
            raise ValueError("slot_offset_ps must be non-negative")
        if self.method == METHOD_WINSUM:
            for name in ("tau1_ps", "tau2_ps", "tau3_ps"):
                value = getattr(self, name)
                if value is None:
                    raise ValueError(f"window_sum requires {name}")
                object.__setattr__(self, name, _check_window(value, name))

    @classmethod
    def moving(cls, tau_ps: int) -> "AnalysisConfig":
        return cls(METHOD_MOVING, tau_ps=tau_ps)

    @classmethod
    def slots(cls, tau_ps: int, slot_offset_ps: int = 0) -> "AnalysisConfig":
        return cls(METHOD_SLOTS, tau_ps=tau_ps, slot_offset_ps=slot_offset_ps)

    @classmethod
    def winsum(cls, tau1_ps: int, tau2_ps: int, tau3_ps: int) -> "AnalysisConfig":
        return cls(METHOD_WINSUM, tau1_ps=tau1_ps, tau2_ps=tau2_ps, tau3_ps=tau3_ps)

    def window_ps(self, setting_a: int, setting_b: int) -> int:
        """Matching window for one setting combination."""
        if self.method == METHOD_WINSUM:
            table = {(1, 1): self.tau1_ps, (1, 2): self.tau2_ps, (2, 1): self.tau3_ps,
                     (2, 2): self.tau1_ps + self.tau2_ps + self.tau3_ps}
            return table[(setting_a, setting_b)]
        return self.tau_ps

    def params(self) -> dict:
        out = {"method": self.method}
        if self.method in (METHOD_MOVING, METHOD_SLOTS):
            out["tau_ps"] = self.tau_ps
        if self.method == METHOD_SLOTS:
            out["slot_offset_ps"] = self.slot_offset_ps
        if self.method == METHOD_WINSUM:
            out.update(tau1_ps=self.tau1_ps, tau2_ps=self.tau2_ps, tau3_ps=self.tau3_ps,
                       a2b2_window_ps=self.window_ps(2, 2))
        return out


@dataclass
class CoincidenceCounts:
    """Per-combination tallies; index [j-1][k-1] is combination (a_j, b_k).

    For moving_window and window_sum, singles are raw detection counts and
    c counts matched pairs.  For fixed_slots everything is slot-level after
    coarse-graining, and exposure is the analyzed full-slot time.
    """

    method: str
    c: np.ndarray
    singles_a: np.ndarray
    singles_b: np.ndarray
    exposure_ps: np.ndarray
    params: dict = field(default_factory=dict)
    pairs: list[tuple[int, int, int, int, int]] | None = None

    def check(self) -> None:
        for arr in (self.c, self.singles_a, self.singles_b, self.exposure_ps):
            if arr.shape != (2, 2) or (arr < 0).any():
                raise ValueError("counts must be non-negative 2x2 tables")
        if (self.c > np.minimum(self.singles_a, self.singles_b)).any():
            raise ValueError("coincidences exceed singles")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": dict(self.params),
            "C": self.c.tolist(),
            "singles_A": self.singles_a.tolist(),
            "singles_B": self.singles_b.tolist(),
            "exposure_ps": self.exposure_ps.tolist(),
        }

    def write_pairs_csv(self, path) -> None:
        if self.pairs is None:
            raise ValueError("counts were produced without collect_pairs=True")
        with open(path, "w") as fh:
            fh.write(PAIR_CSV_HEADER + "\n")
            for seg, a, b, ta, tb in self.pairs:
                fh.write(f"{seg},{a},{b},{ta},{tb}\n")


def slot_index(time_ps: int, tau_ps: int, slot_offset_ps: int = 0) -> int:
    """Id of the half-open slot [offset + i*tau, offset + (i+1)*tau) holding time_ps."""
    if tau_ps <= 0:
        raise ValueError("tau_ps must be positive")
    return (int(time_ps) - int(slot_offset_ps)) // int(tau_ps)


def _match_sorted(a_times: Sequence[int], b_times: Sequence[int], window_ps: int,
                  pairs_out: list | None = None) -> int:
    """Greedy head-to-head matching of two sorted tag lists.

    Repeatedly compares the earliest unmatched tag on each side: if they
    satisfy |t_a - t_b| < window/2 they are paired, otherwise the earlier
    head cannot match anything later and is dropped.  On sorted input this
    equals maximum matching, and each tag joins at most one pair.
    """
    half = window_ps // 2
    i = j = 0
    na, nb = len(a_times), len(b_times)
    n = 0
    while i < na and j < nb:
        d = a_times[i] - b_times[j]
        if d <= -half:
            i += 1
        elif d >= half:
            j += 1
        else:
            if pairs_out is not None:
                pairs_out.append((a_times[i], b_times[j]))
            n += 1
            i += 1
            j += 1
    return n


def _slice(times: np.ndarray, start: int, end: int) -> tuple[int, int]:
    lo = int(np.searchsorted(times, start, side="left"))
    hi = int(np.searchsorted(times, end, side="left"))
    return lo, hi


def count_coincidences(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule,
                       config: AnalysisConfig, *, span: tuple[int, int] | None = None,
                       collect_pairs: bool = False) -> CoincidenceCounts:
    """Count coincidences and singles per setting combination.

    span restricts the analysis to [t0, t1); segments and slots are clipped
    to it.  With collect_pairs=True (moving_window / window_sum only) the
    matched pair list is attached for audit.
    """
    _check_inputs(stream_a, stream_b, schedule)
    c = np.zeros((2, 2), dtype=np.int64)
    singles_a = np.zeros((2, 2), dtype=np.int64)
    singles_b = np.zeros((2, 2), dtype=np.int64)
    exposure = np.zeros((2, 2), dtype=np.int64)
    pairs: list | None = [] if collect_pairs and config.method != METHOD_SLOTS else None
    t0, t1 = span if span is not None else (0, schedule.duration_ps)
    for seg_idx, (start, end, sa, sb) in enumerate(schedule.combination_segments):
        start, end = max(start, t0), min(end, t1)
        if start >= end:
            continue
        ja, ka = sa - 1, sb - 1
        a_lo, a_hi = _slice(stream_a.times_ps, start, end)
        b_lo, b_hi = _slice(stream_b.times_ps, start, end)
        if config.method == METHOD_SLOTS:
            n_slots, occ_a, occ_b, both = _count_slot_segment(
                stream_a.times_ps[a_lo:a_hi], stream_b.times_ps[b_lo:b_hi],
                start, end, config.tau_ps, config.slot_offset_ps)
            singles_a[ja, ka] += occ_a
            singles_b[ja, ka] += occ_b
            c[ja, ka] += both
            exposure[ja, ka] += n_slots * config.tau_ps
        else:
            window = config.window_ps(sa, sb)
            seg_pairs: list | None = [] if pairs is not None else None
            n = _match_sorted(stream_a.times_ps[a_lo:a_hi].tolist(),
                              stream_b.times_ps[b_lo:b_hi].tolist(), window, seg_pairs)
            c[ja, ka] += n
            singles_a[ja, ka] += a_hi - a_lo
            singles_b[ja, ka] += b_hi - b_lo
            exposure[ja, ka] += end - start
            if pairs is not None:
                pairs.extend((seg_idx, sa, sb, ta, tb) for ta, tb in seg_pairs)
    counts = CoincidenceCounts(config.method, c, singles_a, singles_b, exposure,
                               config.params(), pairs)
    counts.check()
    return counts


def count_blocks(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule,
                 config: AnalysisConfig, edges: Sequence[tuple[int, int]]) -> list[CoincidenceCounts]:
    """One CoincidenceCounts per [t0, t1) block; pairs never cross block borders."""
    return [count_coincidences(stream_a, stream_b, schedule, config, span=edge)
            for edge in edges]


def moving_window_count(stream_a, stream_b, schedule, tau_ps, **kwargs) -> CoincidenceCounts:
    return count_coincidences(stream_a, stream_b, schedule, AnalysisConfig.moving(tau_ps), **kwargs)


def fixed_slot_count(stream_a, stream_b, schedule, tau_ps, slot_offset_ps=0, **kwargs) -> CoincidenceCounts:
    return count_coincidences(stream_a, stream_b, schedule,
                              AnalysisConfig.slots(tau_ps, slot_offset_ps), **kwargs)


def window_sum_count(stream_a, stream_b, schedule, tau1_ps, tau2_ps, tau3_ps, **kwargs) -> CoincidenceCounts:
    return count_coincidences(stream_a, stream_b, schedule,
                              AnalysisConfig.winsum(tau1_ps, tau2_ps, tau3_ps), **kwargs)


def _count_slot_segment(a_times: np.ndarray, b_times: np.ndarray, start: int, end: int,
                        tau_ps: int, offset_ps: int) -> tuple[int, int, int, int]:
    """Coarse-grained tallies over the slots fully contained in [start, end).

    Slots straddling a segment border contain a setting change (or the end
    of the analyzed span) and are discarded entirely.  Returns (number of
    full slots, slots with >=1 A tag, slots with >=1 B tag, slots with both).
    """
    first = -((offset_ps - start) // tau_ps)           # ceil((start - offset)/tau)
    last_excl = (end - offset_ps) // tau_ps            # slot i needs offset + (i+1)*tau <= end
    if last_excl <= first:
        return 0, 0, 0, 0
    ids_a = (a_times - offset_ps) // tau_ps
    ids_b = (b_times - offset_ps) // tau_ps
    occ_a = np.unique(ids_a[(ids_a >= first) & (ids_a < last_excl)])
    occ_b = np.unique(ids_b[(ids_b >= first) & (ids_b < last_excl)])
    both = np.intersect1d(occ_a, occ_b, assume_unique=True)
    return int(last_excl - first), occ_a.size, occ_b.size, both.size


def _check_inputs(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule) -> None:
    if not (stream_a.duration_ps == stream_b.duration_ps == schedule.duration_ps):
        raise ValueError("stream and schedule durations disagree")
    for stream in (stream_a, stream_b):
        if not stream.is_sorted():
            raise ValueError(f"stream {stream.site} is not sorted by time")
