"""Independent reference implementations used as test oracles.

These deliberately avoid the package's algorithms: matching is exhaustive
bitmask DP over the compatibility graph, slot assignment is a linear
interval scan, and stream generation builds data directly from first
principles.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from belltags import SITE_A, SITE_B, SettingSchedule, TagStream


def max_matching_bruteforce(a_times, b_times, window_ps: int) -> int:
    """Maximum bipartite matching size under |t_a - t_b| < window/2.

    Exhaustive DP over subsets of B (feasible for len(b_times) <= ~16);
    independent of any greedy strategy.
    """
    compat = []
    for ta in a_times:
        mask = 0
        for jb, tb in enumerate(b_times):
            if 2 * abs(ta - tb) < window_ps:  # |d| < window/2, exact for even windows
                mask |= 1 << jb
        compat.append(mask)

    @lru_cache(maxsize=None)
    def best(i: int, used: int) -> int:
        if i == len(compat):
            return 0
        score = best(i + 1, used)  # leave a_times[i] unmatched
        options = compat[i] & ~used
        while options:
            bit = options & -options
            options ^= bit
            score = max(score, 1 + best(i + 1, used | bit))
        return score

    result = best(0, 0)
    best.cache_clear()
    return result


def slot_of_time_scan(time_ps: int, tau_ps: int, offset_ps: int, id_range) -> int | None:
    """Linear scan over candidate slot intervals; None if no candidate covers t."""
    for i in id_range:
        start = offset_ps + i * tau_ps
        if start <= time_ps < start + tau_ps:
            return i
    return None


def random_run(rng: np.random.Generator, n_blocks: int = 8, max_events_per_block: int = 6,
               block_len: int = 1_000_000, label: str = ""):
    """A small valid (stream_a, stream_b, schedule) triple with random content."""
    duration = n_blocks * block_len
    intervals_a = []
    intervals_b = []
    for i in range(n_blocks):
        intervals_a.append((i * block_len, (i + 1) * block_len, int(rng.integers(1, 3))))
        intervals_b.append((i * block_len, (i + 1) * block_len, int(rng.integers(1, 3))))
    schedule = SettingSchedule(tuple(intervals_a), tuple(intervals_b), duration)
    streams = []
    for site, intervals in ((SITE_A, intervals_a), (SITE_B, intervals_b)):
        times = []
        settings = []
        for start, end, setting in intervals:
            n = int(rng.integers(0, max_events_per_block + 1))
            block_times = np.sort(rng.integers(start, end, size=n))
            times.extend(int(t) for t in block_times)
            settings.extend([setting] * n)
        streams.append(TagStream(site, np.array(times, dtype=np.int64),
                                 np.array(settings, dtype=np.uint8), duration, label,
                                 schedule.exposures()))
    return streams[0], streams[1], schedule
