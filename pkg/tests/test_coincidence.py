import numpy as np
import pytest

from belltags import (METHOD_MOVING, SITE_A, SITE_B, AnalysisConfig, SettingSchedule,
                      TagStream, count_coincidences, fixed_slot_count, moving_window_count,
                      slot_index, window_sum_count)

from oracles import max_matching_bruteforce, random_run, slot_of_time_scan

DUR = 10_000_000


def one_combo_schedule(a_setting=1, b_setting=1, duration=DUR):
    return SettingSchedule(((0, duration, a_setting),), ((0, duration, b_setting),), duration)


def stream(site, times, setting=1, duration=DUR):
    arr = np.array(times, dtype=np.int64)
    return TagStream(site, arr, np.full(arr.size, setting, dtype=np.uint8), duration)


def four_combo_run(a_times_by_combo, b_times_by_combo, block=10_000_000):
    """One block per combination in canonical order; times given per combination."""
    duration = 4 * block
    sched = SettingSchedule(((0, 2 * block, 1), (2 * block, 4 * block, 2)),
                            ((0, block, 1), (block, 2 * block, 2),
                             (2 * block, 3 * block, 1), (3 * block, 4 * block, 2)),
                            duration)
    combos = ((1, 1), (1, 2), (2, 1), (2, 2))
    streams = {}
    for site, times_by_combo in ((SITE_A, a_times_by_combo), (SITE_B, b_times_by_combo)):
        times, settings = [], []
        for i, combo in enumerate(combos):
            setting = combo[0] if site == SITE_A else combo[1]
            for t in times_by_combo.get(combo, ()):
                times.append(i * block + t)
                settings.append(setting)
        streams[site] = TagStream(site, np.array(times, dtype=np.int64),
                                  np.array(settings, dtype=np.uint8), duration)
    return streams[SITE_A], streams[SITE_B], sched


# -- moving window -------------------------------------------------------------

def test_moving_window_basic_pair():
    a, b = stream(SITE_A, [1_000_000]), stream(SITE_B, [1_400_000])
    counts = moving_window_count(a, b, one_combo_schedule(), 980_000)
    assert counts.c[0, 0] == 1  # |delta| = 400000 < 490000


def test_moving_window_strict_boundary():
    a, b = stream(SITE_A, [0]), stream(SITE_B, [490_000])
    counts = moving_window_count(a, b, one_combo_schedule(), 980_000)
    assert counts.c[0, 0] == 0  # |delta| = tau/2 exactly: strict < fails


def test_moving_window_tag_used_once():
    a, b = stream(SITE_A, [0, 100]), stream(SITE_B, [50])
    counts = moving_window_count(a, b, one_combo_schedule(), 980_000)
    assert counts.c[0, 0] == 1
    assert counts.singles_a[0, 0] == 2
    assert counts.singles_b[0, 0] == 1
    assert max_matching_bruteforce([0, 100], [50], 980_000) == 1


def test_moving_window_rejects_odd_or_nonpositive_tau():
    with pytest.raises(ValueError):
        AnalysisConfig.moving(979_999)
    with pytest.raises(ValueError):
        AnalysisConfig.moving(0)
    with pytest.raises(ValueError):
        AnalysisConfig.moving(-2)


def test_counts_attributed_to_combination():
    a, b, sched = four_combo_run({(1, 2): [500], (2, 2): [700]},
                                 {(1, 2): [600], (2, 2): [100_000_000]})
    counts = moving_window_count(a, b, sched, 2_000)
    assert counts.c[0, 1] == 1 and counts.c.sum() == 1
    assert counts.singles_a[0, 1] == 1 and counts.singles_a[1, 1] == 1
    assert counts.exposure_ps[0, 0] == 10_000_000


def test_site_symmetry_moving_window():
    rng = np.random.default_rng(123)
    for _ in range(20):
        a, b, sched = random_run(rng, n_blocks=6, max_events_per_block=8, block_len=100_000)
        tau = int(rng.choice([2_000, 20_000, 60_000]))
        fwd = moving_window_count(a, b, sched, tau)
        # swap roles: relabel sites and swap the schedule sides
        a_sw = TagStream(SITE_B, a.times_ps, a.settings, a.duration_ps)
        b_sw = TagStream(SITE_A, b.times_ps, b.settings, b.duration_ps)
        sched_sw = SettingSchedule(sched.intervals_b, sched.intervals_a, sched.duration_ps)
        rev = moving_window_count(b_sw, a_sw, sched_sw, tau)
        assert np.array_equal(rev.c, fwd.c.T)
        assert np.array_equal(rev.singles_a, fwd.singles_b.T)
        assert np.array_equal(rev.singles_b, fwd.singles_a.T)


def test_tau_monotonicity_moving_window():
    rng = np.random.default_rng(321)
    for _ in range(20):
        a, b, sched = random_run(rng, n_blocks=4, max_events_per_block=10, block_len=50_000)
        previous = None
        for tau in (1_000, 4_000, 16_000, 64_000):
            counts = moving_window_count(a, b, sched, tau)
            if previous is not None:
                assert (counts.c >= previous).all()
            previous = counts.c


def test_greedy_equals_bruteforce_on_random_segments():
    rng = np.random.default_rng(2024)
    sched = one_combo_schedule(duration=1_000)
    for _ in range(500):
        na, nb = int(rng.integers(0, 7)), int(rng.integers(0, 7))
        a_times = np.sort(rng.integers(0, 1_000, na))
        b_times = np.sort(rng.integers(0, 1_000, nb))
        tau = 2 * int(rng.integers(1, 300))
        a = TagStream(SITE_A, a_times, np.ones(na, np.uint8), 1_000)
        b = TagStream(SITE_B, b_times, np.ones(nb, np.uint8), 1_000)
        got = moving_window_count(a, b, sched, tau).c[0, 0]
        want = max_matching_bruteforce(a_times.tolist(), b_times.tolist(), tau)
        assert got == want, (a_times, b_times, tau)


def test_emitted_pairs_are_a_valid_matching():
    rng = np.random.default_rng(99)
    for _ in range(10):
        a, b, sched = random_run(rng, n_blocks=4, max_events_per_block=12, block_len=80_000)
        config = AnalysisConfig.moving(30_000)
        counts = count_coincidences(a, b, sched, config, collect_pairs=True)
        assert len(counts.pairs) == counts.c.sum()
        used_a, used_b = set(), set()
        for seg, sa, sb, ta, tb in counts.pairs:
            assert 2 * abs(ta - tb) < 30_000
            assert (seg, ta) not in used_a and (seg, tb) not in used_b
            used_a.add((seg, ta))
            used_b.add((seg, tb))


# -- fixed slots ---------------------------------------------------------------

def test_slot_index_examples():
    assert slot_index(1_500, 1_000, 0) == 1
    assert slot_index(1_000, 1_000, 0) == 1  # left-closed boundary
    assert slot_index(999, 1_000, 0) == 0
    assert slot_index(-1, 1_000, 0) == -1
    assert slot_index(250, 1_000, 500) == -1


def test_slot_index_matches_interval_scan():
    rng = np.random.default_rng(8)
    for _ in range(300):
        tau = int(rng.integers(1, 50))
        offset = int(rng.integers(0, 50))
        t = int(rng.integers(-1_000, 1_000))
        want = slot_of_time_scan(t, tau, offset, range(-2_000, 2_000))
        assert slot_index(t, tau, offset) == want


def test_fixed_slots_coarse_grains_multiple_clicks():
    dur = 980_000 * 10
    a = stream(SITE_A, [10, 20], duration=dur)
    b = stream(SITE_B, [30], duration=dur)
    counts = fixed_slot_count(a, b, one_combo_schedule(duration=dur), 980_000)
    assert counts.c[0, 0] == 1
    assert counts.singles_a[0, 0] == 1  # slot-level, not 2


def test_fixed_slots_split_by_boundary():
    a, b = stream(SITE_A, [999_999], duration=10_000_000), stream(SITE_B, [1_000_001],
                                                                  duration=10_000_000)
    counts = fixed_slot_count(a, b, one_combo_schedule(duration=10_000_000), 1_000_000)
    assert counts.c[0, 0] == 0  # |delta| = 2 but different slots


def test_fixed_slots_empty():
    a = stream(SITE_A, [])
    b = stream(SITE_B, [])
    counts = fixed_slot_count(a, b, one_combo_schedule(), 1_000_000)
    assert counts.c.sum() == 0 and counts.singles_a.sum() == 0


def test_fixed_slots_discard_partial_slots_at_setting_change():
    # Segment (a1,b1) is [0, 10ms); with tau = 3ms slots 0..2 fit, the last 1ms is dropped.
    a, b, sched = four_combo_run({(1, 1): [9_500_000]}, {(1, 1): [9_600_000]},
                                 block=10_000_000)
    counts = fixed_slot_count(a, b, sched, 3_000_000)
    assert counts.exposure_ps[0, 0] == 9_000_000
    # the tags sit in the discarded partial slot, so nothing is counted
    assert counts.c[0, 0] == 0 and counts.singles_a[0, 0] == 0


def test_fixed_slots_offset_shifts_grid():
    a, b = stream(SITE_A, [995_000]), stream(SITE_B, [1_005_000])
    sched = one_combo_schedule(duration=10_000_000)
    at_zero = fixed_slot_count(a, b, sched, 1_000_000, 0)
    shifted = fixed_slot_count(a, b, sched, 1_000_000, 500_000)
    assert at_zero.c[0, 0] == 0  # boundary at 1_000_000 separates them
    assert shifted.c[0, 0] == 1  # boundary moved away


# -- window sum ----------------------------------------------------------------

def test_window_sum_a2b2_gets_summed_window():
    a, b, sched = four_combo_run({(2, 2): [1_000_000]}, {(2, 2): [1_250_000]})
    counts = window_sum_count(a, b, sched, 180_000, 180_000, 180_000)
    assert counts.c[1, 1] == 1  # window 540000, half-width 270000 > 250000


def test_window_sum_small_window_for_a1b1():
    a, b, sched = four_combo_run({(1, 1): [1_000_000]}, {(1, 1): [1_250_000]})
    counts = window_sum_count(a, b, sched, 180_000, 180_000, 180_000)
    assert counts.c[0, 0] == 0  # half-width 90000 < 250000


def test_window_sum_window_is_exact_sum():
    config = AnalysisConfig.winsum(100, 200, 300)
    assert config.window_ps(2, 2) == 600
    assert config.window_ps(1, 1) == 100
    assert config.window_ps(1, 2) == 200
    assert config.window_ps(2, 1) == 300


def test_window_sum_no_coarse_graining():
    # two pairs inside one would-be slot both count
    a, b, sched = four_combo_run({(1, 1): [1_000, 3_000]}, {(1, 1): [1_100, 3_100]})
    counts = window_sum_count(a, b, sched, 1_000, 1_000, 1_000)
    assert counts.c[0, 0] == 2
    assert counts.singles_a[0, 0] == 2  # raw tags, not slots


def test_subset_membership_identity_on_random_quadruples():
    # telescoping: d22 = d12 + d21 - d11; three small-window hits imply the summed hit
    rng = np.random.default_rng(424242)
    n = 200_000
    d11 = rng.integers(-10**6, 10**6, n)
    d12 = rng.integers(-10**6, 10**6, n)
    d21 = rng.integers(-10**6, 10**6, n)
    d22 = d12 + d21 - d11
    tau1 = 2 * rng.integers(1, 10**6, n)
    tau2 = 2 * rng.integers(1, 10**6, n)
    tau3 = 2 * rng.integers(1, 10**6, n)
    hit_small = ((2 * np.abs(d11) < tau1) & (2 * np.abs(d12) < tau2)
                 & (2 * np.abs(d21) < tau3))
    hit_sum = 2 * np.abs(d22) < tau1 + tau2 + tau3
    assert not np.any(hit_small & ~hit_sum)
    assert hit_small.sum() > 0  # the premise actually fires


# -- shared machinery ------------------------------------------------------------

def test_counts_validate_invariants():
    rng = np.random.default_rng(7)
    a, b, sched = random_run(rng)
    for config in (AnalysisConfig.moving(20_000), AnalysisConfig.slots(20_000),
                   AnalysisConfig.winsum(20_000, 20_000, 20_000)):
        counts = count_coincidences(a, b, sched, config)
        counts.check()
        assert (counts.c <= np.minimum(counts.singles_a, counts.singles_b)).all()


def test_span_restricts_counting():
    a, b = stream(SITE_A, [100, 5_000_000]), stream(SITE_B, [150, 5_000_050])
    sched = one_combo_schedule()
    full = moving_window_count(a, b, sched, 2_000)
    early = count_coincidences(a, b, sched, AnalysisConfig.moving(2_000), span=(0, 1_000_000))
    assert full.c[0, 0] == 2
    assert early.c[0, 0] == 1
    assert early.singles_a[0, 0] == 1


def test_unsorted_stream_rejected():
    # construct an unsorted stream (allowed for validation) and reject at counting time
    bad = TagStream(SITE_A, np.array([10, 5]), np.array([1, 1]), DUR)
    good = stream(SITE_B, [])
    with pytest.raises(ValueError, match="not sorted"):
        moving_window_count(bad, good, one_combo_schedule(), 2_000)


def test_pair_csv_export(tmp_path):
    a, b, sched = four_combo_run({(1, 1): [1_000]}, {(1, 1): [1_100]})
    counts = count_coincidences(a, b, sched, AnalysisConfig.moving(2_000), collect_pairs=True)
    out = tmp_path / "pairs.csv"
    counts.write_pairs_csv(out)
    assert out.read_text() == "segment,setting_a,setting_b,t_a_ps,t_b_ps\n0,1,1,1000,1100\n"
