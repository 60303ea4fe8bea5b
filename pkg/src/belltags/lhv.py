"""Finite local-hidden-variable models and their trial-based simulator.

A model is a finite table: for each hidden value lambda it fixes both
outcomes per local setting and both detection times per local setting
(or None for no detection).  Locality is structural: Alice's tables are
indexed by (her setting, lambda) only, and likewise for Bob.  Weights are
exact rationals so the verification module can evaluate inequalities
without floating point.

The simulator plays one lambda per trial slot.  Trials are spaced far
enough apart that tags from different trials can never be confused, which
makes the empirical counts converge to the exact per-trial probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .events import SITE_A, SITE_B, SettingSchedule, TagStream

DEFAULT_EXPLOIT_TAU_PS = 200_000
DEFAULT_EXPLOIT_DELTA_PS = 75_000

_NO_TIME = np.int64(np.iinfo(np.int64).min)


def _as_outcome_table(table, name: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    rows = tuple(tuple(int(v) for v in row) for row in table)
    if len(rows) != 2:
        raise ValueError(f"{name} needs one row per setting")
    for row in rows:
        for v in row:
            if v not in (0, 1):
                raise ValueError(f"{name} entries must be 0 or 1")
    return rows


def _as_time_table(table, name: str) -> tuple[tuple[int | None, ...], ...]:
    rows = tuple(tuple(None if v is None else int(v) for v in row) for row in table)
    if len(rows) != 2:
        raise ValueError(f"{name} needs one row per setting")
    return rows


@dataclass(frozen=True)
class LhvModel:
    """Hidden-variable table: weights, outcomes and detection times per setting.

    outcomes_a[j-1][l] is Alice's outcome under setting j for lambda index l;
    times_a[j-1][l] her detection time (ps, may be negative relative to the
    trial origin) or None.  A tag is emitted iff the outcome is 1 and the
    time is not None.
    """

    weights: tuple[Fraction, ...]
    outcomes_a: tuple[tuple[int, ...], tuple[int, ...]]
    outcomes_b: tuple[tuple[int, ...], tuple[int, ...]]
    times_a: tuple[tuple[int | None, ...], ...]
    times_b: tuple[tuple[int | None, ...], ...]
    label: str = ""

    def __post_init__(self) -> None:
        weights = tuple(Fraction(w) for w in self.weights)
        if not weights:
            raise ValueError("model needs at least one lambda")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if sum(weights) != 1:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "outcomes_a", _as_outcome_table(self.outcomes_a, "outcomes_a"))
        object.__setattr__(self, "outcomes_b", _as_outcome_table(self.outcomes_b, "outcomes_b"))
        object.__setattr__(self, "times_a", _as_time_table(self.times_a, "times_a"))
        object.__setattr__(self, "times_b", _as_time_table(self.times_b, "times_b"))
        n = len(weights)
        for table in (*self.outcomes_a, *self.outcomes_b, *self.times_a, *self.times_b):
            if len(table) != n:
                raise ValueError("all tables must cover every lambda")

    @property
    def n_lambdas(self) -> int:
        return len(self.weights)

    def max_abs_time_ps(self) -> int:
        values = [abs(t) for table in (*self.times_a, *self.times_b) for t in table
                  if t is not None]
        return max(values, default=0)

    def emits(self, site: str, setting: int, lam: int) -> tuple[bool, int | None]:
        """(tag emitted?, relative time) for one side of one trial."""
        outcomes = self.outcomes_a if site == SITE_A else self.outcomes_b
        times = self.times_a if site == SITE_A else self.times_b
        t = times[setting - 1][lam]
        return bool(outcomes[setting - 1][lam]) and t is not None, t

    def _arrays(self, site: str):
        outcomes = self.outcomes_a if site == SITE_A else self.outcomes_b
        times = self.times_a if site == SITE_A else self.times_b
        out = np.array(outcomes, dtype=bool)
        t = np.array([[_NO_TIME if v is None else v for v in row] for row in times],
                     dtype=np.int64)
        has = t != _NO_TIME
        return out & has, t

    def to_json_dict(self) -> dict:
        return {
            "weights": [str(w) for w in self.weights],
            "outcomes_a": [list(row) for row in self.outcomes_a],
            "outcomes_b": [list(row) for row in self.outcomes_b],
            "times_a": [list(row) for row in self.times_a],
            "times_b": [list(row) for row in self.times_b],
            "label": self.label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, data: dict) -> "LhvModel":
        return cls(weights=tuple(Fraction(w) for w in data["weights"]),
                   outcomes_a=data["outcomes_a"], outcomes_b=data["outcomes_b"],
                   times_a=data["times_a"], times_b=data["times_b"],
                   label=data.get("label", ""))


def build_exploit_model(delta_ps: int = DEFAULT_EXPLOIT_DELTA_PS,
                        tau_design_ps: int = DEFAULT_EXPLOIT_TAU_PS,
                        det_eff: Fraction = Fraction(9, 10)) -> LhvModel:
    """Local model that fakes a violation under moving-window analysis at tau_design.

    Alice delays her tag by +/-delta under setting 2, Bob by the opposite
    sign under his setting 2 (the sign is a fair hidden coin).  The (a2,b2)
    detections then sit 2*delta apart and fall outside the design window
    while every other combination stays inside, so those coincidences are
    silently discarded.  Detections additionally fail independently with
    probability 1 - det_eff, which keeps the simulated subset scatter
    non-degenerate.

    delta_ps = 0 returns the degenerate zero-delay model (no exploit).
    Otherwise 4*delta >= tau_design must hold, or the (a2,b2) pairs would
    still be caught; and 2*delta < tau_design, or the mixed combinations
    would fall outside their windows too.
    """
    eta = Fraction(det_eff)
    if not 0 < eta <= 1:
        raise ValueError("det_eff must lie in (0, 1]")
    if tau_design_ps <= 0 or tau_design_ps % 2:
        raise ValueError("tau_design_ps must be positive and even")
    delta_ps = int(delta_ps)
    if delta_ps < 0:
        raise ValueError("delta_ps must be non-negative")
    if delta_ps:
        if 4 * delta_ps < tau_design_ps:
            raise ValueError("delta too small relative to tau_design: "
                             "(a2,b2) separation 2*delta stays inside the window")
        if 2 * delta_ps >= tau_design_ps:
            raise ValueError("delta too large relative to tau_design: "
                             "mixed combinations would leave their windows")
    weights = []
    out_a = ([], [])
    out_b = ([], [])
    t_a = ([], [])
    t_b = ([], [])
    for sign in (1, -1):
        for det_a in (1, 0):
            for det_b in (1, 0):
                w_a = eta if det_a else 1 - eta
                w_b = eta if det_b else 1 - eta
                weights.append(Fraction(1, 2) * w_a * w_b)
                for j in (0, 1):
                    out_a[j].append(det_a)
                    out_b[j].append(det_b)
                t_a[0].append(0)
                t_a[1].append(sign * delta_ps)
                t_b[0].append(0)
                t_b[1].append(-sign * delta_ps)
    return LhvModel(tuple(weights), out_a, out_b, t_a, t_b,
                    label=f"exploit(delta={delta_ps},tau={tau_design_ps})")


@dataclass(frozen=True)
class RandomModelFamily:
    """Sampling bounds for the adversarial search; kept small for exact enumeration.

    Delays live on a +/-(delay_range_steps * delay_step_ps) grid.  With the
    defaults (grid +/-100 ns against the search's 200 ns windows) the family
    contains moving-window loophole models at a rate of roughly 2e-4, so a
    1e5-model search reliably finds negative CH margins while the slot and
    window-sum margins stay non-negative.
    """

    max_lambdas: int = 64
    weight_max: int = 15
    delay_step_ps: int = 50_000
    delay_range_steps: int = 2
    none_prob: float = 0.125

    def draw(self, rng: np.random.Generator, n_lambdas: int | None = None) -> LhvModel:
        n = int(n_lambdas) if n_lambdas else int(rng.integers(1, self.max_lambdas + 1))
        w = rng.integers(1, self.weight_max + 1, size=n)
        total = int(w.sum())
        weights = tuple(Fraction(int(v), total) for v in w)
        outcomes = rng.integers(0, 2, size=(4, n))
        steps = rng.integers(-self.delay_range_steps, self.delay_range_steps + 1, size=(4, n))
        missing = rng.random((4, n)) < self.none_prob
        times = []
        for row in range(4):
            times.append([None if missing[row, i] else int(steps[row, i]) * self.delay_step_ps
                          for i in range(n)])
        return LhvModel(weights,
                        outcomes_a=(outcomes[0].tolist(), outcomes[1].tolist()),
                        outcomes_b=(outcomes[2].tolist(), outcomes[3].tolist()),
                        times_a=(times[0], times[1]), times_b=(times[2], times[3]))


def shipped_models() -> dict[str, LhvModel]:
    """Fixed models exercised by the oracle-agreement and regression tests."""
    family = RandomModelFamily()
    small = family.draw(np.random.default_rng(101), n_lambdas=12)
    large = family.draw(np.random.default_rng(202), n_lambdas=48)
    return {
        "exploit-default": build_exploit_model(),
        "random-small": LhvModel(small.weights, small.outcomes_a, small.outcomes_b,
                                 small.times_a, small.times_b, label="random-small(seed=101)"),
        "random-large": LhvModel(large.weights, large.outcomes_a, large.outcomes_b,
                                 large.times_a, large.times_b, label="random-large(seed=202)"),
    }


def lhv_trial_schedule(n_trials: int, trial_spacing_ps: int,
                       trials_per_block: int = 250) -> SettingSchedule:
    """Blocks of trials_per_block trials cycling the four setting combinations."""
    if n_trials < 1 or trial_spacing_ps < 1 or trials_per_block < 1:
        raise ValueError("n_trials, trial_spacing_ps and trials_per_block must be positive")
    duration = n_trials * trial_spacing_ps
    block = trials_per_block * trial_spacing_ps
    starts = list(range(0, duration, block))
    a_vals = []
    b_vals = []
    for i, start in enumerate(starts):
        a, b = ((1, 1), (1, 2), (2, 1), (2, 2))[i % 4]
        a_vals.append(a)
        b_vals.append(b)
    intervals_a = _merge_runs(starts, duration, a_vals)
    intervals_b = _merge_runs(starts, duration, b_vals)
    return SettingSchedule(intervals_a, intervals_b, duration)


def _merge_runs(starts, duration, values):
    intervals = []
    for i, (start, value) in enumerate(zip(starts, values)):
        end = starts[i + 1] if i + 1 < len(starts) else duration
        if intervals and intervals[-1][2] == value:
            intervals[-1] = (intervals[-1][0], end, value)
        else:
            intervals.append((start, end, value))
    return tuple(intervals)


def simulate_lhv(model: LhvModel, n_trials: int, trial_spacing_ps: int,
                 schedule: SettingSchedule, seed: int):
    """Play the model once per trial slot; deterministic given the seed.

    Trial m draws lambda ~ weights, reads both scheduled settings at its
    origin (placed mid-slot so local delays never cross a schedule border),
    and emits a tag at origin + T(setting, lambda) whenever the outcome
    table says 1 and T is not None.  Spacing must exceed twice the largest
    |T| so trials cannot overlap; the schedule duration must equal
    n_trials * trial_spacing_ps.
    """
    max_t = model.max_abs_time_ps()
    if trial_spacing_ps <= 2 * max_t:
        raise ValueError("overlapping trials: spacing must exceed 2 * max |T|")
    duration = n_trials * trial_spacing_ps
    if schedule.duration_ps != duration:
        raise ValueError(f"schedule duration {schedule.duration_ps} != "
                         f"n_trials * trial_spacing_ps = {duration}")
    rng = np.random.default_rng(seed)
    p = np.array([float(w) for w in model.weights])
    p /= p.sum()
    lam = rng.choice(model.n_lambdas, size=n_trials, p=p)
    origins = (np.arange(n_trials, dtype=np.int64) * trial_spacing_ps
               + trial_spacing_ps // 2)
    streams = []
    for site in (SITE_A, SITE_B):
        settings = schedule.settings_at(site, origins).astype(np.int64)
        emits, times = model._arrays(site)
        active = emits[settings - 1, lam]
        tag_times = origins[active] + times[settings - 1, lam][active]
        tag_settings = settings[active].astype(np.uint8)
        if tag_times.size and not np.array_equal(
                schedule.settings_at(site, tag_times), tag_settings):
            raise ValueError("trial tags cross a setting boundary; "
                             "use larger blocks or smaller delays")
        streams.append(TagStream(site, tag_times, tag_settings, duration,
                                 f"lhv:{seed}", schedule.exposures()))
    return streams[0], streams[1], schedule
