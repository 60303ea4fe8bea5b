"""Count-form inequality statistic and its uncertainty.

The headline number is J = S_A1 + S_B1 - C11 - C12 - C21 + C22, where the
singles terms average the two combinations each marginal appears in.  Local
realism keeps J >= 0, so a significantly negative J is a violation.  The
spread is estimated by splitting the run into equal-duration contiguous
subsets, computing J per subset, and scaling the unbiased sample standard
deviation up to the full sum.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .coincidence import (METHOD_MOVING, METHOD_SLOTS, METHOD_WINSUM, AnalysisConfig,
                          CoincidenceCounts, count_blocks, count_coincidences)
from .events import SettingSchedule, TagStream

DEFAULT_SUBSETS = 30


class InsufficientDataError(ValueError):
    """Run too short to form the requested subset estimate."""


def j_statistic(counts: CoincidenceCounts, *, averaged_singles: bool = True,
                normalize_exposure: bool = True) -> float:
    """Evaluate J from one set of tallies.

    averaged_singles=False uses the (a1,b1) combination alone for both
    singles terms instead of the two-combination mean.  With
    normalize_exposure, combinations with unequal exposure have their
    singles rescaled to the mean exposure before averaging; coincidence
    terms are never rescaled.
    """
    sa = counts.singles_a.astype(np.float64)
    sb = counts.singles_b.astype(np.float64)
    if normalize_exposure:
        expo = counts.exposure_ps.astype(np.float64)
        if np.ptp(expo) > 0:
            nonzero = expo > 0
            if ((counts.singles_a[~nonzero] > 0) | (counts.singles_b[~nonzero] > 0)).any():
                raise ValueError("singles recorded in a combination with zero exposure")
            factor = np.ones((2, 2))
            factor[nonzero] = expo.mean() / expo[nonzero]
            sa = sa * factor
            sb = sb * factor
    if averaged_singles:
        s_a1 = (sa[0, 0] + sa[0, 1]) / 2.0
        s_b1 = (sb[0, 0] + sb[1, 0]) / 2.0
    else:
        s_a1 = sa[0, 0]
        s_b1 = sb[0, 0]
    c = counts.c
    return float(s_a1 + s_b1 - c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1])


@dataclass
class JStatistic:
    """Headline J with its subset-based uncertainty."""

    j: float
    sigma: float | None
    n_subsets: int
    subset_j: list[float]
    method: str
    params: dict = field(default_factory=dict)

    @property
    def z(self) -> float | None:
        if self.sigma is None or self.sigma == 0.0:
            return None
        return self.j / self.sigma

    def to_dict(self) -> dict:
        return {"J": self.j, "sigma": self.sigma, "z": self.z,
                "n_subsets": self.n_subsets, "subset_J": list(self.subset_j),
                "method": self.method, "params": dict(self.params)}


def sigma_from_subset_js(subset_j: list[float]) -> float:
    """sqrt(n) times the unbiased sample standard deviation of the subset Js.

    The full-run J is (up to border pairs) the sum of the n subset values,
    so its variance estimate is n times the per-subset variance.
    """
    n = len(subset_j)
    if n < 2:
        raise InsufficientDataError("need at least 2 subsets for a spread estimate")
    return math.sqrt(n) * statistics.stdev(subset_j)


def subset_edges(duration_ps: int, n_subsets: int) -> list[tuple[int, int]]:
    """Equal-duration contiguous blocks; remainder time past the last edge is dropped."""
    if n_subsets < 2:
        raise ValueError("need at least 2 subsets")
    block = duration_ps // n_subsets
    if block <= 0:
        raise InsufficientDataError("insufficient data for subset estimate")
    return [(i * block, (i + 1) * block) for i in range(n_subsets)]


def sigma_estimate(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule,
                   config: AnalysisConfig, n_subsets: int = DEFAULT_SUBSETS, *,
                   averaged_singles: bool = True, normalize_exposure: bool = True) -> JStatistic:
    """Full-run J plus a subset-scatter estimate of its standard deviation.

    The run is split into n_subsets equal-duration contiguous blocks; J is
    computed per block and sigma = sqrt(n) * s with s the unbiased sample
    standard deviation (the full J is a sum of n block Js, so its variance
    is n times the block variance).  The headline J always comes from the
    full-run counts, which also include pairs the block borders would cut.
    """
    edges = subset_edges(schedule.duration_ps, n_subsets)
    full = count_coincidences(stream_a, stream_b, schedule, config)
    j_full = j_statistic(full, averaged_singles=averaged_singles,
                         normalize_exposure=normalize_exposure)
    blocks = count_blocks(stream_a, stream_b, schedule, config, edges)
    subset_j = [j_statistic(b, averaged_singles=averaged_singles,
                            normalize_exposure=normalize_exposure) for b in blocks]
    sigma = sigma_from_subset_js(subset_j)
    return JStatistic(j_full, sigma, n_subsets, subset_j, config.method, config.params())


@dataclass
class SweepResult:
    """J(tau) rows for one method; grid strictly increasing in tau_ps."""

    method: str
    rows: list[tuple[int, float, float | None]]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("tau_ps,method,J,sigma\n")
            for tau, j, sigma in self.rows:
                sigma_text = "" if sigma is None else repr(sigma)
                fh.write(f"{tau},{self.method},{j!r},{sigma_text}\n")


def config_for_tau(method: str, tau_ps: int, slot_offset_ps: int = 0) -> AnalysisConfig:
    """Single-tau config: window_sum uses all three windows equal to tau."""
    if method == METHOD_MOVING:
        return AnalysisConfig.moving(tau_ps)
    if method == METHOD_SLOTS:
        return AnalysisConfig.slots(tau_ps, slot_offset_ps)
    if method == METHOD_WINSUM:
        return AnalysisConfig.winsum(tau_ps, tau_ps, tau_ps)
    raise ValueError(f"unknown method {method!r}")


def sweep_tau(stream_a: TagStream, stream_b: TagStream, schedule: SettingSchedule,
              method: str, tau_grid: list[int], *, slot_offset_ps: int = 0,
              n_subsets: int = DEFAULT_SUBSETS, averaged_singles: bool = True,
              normalize_exposure: bool = True) -> SweepResult:
    """Evaluate (J, sigma) on an ascending grid of window / slot sizes."""
    grid = [int(t) for t in tau_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("tau grid must be strictly increasing")
    rows = []
    for tau in grid:
        config = config_for_tau(method, tau, slot_offset_ps)
        stat = sigma_estimate(stream_a, stream_b, schedule, config, n_subsets,
                              averaged_singles=averaged_singles,
                              normalize_exposure=normalize_exposure)
        rows.append((tau, stat.j, stat.sigma))
    return SweepResult(method, rows)
