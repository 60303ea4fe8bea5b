"""Exact, simulation-free evaluation of the inequalities on finite models.

Every quantity is a weighted count over the finite hidden-variable table,
accumulated in integer arithmetic over a common weight denominator and only
converted to Fraction at the end, so margin signs never depend on floating
point.  The margin of an inequality is RHS - LHS: the slot and window-sum
margins are non-negative for every local model (the per-lambda contribution
is itself non-negative), while the plain moving-window combination can go
negative - that is the loophole this toolkit demonstrates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coincidence import METHOD_MOVING, METHOD_SLOTS, METHOD_WINSUM, AnalysisConfig
from .events import COMBINATIONS
from .lhv import LhvModel, RandomModelFamily

THEOREM_CH = "CH"
THEOREM_SLOTS = "slots"
THEOREM_WINSUM = "window_sum"
THEOREMS = (THEOREM_CH, THEOREM_SLOTS, THEOREM_WINSUM)

_THEOREM_METHOD = {THEOREM_CH: METHOD_MOVING, THEOREM_SLOTS: METHOD_SLOTS,
                   THEOREM_WINSUM: METHOD_WINSUM}


@dataclass(frozen=True)
class ExactTable:
    """Exact per-trial probabilities entering one inequality.

    p_joint[(j,k)] = P(both outcomes 1 and the pair identified as a
    coincidence under the configured method); p_a1 / p_b1 are the singles
    terms the method's inequality uses.  margin = RHS - LHS.
    """

    method: str
    p_a1: Fraction
    p_b1: Fraction
    p_joint: dict[tuple[int, int], Fraction]
    margin: Fraction


def _scaled_weights(model: LhvModel) -> tuple[list[int], int]:
    denom = math.lcm(*(w.denominator for w in model.weights))
    scaled = [int(w.numerator * (denom // w.denominator)) for w in model.weights]
    return scaled, denom


def _coincident(t_a: int | None, t_b: int | None, config: AnalysisConfig,
                setting_a: int, setting_b: int) -> bool:
    """Timing predicate for one combination; missing times never coincide."""
    if t_a is None or t_b is None:
        return False
    if config.method == METHOD_SLOTS:
        tau, off = config.tau_ps, config.slot_offset_ps
        return (t_a - off) // tau == (t_b - off) // tau
    return 2 * abs(t_a - t_b) < config.window_ps(setting_a, setting_b)


def exact_counts(model: LhvModel, config: AnalysisConfig) -> ExactTable:
    """Weighted enumeration of the model under one analysis config.

    Times in the model are relative to a common trial origin; for the slot
    method the slot grid is anchored to that origin (trial origins congruent
    to the offset modulo tau in the simulator reproduce this exactly).
    """
    weights, denom = _scaled_weights(model)
    acc_a1 = acc_b1 = 0
    acc_joint = {comb: 0 for comb in COMBINATIONS}
    for lam, w in enumerate(weights):
        if w == 0:
            continue
        det_a1 = model.outcomes_a[0][lam] and model.times_a[0][lam] is not None
        det_b1 = model.outcomes_b[0][lam] and model.times_b[0][lam] is not None
        acc_a1 += w * det_a1
        acc_b1 += w * det_b1
        for j, k in COMBINATIONS:
            if not (model.outcomes_a[j - 1][lam] and model.outcomes_b[k - 1][lam]):
                continue
            if _coincident(model.times_a[j - 1][lam], model.times_b[k - 1][lam],
                           config, j, k):
                acc_joint[(j, k)] += w
    acc_margin = (acc_a1 + acc_b1 - acc_joint[(1, 1)] - acc_joint[(1, 2)]
                  - acc_joint[(2, 1)] + acc_joint[(2, 2)])
    return ExactTable(
        method=config.method,
        p_a1=Fraction(acc_a1, denom),
        p_b1=Fraction(acc_b1, denom),
        p_joint={comb: Fraction(v, denom) for comb, v in acc_joint.items()},
        margin=Fraction(acc_margin, denom))


def check_theorem(model: LhvModel, config: AnalysisConfig, which: str) -> Fraction:
    """Exact margin (RHS - LHS) of the requested inequality.

    which="slots" and which="window_sum" are guaranteed non-negative for
    every valid model; which="CH" evaluated with moving-window coincidence
    sets may be negative.  The config's method must match the theorem.
    """
    if which not in THEOREMS:
        raise ValueError(f"unknown theorem {which!r}, expected one of {THEOREMS}")
    if config.method != _THEOREM_METHOD[which]:
        raise ValueError(f"theorem {which!r} needs method {_THEOREM_METHOD[which]!r}, "
                         f"config has {config.method!r}")
    return exact_counts(model, config).margin


def _margins_scaled(model: LhvModel, tau_ps: int, slot_offset_ps: int,
                    theorems: tuple[str, ...]) -> dict[str, Fraction]:
    """All requested margins in one pass over lambda; agrees with check_theorem."""
    weights, denom = _scaled_weights(model)
    tau, off = tau_ps, slot_offset_ps
    win22 = 3 * tau_ps  # window_sum a2b2 window with all three taus equal
    want_ch = THEOREM_CH in theorems
    want_slots = THEOREM_SLOTS in theorems
    want_winsum = THEOREM_WINSUM in theorems
    oa1, oa2 = model.outcomes_a
    ob1, ob2 = model.outcomes_b
    ta1, ta2 = model.times_a
    tb1, tb2 = model.times_b
    acc_ch = acc_slots = acc_winsum = 0
    for lam, w in enumerate(weights):
        if w == 0:
            continue
        u1, u2, v1, v2 = ta1[lam], ta2[lam], tb1[lam], tb2[lam]
        p11 = bool(oa1[lam] and ob1[lam]) and u1 is not None and v1 is not None
        p12 = bool(oa1[lam] and ob2[lam]) and u1 is not None and v2 is not None
        p21 = bool(oa2[lam] and ob1[lam]) and u2 is not None and v1 is not None
        p22 = bool(oa2[lam] and ob2[lam]) and u2 is not None and v2 is not None
        base = ((1 if oa1[lam] and u1 is not None else 0)
                + (1 if ob1[lam] and v1 is not None else 0))
        if want_ch:
            c = base
            if p11 and 2 * abs(u1 - v1) < tau: c -= 1
            if p12 and 2 * abs(u1 - v2) < tau: c -= 1
            if p21 and 2 * abs(u2 - v1) < tau: c -= 1
            if p22 and 2 * abs(u2 - v2) < tau: c += 1
            acc_ch += w * c
        if want_slots:
            c = base
            if p11 and (u1 - off) // tau == (v1 - off) // tau: c -= 1
            if p12 and (u1 - off) // tau == (v2 - off) // tau: c -= 1
            if p21 and (u2 - off) // tau == (v1 - off) // tau: c -= 1
            if p22 and (u2 - off) // tau == (v2 - off) // tau: c += 1
            acc_slots += w * c
        if want_winsum:
            c = base
            if p11 and 2 * abs(u1 - v1) < tau: c -= 1
            if p12 and 2 * abs(u1 - v2) < tau: c -= 1
            if p21 and 2 * abs(u2 - v1) < tau: c -= 1
            if p22 and 2 * abs(u2 - v2) < win22: c += 1
            acc_winsum += w * c
    values = {THEOREM_CH: acc_ch, THEOREM_SLOTS: acc_slots, THEOREM_WINSUM: acc_winsum}
    return {which: Fraction(values[which], denom) for which in theorems}


@dataclass(frozen=True)
class MethodWorstCase:
    min_margin: Fraction
    argmin_index: int
    argmin_model: LhvModel


@dataclass
class SearchReport:
    n_models: int
    seed: int
    results: dict[str, MethodWorstCase]

    def to_json_dict(self) -> dict:
        out = {"n_models": self.n_models, "seed": self.seed, "results": {}}
        for which, worst in self.results.items():
            out["results"][which] = {
                "min_margin": str(worst.min_margin),
                "min_margin_float": float(worst.min_margin),
                "argmin_index": worst.argmin_index,
                "argmin_model_dump": worst.argmin_model.to_json_dict(),
            }
        return out


def random_model_search(n_models: int, family: RandomModelFamily | None = None, *,
                        seed: int = 0, theorems: tuple[str, ...] = THEOREMS,
                        tau_ps: int = 200_000, slot_offset_ps: int = 0) -> SearchReport:
    """Evaluate the inequalities exactly on n_models random finite models.

    Models are drawn from RandomModelFamily (its defaults document the
    regression-anchor family: lambda count uniform up to 64, integer
    weights, fair outcome bits, delays on a +/-6 x 50 ns grid with 1/8
    missing).  Returns the per-theorem worst case; slot and window-sum
    minima must be >= 0, the moving-window CH minimum is typically < 0.
    """
    family = family or RandomModelFamily()
    _check_window_params(tau_ps, slot_offset_ps)
    for which in theorems:
        if which not in THEOREMS:
            raise ValueError(f"unknown theorem {which!r}")
    rng = np.random.default_rng(seed)
    worst: dict[str, MethodWorstCase] = {}
    for i in range(n_models):
        model = family.draw(rng)
        margins = _margins_scaled(model, tau_ps, slot_offset_ps, theorems)
        for which, margin in margins.items():
            if which not in worst or margin < worst[which].min_margin:
                worst[which] = MethodWorstCase(margin, i, model)
    return SearchReport(n_models, seed, worst)


def _check_window_params(tau_ps: int, slot_offset_ps: int) -> None:
    # Reuse the config validation (evenness, positivity) once up front.
    AnalysisConfig.slots(tau_ps, slot_offset_ps)
    AnalysisConfig.winsum(tau_ps, tau_ps, tau_ps)
