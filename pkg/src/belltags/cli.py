"""Batch command line: simulate, analyze, sweep, verify, exploit-demo.

Every subcommand is deterministic given its config and seed; all randomness
flows from the seed, never from ambient entropy.  Exit codes: 0 success,
1 validation / malformed input, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import estimator, lhv, quantum, tagio, verify
from .coincidence import METHOD_MOVING, METHOD_SLOTS, METHOD_WINSUM, AnalysisConfig, count_coincidences

METHOD_ALIASES = {"moving": METHOD_MOVING, "slots": METHOD_SLOTS, "winsum": METHOD_WINSUM}

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="belltags",
                                     description="Coincidence analysis for time-tagged Bell-test data")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate tag/schedule files from a JSON config")
    sim.add_argument("--config", required=True, help="JSON config (kind: spdc | lhv | exploit)")
    sim.add_argument("--out", required=True, help="tag file path; schedule goes to a sidecar")
    sim.add_argument("--format", choices=tagio.FORMATS, default="binary")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")

    ana = sub.add_parser("analyze", help="J statistic with subset sigma for one method")
    _add_analysis_args(ana)
    ana.add_argument("--out", default=None, help="write the JSON report here (default stdout)")
    ana.add_argument("--pairs-out", default=None,
                     help="audit CSV of matched pairs (moving/winsum only)")

    swp = sub.add_parser("sweep", help="J(tau) grid for one method, CSV output")
    _add_analysis_args(swp, tau_required=False)
    swp.add_argument("--taus", required=True,
                     help="comma-separated ascending window/slot sizes in ps")
    swp.add_argument("--out", required=True, help="CSV output path")

    ver = sub.add_parser("verify", help="exact theorem margins over random finite models")
    ver.add_argument("--models", type=int, required=True)
    ver.add_argument("--method", choices=sorted(METHOD_ALIASES), default="slots")
    ver.add_argument("--tau", type=int, default=200_000)
    ver.add_argument("--offset", type=int, default=0)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--max-lambdas", type=int, default=64)
    ver.add_argument("--out", default=None)

    dem = sub.add_parser("exploit-demo",
                         help="simulate the shipped loophole model and analyze it three ways")
    dem.add_argument("--delta", type=int, default=lhv.DEFAULT_EXPLOIT_DELTA_PS)
    dem.add_argument("--tau", type=int, default=lhv.DEFAULT_EXPLOIT_TAU_PS)
    dem.add_argument("--trials", type=int, default=1_000_000)
    dem.add_argument("--subsets", type=int, default=estimator.DEFAULT_SUBSETS)
    dem.add_argument("--seed", type=int, default=0)
    dem.add_argument("--out", default=None)
    return parser


def _add_analysis_args(cmd: argparse.ArgumentParser, tau_required: bool = True) -> None:
    cmd.add_argument("--tags", required=True, help="tag file (schedule sidecar is derived)")
    cmd.add_argument("--format", choices=tagio.FORMATS, default="binary")
    cmd.add_argument("--method", choices=sorted(METHOD_ALIASES), required=True)
    if tau_required:
        cmd.add_argument("--tau", type=int, default=None, help="window / slot size in ps")
        cmd.add_argument("--tau1", type=int, default=None)
        cmd.add_argument("--tau2", type=int, default=None)
        cmd.add_argument("--tau3", type=int, default=None)
    cmd.add_argument("--offset", type=int, default=0, help="slot grid offset in ps")
    cmd.add_argument("--subsets", type=int, default=estimator.DEFAULT_SUBSETS)
    cmd.add_argument("--single-combination-singles", action="store_true",
                     help="use the (a1,b1) singles instead of the two-combination mean")
    cmd.add_argument("--no-exposure-normalization", action="store_true")


def _analysis_config(args) -> AnalysisConfig:
    method = METHOD_ALIASES[args.method]
    if method == METHOD_WINSUM:
        if args.tau1 is not None or args.tau2 is not None or args.tau3 is not None:
            if None in (args.tau1, args.tau2, args.tau3):
                raise ValueError("winsum needs all of --tau1/--tau2/--tau3 (or just --tau)")
            return AnalysisConfig.winsum(args.tau1, args.tau2, args.tau3)
        if args.tau is None:
            raise ValueError("winsum needs --tau or --tau1/--tau2/--tau3")
        return AnalysisConfig.winsum(args.tau, args.tau, args.tau)
    if args.tau is None:
        raise ValueError(f"{args.method} needs --tau")
    if method == METHOD_SLOTS:
        return AnalysisConfig.slots(args.tau, args.offset)
    return AnalysisConfig.moving(args.tau)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_simulate(args) -> int:
    config = json.loads(Path(args.config).read_text())
    kind = config.get("kind")
    if args.seed is not None:
        config["seed"] = args.seed
    if kind == "spdc":
        spdc = quantum.SpdcConfig.from_dict(config)
        stream_a, stream_b, schedule = quantum.simulate_spdc(spdc)
    elif kind in ("lhv", "exploit"):
        if kind == "exploit":
            model = lhv.build_exploit_model(config.get("delta_ps", lhv.DEFAULT_EXPLOIT_DELTA_PS),
                                            config.get("tau_design_ps", lhv.DEFAULT_EXPLOIT_TAU_PS))
        else:
            model = lhv.LhvModel.from_json_dict(config["model"])
        n_trials = int(config["n_trials"])
        spacing = int(config["trial_spacing_ps"])
        schedule = lhv.lhv_trial_schedule(n_trials, spacing,
                                          int(config.get("trials_per_block", 250)))
        stream_a, stream_b, schedule = lhv.simulate_lhv(model, n_trials, spacing, schedule,
                                                        int(config.get("seed", 0)))
    else:
        raise ValueError(f"config kind must be spdc, lhv or exploit, got {kind!r}")
    tagio.write_tags(stream_a, stream_b, schedule, args.out, args.format)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    stream_a, stream_b, schedule = tagio.read_tags(args.tags, args.format)
    config = _analysis_config(args)
    kwargs = dict(averaged_singles=not args.single_combination_singles,
                  normalize_exposure=not args.no_exposure_normalization)
    counts = count_coincidences(stream_a, stream_b, schedule, config,
                                collect_pairs=args.pairs_out is not None)
    j = estimator.j_statistic(counts, **kwargs)
    try:
        stat = estimator.sigma_estimate(stream_a, stream_b, schedule, config,
                                        args.subsets, **kwargs)
        sigma, z, subset_j = stat.sigma, stat.z, stat.subset_j
    except estimator.InsufficientDataError:
        sigma, z, subset_j = None, None, []
    if args.pairs_out:
        counts.write_pairs_csv(args.pairs_out)
    _emit({"J": j, "sigma": sigma, "z": z, "n_subsets": args.subsets,
           "subset_J": subset_j, "counts": counts.to_dict(),
           "config": {**config.params(), "subsets": args.subsets, **kwargs,
                      "tags": str(args.tags)}},
          args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    stream_a, stream_b, schedule = tagio.read_tags(args.tags, args.format)
    taus = [int(t) for t in args.taus.split(",") if t.strip()]
    result = estimator.sweep_tau(
        stream_a, stream_b, schedule, METHOD_ALIASES[args.method], taus,
        slot_offset_ps=args.offset, n_subsets=args.subsets,
        averaged_singles=not args.single_combination_singles,
        normalize_exposure=not args.no_exposure_normalization)
    result.to_csv(args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    which = {"moving": verify.THEOREM_CH, "slots": verify.THEOREM_SLOTS,
             "winsum": verify.THEOREM_WINSUM}[args.method]
    family = lhv.RandomModelFamily(max_lambdas=args.max_lambdas)
    report = verify.random_model_search(args.models, family, seed=args.seed,
                                        theorems=(which,), tau_ps=args.tau,
                                        slot_offset_ps=args.offset)
    payload = {"method": which, "n_models": args.models, "seed": args.seed}
    if report.results:
        worst = report.results[which]
        payload["min_margin"] = str(worst.min_margin)
        payload["min_margin_float"] = float(worst.min_margin)
        payload["argmin_model_dump"] = worst.argmin_model.to_json_dict()
    else:
        payload["min_margin"] = None
        payload["argmin_model_dump"] = None
    _emit(payload, args.out)
    return EXIT_OK


def _cmd_exploit_demo(args) -> int:
    model = lhv.build_exploit_model(args.delta, args.tau)
    spacing = 4 * args.tau
    schedule = lhv.lhv_trial_schedule(args.trials, spacing)
    stream_a, stream_b, schedule = lhv.simulate_lhv(model, args.trials, spacing,
                                                    schedule, args.seed)
    exact = {
        "CH": verify.check_theorem(model, AnalysisConfig.moving(args.tau), "CH"),
        "slots": verify.check_theorem(model, AnalysisConfig.slots(args.tau), "slots"),
        "window_sum": verify.check_theorem(
            model, AnalysisConfig.winsum(args.tau, args.tau, args.tau), "window_sum"),
    }
    print(f"exact per-trial margins at tau={args.tau} ps: "
          + ", ".join(f"{name}={margin} ({float(margin):+.4f})"
                      for name, margin in exact.items()))
    results = {}
    for config in (AnalysisConfig.moving(args.tau), AnalysisConfig.slots(args.tau),
                   AnalysisConfig.winsum(args.tau, args.tau, args.tau)):
        stat = estimator.sigma_estimate(stream_a, stream_b, schedule, config, args.subsets)
        results[config.method] = stat
        z_text = "undefined" if stat.z is None else f"{stat.z:+.2f}"
        print(f"{config.method:<14} J={stat.j:+12.1f}  sigma={stat.sigma:10.2f}  z={z_text}")
    if args.out:
        _emit({"tau_ps": args.tau, "delta_ps": args.delta, "trials": args.trials,
               "seed": args.seed,
               "exact_margins": {k: str(v) for k, v in exact.items()},
               "analysis": {name: stat.to_dict() for name, stat in results.items()}},
              args.out)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "exploit-demo": _cmd_exploit_demo,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
