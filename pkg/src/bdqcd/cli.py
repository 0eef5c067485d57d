"""Command line entry point: ``bdqcd {simulate,calibrate,theory,sweep,game}``.

Exit status is 0 on success, 1 on validation errors and 2 on runtime
failures. Result CSVs start with a versioned schema comment and every row
carries the config fingerprint.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

from . import asymptotics as asy
from .config import ExperimentConfig, load_config
from .distributions import HypothesisSet
from .errors import (
    ConfigurationError, DomainError, EstimationError, InvalidArgumentError, NumericError,
)
from .montecarlo import (
    calibrated_h, estimate_delay, estimate_false_metric, estimate_worst_delay, sweep,
)
from .scenario import AttackStrategy, FusionRule

CSV_SCHEMA = "# bdqcd-results v1"
CSV_COLUMNS = ("fingerprint", "axis", "value", "metric", "mean", "ci_halfwidth",
               "censor_fraction", "n", "theory", "ratio")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def fmt(x, precision=6):
    """Deterministic text form of a cell value."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, f".{precision}g")
    return str(x)


def result_row(fp, axis, value, metric, est, theory=None, precision=6):
    ratio = est.mean / theory if theory else None
    cells = (fp, axis, value, metric, est.mean, est.ci_halfwidth, est.censor_fraction, est.n,
             theory, ratio)
    return ",".join(fmt(c, precision) for c in cells)


def write_csv(rows, path=None, out=None):
    text = "\n".join([CSV_SCHEMA, ",".join(CSV_COLUMNS), *rows]) + "\n"
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        (out or sys.stdout).write(text)
    return text


def _theory_for(cfg: ExperimentConfig):
    sc = cfg.scenario
    return asy.theory_report(sc.hypotheses, sc.N, sc.M, sc.rule.kind, sc.rule.d, cfg.gamma)


def _write_theory(cfg, path):
    if path:
        with open(path + ".theory.json", "w", encoding="utf-8") as fh:
            json.dump(_theory_for(cfg).as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _metric(cfg: ExperimentConfig):
    """Run the configured metric; returns (metric name, estimate, theory)."""
    sc, w = cfg.scenario, cfg.workers
    if cfg.metric == "delay":
        est = estimate_delay(sc, workers=w)
        th = asy.theory_delay(sc, cfg.gamma)
    elif cfg.metric == "worst_delay":
        q, est = estimate_worst_delay(sc, workers=w)
        th = asy.theory_delay(sc, cfg.gamma) if cfg.gamma else asy.theory_delay(sc.with_(q_true=q))
    elif cfg.metric == "false_alarm":
        est = estimate_false_metric(sc, workers=w)
        th = _bound(sc)
    else:
        est = estimate_false_metric(sc, workers=w, target=cfg.isolation_target)
        th = None
    return cfg.metric, est, th


def _bound(sc, d=None, h=None):
    """False-alarm lower bound of the scenario's rule (None for the genie)."""
    kind = sc.rule.kind
    d = sc.rule.d if d is None else d
    h = sc.h if h is None else h
    if kind == "simultaneous":
        return asy.false_bound_simultaneous(sc.N, sc.M, d, h)
    if kind in ("multishot", "oneshot"):
        return asy.false_bound_multishot(sc.N, sc.M, d, h)
    return None


def cmd_simulate(args, out):
    cfg = load_config(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    name, est, th = _metric(cfg)
    path = args.csv or cfg.csv_path
    row = result_row(cfg.fingerprint, "none", "", name, est, th, cfg.precision)
    write_csv([row], path, out)
    _write_theory(cfg, path)
    p = cfg.precision
    flag = " (lower bound: censored trials counted at the horizon)" if est.lower_bound else ""
    print(f"{name}: mean={fmt(est.mean, p)} +/- {fmt(est.ci_halfwidth, p)} (n={est.n}, "
          f"censored={fmt(est.censor_fraction, p)}){flag}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args, out):
    cfg = load_config(args.config)
    if cfg.sweep_axis is None:
        raise ConfigurationError(["sweep: block missing from config"])
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    rows = sweep(cfg.scenario, cfg.sweep_axis, cfg.sweep_values, workers=cfg.workers,
                 false_metric=args.false_metric)
    lines, plot = [], []
    for r in rows:
        lines.append(result_row(cfg.fingerprint, r.axis, r.value, "delay", r.delay,
                                r.theory_delay, cfg.precision))
        plot.append((r.value, r.delay.mean, r.delay.ci_halfwidth))
        if r.false_metric is not None:
            lines.append(result_row(cfg.fingerprint, r.axis, r.value, "false_alarm",
                                    r.false_metric, _bound(cfg.scenario, r.d, r.h),
                                    cfg.precision))
    path = args.csv or cfg.csv_path
    write_csv(lines, path, out)
    _write_theory(cfg, path)
    if args.plot_data:
        with open(args.plot_data, "w", encoding="utf-8") as fh:
            fh.write("x,y,ci\n")
            for x, y, c in plot:
                fh.write(f"{fmt(x, cfg.precision)},{fmt(y, cfg.precision)},{fmt(c, cfg.precision)}\n")
    return EXIT_OK


def cmd_game(args, out):
    """Consensus rule against the reverse attack over a gamma grid."""
    cfg = load_config(args.config)
    sc = cfg.scenario
    gammas = tuple(args.gammas) if args.gammas else cfg.game_gammas
    if not gammas:
        raise ConfigurationError(["game: give gammas in the config or with --gammas"])
    base = sc.with_(rule=FusionRule("simultaneous", d=sc.N), attack=AttackStrategy("reverse"))
    theory = asy.theory_report(sc.hypotheses, sc.N, sc.M)
    target = asy.stackelberg_cost(sc.N, sc.M, theory)
    w = args.workers or cfg.workers
    lines = []
    print(f"stackelberg_cost={fmt(target, cfg.precision)}", file=sys.stderr)
    for g in gammas:
        s = base.with_(h=calibrated_h(base, g))
        delay = estimate_delay(s, workers=w)
        fm = estimate_false_metric(s, workers=w)
        cost = asy.leader_cost_empirical(delay, g, fm)
        lines.append(result_row(cfg.fingerprint, "gamma", g, "delay", delay,
                                asy.theory_delay(s, g), cfg.precision))
        lines.append(result_row(cfg.fingerprint, "gamma", g, "false_alarm", fm, g, cfg.precision))
        lines.append(",".join(fmt(c, cfg.precision) for c in (
            cfg.fingerprint, "gamma", g, "leader_cost", cost, None, None, delay.n, target,
            cost / target if target and math.isfinite(cost) else None)))
        print(f"gamma={fmt(g, cfg.precision)} h={fmt(s.h, cfg.precision)} "
              f"leader_cost={fmt(cost, cfg.precision)} stackelberg={fmt(target, cfg.precision)}",
              file=sys.stderr)
    write_csv(lines, args.csv or cfg.csv_path, out)
    return EXIT_OK


def cmd_calibrate(args, out):
    if args.rule == "simultaneous":
        h = asy.calibrate_h_simultaneous(args.gamma, args.N, args.M, args.d)
    else:
        h = asy.calibrate_h_multishot(args.gamma, args.N, args.M, args.d)
    print(fmt(h, args.precision), file=out)
    return EXIT_OK


def cmd_theory(args, out):
    if args.config:
        cfg = load_config(args.config)
        rep = _theory_for(cfg)
    else:
        if not args.means:
            raise ConfigurationError(["theory: give a config file or --means"])
        hs = HypothesisSet.gaussian_means(args.means, args.variance)
        hs.validate()
        rep = asy.theory_report(hs, args.N, args.M, args.rule, args.d, args.gamma)
    json.dump(rep.as_dict(), out, indent=2, sort_keys=True)
    out.write("\n")
    return EXIT_OK


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="bdqcd", description=(
        "Byzantine distributed quickest change detection: simulation and theory."))
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="estimate one metric for one scenario")
    s.add_argument("config")
    s.add_argument("--csv", help="write CSV here instead of stdout")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run the config's sweep block")
    s.add_argument("config")
    s.add_argument("--csv")
    s.add_argument("--workers", type=int)
    s.add_argument("--false-metric", action="store_true",
                   help="also estimate the mean time to false alarm per row")
    s.add_argument("--plot-data", help="write x,y,ci triples for external plotting")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("game", help="consensus rule vs reverse attack over a gamma grid")
    s.add_argument("config")
    s.add_argument("--gammas", type=_floats, help="comma-separated gamma values")
    s.add_argument("--csv")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("calibrate", help="local threshold for a false-alarm target")
    s.add_argument("--rule", choices=("simultaneous", "multishot"), default="simultaneous")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--M", type=int, default=0)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--precision", type=int, default=6)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("theory", help="print the theory report as JSON")
    s.add_argument("config", nargs="?")
    s.add_argument("--means", type=_floats, help="Gaussian means P_0,...,P_Q")
    s.add_argument("--variance", type=float, default=1.0)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--M", type=int, default=0)
    s.add_argument("--rule", choices=("simultaneous", "multishot", "oneshot", "genie"))
    s.add_argument("--d", type=int)
    s.add_argument("--gamma", type=float)
    s.set_defaults(func=cmd_theory)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ConfigurationError as exc:
        for prob in exc.problems:
            print(f"error: {prob}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvalidArgumentError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EstimationError, NumericError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
