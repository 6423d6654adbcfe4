"""Command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 model-level negative
finding (falsified model, infeasible assumptions, weak instrument for the
sensitivity analysis).  Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import CAP_AT, CAP_NT, AssumptionSet, ate_bounds, bounds_curve, check_instrumental_inequalities
from .estimators import StrataEffectRanges, WeakInstrumentError, ate_sensitivity, iv_estimates
from .io import (
    InputError,
    LoadedData,
    counts_records,
    counts_tsv,
    law_records,
    law_tsv,
    read_data,
    read_scenario,
)
from .model import law_from_counts, monotone_mle
from .report import (
    AnalysisReport,
    assumptions_dict,
    bounds_dict,
    estimates_dict,
    findings_list,
    fmt,
    num,
    sensitivity_dict,
)
from .simulate import FrechetError, ProxyScenario, run_scenario, sample_replicates, scenario_from_dict

EXIT_OK, EXIT_INPUT, EXIT_MODEL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text}")
    return value


def _effect_range(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}") from None
    if not -1.0 <= lo <= hi <= 1.0:
        raise argparse.ArgumentTypeError(f"need -1 <= lo <= hi <= 1, got {text!r}")
    return lo, hi


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            grid = [round(start + i * step, 12) for i in range(count)]
            grid = [g for g in grid if g <= stop + 1e-12]
        else:
            grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step or a,b,c") from None
    if not grid:
        raise argparse.ArgumentTypeError("grid is empty")
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise argparse.ArgumentTypeError("grid values must lie in [0, 1]")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise argparse.ArgumentTypeError("grid must be strictly increasing")
    return grid


def _inputs_echo(data: LoadedData, **extra) -> dict:
    out = {"source_format": data.source_format}
    if data.counts is not None:
        out["counts"] = counts_records(data.counts)
    out["law"] = law_records(data.law)
    out.update(extra)
    return out


def _emit(text: str) -> None:
    sys.stdout.write(text)


# check ------------------------------------------------------------------------


def cmd_check(args) -> int:
    data = read_data(args.input)
    report = check_instrumental_inequalities(data.law)
    findings = findings_list(report)
    status = "pass" if report.ok else "falsified"
    rep = AnalysisReport("check", _inputs_echo(data), findings=findings, extra={"status": status})
    if args.format == "json":
        _emit(rep.to_json())
    elif args.format == "tsv":
        _emit("severity\tcode\tmessage\n" + "".join(f"{f['severity']}\t{f['code']}\t{f['message']}\n" for f in findings))
    else:
        lines = [f"instrumental inequalities: {status}"] + [f"  {f['message']}" for f in findings]
        _emit("\n".join(lines) + "\n")
    for f in report.fatal:
        print(f"ivpi check: {f.message}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_MODEL


# bounds -----------------------------------------------------------------------


def cmd_bounds(args) -> int:
    data = read_data(args.input)
    requested = AssumptionSet(args.monotonicity, args.cap_nt, args.cap_at)
    findings = findings_list(check_instrumental_inequalities(data.law))

    # Under monotonicity, counts are summarized by their constrained MLE so
    # that sampling noise alone cannot make the model infeasible.
    law, law_label, projection = data.law, "empirical", None
    if args.monotonicity and data.counts is not None and not args.raw_law:
        fit = monotone_mle(data.counts)
        projection = {
            "method": "maximum likelihood under no defiers",
            "pooled_cells": [{"x": x, "y": y} for x, y in fit.pooled_cells],
            "loglik_gap": fit.loglik_gap,
            "max_abs_shift": fit.max_shift,
            "law": law_records(fit.law),
        }
        if fit.projected:
            law, law_label = fit.law, "monotone_mle"
            cells = ", ".join(f"(x={x},y={y})" for x, y in fit.pooled_cells)
            msg = (f"empirical law violates monotonicity; cells {cells} pooled across arms "
                   f"(max shift {fit.max_shift:.2g}, log-likelihood gap {fit.loglik_gap:.3g})")
            findings.append({"severity": "warning", "code": "monotone_projection", "message": msg})
            print(f"ivpi bounds: {msg}", file=sys.stderr)

    sets = [(AssumptionSet(), data.law, "empirical")]
    if requested != AssumptionSet():
        sets.append((requested, law if requested.monotonicity else data.law,
                     law_label if requested.monotonicity else "empirical"))
    results = [(ate_bounds(lw, a), label) for a, lw, label in sets]

    sweep = None
    if args.sweep_nt or args.sweep_at:
        cap_name, grid = (CAP_NT, args.sweep_nt) if args.sweep_nt else (CAP_AT, args.sweep_at)
        sweep_law = law if requested.monotonicity else data.law
        curve = bounds_curve(sweep_law, requested, cap_name, grid)
        sweep = {
            "cap": cap_name,
            "base": assumptions_dict(requested),
            "rows": [{"eps": eps, "status": r.status, "lower": num(r.lower), "upper": num(r.upper)} for eps, r in curve],
        }

    est = iv_estimates(data.law)
    rep = AnalysisReport(
        "bounds",
        _inputs_echo(data, assumptions=assumptions_dict(requested), raw_law=bool(args.raw_law)),
        estimates=estimates_dict(est),
        bounds=[bounds_dict(r, label) for r, label in results],
        sweep=sweep,
        findings=findings,
    )
    if projection is not None:
        rep.extra["monotone_fit"] = projection

    table = _bounds_table(rep)
    if args.tsv:
        Path(args.tsv).write_text(table)
    if args.format == "json":
        _emit(rep.to_json())
    elif args.format == "tsv":
        _emit(table)
    else:
        _emit(_bounds_text(rep))

    if args.figure:
        from . import plotting

        if sweep is not None:
            rows = [(r["eps"], r["lower"] and r["lower"]["value"], r["upper"] and r["upper"]["value"]) for r in sweep["rows"]]
            label = "never-taker risk cap" if sweep["cap"] == CAP_NT else "always-taker risk cap"
            plotting.plot_sweep(rows, label, args.figure, est.wald)
        else:
            plotting.plot_intervals(
                [b["label"] for b in rep.bounds],
                [(b["lower"]["value"], b["upper"]["value"]) if b["status"] == "bounded" else None for b in rep.bounds],
                args.figure,
                est.wald,
            )

    infeasible = [r for r, _ in results if not r.bounded]
    if sweep is not None:
        infeasible += [row for row in sweep["rows"] if row["status"] != "bounded"]
    if infeasible:
        print("ivpi bounds: model falsified: no response-type distribution reproduces the law under "
              "the stated assumptions", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def _bounds_table(rep: AnalysisReport) -> str:
    if rep.sweep is not None:
        col = "cap_nt" if rep.sweep["cap"] == CAP_NT else "cap_at"
        lines = [f"{col}\tlower\tupper\tstatus"]
        for row in rep.sweep["rows"]:
            lo = repr(row["lower"]["value"]) if row["lower"] else "NA"
            hi = repr(row["upper"]["value"]) if row["upper"] else "NA"
            lines.append(f"{row['eps']!r}\t{lo}\t{hi}\t{row['status']}")
        return "\n".join(lines) + "\n"
    lines = ["assumptions\tlaw\tlower\tupper\tstatus"]
    for b in rep.bounds:
        lo = repr(b["lower"]["value"]) if b["lower"] else "NA"
        hi = repr(b["upper"]["value"]) if b["upper"] else "NA"
        lines.append(f"{b['label']}\t{b['law']}\t{lo}\t{hi}\t{b['status']}")
    return "\n".join(lines) + "\n"


def _bounds_text(rep: AnalysisReport) -> str:
    lines = ["ATE bounds"]
    width = max(len(b["label"]) for b in rep.bounds)
    for b in rep.bounds:
        shown = b.get("display", "infeasible (model falsified)")
        lines.append(f"  {b['label']:<{width}}  {shown}")
    if rep.sweep is not None:
        lines.append(f"sweep over {rep.sweep['cap']}")
        for row in rep.sweep["rows"]:
            shown = f"[{row['lower']['display']}, {row['upper']['display']}]" if row["lower"] else "infeasible"
            lines.append(f"  {row['eps']:<6g}  {shown}")
    wald = rep.estimates["wald"]
    lines.append(f"Wald estimate: {wald['display'] if wald else 'undefined (weak instrument)'}")
    for f in rep.findings:
        if f["severity"] != "info":
            lines.append(f"{f['severity']}: {f['message']}")
    return "\n".join(lines) + "\n"


# estimate ---------------------------------------------------------------------


def cmd_estimate(args) -> int:
    data = read_data(args.input)
    est = iv_estimates(data.law)
    findings = []
    if est.weak_instrument:
        msg = f"weak instrument: |itt_x| = {abs(est.itt_x):.3g} <= 1e-9; Wald estimate undefined"
        findings.append({"severity": "warning", "code": "weak_instrument", "message": msg})
        print(f"ivpi estimate: {msg}", file=sys.stderr)
    rep = AnalysisReport("estimate", _inputs_echo(data), estimates=estimates_dict(est), findings=findings)
    if args.format == "json":
        _emit(rep.to_json())
    else:
        rows = [(k, v) for k, v in rep.estimates.items() if k != "weak_instrument"]
        if args.format == "tsv":
            body = "".join(f"{k}\t{repr(v['value']) if v else 'NA'}\n" for k, v in rows)
            _emit("quantity\tvalue\n" + body + f"weak_instrument\t{est.weak_instrument}\n")
        else:
            body = "".join(f"  {k:<20}{v['display'] if v else 'undefined'}\n" for k, v in rows)
            _emit("IV estimates\n" + body + "".join(f"{f['severity']}: {f['message']}\n" for f in findings))
    return EXIT_OK


# sensitivity ------------------------------------------------------------------


def cmd_sensitivity(args) -> int:
    data = read_data(args.input)
    ranges = StrataEffectRanges(args.at_range, args.nt_range)
    try:
        sens = ate_sensitivity(data.law, ranges)
    except WeakInstrumentError as exc:
        print(f"ivpi sensitivity: {exc}; the complier effect is not identified", file=sys.stderr)
        return EXIT_MODEL
    rep = AnalysisReport(
        "sensitivity",
        _inputs_echo(data, at_range=list(args.at_range), nt_range=list(args.nt_range)),
        estimates=estimates_dict(sens.estimates),
        sensitivity=sensitivity_dict(sens, ranges),
    )
    if args.format == "json":
        _emit(rep.to_json())
    elif args.format == "tsv":
        rows = [("lower", sens.lower), ("upper", sens.upper), ("late", sens.late),
                ("complier_term", sens.complier_term),
                ("always_taker_term_lo", sens.always_taker_terms[0]), ("always_taker_term_hi", sens.always_taker_terms[1]),
                ("never_taker_term_lo", sens.never_taker_terms[0]), ("never_taker_term_hi", sens.never_taker_terms[1])]
        _emit("quantity\tvalue\n" + "".join(f"{k}\t{v!r}\n" for k, v in rows))
    else:
        e = sens.estimates
        _emit(
            f"ATE sensitivity interval: [{fmt(sens.lower)}, {fmt(sens.upper)}]\n"
            f"  = {fmt(e.complier_share)} x LATE {fmt(sens.late)}"
            f" + {fmt(e.always_taker_share)} x always-taker effect in [{fmt(args.at_range[0])}, {fmt(args.at_range[1])}]"
            f" + {fmt(e.never_taker_share)} x never-taker effect in [{fmt(args.nt_range[0])}, {fmt(args.nt_range[1])}]\n"
        )
    return EXIT_OK


# simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    raw = read_scenario(args.scenario)
    try:
        scenario = scenario_from_dict(raw)
    except FrechetError as exc:
        raise InputError(f"{args.scenario}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        raise InputError(f"{args.scenario}: {detail}") from None

    if args.mode == "mc":
        if args.n is None or args.seed is None:
            raise UsageError("--mode mc requires --n and --seed")
        draws = sample_replicates(scenario, args.n, args.seed, args.replicates)
        if args.format == "tsv":
            if len(draws) == 1:
                _emit(counts_tsv(draws[0]))
            else:
                lines = ["replicate\tz\tx\ty\tcount"]
                for i, c in enumerate(draws):
                    lines += [f"{i}\t{r['z']}\t{r['x']}\t{r['y']}\t{r['count']}" for r in counts_records(c)]
                _emit("\n".join(lines) + "\n")
            return EXIT_OK
        inputs = {"scenario": raw, "mode": "mc", "n": args.n, "seed": args.seed, "replicates": args.replicates}
        extra = ({"counts": counts_records(draws[0])} if len(draws) == 1 else
                 {"replicates": [{"replicate": i, "counts": counts_records(c)} for i, c in enumerate(draws)]})
        rep = AnalysisReport("simulate", inputs, extra=extra)
        if args.format == "text":
            walds = [iv_estimates(law_from_counts(c)).wald for c in draws]
            lines = [f"{len(draws)} replicate(s) of n={args.n}, seed {args.seed}", "replicate  wald"]
            lines += [f"  {i:<9}{'undefined' if w is None else fmt(w)}" for i, w in enumerate(walds)]
            defined = [w for w in walds if w is not None]
            if len(defined) > 1:
                lines.append(f"mean {fmt(float(np.mean(defined)))}, sd {fmt(float(np.std(defined, ddof=1)))}")
            _emit("\n".join(lines) + "\n")
        else:
            _emit(rep.to_json())
        return EXIT_OK

    result = run_scenario(scenario)
    sim = {
        "shares": {k: num(v) for k, v in result.shares.items()},
        "defier_share": num(result.defier_share),
        "true_ate": num(result.true_ate),
        "true_late": num(result.true_late),
        "iv_estimand": num(result.iv_estimand),
        "bias_vs_late": num(result.bias_vs_late),
        "bias_vs_ate": num(result.bias_vs_ate),
    }
    if result.level_weights is not None:
        sim["level_weights"] = [
            {"u": lv.u, "weight": num(w), "effect": lv.effect} for lv, w in zip(scenario.levels, result.level_weights)
        ]
    if result.iv_estimand is None:
        print("ivpi simulate: instrument does not shift treatment; IV estimand undefined", file=sys.stderr)
    rep = AnalysisReport("simulate", {"scenario": raw, "mode": "exact"},
                         extra={"simulation": sim, "law": law_records(result.law)})
    if args.format == "json":
        _emit(rep.to_json())
    elif args.format == "tsv":
        _emit(law_tsv(result.law))
    else:
        lines = ["scenario report"]
        lines += [f"  share {k:<14}{v['display']}" for k, v in sim["shares"].items()]
        for k in ("true_ate", "true_late", "iv_estimand", "bias_vs_late", "bias_vs_ate"):
            lines.append(f"  {k:<20}{sim[k]['display'] if sim[k] else 'undefined'}")
        _emit("\n".join(lines) + "\n")

    if args.figure:
        from . import plotting

        if isinstance(scenario, ProxyScenario) and result.level_weights is not None:
            plotting.plot_level_weights([lv.u for lv in scenario.levels], result.level_weights,
                                        [lv.effect for lv in scenario.levels], args.figure, result.iv_estimand)
        else:
            labels = ["true ATE", "true LATE", "IV estimand"]
            values = [result.true_ate, result.true_late, result.iv_estimand]
            plotting.plot_intervals(labels, [None if v is None else (v, v) for v in values], args.figure)
    return EXIT_OK


# entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ivpi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ivpi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("json", "text", "tsv"), default="json",
                       help="stdout format (default: json)")
        return p

    p = add("check", cmd_check, "test the instrumental inequalities")
    p.add_argument("input")

    p = add("bounds", cmd_bounds, "sharp ATE bounds under optional assumptions")
    p.add_argument("input")
    p.add_argument("--monotonicity", action="store_true", help="assume no defiers")
    p.add_argument("--cap-nt", type=_probability, metavar="EPS",
                   help="max P(Y=1) among never-takers if treated")
    p.add_argument("--cap-at", type=_probability, metavar="EPS",
                   help="max P(Y=1) among always-takers if untreated")
    sweep = p.add_mutually_exclusive_group()
    sweep.add_argument("--sweep-nt", type=parse_grid, metavar="GRID", help="sweep the never-taker cap")
    sweep.add_argument("--sweep-at", type=parse_grid, metavar="GRID", help="sweep the always-taker cap")
    p.add_argument("--raw-law", action="store_true",
                   help="use the empirical law even when it violates monotonicity")
    p.add_argument("--tsv", metavar="PATH", help="also write the bounds table to PATH")
    p.add_argument("--figure", metavar="PATH", help="render a figure to PATH")

    p = add("estimate", cmd_estimate, "Wald estimate, ITTs and compliance-type shares")
    p.add_argument("input")

    p = add("sensitivity", cmd_sensitivity, "ATE range from hypothesized non-complier effects")
    p.add_argument("input")
    p.add_argument("--at-range", type=_effect_range, required=True, metavar="LO,HI")
    p.add_argument("--nt-range", type=_effect_range, required=True, metavar="LO,HI")

    p = add("simulate", cmd_simulate, "run a preference-instrument scenario")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--figure", metavar="PATH", help="render a figure to PATH")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"ivpi {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"ivpi {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"ivpi {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
