"""Command-line front end: ``median-meta analyze | simulate | example``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

from . import __version__
from .abc_density import BMA, SDS, AbcConfig, abc_effects_both
from .errors import MedianMetaError, ParseError
from .forest import write_forest_svg
from .median_methods import Z975, QEConfig, mdm, mdm_normal_approx, qe_bc_effect, qe_effects
from .median_methods import group_center
from .pooling import pool_fixed, pool_random
from .sim_lab import (
    ALL_METHODS,
    DecileProgress,
    Heterogeneity,
    Outcome,
    Reporting,
    config_from_mapping,
    dumps_stable,
    parse_config_text,
    run_simulation,
)
from .summary_model import parse_csv, tb_fixture_path
from .transform import DIFF_MEDIANS, LUO, WAN, diff_of_means

TOOL = "median-meta"
DEFAULT_SEED = 1

# Published pooled values for the bundled dataset, for orientation only.
TB_REFERENCE = {
    "wan": {"estimate": 2.08, "ci": [1.02, 3.14], "tau2": 2.24, "i2": 98.63},
    "luo": {"estimate": 2.14, "ci": [1.07, 3.21], "tau2": 2.29, "i2": 98.66},
    "mdm": {"estimate": 1.00, "ci": [0.16, 4.22]},
    "qe": {"estimate": 1.05, "ci": [0.18, 1.91], "tau2": 1.49, "i2": 96.99},
}
TB_CAVEATS = [
    "The published table repeats each study's smear q3 as the Xpert q3; "
    "tb.csv keeps those values except Cohen2014, whose Xpert q3 (5.7) lies "
    "below its median and is set to 8.6.",
    "With these inputs QE pools to about 0.95 (I2 about 95.8) rather than 1.05; "
    "tb_reconstructed.csv carries Xpert q3 values back-solved from the published "
    "per-study transformation estimates and reproduces 1.05 and I2 96.99.",
    "The MDM interval here is (0.04, 4.00), the order statistics (2, 8) of the nine "
    "study effects; the published interval is (0.16, 4.22).",
]


class CliError(Exception):
    def __init__(self, kind, message, code=1):
        super().__init__(message)
        self.kind = kind
        self.code = code


# ------------------------------------------------------------------ analysis

def _study_row(e, z=Z975):
    lo, hi = e.ci(z)
    return {"study_id": e.study_id, "effect": e.effect, "variance": e.variance,
            "se": e.se, "ci_low": lo, "ci_high": hi}


def _pooled_row(res):
    return {"estimate": res.pooled, "variance": res.variance, "se": res.se,
            "ci_low": res.ci_low, "ci_high": res.ci_high, "tau2": res.tau2,
            "q": res.q_stat, "i2": res.i2, "het_p": res.het_p, "model": res.model}


def _pool(effects, model):
    return pool_random(effects) if model == "random" else pool_fixed(effects)


def _inverse_variance_result(effects, kind, model):
    bad = [e for e in effects if isinstance(e, Exception)]
    if bad:
        raise bad[0]
    res = _pool(effects, model)
    return {"status": "ok", "effect_kind": kind,
            "studies": [_study_row(e) for e in effects], "pooled": _pooled_row(res)}


def read_densities(path) -> dict:
    """Read a ``study_id,f1,f2`` sidecar of true densities at the medians."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise CliError("FileNotFound", f"densities file not found: {path}", 2) from None
    out = {}
    for i, row in enumerate(rows, start=2):
        try:
            out[row["study_id"].strip()] = (float(row["f1"]), float(row["f2"]))
        except (KeyError, TypeError, ValueError):
            raise ParseError("densities need columns study_id,f1,f2 with numbers", i) from None
    return out


def run_method(name, dataset, model, qe_cfg, abc_cfg, densities=None) -> dict:
    studies = list(dataset)
    if name in ("wan", "luo"):
        eff = []
        for s in studies:
            try:
                eff.append(diff_of_means(s, WAN if name == "wan" else LUO))
            except Exception as exc:
                eff.append(type(exc)(f"study {s.id!r}: {exc}"))
        return _inverse_variance_result(eff, "DiffMeans", model)
    if name in ("mdm", "mdm-n"):
        eff = [group_center(s.group1) - group_center(s.group2) for s in studies]
        res = (mdm if name == "mdm" else mdm_normal_approx)(eff)
        return {"status": "ok", "effect_kind": DIFF_MEDIANS,
                "studies": [{"study_id": s.id, "effect": e, "variance": None, "se": None,
                             "ci_low": None, "ci_high": None} for s, e in zip(studies, eff)],
                "pooled": {"estimate": res.pooled, "ci_low": res.ci_low,
                           "ci_high": res.ci_high,
                           "attained_coverage": res.attained_coverage,
                           "degenerate": res.degenerate}}
    if name == "qe":
        return _inverse_variance_result(qe_effects(studies, qe_cfg), DIFF_MEDIANS, model)
    if name == "qe-bc":
        if densities is None:
            raise CliError("MissingDensities", "qe-bc needs --densities study_id,f1,f2")
        eff = []
        for s in studies:
            if s.id not in densities:
                raise CliError("MissingDensities", f"no densities for study {s.id!r}")
            eff.append(qe_bc_effect(s, densities[s.id]))
        return _inverse_variance_result(eff, DIFF_MEDIANS, model)
    if name in ("abc-sds", "abc-bma"):
        key = SDS if name == "abc-sds" else BMA
        eff = [abc_effects_both(s, abc_cfg, seed_key=(i,))[key] for i, s in enumerate(studies)]
        return _inverse_variance_result(eff, DIFF_MEDIANS, model)
    raise CliError("UnknownMethod", f"unknown method {name!r}", 2)


def build_report(raw: bytes, methods, model="random", *, dataset_name="",
                 densities=None, seed=DEFAULT_SEED, qe_config=None, abc_config=None) -> dict:
    """Analyze CSV bytes with every method; failures are recorded per method."""
    if not methods:
        raise CliError("NoMethods", "at least one method is required", 2)
    dataset = parse_csv(raw)
    qe_config = qe_config or QEConfig()
    abc_config = abc_config or AbcConfig(seed=seed)
    results = {}
    for name in methods:
        try:
            results[name] = run_method(name, dataset, model, qe_config, abc_config, densities)
        except (MedianMetaError, CliError, ValueError, ArithmeticError) as exc:
            kind = exc.kind if isinstance(exc, CliError) else type(exc).__name__
            results[name] = {"status": "error", "error": {"type": kind, "message": str(exc)}}
    return {
        "tool": TOOL,
        "version": __version__,
        "dataset": {"name": dataset_name, "sha256": hashlib.sha256(raw).hexdigest(),
                    "n_studies": len(dataset)},
        "model": model,
        "seed": seed,
        "methods": list(methods),
        "results": results,
    }


def dumps_report(report) -> str:
    return dumps_stable(report) + "\n"


# ------------------------------------------------------------------ argparse

def _method_list(text):
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    if not names:
        raise argparse.ArgumentTypeError("at least one method is required")
    bad = [n for n in names if n not in ALL_METHODS]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {', '.join(bad)}; choose from {', '.join(ALL_METHODS)}")
    return list(dict.fromkeys(names))


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _choice(enum_cls):
    def parse(text):
        try:
            return enum_cls(text).value
        except ValueError:
            allowed = ", ".join(m.value for m in enum_cls)
            raise argparse.ArgumentTypeError(f"{text!r} is not one of: {allowed}") from None
    parse.__name__ = enum_cls.__name__.lower()
    return parse


def _abc_args(p):
    p.add_argument("--abc-iterations", type=_positive_int, default=20000,
                   help="ABC draws per candidate family (default 20000)")
    p.add_argument("--abc-rate", type=float, default=0.001,
                   help="ABC acceptance rate (default 0.001)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__)
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="pool the studies of a summary CSV")
    a.add_argument("csv_path")
    a.add_argument("--methods", type=_method_list, default=["qe", "mdm", "wan", "luo"],
                   help="comma-separated subset of: " + ", ".join(ALL_METHODS))
    a.add_argument("--model", choices=("random", "fixed"), default="random")
    a.add_argument("--densities", help="CSV study_id,f1,f2 of true densities (qe-bc)")
    a.add_argument("--seed", type=int, default=DEFAULT_SEED)
    a.add_argument("--out", help="write the JSON report here instead of stdout")
    a.add_argument("--svg", help="also write a forest plot")
    _abc_args(a)

    s = sub.add_parser("simulate", help="run the simulation study for one scenario")
    s.add_argument("--config", help="key=value file; command-line flags override it")
    s.add_argument("--studies", type=int, dest="n_studies")
    s.add_argument("--median-n", type=int, dest="median_n")
    s.add_argument("--outcome", type=_choice(Outcome))
    s.add_argument("--het", type=_choice(Heterogeneity), dest="heterogeneity")
    s.add_argument("--reporting", type=_choice(Reporting))
    s.add_argument("--reps", type=_positive_int, dest="replications")
    s.add_argument("--seed", type=int)
    s.add_argument("--model", choices=("random", "fixed"))
    s.add_argument("--methods", type=_method_list, default=["wan", "luo", "mdm", "qe", "qe-bc"])
    s.add_argument("--json", dest="json_out", help="write metrics JSON here (default stdout)")
    s.add_argument("--csv", dest="csv_out", help="write the flat metrics CSV here")
    s.add_argument("--full", action="store_true",
                   help="run every k x n x outcome x reporting cell with 1000 replications "
                        "unless --reps is given (long)")
    _abc_args(s)

    e = sub.add_parser("example", help="print the bundled dataset path and reference values")
    e.add_argument("--json", action="store_true", help="print as JSON")
    return parser


# ------------------------------------------------------------------ commands

def _emit_error(kind, message, stream):
    stream.write(json.dumps({"error": {"type": kind, "message": message}}, indent=2) + "\n")


def cmd_analyze(args, stdout) -> int:
    try:
        with open(args.csv_path, "rb") as fh:
            raw = fh.read()
    except (FileNotFoundError, IsADirectoryError):
        raise CliError("FileNotFound", f"no such file: {args.csv_path}", 2) from None
    densities = read_densities(args.densities) if args.densities else None
    abc_cfg = AbcConfig(iterations_per_family=args.abc_iterations,
                        acceptance_rate=args.abc_rate, seed=args.seed)
    report = build_report(raw, args.methods, args.model,
                          dataset_name=os.path.basename(args.csv_path),
                          densities=densities, seed=args.seed, abc_config=abc_cfg)
    text = dumps_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if args.svg:
        try:
            write_forest_svg(report, args.svg)
        except ValueError as exc:
            raise CliError("NothingToPlot", str(exc)) from None
        except OSError as exc:
            raise CliError("UnwritablePath", str(exc)) from None
    ok = any(r["status"] == "ok" for r in report["results"].values())
    return 0 if ok else 1


FULL_GRID = [dict(n_studies=k, median_n=n, outcome=o, reporting=r)
             for k in (10, 30) for n in (50, 250)
             for o in ("normal-null", "normal-moderate", "mixture")
             for r in ("s1", "s2", "s3")]


def _sim_values(args):
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except FileNotFoundError:
            raise CliError("FileNotFound", f"no such config file: {args.config}", 2) from None
    for key in ("n_studies", "median_n", "outcome", "heterogeneity", "reporting",
                "replications", "seed", "model"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    values.setdefault("seed", DEFAULT_SEED)
    return values


def cmd_simulate(args, stdout, stderr) -> int:
    values = _sim_values(args)
    try:
        if args.full:
            values.setdefault("replications", 1000)
            cfgs = [config_from_mapping({**values, **cell}) for cell in FULL_GRID]
        else:
            cfgs = [config_from_mapping(values)]
        abc_cfg = AbcConfig(iterations_per_family=args.abc_iterations,
                            acceptance_rate=args.abc_rate, seed=int(values["seed"]))
    except ValueError as exc:
        raise CliError("InvalidConfig", str(exc), 2) from None

    metrics = []
    for i, cfg in enumerate(cfgs):
        label = "simulate" if len(cfgs) == 1 else f"simulate cell {i + 1}/{len(cfgs)}"
        metrics.append(run_simulation(cfg, args.methods, abc_config=abc_cfg,
                                      progress=DecileProgress(stderr, label)))
    if len(metrics) == 1:
        text = metrics[0].to_json() + "\n"
        table = metrics[0].to_csv()
    else:
        text = dumps_stable([m.to_dict() for m in metrics]) + "\n"
        parts = [m.to_csv() for m in metrics]
        table = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
    return 0


def example_info() -> dict:
    path = tb_fixture_path()
    return {"dataset": str(path),
            "reconstructed_dataset": str(path.parent.joinpath("tb_reconstructed.csv")),
            "command": f"{TOOL} analyze {path} --methods qe,mdm,wan,luo --model random",
            "reference_pooled": TB_REFERENCE,
            "caveats": TB_CAVEATS}


def cmd_example(args, stdout) -> int:
    info = example_info()
    if args.json:
        stdout.write(json.dumps(info, indent=2) + "\n")
        return 0
    w = stdout.write
    w(f"dataset: {info['dataset']}\n")
    w(f"reconstructed: {info['reconstructed_dataset']}\n")
    w(f"try: {info['command']}\n\nreference pooled estimates (random effects):\n")
    for name, ref in TB_REFERENCE.items():
        extra = "".join(f"  {k}={ref[k]}" for k in ("tau2", "i2") if k in ref)
        w(f"  {name:<4} {ref['estimate']:.2f} [{ref['ci'][0]:.2f}, {ref['ci'][1]:.2f}]{extra}\n")
    w("\ncaveats:\n")
    for c in TB_CAVEATS:
        w(f"  - {c}\n")
    return 0


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return cmd_analyze(args, stdout)
        if args.command == "simulate":
            return cmd_simulate(args, stdout, stderr)
        return cmd_example(args, stdout)
    except CliError as exc:
        _emit_error(exc.kind, str(exc), stdout)
        return exc.code
    except ParseError as exc:
        _emit_error("ParseError", str(exc), stdout)
        return 1


if __name__ == "__main__":
    sys.exit(main())
