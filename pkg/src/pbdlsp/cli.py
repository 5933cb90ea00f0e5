"""Command line entry point: ``pbdlsp <subcommand>``.

Exit codes: 0 success, 2 usage, 3 model out of scope, 4 acceptance threshold failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .distances import EmpiricalLaw, d2_empirical, write_empirical_law_csv
from .experiments import CSV_COLUMNS, CurveResult, _moments_and_intensity, check_grid, \
    run_counterexample, run_lsp_curve, run_validate_pbd, verify_rows
from .moments import classify_case
from .pbd import CaseRangeError, DivergentSeries, UnsupportedDispersion, pbd_pmf, \
    pbd_process_samples, select_params
from .processes import RngSeed, sample_superpositions

EXIT_OK, EXIT_USAGE, EXIT_SCOPE, EXIT_FAIL = 0, 2, 3, 4
CSV_VERSION = "pbdlsp-curve v1"

log = logging.getLogger("pbdlsp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_curve_csv(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def read_curve_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_VERSION}":
            raise ValueError(f"unexpected CSV version line {first!r}")
        return list(csv.DictReader(fh))


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def write_curve_svg(result: CurveResult, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "pbdlsp"
    ns = [r.n for r in result.rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ns, [r.distance for r in result.rows], "o-", label="d2 estimate")
    ax.fill_between(ns, [r.ci_low for r in result.rows], [r.ci_high for r in result.rows],
                    alpha=0.25, label="re-pairing band")
    if result.baseline:
        ax.plot(ns, [r.distance for r in result.baseline], "s--", label="same-law baseline")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _load(args, override_samples=True):
    spec, out = load_config(args.config)
    if args.seed is not None or args.stream is not None:
        spec = replace(spec, seed=RngSeed(args.seed if args.seed is not None else spec.seed.seed,
                                          args.stream if args.stream is not None else spec.seed.stream))
    if override_samples and getattr(args, "samples", None):
        spec = replace(spec, samples_per_n=args.samples)
    if args.out:
        out = {**out, "prefix": args.out}
    return spec, out


def cmd_params(args) -> int:
    spec, _ = _load(args)
    fm, lam = _moments_and_intensity(spec)
    ns = args.n or spec.n_grid
    rows = []
    for n in ns:
        cls = classify_case(fm, n)
        p = select_params(fm, lam, n, use_nu=spec.use_nu)
        rows.append({**p.as_row(), "min_n": cls.min_n})
    _print({"theta": fm.theta, "mean": fm.mean, "variance": fm.variance, "source": fm.source,
            "params": rows})
    return EXIT_OK


def cmd_simulate(args) -> int:
    # plain sampling has no m >= 50 floor, unlike the distance experiments
    spec, out = _load(args, override_samples=False)
    m = args.samples or spec.samples_per_n
    if m < 1:
        raise ConfigError("--samples must be >= 1")
    rng = spec.seed.generator(args.n)
    if args.pbd:
        fm, lam = _moments_and_intensity(spec)
        params = select_params(fm, lam, args.n, use_nu=spec.use_nu)
        samples = pbd_process_samples(params, m, rng)
    else:
        samples = sample_superpositions(spec.model, args.n, m, rng)
    law = EmpiricalLaw(samples)
    report = {"n": args.n, "law": "pbd" if args.pbd else "superposition",
              "sizes": law.sizes.tolist(), "points": [c.expanded().tolist() for c in samples]}
    prefix = out.get("prefix")
    if prefix:
        write_empirical_law_csv(law, f"{prefix}_samples.csv")
        write_json(report, f"{prefix}_samples.json")
    else:
        _print(report)
    return EXIT_OK


def cmd_distance(args) -> int:
    spec, out = _load(args)
    fm, lam = _moments_and_intensity(spec)
    check_grid(fm, [args.n])
    rng = spec.seed.generator(args.n)
    params = select_params(fm, lam, args.n, use_nu=spec.use_nu)
    sup = EmpiricalLaw(sample_superpositions(spec.model, args.n, spec.samples_per_n, rng))
    pbd = EmpiricalLaw(pbd_process_samples(params, spec.samples_per_n, rng))
    est = d2_empirical(sup, pbd, rng, spec.n_boot, spec.ci_level)
    report = {**params.as_row(), "distance": est.estimate, "ci_low": est.ci_low,
              "ci_high": est.ci_high, "samples": spec.samples_per_n, "n_boot": est.n_boot}
    if out.get("prefix"):
        write_json(report, f"{out['prefix']}_distance.json")
    _print(report)
    return EXIT_OK


def cmd_lsp_curve(args) -> int:
    spec, out = _load(args)
    if args.workers:
        spec = replace(spec, workers=args.workers)
    result = run_lsp_curve(spec)
    verify_rows(result)
    prefix = out.get("prefix")
    if prefix:
        write_curve_csv(result.rows, f"{prefix}.csv")
        if result.baseline:
            write_curve_csv(result.baseline, f"{prefix}_baseline.csv")
        write_json(result.to_dict(), f"{prefix}.json")
        if out.get("svg"):
            write_curve_svg(result, f"{prefix}.svg")
    _print(result.to_dict())
    if args.slope_band is not None:
        lo, hi = args.slope_band
        if result.slope is None or not lo <= result.slope <= hi:
            log.error("slope %s outside [%g, %g]", result.slope, lo, hi)
            return EXIT_FAIL
    return EXIT_OK


def cmd_validate_pbd(args) -> int:
    if not args.a > 0:
        raise ConfigError("a must be > 0")
    if not 0 <= args.b < 1:
        raise ConfigError("b must be < 1" if args.b >= 1 else "b must be >= 0")
    if args.beta < 0:
        raise ConfigError("beta must be >= 0")
    report = run_validate_pbd(args.a, args.b, args.beta, RngSeed(args.seed or 0, args.stream or 0),
                              tv_threshold=args.tv_threshold)
    if args.pmf_out:
        from .pbd import write_pmf

        write_pmf(pbd_pmf(args.a, args.b, args.beta), args.pmf_out)
    if args.out:
        write_json(report, f"{args.out}_validate.json")
    _print(report)
    print("PASS" if report["passed"] else "FAIL", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_counterexample(args) -> int:
    report = run_counterexample(args.samples, RngSeed(args.seed or 0, args.stream or 0), n_boot=args.n_boot)
    if args.out:
        write_json(report, f"{args.out}_counterexample.json")
    _print(report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pbdlsp", description="PBD approximation of superposed point processes")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--stream", type=int)
    common.add_argument("--out", help="output file prefix")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("params", parents=[common], help="moments, case and (a, b, beta) per n")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, nargs="+")
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("simulate", parents=[common], help="draw superposition or PBD samples")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int)
    s.add_argument("--pbd", action="store_true", help="sample the fitted PBD process instead")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("distance", parents=[common], help="d2 estimate at one n")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("lsp-curve", parents=[common], help="distance against n with slope fit")
    s.add_argument("--config", required=True)
    s.add_argument("--samples", type=int)
    s.add_argument("--slope-band", type=float, nargs=2, metavar=("LO", "HI"),
                   help="exit 4 unless the fitted slope lies in [LO, HI]")
    s.add_argument("--workers", type=int, help="processes for the n-grid")
    s.set_defaults(func=cmd_lsp_curve)

    s = sub.add_parser("validate-pbd", parents=[common], help="birth-death chain and pmf checks")
    s.add_argument("a", type=float)
    s.add_argument("b", type=float)
    s.add_argument("beta", type=float)
    s.add_argument("--pmf-out", help="write the pmf as two-column text")
    s.add_argument("--tv-threshold", type=float, default=0.02, help="chain occupancy TV tolerance")
    s.set_defaults(func=cmd_validate_pbd)

    s = sub.add_parser("counterexample", parents=[common], help="u_m for the renewal counterexample")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--n-boot", type=int, default=50, help="bootstrap resamples for the u_m spread")
    s.set_defaults(func=cmd_counterexample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UnsupportedDispersion, CaseRangeError) as e:
        print(f"model out of scope: {e}", file=sys.stderr)
        return EXIT_SCOPE
    except (ConfigError, DivergentSeries, FileNotFoundError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
