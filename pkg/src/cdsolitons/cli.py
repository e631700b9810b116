"""Command-line front end.

    cdsolitons run scenario.json --out results/
    cdsolitons sweep scenario.json --param spectral.0.lambda.1 --values 0.25,0.5,1 --out sweep/

Exit status: 0 all checks pass, 1 a check failed, 2 invalid scenario,
3 numerical failure.
"""

import argparse
import logging
import sys

from .scenario import (
    EXIT_NUMERICAL,
    EXIT_SCHEMA,
    NumericalFailure,
    ScenarioError,
    load_scenario,
    run_scenario,
    run_sweep,
    write_artifacts,
)

log = logging.getLogger("cdsolitons")


def _values(text):
    if text is None or not text.strip():
        return []
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="cdsolitons", description="Darboux solitons of the coupled dispersionless system")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--grid-refine", type=int, default=0, metavar="K", help="halve both spacings K times")
    common.add_argument("--sign-convention", choices=("oracle", "paper"), default=None,
                        help="one-fold sign convention (su2-scalar only)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="evaluate one scenario")
    r.add_argument("scenario")
    s = sub.add_parser("sweep", parents=[common], help="run a scenario over parameter values")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, help="dotted path to a number, e.g. spectral.0.lambda.1")
    s.add_argument("--values", required=True, help="comma-separated values")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        raw, sc = load_scenario(args.scenario)
        if args.command == "run":
            result = run_scenario(sc, args.grid_refine, args.sign_convention)
            write_artifacts(result, args.out)
            sys.stdout.write(result.summary())
            return result.exit_code
        try:
            values = _values(args.values)
        except ValueError as exc:
            raise ScenarioError(f"bad --values: {exc}") from exc
        code, index = run_sweep(raw, args.param, values, args.out, args.grid_refine, args.sign_convention)
        for run in index["runs"]:
            sys.stdout.write(f"{args.param}={run['value']}: exit {run['exit_code']}\n")
        return code
    except ScenarioError as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_SCHEMA
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
