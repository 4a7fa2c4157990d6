"""
cone-kernel command-line front end.

    cone-kernel [--config PATH] [--log-level LEVEL] <subcommand> [flags] [--out PATH] [--format csv|json]

Each subcommand builds a RunConfig (defaults < config file < flags), calls the
library and renders the rows through cone_kernel.reports. Reports go to stdout
unless --out is given. Exit status: 0 success, 2 configuration error,
1 any other failure; failures print a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import pandas as pd

from . import __version__
from .configuration import RunConfig, get_config_path, load_config_file
from .converge import emit_report, fit_all, sweep
from .errors import ConeKernelError, ConfigError
from .kernel import DEFAULT_DISCREPANCY_GRID, DISCREPANCY_COLUMNS, TknForm, TknMode, discrepancy_report, tkn_eval
from .logging_config import get_logger, setup_logging
from .pairing import lemma1_dft_check, rough_expansion, sharp_expansion
from .quad import PrescriptionMode, pairing_exact, quadrature_call_counts
from .registry import factorization_registry, test_function_registry
from .reports import complex_to_json, render_csv, render_json, write_text
from .wavesolve import SOLUTION_COLUMNS, RightHandSide, solve_theorem2

logger = get_logger(__name__, component="CLI")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


@dataclass
class Report:
    """Rows for CSV output and the document for JSON output."""
    columns: Sequence[str]
    rows: list[dict]
    document: dict = field(default_factory=dict)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return render_json(self.document or {"rows": self.rows})
        return render_csv(self.rows, self.columns)


def _run_tkn(config: RunConfig) -> Report:
    modes = [TknMode.parse(config.mode)] if config.mode else list(TknMode)
    rows = []
    for mode in modes:
        value = tkn_eval(TknForm(config.k, config.N, mode), config.xi1)
        rows.append({"k": config.k, "N": config.N, "xi1": config.xi1, "mode": mode.value,
                     "re": value.real, "im": value.imag})
    document = {"k": config.k, "N": config.N, "xi1": config.xi1,
                "values": [{"mode": r["mode"], "value": {"re": r["re"], "im": r["im"]}} for r in rows]}
    return Report(("k", "N", "xi1", "mode", "re", "im"), rows, document)


def _run_pair(config: RunConfig) -> Report:
    mode = PrescriptionMode.parse(config.mode or PrescriptionMode.PAPER.value)
    fn = test_function_registry.get(config.fn)
    result = pairing_exact(fn, config.a, mode, config.quadrature)
    row = {"fn": config.fn, "a": config.a, "mode": mode.value, "re": result.value.real,
           "im": result.value.imag, "error_estimate": result.error_estimate}
    document = {"fn": config.fn, "a": config.a, "mode": mode.value, **result.to_dict()}
    return Report(tuple(row), [row], document)


def _run_expand(config: RunConfig) -> Report:
    fn = test_function_registry.get(config.fn)
    if config.variant == "rough":
        result = rough_expansion(fn, config.a, config.order, config.quadrature)
        mode = None
    else:
        mode = TknMode.parse(config.mode or TknMode.DERIVED.value)
        result = sharp_expansion(fn, config.a, config.order, mode, config.quadrature, nb=config.nb)
    rows = [{"term": label, "re": v.real, "im": v.imag} for label, v in result.terms]
    rows.append({"term": "total", "re": result.value.real, "im": result.value.imag})
    document = {"fn": config.fn, "a": config.a, "order": config.order, "variant": config.variant,
                "mode": mode.value if mode else None, **result.to_dict()}
    return Report(("term", "re", "im"), rows, document)


def _run_lemma1(config: RunConfig) -> Report:
    fn = test_function_registry.get(config.fn1d)
    check = lemma1_dft_check(config.k, fn, config.grid, config.halfwidth, config.quadrature)
    row = {"k": check.k, "fn1d": config.fn1d, "direct": check.direct, "dft_re": check.dft.real,
           "dft_im": check.dft.imag, "discrepancy": check.discrepancy}
    document = {"k": check.k, "fn1d": config.fn1d, "grid": config.grid, "halfwidth": config.halfwidth,
                "direct": check.direct, "dft": complex_to_json(check.dft), "discrepancy": check.discrepancy}
    return Report(tuple(row), [row], document)


def _read_table(path, columns: Sequence[str], what: str) -> list[tuple[float, ...]]:
    """Rows of a CSV file with (at least) the given columns, as float tuples."""
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}", fields=[what]) from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{what} {path} lacks columns {missing}", fields=[what])
    return [tuple(float(v) for v in row) for row in frame[list(columns)].itertuples(index=False)]


def _run_discrepancy(config: RunConfig) -> Report:
    grid = _read_table(config.grid_file, ("N", "xi1"), "grid_file") if config.grid_file else DEFAULT_DISCREPANCY_GRID
    rows = [r.to_dict() for r in discrepancy_report(config.nmax, grid, config.quadrature, config.workers)]
    return Report(DISCREPANCY_COLUMNS, rows, {"nmax": config.nmax, "rows": rows})


def _run_solve(config: RunConfig) -> Report:
    fact = factorization_registry.get(config.fact)
    rhs = RightHandSide(test_function_registry.get(config.rhs))
    if config.points is not None:
        points = [tuple(float(v) for v in p) for p in config.points]
    else:
        points = _read_table(config.points_file, ("xi1", "xi2"), "points_file")
    mode = TknMode.parse(config.mode or TknMode.DERIVED.value)
    samples = solve_theorem2(fact, rhs, config.order, points, mode, config.quadrature, s=config.s,
                             workers=config.workers)
    rows = [s.to_row() for s in samples]
    document = {"fact": config.fact, "rhs": config.rhs, "order": config.order, "mode": mode.value,
                "s": config.s, "samples": [{"xi1": s.xi1, "xi2": s.xi2, "value": complex_to_json(s.value),
                                            "leading": complex_to_json(s.leading),
                                            "correction": complex_to_json(s.correction), "error": s.error}
                                           for s in samples]}
    return Report(SOLUTION_COLUMNS, rows, document)


HANDLERS: dict[str, Callable[[RunConfig], Report]] = {
    "tkn": _run_tkn,
    "pair": _run_pair,
    "expand": _run_expand,
    "lemma1": _run_lemma1,
    "discrepancy": _run_discrepancy,
    "solve": _run_solve,
}


def run(config: RunConfig) -> str:
    """
    Dispatch a validated config and emit its report.

    Returns the text meant for stdout (empty when --out was given).
    """
    logger.info("running", method="run", subcommand=config.subcommand, format=config.format)
    path = config.output_path
    if config.subcommand == "sweep":
        records = sweep(test_function_registry.get(config.fn), config.a_values, config.orders, config.modes,
                        config.quadrature, variant=config.sweep_variant, coeff_mode=config.coeff_mode,
                        nb=config.nb, workers=config.workers)
        text = emit_report(records, fit_all(records), config.format, path)
        return "" if path is not None else text
    text = HANDLERS[config.subcommand](config).render(config.format)
    if path is None:
        return text
    write_text(text, path)
    return ""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cone-kernel",
                                     description="Numerical toolkit for the cone kernel K_a and its pairings")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="YAML or JSON config file (default: $CONEKERNEL_CONFIG_PATH)")
    parser.add_argument("--log-level", default=None, type=str.upper, choices=LOG_LEVELS,
                        help="Log level (default: $CONEKERNEL_LOG_LEVEL or WARNING)")
    parser.add_argument("--log-file", default=None, help="Also log to this file at DEBUG")

    # every flag defaults to None so that unset flags do not override the config file
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Report path (relative to $CONEKERNEL_OUTPUT_DIR); stdout if omitted")
    common.add_argument("--format", default=None, choices=("csv", "json"), help="Report format (default csv)")
    common.add_argument("--quadrature", default=None, help="Quadrature preset: default, fast or strict")
    common.add_argument("--workers", default=None, type=int, help="Worker threads for batch subcommands")

    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("tkn", parents=[common], help="Evaluate T_{k,N}(xi1) in closed form")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--N", default=None, help="Truncation (number or inf)")
    p.add_argument("--xi1", type=float, default=None)
    p.add_argument("--mode", default=None, choices=[m.value for m in TknMode],
                   help="Closed-form mode; both modes when omitted")

    p = sub.add_parser("pair", parents=[common], help="Exact pairing (K_a, phi) by quadrature")
    p.add_argument("--fn", default=None, help="Registered test function")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--mode", default=None, choices=[m.value for m in PrescriptionMode])

    p = sub.add_parser("expand", parents=[common], help="Truncated rough or sharp expansion")
    p.add_argument("--fn", default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--variant", default=None, choices=("rough", "sharp"))
    p.add_argument("--mode", default=None, choices=[m.value for m in TknMode])
    p.add_argument("--nb", type=float, default=None, help="Special-limit product N*b")

    p = sub.add_parser("sweep", parents=[common], help="Convergence sweep with order fits")
    p.add_argument("--fn", default=None)
    p.add_argument("--a-list", dest="a_values", default=None, help="Comma-separated a values")
    p.add_argument("--orders", default=None, help="Comma-separated truncation orders")
    p.add_argument("--modes", default=None, help="Comma-separated prescription modes")
    p.add_argument("--variant", dest="sweep_variant", default=None, choices=("sharp", "rough", "leading"))
    p.add_argument("--coeff-mode", default=None, choices=[m.value for m in TknMode])
    p.add_argument("--nb", type=float, default=None)

    p = sub.add_parser("lemma1", parents=[common], help="Moment check through the discrete Fourier transform")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--fn1d", default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--halfwidth", type=float, default=None)

    p = sub.add_parser("discrepancy", parents=[common], help="Paper-literal vs derived T_{k,N} against quadrature")
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--grid-file", default=None, help="CSV with columns N, xi1")

    p = sub.add_parser("solve", parents=[common], help="Sample the Fourier-side solution")
    p.add_argument("--fact", default=None, help="Registered factorization")
    p.add_argument("--rhs", default=None, help="Registered test function for the right-hand side")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--mode", default=None, choices=[m.value for m in TknMode])
    p.add_argument("--points-file", default=None, help="CSV with columns xi1, xi2")
    p.add_argument("--s", type=float, default=None, help="Sobolev exponent")
    return parser


GLOBAL_OPTIONS = ("config", "log_level", "log_file", "subcommand")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """RunConfig from parsed arguments and the config file they name."""
    path = args.config or get_config_path()
    file_data = load_config_file(path) if path else {}
    overrides = {k: v for k, v in vars(args).items() if k not in GLOBAL_OPTIONS}
    return RunConfig.from_sources(args.subcommand, file_data, overrides)


def _fail(exc: ConeKernelError) -> None:
    print(json.dumps(exc.to_dict()), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level, log_file=args.log_file)
    try:
        config = config_from_args(args)
        text = run(config)
        logger.info("run finished", method="main", **quadrature_call_counts())
    except ConfigError as exc:
        logger.error(f"configuration error: {exc}", method="main")
        _fail(exc)
        return EXIT_CONFIG
    except ConeKernelError as exc:
        logger.error(f"{type(exc).__name__}: {exc}", method="main")
        _fail(exc)
        return EXIT_FAILURE
    if text:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
