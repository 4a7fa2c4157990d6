"""
Convergence experiments: exact pairings against truncated expansions over a grid
of cone parameters, empirical order fits, and report emission.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BelowNoiseFloorError, ConeKernelError, DomainError, FitError, ReportError
from .kernel import TknMode
from .logging_config import get_logger
from .pairing import leading_pairing, rough_expansion, sharp_expansion
from .quad import PrescriptionMode, QuadratureSpec, pairing_exact
from .reports import (complex_from_json, complex_to_json, render_csv, render_json, sibling_path,
                      write_text)
from .testfn import TestFunction

logger = get_logger(__name__, component="Converge")

DEFAULT_A_VALUES = (10.0, 30.0, 100.0, 300.0)
DEFAULT_ORDERS = (0, 2, 4)
DEFAULT_MODES = tuple(m.value for m in PrescriptionMode)
VARIANTS = ("sharp", "rough", "leading")
REL_ERROR_FLOOR = 1e-12

RECORD_COLUMNS = ("a", "mode", "order", "exact_re", "exact_im", "approx_re", "approx_im",
                  "abs_error", "rel_error", "error", "runtime_ms")
FIT_COLUMNS = ("order", "mode", "fitted_power", "r_squared", "points_used", "status")


@dataclass
class ConvergenceRecord:
    """One (a, order, mode) row; runtime_ms is the only volatile field."""
    a: float
    mode: str
    order: int
    exact: Optional[complex] = None
    approx: Optional[complex] = None
    abs_error: Optional[float] = None
    rel_error: Optional[float] = None
    runtime_ms: float = 0.0
    error: str = ""

    @property
    def key(self) -> tuple:
        return (self.a, self.order, self.mode)

    def to_row(self) -> dict:
        exact, approx = self.exact, self.approx
        return {
            "a": self.a, "mode": self.mode, "order": self.order,
            "exact_re": exact.real if exact is not None else None,
            "exact_im": exact.imag if exact is not None else None,
            "approx_re": approx.real if approx is not None else None,
            "approx_im": approx.imag if approx is not None else None,
            "abs_error": self.abs_error, "rel_error": self.rel_error,
            "error": self.error, "runtime_ms": self.runtime_ms,
        }

    def to_dict(self) -> dict:
        return {"a": self.a, "mode": self.mode, "order": self.order,
                "exact": complex_to_json(self.exact), "approx": complex_to_json(self.approx),
                "abs_error": self.abs_error, "rel_error": self.rel_error,
                "error": self.error, "runtime_ms": self.runtime_ms}

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceRecord":
        return cls(a=data["a"], mode=data["mode"], order=data["order"],
                   exact=complex_from_json(data["exact"]), approx=complex_from_json(data["approx"]),
                   abs_error=data["abs_error"], rel_error=data["rel_error"],
                   runtime_ms=data["runtime_ms"], error=data["error"])


@dataclass
class OrderFit:
    """Least-squares slope of log(abs_error) against log(1/a)."""
    order: int
    mode: str
    fitted_power: Optional[float] = None
    r_squared: Optional[float] = None
    points_used: int = 0
    status: str = "fitted"

    def to_dict(self) -> dict:
        return {"order": self.order, "mode": self.mode, "fitted_power": self.fitted_power,
                "r_squared": self.r_squared, "points_used": self.points_used, "status": self.status}


def _approximation(f: TestFunction, a: float, order: int, variant: str, coeff_mode: TknMode,
                   spec: QuadratureSpec, nb: float) -> complex:
    if variant == "sharp":
        return sharp_expansion(f, a, order, coeff_mode, spec, nb=nb).value
    if variant == "rough":
        return rough_expansion(f, a, order, spec).value
    return leading_pairing(f, spec).value


def _timed(fn, *args):
    started = time.perf_counter()
    try:
        return fn(*args), "", (time.perf_counter() - started) * 1000.0
    except ConeKernelError as exc:
        logger.warning(f"row computation failed: {exc}", method="sweep")
        return None, f"{type(exc).__name__}: {exc}", (time.perf_counter() - started) * 1000.0


def _exact_for_a(f: TestFunction, a: float, modes: Sequence[str], spec: QuadratureSpec) -> dict:
    # modes share the cached real part, so one thread per a
    return {mode: _timed(lambda m: pairing_exact(f, a, m, spec).value, mode) for mode in modes}


def sweep(f: TestFunction, a_values: Sequence[float] = DEFAULT_A_VALUES, orders: Sequence[int] = DEFAULT_ORDERS,
          modes: Sequence[str] = DEFAULT_MODES, spec: Optional[QuadratureSpec] = None,
          variant: str = "sharp", coeff_mode: TknMode | str = TknMode.DERIVED, nb: float = 1.0,
          workers: Optional[int] = None) -> list[ConvergenceRecord]:
    """
    Exact pairing vs truncated expansion for every (a, order, mode).

    exact is pairing_exact(f, a, mode); approx is the `variant` expansion
    ("sharp" with coeff_mode coefficients, "rough", or "leading"). Failures are
    recorded per row. Records are sorted by (a, order, mode).
    """
    spec = spec or QuadratureSpec()
    coeff_mode = TknMode.parse(coeff_mode)
    modes = [PrescriptionMode.parse(m).value for m in modes]
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}; choose from {list(VARIANTS)}")
    bad_a = [a for a in a_values if not (math.isfinite(a) and a > 0)]
    if bad_a:
        raise DomainError(f"a values must be finite and > 0, got {bad_a}")
    bad_orders = [q for q in orders if int(q) != q or q < 0]
    if bad_orders:
        raise DomainError(f"orders must be non-negative integers, got {bad_orders}")

    unique_a = sorted(set(float(a) for a in a_values))
    unique_orders = sorted(set(int(q) for q in orders))
    logger.info("sweep started", method="sweep", a_values=unique_a, orders=unique_orders,
                modes=modes, variant=variant)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        exact_jobs = {a: pool.submit(_exact_for_a, f, a, modes, spec) for a in unique_a}
        approx_jobs = {(a, q): pool.submit(_timed, _approximation, f, a, q, variant, coeff_mode, spec, nb)
                       for a in unique_a for q in unique_orders}
        exact = {a: job.result() for a, job in exact_jobs.items()}
        approx = {key: job.result() for key, job in approx_jobs.items()}

    records = []
    for a, q, mode in itertools.product(a_values, orders, modes):
        a, q = float(a), int(q)
        exact_value, exact_error, exact_ms = exact[a][mode]
        approx_value, approx_error, approx_ms = approx[(a, q)]
        record = ConvergenceRecord(a=a, mode=mode, order=q, exact=exact_value, approx=approx_value,
                                   runtime_ms=exact_ms + approx_ms,
                                   error="; ".join(e for e in (exact_error, approx_error) if e))
        if exact_value is not None and approx_value is not None:
            record.abs_error = abs(exact_value - approx_value)
            if abs(exact_value) > REL_ERROR_FLOOR:
                record.rel_error = record.abs_error / abs(exact_value)
        records.append(record)
    records.sort(key=lambda r: r.key)
    logger.info("sweep done", method="sweep", records=len(records),
                failed=sum(bool(r.error) for r in records))
    return records


def fit_order(records: Iterable[ConvergenceRecord]) -> OrderFit:
    """
    Fit abs_error ~ C * (1/a)^p over records sharing (order, mode).

    Raises:
        DomainError: records mix orders/modes or repeat an a value
        BelowNoiseFloorError: errors are exactly zero, nothing to fit
        FitError: fewer than 3 usable points
    """
    records = [r for r in records if not r.error and r.abs_error is not None and math.isfinite(r.abs_error)]
    groups = {(r.order, r.mode) for r in records}
    if len(groups) > 1:
        raise DomainError(f"records must share (order, mode), got {sorted(groups)}")
    if len({r.a for r in records}) != len(records):
        raise DomainError("records must have distinct a values")
    positive = [r for r in records if r.abs_error > 0]
    if len(positive) < 3:
        if len(records) - len(positive) > 0 and len(records) >= 3:
            raise BelowNoiseFloorError(
                f"{len(records) - len(positive)} of {len(records)} errors are exactly zero (below noise floor)")
        raise FitError(f"order fit needs at least 3 usable points, got {len(positive)}")

    x = np.log([1.0 / r.a for r in positive])
    y = np.log([r.abs_error for r in positive])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if total == 0.0 else 1.0 - float(np.sum(residual ** 2)) / total
    order, mode = groups.pop()
    fit = OrderFit(order=order, mode=mode, fitted_power=float(slope),
                   r_squared=min(max(r_squared, 0.0), 1.0), points_used=len(positive))
    logger.debug("order fitted", method="fit_order", order=order, mode=mode, power=fit.fitted_power,
                 r_squared=fit.r_squared)
    return fit


def fit_all(records: Sequence[ConvergenceRecord]) -> list[OrderFit]:
    """One OrderFit per (order, mode); unfittable groups carry a status instead of a power."""
    fits = []
    keys = sorted({(r.order, r.mode) for r in records})
    for order, mode in keys:
        group = [r for r in records if (r.order, r.mode) == (order, mode)]
        unique = {r.a: r for r in group}
        try:
            fits.append(fit_order(unique.values()))
        except BelowNoiseFloorError:
            fits.append(OrderFit(order=order, mode=mode, points_used=len(unique), status="below_noise_floor"))
        except FitError:
            fits.append(OrderFit(order=order, mode=mode, points_used=len(unique), status="insufficient_points"))
    return fits


def render_report(records: Sequence[ConvergenceRecord], fits: Sequence[OrderFit], fmt: str = "csv") -> tuple[str, str]:
    """(primary text, fits text); for json the fits live inside the primary document."""
    if fmt == "json":
        return render_json({"records": [r.to_dict() for r in records],
                            "fits": [f.to_dict() for f in fits]}), ""
    if fmt == "csv":
        return (render_csv((r.to_row() for r in records), RECORD_COLUMNS),
                render_csv((f.to_dict() for f in fits), FIT_COLUMNS))
    raise DomainError(f"unknown report format {fmt!r}; choose csv or json")


def emit_report(records: Sequence[ConvergenceRecord], fits: Sequence[OrderFit], fmt: str = "csv",
                path=None) -> str:
    """
    Render a sweep report; with a path, write it (CSV fits go to <stem>.fits.csv).

    Returns the primary text. Without a path, CSV fits follow the records
    table after one blank line.

    Raises:
        ReportError: destination not writable
    """
    primary, fits_text = render_report(records, fits, fmt)
    if path is None:
        return primary + ("\n" + fits_text if fits_text else "")
    write_text(primary, path)
    if fits_text:
        write_text(fits_text, sibling_path(path, "fits"))
    return primary


def load_report(path) -> tuple[list[ConvergenceRecord], list[OrderFit]]:
    """Read a JSON report written by emit_report."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    return ([ConvergenceRecord.from_dict(r) for r in document["records"]],
            [OrderFit(**f) for f in document["fits"]])
