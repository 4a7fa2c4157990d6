"""
Configuration for cone-kernel runs.

Precedence: built-in defaults < config file < command-line flags.

Environment:
    CONEKERNEL_CONFIG_PATH: config file read when --config is not given
    CONEKERNEL_OUTPUT_DIR: base directory for relative --out paths
    CONEKERNEL_QUADRATURE: default quadrature preset (default, fast, strict)
    CONEKERNEL_LOG_LEVEL: read by logging_config.setup_logging
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .errors import ConfigError, ConeKernelError
from .kernel import TknMode
from .logging_config import get_logger
from .quad import PrescriptionMode, QuadratureSpec
from .registry import (
    build_test_function,
    factorization_registry,
    register_configured_functions,
    test_function_registry,
)

logger = get_logger(__name__, component="Configuration")

CONFIG_PATH_ENV = "CONEKERNEL_CONFIG_PATH"
OUTPUT_DIR_ENV = "CONEKERNEL_OUTPUT_DIR"
QUADRATURE_ENV = "CONEKERNEL_QUADRATURE"

SUBCOMMANDS = ("tkn", "pair", "expand", "sweep", "lemma1", "discrepancy", "solve")
FORMATS = ("csv", "json")
EXPANSION_VARIANTS = ("rough", "sharp")
SWEEP_VARIANTS = ("sharp", "rough", "leading")


# Named quadrature presets
QUADRATURE_PRESETS = {
    "default": QuadratureSpec(),
    "fast": QuadratureSpec(
        abs_tol=1e-9,
        rel_tol=1e-8,
        max_subdivisions=500,
        excision_schedule=(1e-2, 5e-3, 2.5e-3, 1.25e-3),
        truncation_radius=8.0,
        tau_schedule=(0.02, 0.01, 0.005, 0.0025),
        extrapolation_order=3,
    ),
    "strict": QuadratureSpec(
        abs_tol=1e-14,
        rel_tol=1e-12,
        max_subdivisions=5000,
        excision_schedule=tuple(5e-3 * 2.0 ** -j for j in range(8)),
        truncation_radius=12.0,
        tau_schedule=tuple(0.01 * 2.0 ** -j for j in range(6)),
        extrapolation_order=5,
    ),
}


def get_quadrature_spec(selection: str | Mapping | QuadratureSpec | None = None) -> QuadratureSpec:
    """
    Resolve a quadrature selection.

    Args:
        selection: preset name, mapping of QuadratureSpec fields (optionally with
            a "preset" key to start from), a QuadratureSpec, or None for the
            preset named by CONEKERNEL_QUADRATURE (default "default")

    Raises:
        ConfigError: unknown preset or invalid fields
    """
    if isinstance(selection, QuadratureSpec):
        return selection
    if selection is None:
        selection = os.environ.get(QUADRATURE_ENV, "default")
    if isinstance(selection, str):
        if selection not in QUADRATURE_PRESETS:
            raise ConfigError(f"unknown quadrature preset {selection!r}; available: {list(QUADRATURE_PRESETS)}",
                              fields=["quadrature"])
        return QUADRATURE_PRESETS[selection]
    if not isinstance(selection, Mapping):
        raise ConfigError("quadrature must be a preset name or a mapping", fields=["quadrature"])
    data = dict(selection)
    base = get_quadrature_spec(data.pop("preset", None))
    merged = {**base.to_dict(), **data}
    try:
        return QuadratureSpec.from_dict(merged)
    except (ConeKernelError, TypeError) as exc:
        raise ConfigError(f"invalid quadrature settings: {exc}",
                          fields=[f"quadrature.{k}" for k in sorted(data)] or ["quadrature"]) from exc


def get_config_path() -> Optional[str]:
    """Config file path from the environment, if any."""
    return os.environ.get(CONFIG_PATH_ENV) or None


def load_config_file(path) -> dict:
    """
    Parse a YAML (.yaml/.yml) or JSON config file into a mapping.

    Raises:
        ConfigError: unreadable file, parse error (with line and column, 1-based)
            or a top level that is not a mapping
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line, column = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
            logger.error(f"config parse error: {exc}", method="load_config_file", path=str(path))
            raise ConfigError(f"cannot parse {path}: {getattr(exc, 'problem', exc)}",
                              line=line, column=column) from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            logger.error(f"config parse error: {exc}", method="load_config_file", path=str(path))
            raise ConfigError(f"cannot parse {path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a mapping at the top level")
    logger.info("loaded config", method="load_config_file", path=str(path), keys=sorted(data))
    return data


def resolve_output_path(out) -> Optional[Path]:
    """Relative paths resolve against CONEKERNEL_OUTPUT_DIR when it is set."""
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _parse_float(value) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(value)


@dataclass
class RunConfig:
    """
    One CLI invocation after defaults, config file and flags are merged.

    Fields unused by the subcommand are ignored. `mode` is a T_{k,N} mode for
    tkn/expand/solve and a prescription mode for pair.
    """
    subcommand: str
    fn: str = "xi1_gaussian"
    fn1d: str = "gaussian"
    rhs: str = "xi1_gaussian"
    fact: str = "identity"
    mode: Optional[str] = None
    k: Optional[int] = None
    N: Optional[float] = None
    xi1: Optional[float] = None
    a: Optional[float] = None
    order: int = 0
    variant: str = "sharp"
    a_values: list = field(default_factory=lambda: [10.0, 30.0, 100.0, 300.0])
    orders: list = field(default_factory=lambda: [0, 2, 4])
    modes: list = field(default_factory=lambda: [m.value for m in PrescriptionMode])
    coeff_mode: str = TknMode.DERIVED.value
    sweep_variant: str = "sharp"
    nb: float = 1.0
    grid: int = 4096
    halfwidth: float = 20.0
    nmax: int = 3
    grid_file: Optional[str] = None
    points_file: Optional[str] = None
    points: Optional[list] = None
    s: float = 0.0
    out: Optional[str] = None
    format: str = "csv"
    quadrature: Any = None
    test_functions: dict = field(default_factory=dict)
    workers: Optional[int] = None

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_sources(cls, subcommand: str, file_data: Optional[Mapping] = None,
                     overrides: Optional[Mapping] = None) -> "RunConfig":
        """
        Merge config-file values and flag overrides (None means "not given"), then validate.
        Test functions defined in the config are registered only after validation passes.

        A config file may hold the keys directly or per subcommand under a
        section named after it; the section wins over top-level keys.

        Raises:
            ConfigError: unknown keys or any invalid field (all reported at once)
        """
        file_data = dict(file_data or {})
        sections = {name: file_data.pop(name) for name in SUBCOMMANDS if isinstance(file_data.get(name), dict)}
        for name in SUBCOMMANDS:
            file_data.pop(name, None)
        merged = {**file_data, **sections.get(subcommand, {})}
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        merged.pop("subcommand", None)
        unknown = sorted(set(merged) - cls.field_names())
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}", fields=unknown)
        config = cls(subcommand=subcommand, **merged)
        config.validate()
        if config.test_functions:
            register_configured_functions(config.test_functions)
        return config

    def validate(self):
        """Coerce field types and check every field the subcommand uses; raise once with all problems."""
        problems: dict[str, str] = {}

        def check(name, condition, message):
            if name in problems:
                return
            try:
                ok = condition()
            except (TypeError, ValueError):
                ok = False
            if not ok:
                problems[name] = message

        def coerce(name, kind):
            value = getattr(self, name)
            if value is None:
                return
            try:
                if kind is list:
                    items = value.split(",") if isinstance(value, str) else list(value)
                    setattr(self, name, items)
                else:
                    setattr(self, name, kind(value))
            except (TypeError, ValueError):
                problems[name] = f"cannot interpret {value!r}"

        for name in ("k", "order", "grid", "nmax"):
            coerce(name, int)
        for name in ("N", "xi1", "a", "nb", "halfwidth", "s"):
            coerce(name, _parse_float)
        for name in ("a_values", "orders", "modes"):
            coerce(name, list)
        if "a_values" not in problems:
            try:
                self.a_values = [float(a) for a in self.a_values]
            except (TypeError, ValueError):
                problems["a_values"] = f"cannot interpret {self.a_values!r}"
        if "orders" not in problems:
            try:
                self.orders = [int(q) for q in self.orders]
            except (TypeError, ValueError):
                problems["orders"] = f"cannot interpret {self.orders!r}"
        if "modes" not in problems:
            self.modes = [str(m).strip() for m in self.modes]

        defined = set()
        if self.test_functions:
            if not isinstance(self.test_functions, dict):
                problems["test_functions"] = "must be a mapping of name -> definition"
            else:
                # built here only to check them; from_sources registers once all fields pass
                for name, data in self.test_functions.items():
                    try:
                        build_test_function(name, data)
                        defined.add(name)
                    except ConfigError as exc:
                        problems.setdefault(exc.fields[0] if exc.fields else "test_functions", str(exc))

        def known_function(name):
            return name in defined or name in test_function_registry

        try:
            self.quadrature = get_quadrature_spec(self.quadrature)
        except ConfigError as exc:
            problems["quadrature"] = str(exc)

        sub = self.subcommand
        check("subcommand", lambda: sub in SUBCOMMANDS, f"unknown subcommand {sub!r}; choose from {list(SUBCOMMANDS)}")
        check("format", lambda: self.format in FORMATS, f"format must be one of {list(FORMATS)}")
        check("workers", lambda: self.workers is None or int(self.workers) >= 1, "workers must be >= 1")

        tkn_modes = [m.value for m in TknMode]
        prescription_modes = [m.value for m in PrescriptionMode]
        if sub == "tkn":
            check("k", lambda: self.k is not None and self.k >= 0, "k is required and must be >= 0")
            check("N", lambda: self.N is not None and self.N > 0, "N is required and must be > 0")
            check("xi1", lambda: self.xi1 is not None and self.xi1 != 0, "xi1 is required and must be nonzero")
            if "N" not in problems and "xi1" not in problems:
                check("xi1", lambda: abs(self.xi1) < self.N, f"|xi1| must be < N={self.N}")
            check("mode", lambda: self.mode is None or self.mode in tkn_modes, f"mode must be one of {tkn_modes}")
        if sub in ("pair", "expand"):
            check("fn", lambda: known_function(self.fn), f"unknown test function {self.fn!r}")
            check("a", lambda: self.a is not None and math.isfinite(self.a) and self.a > 0,
                  "a is required and must be finite and > 0")
        if sub == "pair":
            check("mode", lambda: self.mode is None or self.mode in prescription_modes,
                  f"mode must be one of {prescription_modes}")
        if sub in ("expand", "solve"):
            check("order", lambda: self.order >= 0, "order must be >= 0")
            check("mode", lambda: self.mode is None or self.mode in tkn_modes, f"mode must be one of {tkn_modes}")
        if sub == "expand":
            check("variant", lambda: self.variant in EXPANSION_VARIANTS, f"variant must be one of {list(EXPANSION_VARIANTS)}")
            check("nb", lambda: self.nb > 0, "nb must be > 0")
        if sub == "sweep":
            check("fn", lambda: known_function(self.fn), f"unknown test function {self.fn!r}")
            check("a_values", lambda: bool(self.a_values) and all(math.isfinite(a) and a > 0 for a in self.a_values),
                  "a_values must be non-empty, finite and > 0")
            check("orders", lambda: bool(self.orders) and all(q >= 0 for q in self.orders), "orders must be non-empty and >= 0")
            check("modes", lambda: bool(self.modes) and all(m in prescription_modes for m in self.modes),
                  f"modes must be drawn from {prescription_modes}")
            check("coeff_mode", lambda: self.coeff_mode in tkn_modes, f"coeff_mode must be one of {tkn_modes}")
            check("sweep_variant", lambda: self.sweep_variant in SWEEP_VARIANTS,
                  f"sweep_variant must be one of {list(SWEEP_VARIANTS)}")
            check("nb", lambda: self.nb > 0, "nb must be > 0")
        if sub == "lemma1":
            check("k", lambda: self.k is not None and self.k >= 0, "k is required and must be >= 0")
            check("fn1d", lambda: known_function(self.fn1d), f"unknown test function {self.fn1d!r}")
            check("grid", lambda: self.grid >= 16, "grid must be >= 16")
            check("halfwidth", lambda: self.halfwidth > 0, "halfwidth must be > 0")
        if sub == "discrepancy":
            check("nmax", lambda: self.nmax >= 1, "nmax must be >= 1")
            check("grid_file", lambda: self.grid_file is None or Path(self.grid_file).is_file(),
                  f"grid file {self.grid_file!r} not found")
        if sub == "solve":
            check("fact", lambda: self.fact in factorization_registry, f"unknown factorization {self.fact!r}")
            check("rhs", lambda: known_function(self.rhs), f"unknown test function {self.rhs!r}")
            check("points_file", lambda: self.points is not None or (self.points_file and Path(self.points_file).is_file()),
                  "solve needs points (config) or an existing points_file")

        if problems:
            names = sorted(problems)
            logger.error("invalid configuration", method="validate", fields=names)
            raise ConfigError("invalid configuration: " + "; ".join(f"{n}: {problems[n]}" for n in names),
                              fields=names)
        return self

    @property
    def output_path(self) -> Optional[Path]:
        return resolve_output_path(self.out)
