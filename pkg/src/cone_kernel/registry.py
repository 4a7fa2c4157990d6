"""Named test functions and symbol factorizations.

Both registries map a name to a zero-argument factory. The CLI resolves
`--fn`, `--fn1d`, `--rhs` and `--fact` through them, and config files may add
test functions of their own (see `build_test_function`).
"""
from __future__ import annotations

import threading
from typing import Any, Callable, Generic, TypeVar

from .errors import ConfigError, ConeKernelError, RegistryError
from .logging_config import get_logger
from .testfn import TestFunction, make_bump, make_gaussian_hermite
from .wavesolve import SymbolFactorization, identity_factorization, rational_factorization

logger = get_logger(__name__, component="Registry")

T = TypeVar("T")


class Registry(Generic[T]):
    """Thread-safe name -> factory table."""

    def __init__(self, kind: str):
        self.kind = kind
        self._factories: dict[str, Callable[[], T]] = {}
        self._lock = threading.Lock()

    def register(self, name: str, factory: Callable[[], T], replace: bool = False):
        """
        Register a factory under name.

        Raises:
            RegistryError: name already taken and replace is False
        """
        if not callable(factory):
            raise RegistryError(f"{self.kind} factory for {name!r} must be callable")
        with self._lock:
            if name in self._factories and not replace:
                raise RegistryError(f"{self.kind} {name!r} is already registered")
            self._factories[name] = factory
        logger.debug(f"registered {self.kind}", method="register", name=name)

    def unregister(self, name: str) -> bool:
        with self._lock:
            if name in self._factories:
                del self._factories[name]
                logger.debug(f"unregistered {self.kind}", method="unregister", name=name)
                return True
        logger.warning(f"{self.kind} not found", method="unregister", name=name)
        return False

    def get(self, name: str) -> T:
        """
        Build the object registered under name.

        Raises:
            RegistryError: unknown name
        """
        with self._lock:
            factory = self._factories.get(name)
            known = sorted(self._factories)
        if factory is None:
            raise RegistryError(f"unknown {self.kind} {name!r}; available: {known}")
        return factory()

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._factories)

    def __contains__(self, name: str) -> bool:
        with self._lock:
            return name in self._factories


def registered(registry: Registry, name: str | None = None):
    """Decorator registering a factory function (name defaults to the function name)."""
    def decorator(factory: Callable) -> Callable:
        registry.register(name or factory.__name__, factory)
        return factory
    return decorator


test_function_registry: Registry[TestFunction] = Registry("test function")
factorization_registry: Registry[SymbolFactorization] = Registry("factorization")


@registered(test_function_registry)
def gaussian() -> TestFunction:
    return make_gaussian_hermite()


@registered(test_function_registry)
def xi1_gaussian() -> TestFunction:
    return make_gaussian_hermite(poly=((0.0,), (1.0,)))


@registered(test_function_registry)
def shifted_gaussian() -> TestFunction:
    return make_gaussian_hermite(center=(1.0, 0.0))


@registered(test_function_registry)
def xi2_gaussian() -> TestFunction:
    return make_gaussian_hermite(poly=((0.0, 1.0),))


@registered(test_function_registry)
def offaxis_gaussian() -> TestFunction:
    return make_gaussian_hermite(center=(0.0, 0.5))


@registered(test_function_registry)
def bump() -> TestFunction:
    return make_bump(1.0)


factorization_registry.register("identity", identity_factorization)
factorization_registry.register("rational", rational_factorization)

TEST_FUNCTION_FAMILIES = ("gaussian_hermite", "bump")


def build_test_function(name: str, data: Any) -> TestFunction:
    """
    Build a test function from a config mapping:
    {family: gaussian_hermite, center: [x, y], scale: s, poly: [[...], ...]}
    or {family: bump, support_radius: R, max_order: n}.

    Raises:
        ConfigError: unknown family, unknown keys or invalid parameters
    """
    field = f"test_functions.{name}"
    if not isinstance(data, dict):
        raise ConfigError(f"{field} must be a mapping", fields=[field])
    data = dict(data)
    family = data.pop("family", "gaussian_hermite")
    allowed = {"gaussian_hermite": {"center", "scale", "poly"},
               "bump": {"support_radius", "max_order"}}.get(family)
    if allowed is None:
        raise ConfigError(f"{field}.family {family!r} unknown; choose from {list(TEST_FUNCTION_FAMILIES)}",
                          fields=[f"{field}.family"])
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{field} has unknown keys {unknown}", fields=[f"{field}.{k}" for k in unknown])
    try:
        if family == "bump":
            return make_bump(**data)
        if "center" in data:
            data["center"] = tuple(data["center"])
        return make_gaussian_hermite(**data)
    except (ConeKernelError, TypeError, ValueError) as exc:
        raise ConfigError(f"{field}: {exc}", fields=[field]) from exc


def register_configured_functions(definitions: dict, registry: Registry[TestFunction] = test_function_registry):
    """Register (replacing) every test function defined in a config's test_functions section."""
    for name, data in definitions.items():
        fn = build_test_function(name, data)
        registry.register(name, lambda fn=fn: fn, replace=True)
