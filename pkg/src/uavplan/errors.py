"""Exception and warning types shared by every module.

Each error carries the name of the module that raised it so the CLI can
report where a failure originated without parsing messages.
"""

from __future__ import annotations

import warnings


class PlanningError(Exception):
    """Base class for all errors raised by uavplan."""

    module = "uavplan"

    def __init__(self, message: str, *, module: str | None = None):
        super().__init__(message)
        if module is not None:
            self.module = module


class ValidationError(PlanningError, ValueError):
    """An input value violates one invariant.

    ``field`` is a dotted/indexed path such as ``uav.alpha`` or
    ``tables[1].perf_r[0][2].rate``.
    """

    module = "profiles"

    def __init__(self, field: str, message: str, *, module: str | None = None):
        self.field = field
        self.reason = message
        super().__init__(f"{field}: {message}", module=module)

    def prefixed(self, prefix: str) -> "ValidationError":
        if not prefix:
            return self
        sep = "" if self.field.startswith("[") or not self.field else "."
        field = f"{prefix}{sep}{self.field}" if self.field else prefix
        err = type(self)(field, self.reason, module=self.module)
        err.__cause__ = self.__cause__
        return err


class UnknownModelError(ValidationError):
    """A table or flight references a model_id absent from the edge profile."""


class ParseError(PlanningError):
    """A file could not be read or decoded; ``line`` is set for row-based formats."""

    def __init__(self, path: str, message: str, *, line: int | None = None, module: str | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}", module=module)


class InfeasibleError(PlanningError):
    """No flight parameter set satisfies the task's minimum score."""

    module = "decision"

    def __init__(self, perf_min: float, best_perf_max: float | None):
        self.perf_min = perf_min
        self.best_perf_max = best_perf_max
        best = "no tables" if best_perf_max is None else f"best perf_max seen {best_perf_max:.4f}"
        super().__init__(f"no candidate reaches perf_min={perf_min:.4f} ({best})")


class PlanningWarning(UserWarning):
    """A non-fatal diagnostic tagged with its originating module."""

    def __init__(self, module: str, message: str):
        super().__init__(f"[{module}] {message}")
        self.module = module
        self.text = message


def warn(module: str, message: str) -> None:
    warnings.warn(PlanningWarning(module, message), stacklevel=3)
