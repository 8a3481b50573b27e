"""Process-wide numeric settings."""

from __future__ import annotations

import contextlib
from typing import Iterator

#: Absolute tolerance for cost comparisons and residual capacities.
TOL: float = 1e-9

#: When true, every min-cut call asserts max-flow/min-cut duality.
DEBUG: bool = False


@contextlib.contextmanager
def tolerance(value: float) -> Iterator[None]:
    """Temporarily override :data:`TOL`."""
    global TOL
    old = TOL
    TOL = float(value)
    try:
        yield
    finally:
        TOL = old
