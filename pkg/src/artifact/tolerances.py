"""Numerical tolerances shared by all modules.

The defaults live in a frozen dataclass.  A scaled copy can be installed for
the duration of a ``with use_tolerances(...)`` block; the active value is held
in a ``contextvars.ContextVar`` so concurrent callers do not interfere.
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses

import numpy as np

EPS = float(np.finfo(float).eps)


@dataclasses.dataclass(frozen=True)
class Tolerances:
    tol_herm: float = 1e-10
    rank_floor: float = 1e-10
    zero_tol: float = 1e-8
    quad_tol: float = 1e-10
    cluster_tol: float = 1e-8
    cond_cap: float = 1e8
    psd_tol: float = 1e-8
    # boundary classification
    type_one: float = 1e-6
    type_one_band: float = 1e-4
    property_tol: float = 1e-7
    # splitting
    y_floor: float = 1e-9
    strict: bool = False

    def scaled(self, factor: float) -> "Tolerances":
        """Multiply every threshold (not the caps or floors of y) by ``factor``."""
        names = ("tol_herm", "rank_floor", "zero_tol", "quad_tol", "cluster_tol",
                 "psd_tol", "type_one", "type_one_band", "property_tol")
        return dataclasses.replace(self, **{n: getattr(self, n) * factor for n in names})


DEFAULT = Tolerances()
_current: contextvars.ContextVar[Tolerances] = contextvars.ContextVar("tolerances", default=DEFAULT)


def tolerances() -> Tolerances:
    return _current.get()


@contextlib.contextmanager
def use_tolerances(tol: Tolerances):
    token = _current.set(tol)
    try:
        yield tol
    finally:
        _current.reset(token)
