"""Monotone edge flow functions.

Each edge carries a :class:`FlowFunctionSpec` mapping the flow on the edge
to the potential drop across it.  Three families are supported:

``linear-multi``
    ``g(f) = sum_i c_i f_i`` over one or more commodities.  LinDistFlow is
    the two-commodity case with ``c = (2r, 2x)``.
``quadratic-boost``
    ``g(f) = alpha * f * |f| + beta``, the steady-state gas pipe law with a
    constant compressor boost ``beta``.
``power-law``
    ``g(f) = alpha * f * |f|**(gamma - 1) + beta``; water pipes use
    ``gamma = 1.852`` (Hazen-Williams).

Flow arrays carry the commodity on the trailing axis, so a batch of flows
for a two-commodity edge has shape ``(..., 2)``.  Scalars are accepted for
single-commodity specs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, InvalidSpec, NotInvertible

LINEAR = "linear-multi"
QUADRATIC = "quadratic-boost"
POWER_LAW = "power-law"
FAMILIES = (LINEAR, QUADRATIC, POWER_LAW)

HAZEN_WILLIAMS_EXPONENT = 1.852

_PARAM_NAMES = {
    LINEAR: {"coeffs"},
    QUADRATIC: {"alpha", "beta"},
    POWER_LAW: {"alpha", "gamma", "beta"},
}


@dataclass(frozen=True)
class FlowFunctionSpec:
    """Parameters of one edge flow function.

    Use the :meth:`linear`, :meth:`quadratic` and :meth:`power_law`
    constructors rather than filling the fields by hand.
    """

    family: str
    coeffs: tuple = ()
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown flow family {self.family!r}")
        if self.family == LINEAR:
            c = tuple(float(x) for x in self.coeffs)
            if not c:
                raise InvalidSpec("linear-multi needs at least one coefficient")
            if not all(math.isfinite(x) and x >= 0 for x in c):
                raise InvalidSpec(f"linear coefficients must be finite and >= 0, got {c}")
            object.__setattr__(self, "coeffs", c)
            return
        if self.coeffs:
            raise InvalidSpec(f"{self.family} takes no coefficient vector")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidSpec(f"alpha must be > 0, got {self.alpha}")
        if not math.isfinite(self.beta):
            raise InvalidSpec(f"beta must be finite, got {self.beta}")
        if self.family == QUADRATIC:
            object.__setattr__(self, "gamma", 2.0)
        elif not (math.isfinite(self.gamma) and self.gamma >= 1):
            raise InvalidSpec(f"exponent gamma must be >= 1, got {self.gamma}")

    @classmethod
    def linear(cls, *coeffs):
        return cls(LINEAR, coeffs=tuple(coeffs))

    @classmethod
    def lindistflow(cls, r, x):
        """Power line with resistance ``r`` and reactance ``x``."""
        return cls(LINEAR, coeffs=(2.0 * r, 2.0 * x))

    @classmethod
    def quadratic(cls, alpha, beta=0.0):
        return cls(QUADRATIC, alpha=float(alpha), beta=float(beta))

    @classmethod
    def power_law(cls, alpha, gamma=HAZEN_WILLIAMS_EXPONENT, beta=0.0):
        return cls(POWER_LAW, alpha=float(alpha), beta=float(beta), gamma=float(gamma))

    @property
    def commodities(self) -> int:
        return len(self.coeffs) if self.family == LINEAR else 1

    @property
    def is_linear(self) -> bool:
        return self.family == LINEAR

    def with_beta(self, beta):
        """Copy with a different additive constant (nonlinear families only)."""
        if self.family == LINEAR:
            raise InvalidSpec("linear-multi has no additive constant")
        return FlowFunctionSpec(self.family, alpha=self.alpha, beta=float(beta), gamma=self.gamma)

    def scaled(self, k):
        """Copy whose drop is ``k`` times this one (``beta`` scaled too)."""
        if self.family == LINEAR:
            return FlowFunctionSpec(LINEAR, coeffs=tuple(k * c for c in self.coeffs))
        return FlowFunctionSpec(self.family, alpha=k * self.alpha, beta=k * self.beta, gamma=self.gamma)

    def to_dict(self) -> dict:
        if self.family == LINEAR:
            params = {"coeffs": list(self.coeffs)}
        elif self.family == QUADRATIC:
            params = {"alpha": self.alpha, "beta": self.beta}
        else:
            params = {"alpha": self.alpha, "gamma": self.gamma, "beta": self.beta}
        return {"family": self.family, "params": params}

    @classmethod
    def from_dict(cls, data) -> "FlowFunctionSpec":
        if not isinstance(data, dict) or set(data) - {"family", "params"}:
            raise InvalidSpec(f"flow spec must have exactly 'family' and 'params', got {data!r}")
        family = data.get("family")
        params = data.get("params", {})
        if family not in FAMILIES:
            raise InvalidSpec(f"unknown flow family {family!r}")
        if not isinstance(params, dict):
            raise InvalidSpec("flow 'params' must be an object")
        unknown = set(params) - _PARAM_NAMES[family]
        if unknown:
            raise InvalidSpec(f"unknown parameters for {family}: {sorted(unknown)}")
        try:
            if family == LINEAR:
                return cls.linear(*params["coeffs"])
            if family == QUADRATIC:
                return cls.quadratic(params["alpha"], params.get("beta", 0.0))
            return cls.power_law(params["alpha"], params.get("gamma", HAZEN_WILLIAMS_EXPONENT),
                                 params.get("beta", 0.0))
        except KeyError as exc:
            raise InvalidSpec(f"missing parameter {exc.args[0]!r} for {family}") from None
        except TypeError as exc:
            raise InvalidSpec(f"bad parameters for {family}: {exc}") from None


def _leading(spec, f):
    """Return the single-commodity flow array, checking the trailing axis."""
    f = np.asarray(f, dtype=float)
    k = spec.commodities
    if f.ndim == 0:
        if k != 1:
            raise DimensionMismatch(f"spec has {k} commodities, got a scalar flow")
        return f
    if f.shape[-1] != k:
        raise DimensionMismatch(f"spec has {k} commodities, flow has trailing axis {f.shape[-1]}")
    return f


def eval_g(spec: FlowFunctionSpec, f):
    """Potential drop ``g(f)`` across an edge carrying flow ``f``.

    >>> float(eval_g(FlowFunctionSpec.quadratic(2.0, 1.0), 3.0))
    19.0
    """
    f = _leading(spec, f)
    if spec.family == LINEAR:
        if f.ndim == 0:
            return f * spec.coeffs[0]
        return f @ np.asarray(spec.coeffs)
    x = f if f.ndim == 0 else f[..., 0]
    if spec.family == QUADRATIC:
        return spec.alpha * x * np.abs(x) + spec.beta
    return spec.alpha * x * np.abs(x) ** (spec.gamma - 1.0) + spec.beta


def invert_g(spec: FlowFunctionSpec, drop, method="closed"):
    """Flow producing the potential drop ``drop``.

    Returns an array of shape ``np.shape(drop) + (1,)``.  Only
    single-commodity specs are invertible; a multi-commodity linear edge has
    more unknowns than equations.  ``method="bisect"`` forces the numeric
    root finder instead of the closed form.
    """
    if spec.commodities != 1:
        raise NotInvertible(f"{spec.family} with {spec.commodities} commodities cannot be inverted")
    d = np.asarray(drop, dtype=float)
    if method == "bisect":
        out = np.vectorize(lambda v: _invert_numeric(spec, v), otypes=[float])(d)
        return out[..., None]
    if method != "closed":
        raise ValueError(f"unknown inversion method {method!r}")
    if spec.family == LINEAR:
        c = spec.coeffs[0]
        if c <= 0:
            raise NotInvertible("linear edge with zero coefficient carries no information")
        return (d / c)[..., None]
    y = (d - spec.beta) / spec.alpha
    return (np.sign(y) * np.abs(y) ** (1.0 / spec.gamma))[..., None]


def _invert_numeric(spec, drop, xtol=1e-14, max_expand=200):
    if spec.family == LINEAR and spec.coeffs[0] <= 0:
        raise NotInvertible("linear edge with zero coefficient carries no information")

    def resid(x):
        return float(eval_g(spec, x)) - drop

    lo, hi = -1.0, 1.0
    for _ in range(max_expand):
        if resid(lo) <= 0 <= resid(hi):
            break
        lo, hi = 2.0 * lo, 2.0 * hi
    else:
        raise NotInvertible(f"could not bracket drop {drop}")
    if resid(lo) == 0:
        return lo
    if resid(hi) == 0:
        return hi
    return brentq(resid, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


class MonotoneReport(NamedTuple):
    monotone: bool
    witness: Optional[tuple]


def is_monotone(spec: FlowFunctionSpec) -> MonotoneReport:
    """Check that the drop increases with flow.

    Nonlinear families are strictly increasing whenever ``alpha > 0``, which
    construction already enforces.  A linear spec qualifies when it is
    non-decreasing in every commodity (coefficients are non-negative by
    construction) and strictly increasing in at least one.  On failure the
    witness is a pair of flows ``(f1, f2)`` with ``f1 < f2`` but equal drop.
    """
    if spec.family != LINEAR:
        return MonotoneReport(True, None)
    if any(c > 0 for c in spec.coeffs):
        return MonotoneReport(True, None)
    k = spec.commodities
    for axis in range(k):
        for t in (0, 1, 2, 3, -1, -2, -3, -4):
            f1 = np.zeros(k)
            f2 = np.zeros(k)
            f1[axis], f2[axis] = t, t + 1
            if eval_g(spec, f2) <= eval_g(spec, f1):
                return MonotoneReport(False, (tuple(f1), tuple(f2)))
    return MonotoneReport(False, None)
