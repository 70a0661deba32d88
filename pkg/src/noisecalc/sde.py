"""Scalar SDE models under the three noise interpretations.

Conversions are coefficient-level: mapping an interpretation to Ito form
adds a multiple of ``g * dg/dx`` to the drift (0 for Ito, 1/2 for
Stratonovich, 1 for Hanggi-Klimontovich) and leaves the diffusion untouched.
Solving always routes through the Ito form or a direct evaluation-rule
scheme; see :mod:`noisecalc.solvers`.

Lipschitz / linear-growth hypotheses are not runtime-verified (the kinetic
case studies deliberately violate them at the boundary); models carry a
free-text ``assumptions`` note instead.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "Interpretation",
    "SdeModel",
    "GPrime",
    "finite_diff_gprime",
    "to_ito",
    "from_ito",
]

CoefficientFn = Callable[[np.ndarray, float], np.ndarray]


class Interpretation(enum.Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"
    HAENGGI_KLIMONTOVICH = "hk"

    @property
    def ito_drift_offset(self) -> float:
        """Multiple of ``g * dg/dx`` added to the drift to reach Ito form."""
        return {
            Interpretation.ITO: 0.0,
            Interpretation.STRATONOVICH: 0.5,
            Interpretation.HAENGGI_KLIMONTOVICH: 1.0,
        }[self]

    @classmethod
    def from_name(cls, name: str) -> "Interpretation":
        aliases = {
            "ito": cls.ITO,
            "stratonovich": cls.STRATONOVICH,
            "strat": cls.STRATONOVICH,
            "hk": cls.HAENGGI_KLIMONTOVICH,
            "hanggi-klimontovich": cls.HAENGGI_KLIMONTOVICH,
            "haenggi_klimontovich": cls.HAENGGI_KLIMONTOVICH,
        }
        try:
            return aliases[name.lower()]
        except KeyError:
            raise ValueError(f"unknown interpretation {name!r}") from None


class GPrime(NamedTuple):
    """A derivative estimate plus a reduced-accuracy flag."""

    value: float
    one_sided: bool


def finite_diff_gprime(
    g: CoefficientFn,
    x: float,
    t: float,
    h: float | None = None,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> GPrime:
    """Central difference of ``g`` in ``x``; one-sided near a domain edge.

    Default step ``h = max(1e-6, 1e-6 * |x|)``.  When the two-sided stencil
    exits the closed domain the difference falls back to a one-sided one and
    the result is flagged as reduced accuracy.
    """
    if h is None:
        h = max(1e-6, 1e-6 * abs(x))
    lo, hi = domain
    if x < lo or x > hi:
        raise ValueError(f"x={x} outside domain [{lo}, {hi}]")
    left_ok = x - h >= lo
    right_ok = x + h <= hi
    if left_ok and right_ok:
        return GPrime((float(g(x + h, t)) - float(g(x - h, t))) / (2 * h), False)
    if right_ok:
        return GPrime((float(g(x + h, t)) - float(g(x, t))) / h, True)
    if left_ok:
        return GPrime((float(g(x, t)) - float(g(x - h, t))) / h, True)
    raise ValueError(f"domain [{lo}, {hi}] too narrow for stencil width {h} at x={x}")


@dataclass(frozen=True)
class SdeModel:
    """Drift, diffusion, interpretation tag, and state domain.

    ``f`` and ``g`` are functions of ``(x, t)`` and should accept numpy
    arrays in ``x`` (the solvers evaluate them vectorized).  ``dgdx`` is the
    optional analytic spatial derivative of ``g``; when absent, conversions
    fall back to central finite differences.  The domain is an open
    interval; ``x0`` may sit on its closure so rest-start experiments are
    representable.
    """

    f: CoefficientFn
    g: CoefficientFn
    interpretation: Interpretation
    x0: float
    domain: tuple[float, float] = (-math.inf, math.inf)
    dgdx: CoefficientFn | None = None
    assumptions: str = ""
    label: str = ""

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"empty domain ({lo}, {hi})")
        if not (lo <= self.x0 <= hi):
            raise ValueError(f"x0={self.x0} outside the closed domain [{lo}, {hi}]")

    def gprime(self, x, t):
        """Spatial derivative of the diffusion coefficient at ``(x, t)``."""
        if self.dgdx is not None:
            return self.dgdx(x, t)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array(
            [finite_diff_gprime(self.g, float(v), t, domain=self.domain).value for v in xs]
        )
        return out if np.ndim(x) else float(out[0])


def _with_offset(model: SdeModel, offset: float) -> CoefficientFn:
    f, g = model.f, model.g
    gp = model.dgdx
    if gp is not None:
        def drift(x, t):
            return f(x, t) + offset * gp(x, t) * g(x, t)
    else:
        def drift(x, t):
            return f(x, t) + offset * model.gprime(x, t) * g(x, t)
    return drift


def to_ito(model: SdeModel) -> SdeModel:
    """Equivalent Ito-form model: drift picks up the interpretation offset.

    Requires ``g`` continuously differentiable on the domain.  An
    Ito-tagged model is returned unchanged (same object), so solving the
    converted model is bit-identical to solving the original.
    """
    offset = model.interpretation.ito_drift_offset
    if offset == 0.0:
        return model
    return replace(
        model,
        f=_with_offset(model, offset),
        interpretation=Interpretation.ITO,
        label=f"{model.label}->ito" if model.label else "",
    )


def from_ito(model: SdeModel, target: Interpretation) -> SdeModel:
    """Inverse of :func:`to_ito`: rewrite an Ito model in ``target`` form.

    The round trip ``to_ito(from_ito(m, target))`` reproduces the drift
    pointwise (up to roundoff in the add/subtract pair).
    """
    if model.interpretation is not Interpretation.ITO:
        raise ValueError(
            f"from_ito expects an Ito-tagged model, got {model.interpretation}"
        )
    if target is Interpretation.ITO:
        return model
    return replace(
        model,
        f=_with_offset(model, -target.ito_drift_offset),
        interpretation=target,
        label=f"{model.label}->{target.value}" if model.label else "",
    )
