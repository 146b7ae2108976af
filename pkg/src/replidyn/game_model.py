"""Consumer/producer delivery game: parameters, payoffs and regime classification.

Consumers are Eager (E) or Laid-back (L); producers deliver Fast (F) or
Slow (S). ``x`` is the share of Eager consumers and ``y`` the share of Fast
producers. Rows of the bimatrix are consumer strategies (E, L), columns are
producer strategies (F, S)::

            F               S
    E   (u1, psi + mu)   (u4, 0)
    L   (u3, 0)          (u2, psi)
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

__all__ = [
    "EconomicPrimitives",
    "GameParams",
    "PopulationState",
    "Regime",
    "classify_regime",
    "expected_payoffs",
    "markups_from_primitives",
    "meeting_probabilities",
    "payoff_matrix",
    "validate",
]


@dataclass(frozen=True)
class EconomicPrimitives:
    """Price, marginal cost, fast-delivery premium and freight cost (per unit)."""

    p: float
    cmg: float
    delta: float
    cf: float


def markups_from_primitives(prim: EconomicPrimitives) -> tuple[float, float]:
    """Return ``(psi, mu)``: operating markup ``p - cmg`` and logistics markup ``delta - cf``."""
    return prim.p - prim.cmg, prim.delta - prim.cf


@dataclass(frozen=True)
class GameParams:
    """The six numbers that fully determine a scenario.

    Construction never rejects a parameter set; use :func:`validate` to check
    the ordering assumptions. ``primitives`` is kept only as provenance when
    the markups were derived from it.
    """

    u1: float
    u2: float
    u3: float
    u4: float
    psi: float
    mu: float
    primitives: EconomicPrimitives | None = None

    @classmethod
    def build(
        cls,
        u1: float,
        u2: float,
        u3: float,
        u4: float,
        psi: float | None = None,
        mu: float | None = None,
        primitives: EconomicPrimitives | None = None,
    ) -> GameParams:
        """Build from direct markups, from economic primitives, or both.

        When both are given the direct ``(psi, mu)`` win and a
        :class:`UserWarning` is emitted.
        """
        direct = psi is not None or mu is not None
        if direct and (psi is None or mu is None):
            raise ValueError("psi and mu must be given together")
        if primitives is None:
            if not direct:
                raise ValueError("need either (psi, mu) or economic primitives")
        elif direct:
            derived = markups_from_primitives(primitives)
            warnings.warn(
                f"both markups {(psi, mu)} and primitives (giving {derived}) supplied; "
                "using the direct markups",
                UserWarning,
                stacklevel=2,
            )
        else:
            psi, mu = markups_from_primitives(primitives)
        return cls(float(u1), float(u2), float(u3), float(u4), float(psi), float(mu), primitives)

    def with_markups(self, psi: float, mu: float) -> GameParams:
        return GameParams(self.u1, self.u2, self.u3, self.u4, psi, mu)

    @property
    def utilities(self) -> tuple[float, float, float, float]:
        return self.u1, self.u2, self.u3, self.u4


@dataclass(frozen=True)
class PopulationState:
    """A point of the unit square: ``x`` Eager share, ``y`` Fast share."""

    x: float
    y: float

    def __post_init__(self):
        for name in ("x", "y"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v!r} outside [0, 1]")

    def __iter__(self):
        yield self.x
        yield self.y


class Regime(enum.Enum):
    OscillatoryProp1 = "OscillatoryProp1"
    BistableProp2 = "BistableProp2"
    OutOfScope = "OutOfScope"


def validate(params: GameParams) -> list[str]:
    """List every violated modelling assumption; empty when the parameters are valid.

    Comparisons are strict and exact: callers that want fuzzy validation
    must round beforehand.
    """
    violations = []
    values = {n: getattr(params, n) for n in ("u1", "u2", "u3", "u4", "psi", "mu")}
    for name, v in values.items():
        if not math.isfinite(v):
            violations.append(f"{name} is finite")
    if violations:
        return violations
    chain = [("u1", "u2"), ("u2", "u3"), ("u3", "u4")]
    for hi, lo in chain:
        if not values[hi] > values[lo]:
            violations.append(f"{hi} > {lo}")
    if not abs(params.psi) > abs(params.mu):
        violations.append("|psi| > |mu|")
    return violations


def meeting_probabilities(state: PopulationState) -> tuple[float, float, float, float]:
    """Probabilities of the pairings (E,F), (E,S), (L,F), (L,S) under random matching."""
    x, y = state
    return x * y, x * (1.0 - y), (1.0 - x) * y, (1.0 - x) * (1.0 - y)


def payoff_matrix(params: GameParams) -> tuple[tuple[tuple[float, float], ...], ...]:
    """Bimatrix of ``(consumer payoff, producer payoff)``; a failed trade pays the producer 0."""
    return (
        ((params.u1, params.psi + params.mu), (params.u4, 0.0)),
        ((params.u3, 0.0), (params.u2, params.psi)),
    )


def expected_payoffs(
    params: GameParams, state: PopulationState
) -> tuple[float, float, float, float]:
    """Expected payoff of each pure strategy against the opposing population.

    Returns ``(uE, uL, piF, piS)``.
    """
    x, y = state
    u_e = params.u1 * y + params.u4 * (1.0 - y)
    u_l = params.u3 * y + params.u2 * (1.0 - y)
    pi_f = (params.psi + params.mu) * x
    pi_s = params.psi * (1.0 - x)
    return u_e, u_l, pi_f, pi_s


def classify_regime(params: GameParams) -> Regime:
    psi, mu = params.psi, params.mu
    if psi < psi + mu < 0:
        return Regime.OscillatoryProp1
    if psi + mu > psi > 0:
        return Regime.BistableProp2
    return Regime.OutOfScope


RETAIL = GameParams(8.0, 5.0, 2.0, 1.0, -10.0, 2.0)
ECOMMERCE = GameParams(8.0, 5.0, 2.0, 1.0, 10.0, 2.0)
