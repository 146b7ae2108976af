"""Replicator vector field, Jacobian, stationary points and the constant of motion."""

from __future__ import annotations

import cmath
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from replidyn.game_model import GameParams, PopulationState

__all__ = [
    "BoundaryState",
    "ConservedQuantityH",
    "DegenerateInterior",
    "NoInteriorPoint",
    "PointKind",
    "ReducedCoefficients",
    "Stability",
    "StationaryPoint",
    "classify_eigenvalues",
    "conserved_quantity",
    "conserved_quantity_coefficients",
    "interior_eigenvalues",
    "interior_location",
    "jacobian",
    "jacobian_bound",
    "reduced_coefficients",
    "stationary_points",
    "vector_field",
]

logger = logging.getLogger(__name__)

# real parts below this magnitude count as zero when classifying
ZERO_REAL_PART = 1e-12


class DegenerateInterior(ValueError):
    """The producer bracket has zero slope, so the interior x-coordinate is undefined."""


class NoInteriorPoint(ValueError):
    pass


class BoundaryState(ValueError):
    pass


class PointKind(enum.Enum):
    Corner00 = "Corner00"
    Corner10 = "Corner10"
    Corner01 = "Corner01"
    Corner11 = "Corner11"
    Interior = "Interior"


class Stability(enum.Enum):
    Sink = "Sink"
    Source = "Source"
    Saddle = "Saddle"
    Center = "Center"
    NonHyperbolicOther = "NonHyperbolicOther"


@dataclass(frozen=True)
class ReducedCoefficients:
    """Brackets of the replicator equations written as ``a*y + b`` and ``c*x + d``."""

    a: float
    b: float
    c: float
    d: float


@dataclass(frozen=True)
class StationaryPoint:
    location: PopulationState
    kind: PointKind
    eigenvalues: tuple[complex, complex]
    stability: Stability

    @property
    def x(self) -> float:
        return self.location.x

    @property
    def y(self) -> float:
        return self.location.y

    @property
    def label(self) -> str:
        return f"({self.x:g},{self.y:g})"


@dataclass(frozen=True)
class ConservedQuantityH:
    """``H = cx*ln x + c1x*ln(1-x) + cy*ln y + c1y*ln(1-y)``."""

    cx: float
    c1x: float
    cy: float
    c1y: float

    def __call__(self, x: float, y: float) -> float:
        if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
            raise BoundaryState(f"H diverges on the boundary: ({x!r}, {y!r})")
        return (
            self.cx * math.log(x)
            + self.c1x * math.log1p(-x)
            + self.cy * math.log(y)
            + self.c1y * math.log1p(-y)
        )

    def gradient(self, x: float, y: float) -> tuple[float, float]:
        return self.cx / x - self.c1x / (1.0 - x), self.cy / y - self.c1y / (1.0 - y)


def reduced_coefficients(params: GameParams) -> ReducedCoefficients:
    u1, u2, u3, u4 = params.utilities
    return ReducedCoefficients(
        a=u1 - u3 + u2 - u4,
        b=u4 - u2,
        c=params.mu + 2.0 * params.psi,
        d=-params.psi,
    )


def _brackets(params: GameParams, x: float, y: float) -> tuple[float, float]:
    # Written as blends of the edge values (equal to a*y + b and c*x + d) so
    # that corner Jacobian entries reproduce the closed-form eigenvalues bit for bit.
    u1, u2, u3, u4 = params.utilities
    consumer = (u1 - u3) * y + (u4 - u2) * (1.0 - y)
    producer = (params.psi + params.mu) * x - params.psi * (1.0 - x)
    return consumer, producer


def vector_field(params: GameParams, state: PopulationState | tuple[float, float]) -> tuple[float, float]:
    """Time derivative ``(xdot, ydot)`` of the two-population replicator dynamics."""
    x, y = state
    bx, by = _brackets(params, x, y)
    return x * (1.0 - x) * bx, y * (1.0 - y) * by


def field_function(params: GameParams):
    """Fast scalar closure ``f(x, y) -> (xdot, ydot)`` for integrators."""
    u1, u2, u3, u4 = params.utilities
    top, bottom = u1 - u3, u4 - u2
    right, left = params.psi + params.mu, -params.psi

    def f(x: float, y: float) -> tuple[float, float]:
        return (
            x * (1.0 - x) * (top * y + bottom * (1.0 - y)),
            y * (1.0 - y) * (right * x + left * (1.0 - x)),
        )

    return f


def jacobian_bound(params: GameParams):
    """Closure returning the infinity norm of the Jacobian at ``(x, y)``."""
    k = reduced_coefficients(params)

    def bound(x: float, y: float) -> float:
        bx = k.a * y + k.b
        by = k.c * x + k.d
        row1 = abs((1.0 - 2.0 * x) * bx) + abs(k.a * (x - x * x))
        row2 = abs(k.c * (y - y * y)) + abs((1.0 - 2.0 * y) * by)
        return row1 if row1 > row2 else row2

    return bound


def jacobian(params: GameParams, state: PopulationState | tuple[float, float]) -> np.ndarray:
    x, y = state
    k = reduced_coefficients(params)
    bx, by = _brackets(params, x, y)
    return np.array(
        [
            [(1.0 - 2.0 * x) * bx, k.a * (x - x * x)],
            [k.c * (y - y * y), (1.0 - 2.0 * y) * by],
        ]
    )


def _eigenvalues_2x2(m: np.ndarray) -> tuple[complex, complex]:
    (p, q), (r, s) = m.tolist()
    if q == 0.0 or r == 0.0:
        # triangular: the diagonal is the spectrum, keep it exact
        return complex(p), complex(s)
    half_tr = 0.5 * (p + s)
    disc = cmath.sqrt(0.25 * (p - s) ** 2 + q * r)
    return half_tr + disc, half_tr - disc


def classify_eigenvalues(eigenvalues: tuple[complex, complex]) -> Stability:
    l1, l2 = eigenvalues
    re1 = 0.0 if abs(l1.real) < ZERO_REAL_PART else l1.real
    re2 = 0.0 if abs(l2.real) < ZERO_REAL_PART else l2.real
    if re1 < 0 and re2 < 0:
        return Stability.Sink
    if re1 > 0 and re2 > 0:
        return Stability.Source
    real_pair = l1.imag == 0.0 and l2.imag == 0.0
    if real_pair and re1 * re2 < 0:
        return Stability.Saddle
    if re1 == 0.0 and re2 == 0.0 and l1.imag != 0.0 and l2.imag != 0.0:
        return Stability.Center
    return Stability.NonHyperbolicOther


def interior_location(params: GameParams) -> tuple[float, float]:
    """Location of the mixed equilibrium, which may lie outside the unit square."""
    k = reduced_coefficients(params)
    if k.c == 0.0:
        raise DegenerateInterior("mu + 2*psi == 0: interior x-coordinate undefined")
    return -k.d / k.c, -k.b / k.a


def _interior_inside(xs: float, ys: float) -> bool:
    return 0.0 < xs < 1.0 and 0.0 < ys < 1.0


def interior_eigenvalues(params: GameParams) -> tuple[complex, complex]:
    """``±sqrt(x*(1-x*) y*(1-y*) c a)``: imaginary pair for a center, real pair for a saddle."""
    xs, ys = interior_location(params)
    if not _interior_inside(xs, ys):
        raise NoInteriorPoint(f"interior point ({xs}, {ys}) lies outside the open unit square")
    k = reduced_coefficients(params)
    root = cmath.sqrt(xs * (1.0 - xs) * ys * (1.0 - ys) * k.c * k.a)
    if root.imag == 0.0:
        return complex(root.real, 0.0), complex(-root.real, 0.0)
    return complex(0.0, root.imag), complex(0.0, -root.imag)


_CORNERS = (
    (0.0, 0.0, PointKind.Corner00),
    (1.0, 0.0, PointKind.Corner10),
    (0.0, 1.0, PointKind.Corner01),
    (1.0, 1.0, PointKind.Corner11),
)


def stationary_points(params: GameParams) -> list[StationaryPoint]:
    """The four corners, plus the interior point when it lies strictly inside the square."""
    points = []
    for x, y, kind in _CORNERS:
        ev = _eigenvalues_2x2(jacobian(params, (x, y)))
        points.append(StationaryPoint(PopulationState(x, y), kind, ev, classify_eigenvalues(ev)))
    xs, ys = interior_location(params)
    if _interior_inside(xs, ys):
        ev = interior_eigenvalues(params)
        points.append(
            StationaryPoint(PopulationState(xs, ys), PointKind.Interior, ev, classify_eigenvalues(ev))
        )
    else:
        logger.info("interior stationary point at virtual location (%r, %r) omitted", xs, ys)
    return points


def conserved_quantity_coefficients(params: GameParams) -> ConservedQuantityH:
    k = reduced_coefficients(params)
    return ConservedQuantityH(cx=k.d, c1x=-(k.c + k.d), cy=-k.b, c1y=k.a + k.b)


def conserved_quantity(params: GameParams, state: PopulationState | tuple[float, float]) -> float:
    """Constant of motion of the interior flow; raises :class:`BoundaryState` on the boundary."""
    x, y = state
    return conserved_quantity_coefficients(params)(x, y)
