"""Time integration of the replicator flow on the unit square.

Two schemes are provided: classical fixed-step RK4 and an adaptive
Dormand-Prince 5(4) pair with its quartic dense output. Both run on plain
Python floats, which for a two-dimensional system is much faster than
array arithmetic. Trajectories stop early when they converge to a sink or
when a closed orbit is detected on the Poincare section through the
interior center.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from replidyn.dynamics import (
    DegenerateInterior,
    StationaryPoint,
    Stability,
    field_function,
    interior_location,
    jacobian_bound,
    stationary_points,
)
from replidyn.game_model import GameParams, PopulationState

__all__ = [
    "IntegratorOptions",
    "Method",
    "NonFiniteState",
    "Termination",
    "TerminationKind",
    "Trajectory",
    "detect_convergence",
    "detect_orbit_closure",
    "integrate",
    "integrate_field",
    "step_rk4",
]

Field = Callable[[float, float], tuple[float, float]]
Interpolant = Callable[[float], tuple[float, float]]


class NonFiniteState(ArithmeticError):
    pass


class Method(enum.Enum):
    FixedRK4 = "FixedRK4"
    AdaptiveRK45 = "AdaptiveRK45"


@dataclass(frozen=True)
class IntegratorOptions:
    """Integration controls.

    ``step`` is the fixed step for RK4 (default 0.01) and the initial step
    for the adaptive scheme (``None`` selects one automatically).
    ``closure_tol`` is the distance along the Poincare section within which a
    return counts as a closed orbit.
    """

    method: Method = Method.AdaptiveRK45
    step: float | None = None
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    t_max: float = 200.0
    convergence_radius: float = 1e-6
    convergence_speed: float = 1e-8
    boundary_clamp: float = 1e-12
    closure_tol: float = 1e-6
    max_sample_gap: float = 0.01
    stop_on_convergence: bool = True
    stop_on_closure: bool = True

    def __post_init__(self):
        if isinstance(self.method, str):
            object.__setattr__(self, "method", Method(self.method))
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        for name in ("abs_tol", "rel_tol", "t_max", "convergence_radius",
                     "convergence_speed", "closure_tol", "max_sample_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.boundary_clamp < 1e-6:
            raise ValueError("boundary_clamp must lie in [0, 1e-6)")

    def with_(self, **changes) -> IntegratorOptions:
        return replace(self, **changes)


class TerminationKind(enum.Enum):
    ReachedTMax = "ReachedTMax"
    ConvergedTo = "ConvergedTo"
    OrbitClosed = "OrbitClosed"
    StepFailure = "StepFailure"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    point: StationaryPoint | None = None
    period: float | None = None
    message: str = ""

    def __str__(self) -> str:
        if self.kind is TerminationKind.ConvergedTo:
            return f"ConvergedTo{self.point.label}"
        if self.kind is TerminationKind.OrbitClosed:
            return f"OrbitClosed({self.period!r})"
        if self.kind is TerminationKind.StepFailure:
            return f"StepFailure({self.message})"
        return self.kind.value


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    termination: Termination
    accepted: int = 0
    rejected: int = 0
    crossings: list[tuple[float, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final(self) -> PopulationState:
        return PopulationState(float(self.x[-1]), float(self.y[-1]))

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


def _clamp(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


def _rk4(f: Field, x: float, y: float, h: float) -> tuple[float, float]:
    k1x, k1y = f(x, y)
    k2x, k2y = f(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k3x, k3y = f(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k4x, k4y = f(x + h * k3x, y + h * k3y)
    nx = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    ny = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    if not all(map(math.isfinite, (k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, nx, ny))):
        raise NonFiniteState(f"non-finite RK4 stage from ({x!r}, {y!r}) with h={h!r}")
    return nx, ny


def step_rk4(params: GameParams, state: PopulationState, h: float) -> PopulationState:
    """One classical RK4 step of the replicator flow, clamped into the unit square."""
    if not h > 0:
        raise ValueError("h must be positive")
    nx, ny = _rk4(field_function(params), state.x, state.y, h)
    return PopulationState(_clamp(nx), _clamp(ny))


def _hermite(t0, x0, y0, f0, t1, x1, y1, f1) -> Interpolant:
    h = t1 - t0

    def at(s: float) -> tuple[float, float]:
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return (
            h00 * x0 + h10 * h * f0[0] + h01 * x1 + h11 * h * f1[0],
            h00 * y0 + h10 * h * f0[1] + h01 * y1 + h11 * h * f1[1],
        )

    return at


# Dormand-Prince 5(4) tableau (autonomous, so the nodes are not needed)
# with the quartic continuous extension.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)


def _dopri_dense(x0: float, y0: float, h: float, kx: list, ky: list) -> Interpolant:
    qx = [h * sum(kx[i] * _P[i][j] for i in range(7)) for j in range(4)]
    qy = [h * sum(ky[i] * _P[i][j] for i in range(7)) for j in range(4)]

    def at(s: float) -> tuple[float, float]:
        return (
            x0 + s * (qx[0] + s * (qx[1] + s * (qx[2] + s * qx[3]))),
            y0 + s * (qy[0] + s * (qy[1] + s * (qy[2] + s * qy[3]))),
        )

    return at


class _SectionWatch:
    """Same-direction crossings of the half-line ``y = ys, x < xs``."""

    def __init__(self, xs: float, ys: float, tol: float, t0: float, x0: float, y0: float):
        self.xs, self.ys, self.tol = xs, ys, tol
        self.crossings: list[tuple[float, float]] = []
        if y0 == ys and x0 < xs:
            self.crossings.append((t0, x0))

    def update(self, t0, y0, t1, y1, interp: Interpolant):
        """Return ``(period, t_cross, s_cross)`` on closure, else ``None``."""
        g0, g1 = y0 - self.ys, y1 - self.ys
        if not ((g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)):
            return None
        if g1 == 0.0:
            s = 1.0
        else:
            lo, hi = interp(0.0)[1] - self.ys, interp(1.0)[1] - self.ys
            if lo * hi < 0.0:
                s = brentq(lambda s: interp(s)[1] - self.ys, 0.0, 1.0, xtol=1e-15)
            else:
                s = 0.0 if lo == 0.0 else 1.0
        xc = interp(s)[0]
        if xc >= self.xs:
            return None
        tc = t0 + s * (t1 - t0)
        self.crossings.append((tc, xc))
        if len(self.crossings) > 1:
            t_ref, x_ref = self.crossings[0]
            if abs(xc - x_ref) <= self.tol and tc > t_ref:
                return tc - t_ref, tc, s
        return None


def _section_for(params: GameParams) -> tuple[float, float] | None:
    try:
        xs, ys = interior_location(params)
    except DegenerateInterior:
        return None
    if 0.0 < xs < 1.0 and 0.0 < ys < 1.0:
        return xs, ys
    return None


def detect_convergence(
    params: GameParams,
    state: PopulationState | tuple[float, float],
    candidates: Sequence[StationaryPoint],
    opts: IntegratorOptions,
) -> StationaryPoint | None:
    """The sink within ``convergence_radius`` of ``state`` if the flow there is slower than ``convergence_speed``."""
    x, y = state
    fx, fy = field_function(params)(x, y)
    if math.hypot(fx, fy) >= opts.convergence_speed:
        return None
    for p in candidates:
        if p.stability is not Stability.Sink:
            continue
        if math.hypot(x - p.x, y - p.y) < opts.convergence_radius:
            return p
    return None


def detect_orbit_closure(
    traj: Trajectory | tuple[Sequence[float], Sequence[float], Sequence[float]],
    params: GameParams,
    tolerance: float,
) -> float | None:
    """Period of a sampled trajectory, or ``None`` before it has closed.

    Crossings of the section ``{y = y*, x < x*}`` are located on a cubic
    Hermite interpolant of the samples (slopes from the vector field); the
    orbit is closed once a later crossing lands within ``tolerance`` of the
    first one.
    """
    if isinstance(traj, Trajectory):
        ts, xs_, ys_ = traj.t, traj.x, traj.y
    else:
        ts, xs_, ys_ = traj
    if len(ts) < 2:
        return None
    section = _section_for(params)
    if section is None:
        return None
    f = field_function(params)
    watch = _SectionWatch(section[0], section[1], tolerance, ts[0], xs_[0], ys_[0])
    prev = (float(ts[0]), float(xs_[0]), float(ys_[0]))
    f_prev = f(prev[1], prev[2])
    for t1, x1, y1 in zip(ts[1:], xs_[1:], ys_[1:]):
        t1, x1, y1 = float(t1), float(x1), float(y1)
        f1 = f(x1, y1)
        interp = _hermite(*prev, f_prev, t1, x1, y1, f1)
        hit = watch.update(prev[0], prev[2], t1, y1, interp)
        if hit is not None:
            return hit[0]
        prev, f_prev = (t1, x1, y1), f1
    return None


class _Recorder:
    """Collects samples, inserting interpolated points so that no gap exceeds ``gap``."""

    def __init__(self, t0, x0, y0, gap):
        self.t, self.x, self.y = [t0], [x0], [y0]
        self.gap = gap

    def add_step(self, t0, t1, x_end, y_end, interp: Interpolant, s_end: float = 1.0):
        """Append the step end (at fraction ``s_end``) preceded by any fill-in points."""
        xa, ya = self.x[-1], self.y[-1]
        pieces = max(1, math.ceil(max(abs(x_end - xa), abs(y_end - ya)) / self.gap))
        for _ in range(8):
            pts = [interp(s_end * k / pieces) for k in range(1, pieces)]
            pts = [(_clamp(px), _clamp(py)) for px, py in pts]
            chain = [(xa, ya), *pts, (x_end, y_end)]
            if all(max(abs(b[0] - a[0]), abs(b[1] - a[1])) <= self.gap for a, b in zip(chain, chain[1:])):
                break
            pieces *= 2
        h = t1 - t0
        for k, (px, py) in enumerate(pts, start=1):
            tk = t0 + h * s_end * k / pieces
            if tk > self.t[-1]:
                self.t.append(tk)
                self.x.append(px)
                self.y.append(py)
        t_end = t1 if s_end == 1.0 else t0 + h * s_end
        if t_end > self.t[-1]:
            self.t.append(t_end)
            self.x.append(x_end)
            self.y.append(y_end)


def _initial_step(f: Field, x, y, fx, fy, atol, rtol, t_span) -> float:
    sx, sy = atol + abs(x) * rtol, atol + abs(y) * rtol
    d0 = math.sqrt(((x / sx) ** 2 + (y / sy) ** 2) / 2)
    d1 = math.sqrt(((fx / sx) ** 2 + (fy / sy) ** 2) / 2)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    gx, gy = f(x + h0 * fx, y + h0 * fy)
    d2 = math.sqrt((((gx - fx) / sx) ** 2 + ((gy - fy) / sy) ** 2) / 2) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_span)


Monitor = Callable[[float, float, float, float, float, float, Interpolant], "tuple[Termination, float] | Termination | None"]


def integrate_field(
    f: Field,
    x0: float,
    y0: float,
    opts: IntegratorOptions,
    monitor: Monitor | None = None,
    start_check: Callable[[float, float], Termination | None] | None = None,
    rate_bound: Callable[[float, float], float] | None = None,
) -> Trajectory:
    """Integrate an arbitrary planar field with the unit-square safeguards.

    ``monitor(t0, x0, y0, t1, x1, y1, interp)`` runs after every accepted
    step; it may return a :class:`Termination` (stop at the step end) or a
    ``(Termination, s)`` pair to stop at fraction ``s`` of the step.
    ``rate_bound(x, y)`` bounds the local Jacobian norm; adaptive steps are
    kept below its reciprocal.
    """
    if opts.method is Method.FixedRK4:
        return _drive_rk4(f, x0, y0, opts, monitor, start_check)
    return _drive_dopri(f, x0, y0, opts, monitor, start_check, rate_bound)


def _finish(rec: _Recorder, term: Termination, acc: int, rej: int) -> Trajectory:
    return Trajectory(
        np.asarray(rec.t, dtype=float),
        np.asarray(rec.x, dtype=float),
        np.asarray(rec.y, dtype=float),
        term,
        acc,
        rej,
    )


def _apply_monitor(monitor, rec, t, x, y, t1, x1, y1, interp):
    """Record the step; return a termination if the monitor fired."""
    verdict = monitor(t, x, y, t1, x1, y1, interp) if monitor else None
    if isinstance(verdict, tuple):
        term, s = verdict
        if s < 1.0:
            xs, ys = interp(s)
            rec.add_step(t, t1, _clamp(xs), _clamp(ys), interp, s_end=s)
        else:
            rec.add_step(t, t1, x1, y1, interp)
        return term
    rec.add_step(t, t1, x1, y1, interp)
    return verdict


def _drive_rk4(f, x0, y0, opts, monitor, start_check) -> Trajectory:
    h = opts.step or 0.01
    rec = _Recorder(0.0, x0, y0, opts.max_sample_gap)
    if start_check and (term := start_check(x0, y0)):
        return _finish(rec, term, 0, 0)
    t, x, y = 0.0, x0, y0
    fxy = f(x, y)
    n = 0
    while t < opts.t_max:
        n += 1
        t1 = min(n * h, opts.t_max)
        try:
            nx, ny = _rk4(f, x, y, t1 - t)
        except NonFiniteState as exc:
            return _finish(rec, Termination(TerminationKind.StepFailure, message=str(exc)), n - 1, 0)
        nx, ny = _clamp(nx), _clamp(ny)
        f1 = f(nx, ny)
        interp = _hermite(t, x, y, fxy, t1, nx, ny, f1)
        term = _apply_monitor(monitor, rec, t, x, y, t1, nx, ny, interp)
        if term is not None:
            return _finish(rec, term, n, 0)
        t, x, y, fxy = t1, nx, ny, f1
    return _finish(rec, Termination(TerminationKind.ReachedTMax), n, 0)


def _drive_dopri(f, x0, y0, opts, monitor, start_check, rate_bound=None) -> Trajectory:
    atol, rtol, clamp_eps = opts.abs_tol, opts.rel_tol, opts.boundary_clamp
    t_max = opts.t_max
    rec = _Recorder(0.0, x0, y0, opts.max_sample_gap)
    if start_check and (term := start_check(x0, y0)):
        return _finish(rec, term, 0, 0)
    t, x, y = 0.0, x0, y0
    fx, fy = f(x, y)
    if not (math.isfinite(fx) and math.isfinite(fy)):
        return _finish(rec, Termination(TerminationKind.StepFailure, message="non-finite field at start"), 0, 0)
    h = opts.step or _initial_step(f, x, y, fx, fy, atol, rtol, t_max)
    accepted = rejected = 0
    lo, hi = -clamp_eps, 1.0 + clamp_eps
    while t < t_max:
        min_step = 10.0 * (math.nextafter(t, math.inf) - t)
        if rate_bound is not None:
            # Below the tolerance scale the error estimate no longer limits h, and
            # steps near the stability boundary make a decaying mode stall.
            rate = rate_bound(x, y)
            if rate > 0.0:
                h = min(h, 1.0 / rate)
        h = min(h, t_max - t)
        step_rejected = False
        while True:
            if h < min_step:
                term = Termination(TerminationKind.StepFailure, message=f"step size {h!r} underflow at t={t!r}")
                return _finish(rec, term, accepted, rejected)
            kx, ky = [fx], [fy]
            for i in range(1, 6):
                a = _A[i]
                sx = x + h * sum(a[j] * kx[j] for j in range(i))
                sy = y + h * sum(a[j] * ky[j] for j in range(i))
                gx, gy = f(sx, sy)
                kx.append(gx)
                ky.append(gy)
            nx = x + h * sum(_B[j] * kx[j] for j in range(6))
            ny = y + h * sum(_B[j] * ky[j] for j in range(6))
            gx, gy = f(nx, ny)
            kx.append(gx)
            ky.append(gy)
            ex = h * sum(_E[j] * kx[j] for j in range(7))
            ey = h * sum(_E[j] * ky[j] for j in range(7))
            finite = all(map(math.isfinite, (nx, ny, gx, gy, ex, ey)))
            if finite:
                err = math.sqrt(
                    ((ex / (atol + rtol * max(abs(x), abs(nx)))) ** 2
                     + (ey / (atol + rtol * max(abs(y), abs(ny)))) ** 2) / 2
                )
            if not finite or not (lo <= nx <= hi and lo <= ny <= hi):
                h *= 0.5
                rejected += 1
                step_rejected = True
                continue
            if err > 1.0:
                h *= max(0.2, 0.9 * err ** -0.2)
                rejected += 1
                step_rejected = True
                continue
            break
        accepted += 1
        t1 = t_max if t + h >= t_max else t + h
        if nx != _clamp(nx) or ny != _clamp(ny):
            nx, ny = _clamp(nx), _clamp(ny)
            gx, gy = f(nx, ny)
        interp = _dopri_dense(x, y, h, kx, ky)
        term = _apply_monitor(monitor, rec, t, x, y, t1, nx, ny, interp)
        if term is not None:
            return _finish(rec, term, accepted, rejected)
        t, x, y, fx, fy = t1, nx, ny, gx, gy
        if err == 0.0:
            factor = 10.0
        else:
            factor = min(10.0, max(0.2, 0.9 * err ** -0.2))
        if step_rejected:
            factor = min(1.0, factor)
        h *= factor
    return _finish(rec, Termination(TerminationKind.ReachedTMax), accepted, rejected)


def integrate(
    params: GameParams,
    start: PopulationState | tuple[float, float],
    opts: IntegratorOptions | None = None,
) -> Trajectory:
    """Integrate the replicator flow from ``start`` until ``t_max`` or an event.

    Events: arrival at a sink (:func:`detect_convergence`) and return to the
    first crossing of the section through the interior point
    (:func:`detect_orbit_closure`).
    """
    opts = opts or IntegratorOptions()
    if not isinstance(start, PopulationState):
        start = PopulationState(*start)
    f = field_function(params)
    points = stationary_points(params)
    sinks = [p for p in points if p.stability is Stability.Sink]
    section = _section_for(params) if opts.stop_on_closure else None
    watch = _SectionWatch(section[0], section[1], opts.closure_tol, 0.0, start.x, start.y) if section else None

    def converged(x, y):
        if not (opts.stop_on_convergence and sinks):
            return None
        p = detect_convergence(params, (x, y), sinks, opts)
        return Termination(TerminationKind.ConvergedTo, point=p) if p else None

    def monitor(t0, x0, y0, t1, x1, y1, interp):
        if watch is not None:
            hit = watch.update(t0, y0, t1, y1, interp)
            if hit is not None:
                period, _, s = hit
                return Termination(TerminationKind.OrbitClosed, period=period), s
        return converged(x1, y1)

    traj = integrate_field(f, start.x, start.y, opts, monitor, converged, jacobian_bound(params))
    if watch is not None:
        traj.crossings = list(watch.crossings)
    return traj
