"""Long-run outcomes, basins of attraction, separatrices and trajectory features."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from replidyn.dynamics import (
    BoundaryState,
    PointKind,
    Stability,
    StationaryPoint,
    conserved_quantity,
    field_function,
    jacobian,
    jacobian_bound,
    stationary_points,
)
from replidyn.game_model import GameParams, PopulationState
from replidyn.integrate import (
    IntegratorOptions,
    Termination,
    TerminationKind,
    Trajectory,
    integrate,
    integrate_field,
)

__all__ = [
    "BasinMap",
    "Converged",
    "IntegrationFailure",
    "NoSaddle",
    "PeriodicOrbit",
    "Separatrix",
    "TrajectoryFeatures",
    "Undecided",
    "basin_map",
    "long_run_outcome",
    "outcome_label",
    "period_envelopes",
    "separatrix",
    "trajectory_features",
]

THREADS_ENV = "REPLIDYN_THREADS"


class IntegrationFailure(RuntimeError):
    pass


class NoSaddle(ValueError):
    pass


@dataclass(frozen=True)
class Converged:
    point: StationaryPoint

    @property
    def label(self) -> str:
        return self.point.label


@dataclass(frozen=True)
class PeriodicOrbit:
    period: float
    h_level: float

    label = "periodic"


@dataclass(frozen=True)
class Undecided:
    horizon: float
    diagnostic: str = ""

    label = "undecided"


Outcome = Converged | PeriodicOrbit | Undecided


def outcome_label(outcome: Outcome) -> str:
    return outcome.label


def long_run_outcome(
    params: GameParams,
    start: PopulationState | tuple[float, float],
    opts: IntegratorOptions | None = None,
) -> Outcome:
    """Where the population ends up from ``start``: a sink, a closed orbit, or undecided."""
    opts = opts or IntegratorOptions()
    traj = integrate(params, start, opts)
    term = traj.termination
    if term.kind is TerminationKind.ConvergedTo:
        return Converged(term.point)
    if term.kind is TerminationKind.OrbitClosed:
        x0, y0 = start
        try:
            level = conserved_quantity(params, (x0, y0))
        except BoundaryState:
            level = math.nan
        return PeriodicOrbit(term.period, level)
    if term.kind is TerminationKind.StepFailure:
        raise IntegrationFailure(term.message)
    return Undecided(float(traj.t[-1]))


@dataclass
class BasinMap:
    """Long-run label of every cell of an ``n`` by ``n`` grid.

    ``labels[i, j]`` belongs to the cell centred at ``((i + 0.5)/n, (j + 0.5)/n)``,
    so the first index runs along ``x``.
    """

    n: int
    labels: np.ndarray
    diagnostics: dict[tuple[int, int], str] = field(default_factory=dict)

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (i + 0.5) / self.n, (j + 0.5) / self.n

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return min(int(x * self.n), self.n - 1), min(int(y * self.n), self.n - 1)

    def label_at(self, x: float, y: float) -> str:
        return str(self.labels[self.cell_of(x, y)])

    def counts(self) -> dict[str, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {str(v): int(c) for v, c in zip(values, counts)}

    def boundary_points(self) -> np.ndarray:
        """Midpoints of the cell edges separating different labels, shape ``(k, 2)``."""
        n, lab = self.n, self.labels
        pts = []
        ii, jj = np.nonzero(lab[:-1, :] != lab[1:, :])
        pts.extend(zip((ii + 1.0) / n, (jj + 0.5) / n))
        ii, jj = np.nonzero(lab[:, :-1] != lab[:, 1:])
        pts.extend(zip((ii + 0.5) / n, (jj + 1.0) / n))
        return np.array(pts, dtype=float).reshape(-1, 2)


def _cell_label(params: GameParams, n: int, i: int, j: int, opts: IntegratorOptions) -> tuple[str, str]:
    start = ((i + 0.5) / n, (j + 0.5) / n)
    try:
        return long_run_outcome(params, start, opts).label, ""
    except IntegrationFailure as exc:
        return Undecided.label, str(exc)


def _basin_column(args) -> list[tuple[str, str]]:
    params, n, i, opts = args
    return [_cell_label(params, n, i, j, opts) for j in range(n)]


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def basin_map(
    params: GameParams,
    n: int,
    opts: IntegratorOptions | None = None,
    workers: int | None = None,
) -> BasinMap:
    """Integrate from every cell centre of an ``n`` by ``n`` grid and label the outcome.

    Columns are farmed out to worker processes when ``workers`` (or the
    ``REPLIDYN_THREADS`` environment variable) exceeds one; results are merged
    by index, so the map does not depend on scheduling.
    """
    if n < 2:
        raise ValueError("grid size must be at least 2")
    opts = opts or IntegratorOptions()
    jobs = [(params, n, i, opts) for i in range(n)]
    nworkers = min(_worker_count(workers), n)
    if nworkers > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            columns = list(pool.map(_basin_column, jobs))
    else:
        columns = [_basin_column(job) for job in jobs]
    labels = np.empty((n, n), dtype=object)
    diagnostics = {}
    for i, column in enumerate(columns):
        for j, (label, diag) in enumerate(column):
            labels[i, j] = label
            if diag:
                diagnostics[i, j] = diag
    return BasinMap(n, labels.astype(str), diagnostics)


@dataclass
class Separatrix:
    """Two branches of the interior saddle's stable manifold.

    Each branch is an ``(k, 2)`` array ordered from near a source corner to
    the saddle itself.
    """

    branches: tuple[np.ndarray, np.ndarray]
    saddle: PopulationState
    corners: tuple[StationaryPoint | None, StationaryPoint | None]

    def segments(self) -> np.ndarray:
        """All polyline segments as an ``(m, 2, 2)`` array."""
        return np.concatenate([np.stack([b[:-1], b[1:]], axis=1) for b in self.branches])

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each of ``points`` (shape ``(k, 2)``) to the polylines."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        seg = self.segments()
        a, b = seg[:, 0], seg[:, 1]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        denom[denom == 0.0] = 1.0
        out = np.empty(len(pts))
        for k, p in enumerate(pts):
            s = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
            nearest = a + s[:, None] * ab
            out[k] = np.sqrt(np.min(np.sum((nearest - p) ** 2, axis=1)))
        return out

    def sample(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """``count`` points spread evenly by arc length, with unit normals."""
        path = np.concatenate([self.branches[0], self.branches[1][::-1][1:]])
        steps = np.linalg.norm(np.diff(path, axis=0), axis=1)
        keep = np.concatenate([[True], steps > 0])
        path = path[keep]
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(path, axis=0), axis=1))])
        targets = (np.arange(count) + 0.5) / count * arc[-1]
        points, normals = [], []
        for s in targets:
            k = min(np.searchsorted(arc, s, side="right") - 1, len(path) - 2)
            w = (s - arc[k]) / (arc[k + 1] - arc[k])
            points.append(path[k] + w * (path[k + 1] - path[k]))
            tangent = (path[k + 1] - path[k]) / (arc[k + 1] - arc[k])
            normals.append([-tangent[1], tangent[0]])
        return np.array(points), np.array(normals)


def separatrix(
    params: GameParams,
    opts: IntegratorOptions | None = None,
    seed_offset: float = 1e-6,
    corner_radius: float = 1e-3,
    horizon: float = 200.0,
) -> Separatrix:
    """Trace the stable manifold of the interior saddle by backward integration.

    Seeds sit ``seed_offset`` away from the saddle along its stable
    eigenvector; each is run backward until it comes within ``corner_radius``
    of a source corner or the horizon is reached.
    """
    points = stationary_points(params)
    saddle = next((p for p in points if p.kind is PointKind.Interior and p.stability is Stability.Saddle), None)
    if saddle is None:
        raise NoSaddle("no interior saddle for these parameters")
    sources = [p for p in points if p.stability is Stability.Source]
    opts = (opts or IntegratorOptions()).with_(
        t_max=horizon, stop_on_convergence=False, stop_on_closure=False
    )
    values, vectors = np.linalg.eig(jacobian(params, saddle.location))
    stable = np.real(vectors[:, int(np.argmin(np.real(values)))])
    stable = stable / np.linalg.norm(stable)
    f = field_function(params)

    def backward(x, y):
        fx, fy = f(x, y)
        return -fx, -fy

    branches, corners = [], []
    for sign in (1.0, -1.0):
        sx = saddle.x + sign * seed_offset * stable[0]
        sy = saddle.y + sign * seed_offset * stable[1]
        reached: list[StationaryPoint] = []

        def near_source(t0, x0, y0, t1, x1, y1, interp):
            for p in sources:
                if math.hypot(x1 - p.x, y1 - p.y) < corner_radius:
                    reached.append(p)
                    return Termination(TerminationKind.ReachedTMax, point=p)
            return None

        traj = integrate_field(backward, sx, sy, opts, near_source, rate_bound=jacobian_bound(params))
        if traj.termination.kind is TerminationKind.StepFailure:
            raise IntegrationFailure(traj.termination.message)
        pts = traj.states[::-1]
        inside = (pts > 0.0).all(axis=1) & (pts < 1.0).all(axis=1)
        branch = np.vstack([pts[inside], [[saddle.x, saddle.y]]])
        branches.append(branch)
        corners.append(reached[0] if reached else None)
    order = sorted(range(2), key=lambda k: (corners[k] is None, corners[k].x if corners[k] else 0.0))
    return Separatrix(
        (branches[order[0]], branches[order[1]]),
        saddle.location,
        (corners[order[0]], corners[order[1]]),
    )


@dataclass(frozen=True)
class TurningPoint:
    t: float
    value: float
    kind: str  # "max" or "min"


@dataclass
class VariableFeatures:
    max: float
    argmax_t: float
    min: float
    argmin_t: float
    initial_direction: int
    final_direction: int
    turning_points: list[TurningPoint]

    @property
    def crossover_times(self) -> list[float]:
        return [tp.t for tp in self.turning_points]


@dataclass
class TrajectoryFeatures:
    x: VariableFeatures
    y: VariableFeatures
    # last maximum of y before it descends monotonically to the end, if it does
    y_peak_before_final_descent: TurningPoint | None


def _refine(t: np.ndarray, v: np.ndarray, k: int) -> tuple[float, float]:
    if k == 0 or k == len(v) - 1:
        return float(t[k]), float(v[k])
    tt, vv = t[k - 1 : k + 2], v[k - 1 : k + 2]
    c2, c1, c0 = np.polyfit(tt - tt[1], vv, 2)
    if c2 == 0.0:
        return float(t[k]), float(v[k])
    dt = -c1 / (2.0 * c2)
    if not (tt[0] - tt[1] <= dt <= tt[2] - tt[1]):
        return float(t[k]), float(v[k])
    return float(tt[1] + dt), float(c0 - c1 * c1 / (4.0 * c2))


def _zigzag(v: np.ndarray, min_swing: float) -> tuple[list[tuple[int, str]], int, int]:
    """Extrema whose reversal exceeds ``min_swing``, plus the first and last directions."""
    turns = []
    direction = first = 0
    ext = 0
    for k in range(1, len(v)):
        if direction == 0:
            if v[k] - v[0] > min_swing:
                direction = first = 1
                ext = k
            elif v[0] - v[k] > min_swing:
                direction = first = -1
                ext = k
        elif direction == 1:
            if v[k] >= v[ext]:
                ext = k
            elif v[ext] - v[k] > min_swing:
                turns.append((ext, "max"))
                direction, ext = -1, k
        else:
            if v[k] <= v[ext]:
                ext = k
            elif v[k] - v[ext] > min_swing:
                turns.append((ext, "min"))
                direction, ext = 1, k
    return turns, first, direction


def _features(t: np.ndarray, v: np.ndarray, min_swing: float) -> VariableFeatures:
    kmax, kmin = int(np.argmax(v)), int(np.argmin(v))
    zig, first, last = _zigzag(v, min_swing)
    turns = [TurningPoint(*_refine(t, v, k), kind) for k, kind in zig]
    tmax, vmax = _refine(t, v, kmax)
    tmin, vmin = _refine(t, v, kmin)
    return VariableFeatures(max(vmax, float(v[kmax])), tmax, min(vmin, float(v[kmin])), tmin, first, last, turns)


def trajectory_features(traj: Trajectory, min_swing: float = 1e-9) -> TrajectoryFeatures:
    """Extrema, turning points and monotone phases of ``x`` and ``y``.

    Turning points are where ``xdot`` or ``ydot`` changes sign; reversals
    smaller than ``min_swing`` are treated as numerical noise. Extremal
    values are refined by a parabola through the neighbouring samples.
    """
    if len(traj.t) < 2:
        raise ValueError("need at least two samples")
    fx = _features(traj.t, traj.x, min_swing)
    fy = _features(traj.t, traj.y, min_swing)
    peak = None
    if fy.final_direction == -1:
        maxima = [tp for tp in fy.turning_points if tp.kind == "max"]
        if maxima:
            peak = maxima[-1]
        elif fy.initial_direction == -1:
            peak = TurningPoint(float(traj.t[0]), float(traj.y[0]), "max")
    return TrajectoryFeatures(fx, fy, peak)


def period_envelopes(traj: Trajectory, period: float) -> np.ndarray:
    """Per-period ``(x_min, x_max, y_min, y_max)`` rows over whole periods of ``traj``.

    Window extrema are refined like :func:`trajectory_features`.
    """
    rows = []
    count = int(math.floor(traj.t[-1] / period + 1e-9))
    for k in range(count):
        mask = (traj.t >= k * period) & (traj.t <= (k + 1) * period)
        idx = np.nonzero(mask)[0]
        lo, hi = max(idx[0] - 1, 0), min(idx[-1] + 2, len(traj.t))
        t, x, y = traj.t[lo:hi], traj.x[lo:hi], traj.y[lo:hi]
        inner = slice(idx[0] - lo, idx[-1] - lo + 1)
        row = []
        for v in (x, y):
            kmin = inner.start + int(np.argmin(v[inner]))
            kmax = inner.start + int(np.argmax(v[inner]))
            row += [_refine(t, v, kmin)[1], _refine(t, v, kmax)[1]]
        rows.append(row)
    return np.array(rows)
