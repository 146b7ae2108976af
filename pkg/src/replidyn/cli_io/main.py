"""Command line: ``replidyn {classify,simulate,portrait,basins,period} SCENARIO``.

Exit status is 0 on success, 1 for unreadable or invalid input and 2 when
the numerics fail.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from replidyn.analysis import (
    IntegrationFailure,
    NoSaddle,
    PeriodicOrbit,
    basin_map,
    long_run_outcome,
    separatrix,
)
from replidyn.cli_io.scenario import ScenarioError, ScenarioFile, load_scenario
from replidyn.cli_io.svg import PortraitOverlays, phase_portrait_svg, time_series_svg
from replidyn.cli_io.tables import write_basins_csv, write_trajectory_csv
from replidyn.dynamics import DegenerateInterior, interior_location, stationary_points
from replidyn.game_model import Regime, classify_regime
from replidyn.integrate import TerminationKind, integrate

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(Exception):
    pass


def classify_report(sf: ScenarioFile) -> dict:
    params = sf.params
    points = stationary_points(params)
    report = {
        "name": sf.name,
        "regime": classify_regime(params).value,
        "stationary_points": [
            {
                "kind": p.kind.value,
                "location": [p.x, p.y],
                "eigenvalues": [[ev.real, ev.imag] for ev in p.eigenvalues],
                "stability": p.stability.value,
            }
            for p in points
        ],
    }
    if len(points) == 4:
        try:
            report["virtual_interior"] = list(interior_location(params))
        except DegenerateInterior:
            report["virtual_interior"] = None
    return report


def _stem(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "scenario"


def _trajectories(sf: ScenarioFile):
    return [integrate(sf.params, ic, sf.options) for ic in sf.initial_conditions]


def _portrait(sf: ScenarioFile, trajs, with_separatrix: bool, basins_n: int | None) -> str:
    overlays = PortraitOverlays()
    if with_separatrix:
        overlays.separatrix = separatrix(sf.params, sf.options)
    if basins_n:
        overlays.basins = basin_map(sf.params, basins_n, sf.options)
    return phase_portrait_svg(sf.params, trajs, overlays)


def _emit(text: str | bytes, out: str | None):
    data = text.encode("utf-8") if isinstance(text, str) else text
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def cmd_classify(sf: ScenarioFile, args) -> int:
    _emit(json.dumps(classify_report(sf), indent=2) + "\n", None)
    return EXIT_OK


def cmd_simulate(sf: ScenarioFile, args) -> int:
    if not sf.initial_conditions:
        raise ScenarioError("simulate needs at least one initial condition")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _stem(sf.name)
    trajs = _trajectories(sf)
    failed = False
    for k, traj in enumerate(trajs):
        csv_path = out_dir / f"{stem}_{k}.csv"
        with open(csv_path, "wb") as fh:
            write_trajectory_csv(traj, fh)
        svg_path = out_dir / f"{stem}_{k}.svg"
        svg_path.write_bytes(time_series_svg(traj).encode("utf-8"))
        ic = sf.initial_conditions[k]
        print(f"{csv_path} {svg_path} start=({ic.x:g},{ic.y:g}) termination={traj.termination}")
        failed |= traj.termination.kind is TerminationKind.StepFailure
    if "portrait_svg" in sf.outputs:
        path = out_dir / f"{stem}_portrait.svg"
        path.write_bytes(_portrait(sf, trajs, False, None).encode("utf-8"))
        print(path)
    if failed:
        raise NumericalFailure("integration step failure (see CSV trailer)")
    return EXIT_OK


def cmd_portrait(sf: ScenarioFile, args) -> int:
    trajs = _trajectories(sf)
    if any(t.termination.kind is TerminationKind.StepFailure for t in trajs):
        raise NumericalFailure("integration step failure")
    _emit(_portrait(sf, trajs, args.separatrix, args.basins), args.out)
    return EXIT_OK


def cmd_basins(sf: ScenarioFile, args) -> int:
    if args.n < 2:
        raise ScenarioError("--n must be at least 2")
    bm = basin_map(sf.params, args.n, sf.options)
    if args.out is None or args.out == "-":
        write_basins_csv(bm, sys.stdout.buffer)
        sys.stdout.flush()
    else:
        with open(args.out, "wb") as fh:
            write_basins_csv(bm, fh)
    return EXIT_OK


def cmd_period(sf: ScenarioFile, args) -> int:
    regime = classify_regime(sf.params)
    if regime is not Regime.OscillatoryProp1:
        raise ScenarioError(f"period needs an oscillatory scenario, got {regime.value}")
    opts = sf.options.with_(stop_on_closure=True)
    rows = []
    for ic in sf.initial_conditions:
        outcome = long_run_outcome(sf.params, ic, opts)
        periodic = isinstance(outcome, PeriodicOrbit)
        rows.append({
            "initial_condition": [ic.x, ic.y],
            "period": outcome.period if periodic else None,
            "h_level": outcome.h_level if periodic else None,
            "outcome": outcome.label,
        })
    _emit(json.dumps(rows, indent=2) + "\n", None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replidyn",
        description="Replicator dynamics of the consumer/producer delivery game.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="regime and stationary points as JSON")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="integrate every initial condition, write CSV + SVG")
    p.add_argument("scenario")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("portrait", help="phase portrait as SVG")
    p.add_argument("scenario")
    p.add_argument("--separatrix", action="store_true", help="overlay the saddle's stable manifold")
    p.add_argument("--basins", type=int, metavar="N", help="shade an N x N basin map")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("basins", help="basin map as CSV (i,j,x,y,label)")
    p.add_argument("scenario")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_basins)

    p = sub.add_parser("period", help="period and H-level of each closed orbit")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_period)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        sf = load_scenario(args.scenario)
        for message in sf.warnings:
            print(f"warning: {message}", file=sys.stderr)
        return args.func(sf, args)
    except (ScenarioError, NoSaddle, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, IntegrationFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
