"""Scenario files, CSV/SVG serialization and the command-line interface."""

from replidyn.cli_io.scenario import (
    ParseError,
    ScenarioError,
    ScenarioFile,
    ValidationError,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)
from replidyn.cli_io.svg import (
    PhasePortraitSpec,
    PortraitOverlays,
    phase_portrait_svg,
    render_phase_portrait,
    render_time_series,
    time_series_svg,
)
from replidyn.cli_io.tables import read_trajectory_csv, write_basins_csv, write_trajectory_csv

__all__ = [
    "ParseError",
    "PhasePortraitSpec",
    "PortraitOverlays",
    "ScenarioError",
    "ScenarioFile",
    "ValidationError",
    "bundled_scenarios",
    "load_scenario",
    "parse_scenario",
    "phase_portrait_svg",
    "read_trajectory_csv",
    "render_phase_portrait",
    "render_time_series",
    "serialize_scenario",
    "time_series_svg",
    "write_basins_csv",
    "write_trajectory_csv",
]
