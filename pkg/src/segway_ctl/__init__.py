"""Planar Segway modelling, pole-placement synthesis and two-mode control simulation."""

from .control import Mode, Model, Scenario, velocity_calibration, stopping_distance
from .linearization import PlantSource, StateSpace, linearize, paper_numeric_plant, transfer_functions
from .plant import SegwayParams, State, SystemConstants, derive_constants
from .simulate import Trajectory, run_open_loop, run_scenario
from .synthesis import GainVector, place_poles, synthesize_mode_gains

__all__ = [
    "GainVector",
    "Mode",
    "Model",
    "PlantSource",
    "Scenario",
    "SegwayParams",
    "State",
    "StateSpace",
    "SystemConstants",
    "Trajectory",
    "derive_constants",
    "linearize",
    "paper_numeric_plant",
    "place_poles",
    "run_open_loop",
    "run_scenario",
    "stopping_distance",
    "synthesize_mode_gains",
    "transfer_functions",
    "velocity_calibration",
]
