"""Two-mode runtime controller.

HOLD: the rider holds the rod at ``theta_i`` and the wheel velocity is driven
to the calibrated ``7 tanh(2.5 theta_i)``.  FREE: once ``t_hold`` has elapsed
the rod is released and full-state feedback drives the vehicle to a stop
``3.2 v_release`` metres further on.  SETTLED is entered once the
simulator reports the stop has been reached.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .linearization import PlantSource
from .plant import SegwayParams, State
from .synthesis import PAPER_GAINS_MODE1, PAPER_GAINS_MODE2, GainVector

V_MAX = 7.0
TILT_GAIN = 2.5
STOP_PER_SPEED = 3.2
# slack on t >= t_hold so a grid point that lands on t_hold switches there
_T_EPS = 1e-9


class Mode(enum.Enum):
    HOLD = "hold"
    FREE = "free"
    SETTLED = "settled"
    OPEN = "open"  # open-loop runs, no controller


class Model(enum.Enum):
    NONLINEAR = "nonlinear"
    LINEAR = "linear"


@dataclass(frozen=True)
class Scenario:
    theta_i: float
    t_hold: float
    plant_source: PlantSource = PlantSource.PAPER
    model: Model = Model.LINEAR
    gains_mode1: GainVector = PAPER_GAINS_MODE1
    gains_mode2: GainVector = PAPER_GAINS_MODE2
    dt: float = 1e-3
    t_max: float = 30.0
    torque_limit: float | None = None
    params: SegwayParams = field(default_factory=SegwayParams)
    stop_when_settled: bool = True

    def __post_init__(self):
        if not abs(self.theta_i) < math.pi / 2:
            raise ValueError(f"|theta_i| must be below pi/2, got {self.theta_i}")
        if not self.t_hold >= 0:
            raise ValueError(f"t_hold must be >= 0, got {self.t_hold}")
        if not 0 < self.dt <= 0.01:
            raise ValueError(f"dt must be in (0, 0.01], got {self.dt}")
        if not self.t_max > self.t_hold:
            raise ValueError(f"t_max ({self.t_max}) must exceed t_hold ({self.t_hold})")
        if self.torque_limit is not None and not self.torque_limit > 0:
            raise ValueError(f"torque_limit must be positive, got {self.torque_limit}")
        if self.model is Model.NONLINEAR and self.plant_source is not PlantSource.DERIVED:
            raise ValueError("the nonlinear model needs physical parameters (plant source 'derived')")


class ReleaseRecord(NamedTuple):
    t: float
    x: float
    v: float


@dataclass(frozen=True)
class ControllerState:
    mode: Mode
    v_des: float
    x_target: float | None = None
    release: ReleaseRecord | None = None


def velocity_calibration(theta_i: float) -> float:
    """Held-tilt velocity set point, 7 tanh(2.5 theta_i) m/s."""
    return V_MAX * math.tanh(TILT_GAIN * theta_i)


def stopping_distance(v_release: float) -> float:
    return STOP_PER_SPEED * v_release


def initial_controller_state(scenario: Scenario) -> ControllerState:
    return ControllerState(mode=Mode.HOLD, v_des=velocity_calibration(scenario.theta_i))


def hold_velocity_gain(scenario: Scenario) -> float:
    """Velocity-error gain used while the tilt is held.

    The clamped plant is xdd = T/k1, which needs a positive gain; the mode-1
    design has kd_x < 0 under the u = gains.(desired - x) convention, so its
    magnitude is used.
    """
    return abs(scenario.gains_mode1.kd_x)


def control_torque(cs: ControllerState, s: State, scenario: Scenario) -> tuple[float, bool]:
    """Wheel torque and whether it was clipped by ``scenario.torque_limit``."""
    if cs.mode is Mode.HOLD:
        # theta and omega are pinned by the rider and kp_x = 0: only velocity error acts
        T = hold_velocity_gain(scenario) * (cs.v_des - s.v)
    elif cs.mode in (Mode.FREE, Mode.SETTLED):
        err = (cs.x_target - s.x, -s.v, -s.theta, -s.omega)
        T = scenario.gains_mode2.dot(err)
    else:
        raise ValueError(f"no control law for mode {cs.mode}")
    lim = scenario.torque_limit
    if lim is not None and abs(T) > lim:
        return math.copysign(lim, T), True
    return T, False


def step_mode_machine(
    cs: ControllerState, t: float, s: State, scenario: Scenario, settled: bool = False
) -> ControllerState:
    """Advance HOLD -> FREE at the first t >= t_hold, FREE -> SETTLED when ``settled``."""
    if cs.mode is Mode.HOLD and t >= scenario.t_hold - _T_EPS:
        rel = ReleaseRecord(t=t, x=s.x, v=s.v)
        return replace(cs, mode=Mode.FREE, release=rel, x_target=s.x + stopping_distance(s.v))
    if cs.mode is Mode.FREE and settled:
        return replace(cs, mode=Mode.SETTLED)
    return cs
