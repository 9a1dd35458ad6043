"""Fixed-step RK4 simulation of the open- and closed-loop Segway.

The controller is evaluated once per step, before the RK4 stages, and its
torque is held constant over the step (zero-order hold).  Mode switches
happen on the first grid point at or after ``t_hold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .control import (
    ControllerState,
    Mode,
    Model,
    ReleaseRecord,
    Scenario,
    control_torque,
    initial_controller_state,
    step_mode_machine,
)
from .linearization import PlantSource, StateSpace, linearize, paper_numeric_plant
from .plant import SegwayParams, State, accelerations, derive_constants

Derivative = Callable[[float, Sequence[float], float], Sequence[float]]

FLAG_SATURATED = 1
FLAG_DIVERGED = 2

STATE_LIMIT = 1e6
SETTLE_DWELL = 1.0
SETTLE_FRACTION = 0.02
# absolute band floors for x, v, theta, omega
SETTLE_FLOORS = (0.05, 0.05, 0.01, 0.01)
SIGNALS = ("x", "v", "theta", "omega")


class NonFinite(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def rk4_step(f: Derivative, s: Sequence[float], t: float, dt: float, T: float) -> tuple[float, ...]:
    """One classical Runge-Kutta step of ds/dt = f(t, s, T) with T held fixed."""
    h2 = 0.5 * dt
    k1 = f(t, s, T)
    k2 = f(t + h2, tuple(a + h2 * b for a, b in zip(s, k1)), T)
    k3 = f(t + h2, tuple(a + h2 * b for a, b in zip(s, k2)), T)
    k4 = f(t + dt, tuple(a + dt * b for a, b in zip(s, k3)), T)
    out = tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4))
    if not all(math.isfinite(v) for v in out):
        raise NonFinite(f"RK4 step from t={t:g} produced {out}")
    return out


def nonlinear_rhs(params: SegwayParams) -> Derivative:
    c = derive_constants(params)
    K = params.K

    def f(t, s, T):
        xdd, thdd = accelerations(c, K, State(*s), T)
        return (s[1], xdd, s[3], thdd)

    return f


def linear_rhs(ss: StateSpace) -> Derivative:
    a23, a43, b2, b4 = ss.a23, ss.a43, ss.b2, ss.b4

    def f(t, s, T):
        return (s[1], a23 * s[2] + b2 * T, s[3], a43 * s[2] + b4 * T)

    return f


def clamped_rhs(accel_per_torque: float) -> Derivative:
    """Rod pinned by the rider: theta and omega frozen, xdd proportional to T."""

    def f(t, s, T):
        return (s[1], accel_per_torque * T, 0.0, 0.0)

    return f


def state_space_for(source: PlantSource, params: SegwayParams) -> StateSpace:
    if source is PlantSource.PAPER:
        return paper_numeric_plant()
    return linearize(derive_constants(params), params.K)


def free_rhs(model: Model, source: PlantSource, params: SegwayParams) -> Derivative:
    if model is Model.NONLINEAR:
        if source is not PlantSource.DERIVED:
            raise ValueError("the nonlinear model needs physical parameters (plant source 'derived')")
        return nonlinear_rhs(params)
    return linear_rhs(state_space_for(source, params))


def hold_accel_per_torque(source: PlantSource, params: SegwayParams) -> float:
    """Wheel acceleration per unit torque with the tilt held.

    Physical plant: 1/k1.  The numeric plant has no k1, so its torque-to-
    acceleration entry b2 stands in.
    """
    if source is PlantSource.PAPER:
        return paper_numeric_plant().b2
    return 1.0 / derive_constants(params).k1


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 4): x, v, theta, omega
    torque: np.ndarray
    mode: list[Mode]
    flag: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def diverged(self) -> bool:
        return bool(self.flag.size and self.flag[-1] & FLAG_DIVERGED)

    def signal(self, name: str) -> np.ndarray:
        if name == "torque":
            return self.torque
        return self.states[:, SIGNALS.index(name)]

    def final_state(self) -> State:
        return State(*map(float, self.states[-1]))


class _Recorder:
    def __init__(self):
        self.t: list[float] = []
        self.s: list[tuple] = []
        self.T: list[float] = []
        self.mode: list[Mode] = []
        self.flag: list[int] = []

    def add(self, t, s, T, mode, flag=0):
        self.t.append(t)
        self.s.append(tuple(s))
        self.T.append(T)
        self.mode.append(mode)
        self.flag.append(flag)

    def mark(self, flag):
        self.flag[-1] |= flag

    def build(self, metadata) -> Trajectory:
        return Trajectory(
            t=np.array(self.t),
            states=np.array(self.s, dtype=float).reshape(-1, 4),
            torque=np.array(self.T),
            mode=self.mode,
            flag=np.array(self.flag, dtype=int),
            metadata=metadata,
        )


def _out_of_bounds(s: Sequence[float], theta_limit: float | None) -> bool:
    if theta_limit is not None and abs(s[2]) > theta_limit:
        return True
    return any(abs(v) > STATE_LIMIT for v in s)


def run_open_loop(
    model: Model,
    source: PlantSource,
    T_step: float,
    t_max: float = 10.0,
    dt: float = 1e-3,
    params: SegwayParams | None = None,
    initial: State = State(),
) -> Trajectory:
    """Constant-torque response from ``initial`` (upright rest by default).

    The run stops early, with the last sample flagged, once the state leaves
    the guard box: |state| > 1e6 always, and |theta| > pi/2 for the
    nonlinear model (the linear model has no notion of the rod falling over).
    """
    params = params or SegwayParams()
    f = free_rhs(model, source, params)
    theta_limit = math.pi / 2 if model is Model.NONLINEAR else None
    rec = _Recorder()
    n_steps = int(round(t_max / dt))
    s = tuple(initial)
    for n in range(n_steps + 1):
        t = n * dt
        rec.add(t, s, T_step, Mode.OPEN)
        if _out_of_bounds(s, theta_limit):
            rec.mark(FLAG_DIVERGED)
            break
        if n == n_steps:
            break
        try:
            s = rk4_step(f, s, t, dt, T_step)
        except NonFinite:
            rec.mark(FLAG_DIVERGED)
            break
    meta = {
        "kind": "openloop",
        "model": model.value,
        "plant": source.value,
        "torque": T_step,
        "dt": dt,
        "t_max": t_max,
    }
    return rec.build(meta)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResponseMetrics:
    rise_time_s: float | None
    settling_time_s: float | None
    overshoot_fraction: float | None
    steady_state_error: float

    @property
    def settled(self) -> bool:
        return self.settling_time_s is not None


def _crossing_time(t: np.ndarray, y: np.ndarray, level: float, sign: float) -> float | None:
    """First time sign*(y - level) >= 0, linearly interpolated between samples."""
    z = sign * (y - level)
    hits = np.nonzero(z >= 0)[0]
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(t[0])
    z0, z1 = z[i - 1], z[i]
    return float(t[i - 1] + (t[i] - t[i - 1]) * (-z0) / (z1 - z0))


def response_metrics(t, y, target: float, initial: float | None = None, floor: float = 0.0) -> ResponseMetrics:
    """Step-response metrics of samples ``y`` at times ``t`` heading to ``target``.

    Times are measured from ``t[0]``.  Rise time is the 10%->90% traversal
    of (target - initial); settling time is the start of the final stretch
    within max(2% of |target - initial|, floor) of the target; overshoot is
    the largest excursion past the target as a fraction of the span.  Fields
    that cannot be defined (no traversal, never settles) are None.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size == 0:
        raise ValueError("empty signal")
    initial = float(y[0]) if initial is None else initial
    span = target - initial
    sse = abs(float(y[-1]) - target)

    band = max(SETTLE_FRACTION * abs(span), floor)
    outside = np.nonzero(np.abs(y - target) > band)[0]
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] + 1 < t.size:
        settling = float(t[outside[-1] + 1] - t[0])
    else:
        settling = None

    if span == 0.0:
        still = bool(np.all(y == target))
        return ResponseMetrics(None, settling, 0.0 if still else None, sse)

    sign = math.copysign(1.0, span)
    t10 = _crossing_time(t, y, initial + 0.1 * span, sign)
    t90 = _crossing_time(t, y, initial + 0.9 * span, sign)
    rise = None if t10 is None or t90 is None else t90 - t10
    overshoot = max(0.0, float(np.max(sign * (y - target)))) / abs(span)
    return ResponseMetrics(rise, settling, overshoot, sse)


def compute_metrics(
    traj: Trajectory,
    signal: str,
    target: float,
    *,
    start: float = 0.0,
    initial: float | None = None,
    floor: float = 0.0,
) -> ResponseMetrics:
    """Metrics of one trajectory signal over the samples with t >= ``start``."""
    mask = traj.t >= start - 1e-12
    return response_metrics(traj.t[mask], traj.signal(signal)[mask], target, initial, floor)


@dataclass(frozen=True)
class ScenarioMetrics:
    hold_velocity: ResponseMetrics | None
    free: dict[str, ResponseMetrics]
    settled: bool
    settling_time_s: float | None  # from t = 0, all four signals in band
    release: ReleaseRecord | None
    x_target: float | None
    v_des: float
    saturated: bool
    diverged: bool


def _settle_bands(cs: ControllerState, scenario: Scenario) -> tuple[float, ...]:
    rel = cs.release
    spans = (cs.x_target - rel.x, rel.v, scenario.theta_i, 0.0)
    return tuple(max(SETTLE_FRACTION * abs(sp), fl) for sp, fl in zip(spans, SETTLE_FLOORS))


def run_scenario(scenario: Scenario) -> tuple[Trajectory, ScenarioMetrics]:
    """Closed-loop hold-then-release run.

    Phase 1 integrates the clamped-tilt plant under the velocity law; phase 2
    continues from (x, v, theta_i, 0) on the chosen free plant under the
    full-state stop law.  The run ends when all four signals have been in
    their settling bands for 1 s (unless ``stop_when_settled`` is off) or at
    ``t_max``.
    """
    p = scenario.params
    hold_f = clamped_rhs(hold_accel_per_torque(scenario.plant_source, p))
    free_f = free_rhs(scenario.model, scenario.plant_source, p)
    theta_limit = math.pi / 2 if scenario.model is Model.NONLINEAR else None
    dt = scenario.dt
    n_max = int(math.floor(scenario.t_max / dt + 1e-9))

    cs = initial_controller_state(scenario)
    s = State(0.0, 0.0, scenario.theta_i, 0.0)
    rec = _Recorder()
    bands = None
    in_band_since: float | None = None
    settle_time: float | None = None
    diverged = False
    saturated = False

    for n in range(n_max + 1):
        t = n * dt
        cs = step_mode_machine(cs, t, s, scenario)
        settled_now = False
        if cs.mode is not Mode.HOLD:
            if bands is None:
                bands = _settle_bands(cs, scenario)
            err = (s.x - cs.x_target, s.v, s.theta, s.omega)
            if all(abs(e) <= b for e, b in zip(err, bands)):
                if in_band_since is None:
                    in_band_since = t
                settled_now = t - in_band_since >= SETTLE_DWELL - 1e-9
            else:
                in_band_since = None
            if settled_now and cs.mode is Mode.FREE:
                cs = step_mode_machine(cs, t, s, scenario, settled=True)
                settle_time = in_band_since

        T, sat = control_torque(cs, s, scenario)
        saturated |= sat
        rec.add(t, s, T, cs.mode, FLAG_SATURATED if sat else 0)
        if _out_of_bounds(s, theta_limit):
            rec.mark(FLAG_DIVERGED)
            diverged = True
            break
        if n == n_max or (cs.mode is Mode.SETTLED and scenario.stop_when_settled):
            break
        f = hold_f if cs.mode is Mode.HOLD else free_f
        try:
            s = State(*rk4_step(f, s, t, dt, T))
        except NonFinite:
            rec.mark(FLAG_DIVERGED)
            diverged = True
            break

    meta = {
        "kind": "scenario",
        "theta_i": scenario.theta_i,
        "t_hold": scenario.t_hold,
        "model": scenario.model.value,
        "plant": scenario.plant_source.value,
        "dt": dt,
        "t_max": scenario.t_max,
    }
    traj = rec.build(meta)
    return traj, _scenario_metrics(traj, cs, scenario, settle_time, saturated, diverged)


def _scenario_metrics(traj, cs, scenario, settle_time, saturated, diverged) -> ScenarioMetrics:
    rel = cs.release
    hold = None
    if rel is not None and rel.t > 0:
        mask = traj.t <= rel.t + 1e-12
        hold = response_metrics(traj.t[mask], traj.states[mask, 1], cs.v_des, 0.0, SETTLE_FLOORS[1])
    free: dict[str, ResponseMetrics] = {}
    if rel is not None:
        targets = (cs.x_target, 0.0, 0.0, 0.0)
        initials = (rel.x, rel.v, scenario.theta_i, 0.0)
        for name, tgt, init, fl in zip(SIGNALS, targets, initials, SETTLE_FLOORS):
            free[name] = compute_metrics(traj, name, tgt, start=rel.t, initial=init, floor=fl)
    return ScenarioMetrics(
        hold_velocity=hold,
        free=free,
        settled=settle_time is not None,
        settling_time_s=settle_time,
        release=rel,
        x_target=cs.x_target,
        v_des=cs.v_des,
        saturated=saturated,
        diverged=diverged,
    )
