"""Command-line front end.

    segway-ctl analyze  [--plant derived|paper] [--param k=v ...]
    segway-ctl gains    [--plant ...] (--char c4,..,c0 | --kcanon k1,..,k4 | --poles p1,..,p4)
    segway-ctl simulate [--config FILE] [--plant ...] [--model ...] [--out CSV]
    segway-ctl openloop [--model ...] [--plant ...] [--torque T] [--out CSV]

Exit codes: 0 success, 1 usage error, 2 numeric/synthesis failure, 3 config error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import fields
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from . import control, linearization, synthesis
from .control import Mode, Model, Scenario
from .linearization import PlantSource
from .numerics import NoConvergence, RealPolynomial, SingularMatrix, rank
from .plant import SegwayParams, derive_constants
from .simulate import (
    NonFinite,
    ScenarioMetrics,
    Trajectory,
    run_open_loop,
    run_scenario,
    state_space_for,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3

CSV_HEADER = "t,x,v,theta,omega,torque,mode,flag"

# Published values the derived model cannot reproduce; echoed in reports.
PAPER_HELD_VELOCITY = 2.5
PAPER_UNSTABLE_POLE = 2.597
PAPER_G1_ZERO = 2.062


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "%.9g" % v


def write_trajectory_csv(traj: Trajectory, fh: IO[str]) -> None:
    fh.write(CSV_HEADER + "\n")
    for i in range(len(traj)):
        row = [_fmt(traj.t[i]), *(_fmt(v) for v in traj.states[i]), _fmt(traj.torque[i])]
        row += [traj.mode[i].value, str(int(traj.flag[i]))]
        fh.write(",".join(row) + "\n")


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO(newline="")
    write_trajectory_csv(traj, buf)
    return buf.getvalue()


def read_trajectory_csv(fh: IO[str] | Iterable[str]) -> Trajectory:
    lines = iter(fh)
    header = next(lines).strip()
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    t, states, torque, mode, flag = [], [], [], [], []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        cols = line.split(",")
        if len(cols) != 8:
            raise ValueError(f"expected 8 columns, got {len(cols)}: {line!r}")
        t.append(float(cols[0]))
        states.append([float(c) for c in cols[1:5]])
        torque.append(float(cols[5]))
        mode.append(Mode(cols[6]))
        flag.append(int(cols[7]))
    return Trajectory(
        t=np.array(t),
        states=np.array(states, dtype=float).reshape(-1, 4),
        torque=np.array(torque),
        mode=mode,
        flag=np.array(flag, dtype=int),
    )


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

PARAM_KEYS = tuple(f.name for f in fields(SegwayParams))
SCENARIO_KEYS = (
    "theta_i",
    "theta_i_deg",
    "t_hold",
    "plant",
    "model",
    "dt",
    "t_max",
    "torque_limit",
    "stop_when_settled",
    "gains",
    "gains_mode1",
    "gains_mode2",
    "torque",
    "out",
    "report",
)
CONFIG_KEYS = frozenset(PARAM_KEYS + SCENARIO_KEYS)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _float(key: str, value: str) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {value!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite, got {value!r}")
    return v


def _floats(key: str, value: str, n: int | None = None) -> list[float]:
    parts = [p for p in value.replace(" ", "").split(",") if p]
    vals = [_float(key, p) for p in parts]
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _enum(cls, key: str, value: str):
    try:
        return cls(value.lower())
    except ValueError:
        choices = "|".join(m.value for m in cls)
        raise ConfigError(f"{key}: expected one of {choices}, got {value!r}") from None


def _bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}")


def params_from(cfg: dict[str, str]) -> SegwayParams:
    kw = {k: _float(k, cfg[k]) for k in PARAM_KEYS if k in cfg}
    try:
        return SegwayParams(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def scenario_from(cfg: dict[str, str]) -> Scenario:
    params = params_from(cfg)
    if "theta_i" in cfg and "theta_i_deg" in cfg:
        raise ConfigError("give theta_i or theta_i_deg, not both")
    if "theta_i_deg" in cfg:
        theta_i = math.radians(_float("theta_i_deg", cfg["theta_i_deg"]))
    else:
        theta_i = _float("theta_i", cfg.get("theta_i", repr(math.pi / 12)))
    source = _enum(PlantSource, "plant", cfg.get("plant", "paper"))
    model = _enum(Model, "model", cfg.get("model", "linear"))

    gains_choice = cfg.get("gains", "paper").lower()
    if gains_choice == "paper":
        g1, g2 = synthesis.PAPER_GAINS_MODE1, synthesis.PAPER_GAINS_MODE2
    elif gains_choice == "synthesized":
        try:
            r1, r2 = synthesis.synthesize_mode_gains(state_space_for(source, params))
        except (synthesis.Uncontrollable, synthesis.VerificationFailed) as exc:
            raise ConfigError(f"gains = synthesized: {exc}") from None
        g1, g2 = r1.gains, r2.gains
    else:
        raise ConfigError(f"gains: expected paper|synthesized, got {cfg['gains']!r}")
    if "gains_mode1" in cfg:
        g1 = synthesis.GainVector(*_floats("gains_mode1", cfg["gains_mode1"], 4))
    if "gains_mode2" in cfg:
        g2 = synthesis.GainVector(*_floats("gains_mode2", cfg["gains_mode2"], 4))

    limit = cfg.get("torque_limit", "none")
    try:
        return Scenario(
            theta_i=theta_i,
            t_hold=_float("t_hold", cfg.get("t_hold", "3")),
            plant_source=source,
            model=model,
            gains_mode1=g1,
            gains_mode2=g2,
            dt=_float("dt", cfg.get("dt", "1e-3")),
            t_max=_float("t_max", cfg.get("t_max", "30")),
            torque_limit=None if limit.lower() == "none" else _float("torque_limit", limit),
            params=params,
            stop_when_settled=_bool("stop_when_settled", cfg.get("stop_when_settled", "true")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _c(z: complex, digits: int = 6) -> str:
    if z.imag == 0:
        return f"{z.real:.{digits}g}"
    sign = "+" if z.imag > 0 else "-"
    return f"{z.real:.{digits}g}{sign}{abs(z.imag):.{digits}g}j"


def _clist(zs: Sequence[complex]) -> str:
    return "[" + ", ".join(_c(z) for z in zs) + "]" if zs else "[]"


def _matrix(m: np.ndarray, indent: str = "  ") -> list[str]:
    return [indent + " ".join(f"{v:12.6g}" for v in row) for row in np.atleast_2d(m)]


def _section(title: str) -> str:
    return f"== {title} =="


def format_analysis_report(source: PlantSource, params: SegwayParams) -> str:
    c = derive_constants(params)
    ss = state_space_for(source, params)
    tfs = linearization.transfer_functions(ss)
    stab = linearization.classify_stability(ss)
    cm = synthesis.controllability_matrix(ss)
    lines: list[str] = []
    add = lines.append

    add(_section("Parameters"))
    for name in PARAM_KEYS:
        add(f"  {name:4s} = {getattr(params, name):.6g}")
    add(f"  plant source: {source.value}")
    add("")
    add(_section("System constants"))
    add("  (from the physical parameters)")
    for name in ("k1", "k2", "k3", "k4", "k5", "k6"):
        add(f"  {name} = {getattr(c, name):.6g}")
    add(f"  delta = k1*k4 - k2*k3 = {c.delta:.6g}")
    add("")
    add(_section("State space"))
    add(f"  source: {source.value}")
    add("  A =")
    lines.extend(_matrix(ss.A, "    "))
    add("  B = [" + ", ".join(f"{v:.6g}" for v in ss.B) + "]")
    add("  C = I (4x4), D = 0")
    add("  note: a43 = +k1*k5/delta and b4 = -(K*k1 + k3)/delta (signs corrected from the printed display)")
    add("")
    add(_section("Transfer functions"))
    for tf in tfs:
        add(f"  {tf.label.name} = {tf.label.value}")
        add(f"    num: {tf.numerator.format()}")
        add(f"    den: {tf.denominator.format()}")
        add(f"    zeros: {_clist(tf.zeros())}")
        add(f"    poles: {_clist(tf.poles())}")
    add("  note: pole-zero cancellations are not applied")
    add("")
    add(_section("Controllability"))
    lines.extend(_matrix(cm))
    add(f"  rank = {rank(cm)}")
    add("")
    add(_section("Stability"))
    add(f"  open-loop poles: {_clist(stab.poles)}")
    verdict = "UNSTABLE" if stab.unstable else ("MARGINAL" if stab.marginal else "STABLE")
    add(f"  verdict: {verdict}")
    add("")
    add(_section("Derived vs numeric plant"))
    derived = linearization.linearize(c, params.K)
    paper = linearization.paper_numeric_plant()
    add(f"  {'entry':14s} {'derived':>12s} {'paper':>12s}")
    for name in ("a23", "a43", "b2", "b4"):
        add(f"  {name:14s} {getattr(derived, name):12.6g} {getattr(paper, name):12.6g}")
    add(f"  {'unstable pole':14s} {math.sqrt(derived.a43):12.6g} {math.sqrt(paper.a43):12.6g}")
    d_zero = linearization.transfer_functions(derived)[0].zeros()
    p_zero = linearization.transfer_functions(paper)[0].zeros()
    add(f"  {'G1 zero':14s} {max(z.real for z in d_zero):12.6g} {max(z.real for z in p_zero):12.6g}")
    add(f"  published: unstable pole {PAPER_UNSTABLE_POLE}, G1 zeros +/-{PAPER_G1_ZERO};")
    add("  no positive k1..k6 reproduce the numeric plant, so both sources are kept.")
    add("")
    add(_section("Known discrepancies"))
    v_des = control.velocity_calibration(math.pi / 12)
    add(f"  held velocity at theta_i = pi/12: calibration gives {v_des:.4g} m/s,")
    add(f"    published value is about {PAPER_HELD_VELOCITY} m/s; the calibration value is used.")
    r1 = synthesis.place_poles(paper, synthesis.MODE1_DESIRED)
    add("  mode-1 gains on the numeric plant (--plant paper):")
    add("    placed:    [" + ", ".join(f"{g:.4f}" if abs(g) >= 5e-5 else "0.0000" for g in r1.gains) + "]")
    add("    published: [" + ", ".join(f"{g:.4f}" for g in synthesis.PAPER_GAINS_MODE1) + "]")
    dk = synthesis.PAPER_GAINS_MODE1.kp_t - r1.gains.kp_t
    add(f"    published kp_t is off by {dk:.4f}; it does not place the roots of {synthesis.MODE1_DESIRED.format()}.")
    add("  mode-1 hold law uses |kd_x|: the clamped plant xdd = T/k1 needs a positive velocity gain.")
    return "\n".join(lines) + "\n"


def format_gains_report(result: synthesis.PolePlacementResult, fmt: str = "text") -> str:
    if fmt == "csv":
        rows = ["quantity,v1,v2,v3,v4"]
        rows.append("k_canon," + ",".join(_fmt(v) for v in result.k_canon))
        rows.append("gains," + ",".join(_fmt(v) for v in result.gains))
        rows.append("pole_re," + ",".join(_fmt(p.real) for p in result.achieved_poles))
        rows.append("pole_im," + ",".join(_fmt(p.imag) for p in result.achieved_poles))
        rows.append("max_pole_error," + _fmt(result.max_pole_error) + ",,,")
        return "\n".join(rows) + "\n"
    lines = [
        _section("Pole placement"),
        f"  desired: {result.desired_char.format()}",
        "  k_canon: [" + ", ".join(f"{v:.6g}" for v in result.k_canon) + "]",
        "  gains [kp_x, kd_x, kp_t, kd_t]: [" + ", ".join(f"{v:.6g}" for v in result.gains) + "]",
        f"  achieved poles: {_clist(result.achieved_poles)}",
        f"  max pole error: {result.max_pole_error:.3g}",
    ]
    return "\n".join(lines) + "\n"


def _metric(v: float | None, unit: str = "") -> str:
    return "n/a" if v is None else f"{v:.6g}{unit}"


def format_metrics_report(traj: Trajectory, m: ScenarioMetrics) -> str:
    lines = [_section("Scenario")]
    for k, v in traj.metadata.items():
        lines.append(f"  {k}: {v}")
    lines.append(f"  samples: {len(traj)}, final t = {traj.t[-1]:.6g} s")
    lines.append("")
    lines.append(_section("Hold phase"))
    lines.append(f"  v_des = {m.v_des:.6g} m/s")
    if m.hold_velocity is not None:
        h = m.hold_velocity
        lines.append(f"  velocity rise time: {_metric(h.rise_time_s, ' s')}")
        lines.append(f"  velocity settling time: {_metric(h.settling_time_s, ' s')}")
        lines.append(f"  velocity error at release: {h.steady_state_error:.6g} m/s")
    lines.append("")
    lines.append(_section("Release"))
    if m.release is not None:
        lines.append(f"  t = {m.release.t:.6g} s, x = {m.release.x:.6g} m, v = {m.release.v:.6g} m/s")
        lines.append(f"  x_target = {m.x_target:.6g} m")
    lines.append("")
    lines.append(_section("Free phase"))
    for name, r in m.free.items():
        lines.append(
            f"  {name:6s} rise {_metric(r.rise_time_s, ' s')}, settle {_metric(r.settling_time_s, ' s')}, "
            f"overshoot {_metric(r.overshoot_fraction)}, sse {r.steady_state_error:.3g}"
        )
    lines.append("")
    lines.append(_section("Outcome"))
    lines.append(f"  settled: {'yes' if m.settled else 'NO (NotSettled)'}")
    lines.append(f"  settling time from t=0: {_metric(m.settling_time_s, ' s')}")
    lines.append(f"  torque saturated: {'yes' if m.saturated else 'no'}")
    lines.append(f"  diverged: {'yes' if m.diverged else 'no'}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_param(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = (p.strip() for p in text.split("=", 1))
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="segway-ctl", description="Planar Segway two-mode controller toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model: bool = False):
        p.add_argument("--plant", choices=[s.value for s in PlantSource])
        if model:
            p.add_argument("--model", choices=[m.value for m in Model])
        p.add_argument("--config", type=Path)
        p.add_argument("--param", type=_parse_param, action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("analyze", help="open-loop analysis report")
    common(p)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("gains", help="pole-placement gain synthesis")
    common(p)
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--char", help="desired characteristic coefficients, highest power first")
    spec.add_argument("--kcanon", help="canonical-coordinate gains k1..k4")
    spec.add_argument("--poles", help="four desired poles, e.g. -1,-2,-1+1j,-1-1j")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("simulate", help="closed-loop two-mode run, CSV + metrics")
    common(p, model=True)
    p.add_argument("--theta-i", type=float)
    p.add_argument("--t-hold", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--out", type=Path, help="trajectory CSV (default stdout)")
    p.add_argument("--report", type=Path, help="metrics report (default stderr)")

    p = sub.add_parser("openloop", help="constant-torque open-loop response CSV")
    common(p, model=True)
    p.add_argument("--torque", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--out", type=Path)
    return parser


def _load_config(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg.update(parse_config_text(text))
    for key, value in args.param:
        if key not in PARAM_KEYS:
            raise ConfigError(f"--param: unknown parameter {key!r} (known: {', '.join(PARAM_KEYS)})")
        cfg[key] = value
    overrides = {
        "plant": getattr(args, "plant", None),
        "model": getattr(args, "model", None),
        "theta_i": getattr(args, "theta_i", None),
        "t_hold": getattr(args, "t_hold", None),
        "dt": getattr(args, "dt", None),
        "t_max": getattr(args, "t_max", None),
        "torque": getattr(args, "torque", None),
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = str(value)
            if key == "theta_i":
                cfg.pop("theta_i_deg", None)
    return cfg


def _emit(text: str, path: Path | None, default: IO[str]) -> None:
    if path is None:
        default.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _desired_from_args(args, ss) -> RealPolynomial | list[complex]:
    try:
        if args.char is not None:
            return RealPolynomial.from_descending(_floats("--char", args.char, 5))
        if args.kcanon is not None:
            return synthesis.desired_from_kcanon(ss, _floats("--kcanon", args.kcanon, 4))
        poles = [complex(p.replace(" ", "")) for p in args.poles.split(",") if p.strip()]
    except ConfigError as exc:
        raise _UsageError(str(exc)) from None
    except ValueError as exc:
        raise _UsageError(f"--poles: {exc}") from None
    if len(poles) != 4:
        raise _UsageError(f"--poles: expected 4 poles, got {len(poles)}")
    return poles


def _cmd_analyze(args, stdout) -> int:
    cfg = _load_config(args)
    params = params_from(cfg)
    source = _enum(PlantSource, "plant", cfg.get("plant", "derived"))
    _emit(format_analysis_report(source, params), args.out, stdout)
    return EXIT_OK


def _cmd_gains(args, stdout) -> int:
    cfg = _load_config(args)
    params = params_from(cfg)
    source = _enum(PlantSource, "plant", cfg.get("plant", "paper"))
    ss = state_space_for(source, params)
    desired = _desired_from_args(args, ss)
    try:
        result = synthesis.place_poles(ss, desired)
    except ValueError as exc:
        if isinstance(exc, synthesis.Uncontrollable):
            raise
        raise _UsageError(str(exc)) from None
    _emit(format_gains_report(result, args.format), args.out, stdout)
    return EXIT_OK


def _cmd_simulate(args, stdout, stderr) -> int:
    cfg = _load_config(args)
    scenario = scenario_from(cfg)
    traj, metrics = run_scenario(scenario)
    out = args.out if args.out is not None else (Path(cfg["out"]) if "out" in cfg else None)
    report = args.report if args.report is not None else (Path(cfg["report"]) if "report" in cfg else None)
    _emit(trajectory_to_csv(traj), out, stdout)
    _emit(format_metrics_report(traj, metrics), report, stderr if out is None else stdout)
    return EXIT_OK


def _cmd_openloop(args, stdout) -> int:
    cfg = _load_config(args)
    params = params_from(cfg)
    source = _enum(PlantSource, "plant", cfg.get("plant", "derived"))
    model = _enum(Model, "model", cfg.get("model", "nonlinear"))
    if model is Model.NONLINEAR and source is not PlantSource.DERIVED:
        raise ConfigError("the nonlinear model needs physical parameters (--plant derived)")
    T = _float("torque", cfg.get("torque", "1"))
    dt = _float("dt", cfg.get("dt", "1e-3"))
    t_max = _float("t_max", cfg.get("t_max", "10"))
    if not (0 < dt <= 0.01 and t_max > 0):
        raise ConfigError(f"need 0 < dt <= 0.01 and t_max > 0, got dt={dt}, t_max={t_max}")
    traj = run_open_loop(model, source, T, t_max=t_max, dt=dt, params=params)
    out = args.out if args.out is not None else (Path(cfg["out"]) if "out" in cfg else None)
    _emit(trajectory_to_csv(traj), out, stdout)
    return EXIT_OK


def main(argv: Sequence[str] | None = None, stdout: IO[str] | None = None, stderr: IO[str] | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return _cmd_analyze(args, stdout)
        if args.command == "gains":
            return _cmd_gains(args, stdout)
        if args.command == "simulate":
            return _cmd_simulate(args, stdout, stderr)
        return _cmd_openloop(args, stdout)
    except _UsageError as exc:
        stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (
        synthesis.Uncontrollable,
        synthesis.VerificationFailed,
        SingularMatrix,
        NoConvergence,
        NonFinite,
    ) as exc:
        stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
