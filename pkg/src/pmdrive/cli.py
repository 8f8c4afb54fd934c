"""Command-line front end: scenario configs, sweeps, CSV output, calibration.

Configs are TOML (JSON is accepted as an alternative encoding of the same
schema). Sweeps write one CSV row per operating point with the
closed-form prediction alongside, plus a JSON metadata sidecar with the
resolved configuration. Output is byte-identical across repeated runs of
the same config.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:      # Python < 3.11
    import tomli as tomllib

from . import __version__
from .calibration import CalibrationSample, fit_offset_and_delay
from .control import (DEFAULT_BANDWIDTH, DEFAULT_TAU_F, ControllerConfig,
                      ControllerMode, tune_pi)
from .errors import ConfigurationError
from .machine import PRESETS, MachineParams, SaturationMaps, get_preset
from .sensing import PositionErrorModel
from .simloop import DEFAULT_T_P, SimConfig, SweepRow, SweepScenario, run_sweep_point

CSV_COLUMNS = [
    "rpm", "omega_e_rad_s", "id_cmd", "iq_cmd", "id", "iq", "id_hat", "iq_hat",
    "vd_cmd", "vq_cmd", "torque_sim", "torque_oracle", "id_oracle", "iq_oracle",
    "delta_theta_e_rad", "converged",
]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def rpm_to_omega_e(rpm: float, p: int) -> float:
    """Mechanical RPM to electrical speed [rad/s]."""
    return rpm * (2.0 * math.pi / 60.0) * p


def omega_e_to_rpm(omega_e: float, p: int) -> float:
    """Electrical speed [rad/s] to mechanical RPM.

    Results within floating-point noise of an integer snap to it, so the
    conversion round-trips exactly for integer RPM.
    """
    rpm = omega_e / ((2.0 * math.pi / 60.0) * p)
    nearest = round(rpm)
    if abs(rpm - nearest) <= 1e-9 * max(1.0, abs(nearest)):
        return float(nearest)
    return rpm


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated run description."""

    machine: MachineParams
    errors: PositionErrorModel
    ctrl: ControllerConfig
    sim: SimConfig
    commands: tuple[tuple[float, float], ...]   # (id*, iq*) pairs [A]
    speeds_rpm: tuple[float, ...]               # mechanical RPM
    out: str | None


def _expect_table(raw: dict, key: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigurationError(f"[{key}] must be a table/object")
    return value


def _known_keys(table: dict, section: str, allowed: set[str]) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _build_machine(table: dict, section: str = "machine") -> MachineParams:
    _known_keys(table, section,
                {"preset", "r", "ld", "lq", "lambda_m", "pole_pairs", "saturation"})
    if "preset" in table:
        inline = set(table) & {"r", "ld", "lq", "lambda_m", "pole_pairs"}
        if inline:
            raise ConfigurationError(
                f"[{section}] cannot mix 'preset' with inline parameters")
        params = get_preset(table["preset"])
    else:
        missing = {"r", "ld", "lq", "lambda_m", "pole_pairs"} - set(table)
        if missing:
            raise ConfigurationError(
                f"[{section}] missing required key(s): {', '.join(sorted(missing))}")
        params = MachineParams(R=float(table["r"]), Ld=float(table["ld"]),
                               Lq=float(table["lq"]),
                               lambda_m=float(table["lambda_m"]),
                               p=int(table["pole_pairs"]))
    if "saturation" in table:
        sat = table["saturation"]
        _known_keys(sat, f"{section}.saturation",
                    {"grid_id", "grid_iq", "lambda_m_of_iq", "ld_of_idiq", "lq_of_idiq"})
        maps = SaturationMaps(grid_id=sat["grid_id"], grid_iq=sat["grid_iq"],
                              lambda_m_of_iq=sat["lambda_m_of_iq"],
                              ld_of_idiq=sat["ld_of_idiq"],
                              lq_of_idiq=sat["lq_of_idiq"])
        params = dataclasses.replace(params, saturation=maps)
    return params


def _build_errors(table: dict) -> PositionErrorModel:
    _known_keys(table, "errors",
                {"offset_deg", "delay_us", "offset_comp_deg", "delay_comp_us"})
    return PositionErrorModel(
        delta_theta0=math.radians(float(table.get("offset_deg", 0.0))),
        t_d=float(table.get("delay_us", 0.0)) * 1e-6,
        delta_theta0_hat=math.radians(float(table.get("offset_comp_deg", 0.0))),
        t_d_hat=float(table.get("delay_comp_us", 0.0)) * 1e-6,
    )


def _parse_mode(name: str) -> ControllerMode:
    try:
        return ControllerMode(name)
    except ValueError:
        known = ", ".join(m.value for m in ControllerMode)
        raise ConfigurationError(f"unknown controller mode {name!r} (known: {known})") from None


def _build_controller(table: dict, machine: MachineParams) -> ControllerConfig:
    _known_keys(table, "controller",
                {"mode", "bandwidth_hz", "tau_f_s", "estimated"})
    mode = _parse_mode(table.get("mode", "feedback"))
    if "estimated" in table:
        estimated = _build_machine(table["estimated"], "controller.estimated")
    else:
        estimated = machine
    bandwidth = 2.0 * math.pi * float(table["bandwidth_hz"]) \
        if "bandwidth_hz" in table else DEFAULT_BANDWIDTH
    tau_f = float(table.get("tau_f_s", DEFAULT_TAU_F))
    return ControllerConfig(mode=mode, estimated_params=estimated,
                            tau_f=tau_f, bandwidth=bandwidth)


def _build_sim(table: dict) -> SimConfig:
    _known_keys(table, "sim",
                {"t_p_us", "substeps", "settle_time_s", "window_periods",
                 "supply_voltage"})
    return SimConfig(
        t_p=float(table.get("t_p_us", DEFAULT_T_P * 1e6)) * 1e-6,
        substeps=int(table.get("substeps", 8)),
        settle_time=float(table.get("settle_time_s", 0.2)),
        window=float(table.get("window_periods", 1.0)),
        supply_voltage=float(table.get("supply_voltage", 12.0)),
    )


def _build_scenario(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("top-level config must be a table/object")
    _known_keys(raw, "<top level>", {"machine", "errors", "controller", "sim", "run"})
    machine = _build_machine(_expect_table(raw, "machine"))
    errors = _build_errors(_expect_table(raw, "errors"))
    ctrl = _build_controller(_expect_table(raw, "controller"), machine)
    sim = _build_sim(_expect_table(raw, "sim"))

    run = _expect_table(raw, "run")
    _known_keys(run, "run", {"commands", "speeds_rpm", "out"})
    if "speeds_rpm" not in run or not run["speeds_rpm"]:
        raise ConfigurationError("[run] speeds_rpm is required and must be non-empty")
    if "commands" not in run or not run["commands"]:
        raise ConfigurationError("[run] commands is required and must be non-empty")
    commands = []
    for pair in run["commands"]:
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigurationError("[run] commands entries must be [id_a, iq_a] pairs")
        commands.append((float(pair[0]), float(pair[1])))
    speeds = tuple(float(s) for s in run["speeds_rpm"])
    return ScenarioConfig(machine=machine, errors=errors, ctrl=ctrl, sim=sim,
                          commands=tuple(commands), speeds_rpm=speeds,
                          out=run.get("out"))


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario config (TOML, or JSON by extension)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"parse error in {path}: {exc}") from exc
    return _build_scenario(raw)


def apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    """Fold CLI error/mode/output overrides into a loaded config."""
    errors = cfg.errors
    updates = {}
    if args.offset_deg is not None:
        updates["delta_theta0"] = math.radians(args.offset_deg)
    if args.delay_us is not None:
        updates["t_d"] = args.delay_us * 1e-6
    if args.offset_comp_deg is not None:
        updates["delta_theta0_hat"] = math.radians(args.offset_comp_deg)
    if args.delay_comp_us is not None:
        updates["t_d_hat"] = args.delay_comp_us * 1e-6
    if updates:
        errors = dataclasses.replace(errors, **updates)
    ctrl = cfg.ctrl
    if args.mode is not None:
        ctrl = dataclasses.replace(ctrl, mode=_parse_mode(args.mode))
    out = args.out if args.out is not None else cfg.out
    return dataclasses.replace(cfg, errors=errors, ctrl=ctrl, out=out)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row_record(cfg: ScenarioConfig, cmd: tuple[float, float], rpm: float,
                row: SweepRow) -> dict:
    pred = row.prediction
    nan = float("nan")
    return {
        "rpm": float(rpm),
        "omega_e_rad_s": row.omega_e,
        "id_cmd": cmd[0],
        "iq_cmd": cmd[1],
        "id": row.result.id,
        "iq": row.result.iq,
        "id_hat": row.result.id_hat,
        "iq_hat": row.result.iq_hat,
        "vd_cmd": row.result.vd_cmd,
        "vq_cmd": row.result.vq_cmd,
        "torque_sim": row.result.torque,
        "torque_oracle": pred.torque if pred else nan,
        "id_oracle": pred.id if pred else nan,
        "iq_oracle": pred.iq if pred else nan,
        "delta_theta_e_rad": cfg.errors.total_error(row.omega_e),
        "converged": row.result.converged,
    }


def _execute_point(task) -> SweepRow:
    scenario, omega_e = task
    return run_sweep_point(scenario, omega_e)


def execute_scenario(cfg: ScenarioConfig, jobs: int = 1) -> list[dict]:
    """Run every (command, speed) point and return CSV-ready records."""
    tasks = []
    keys = []
    for cmd in cfg.commands:
        scenario = SweepScenario(machine=cfg.machine, errors=cfg.errors,
                                 ctrl=cfg.ctrl, cmd_id=cmd[0], cmd_iq=cmd[1],
                                 sim=cfg.sim)
        for rpm in cfg.speeds_rpm:
            tasks.append((scenario, rpm_to_omega_e(rpm, cfg.machine.p)))
            keys.append((cmd, rpm))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_execute_point, tasks))
    else:
        rows = [_execute_point(task) for task in tasks]
    return [_row_record(cfg, cmd, rpm, row)
            for (cmd, rpm), row in zip(keys, rows)]


def _write_csv(path: Path, records: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow([_format_value(record[col]) for col in CSV_COLUMNS])


def _params_dict(params: MachineParams) -> dict:
    data = {"r": params.R, "ld": params.Ld, "lq": params.Lq,
            "lambda_m": params.lambda_m, "pole_pairs": params.p}
    if params.saturation is not None:
        data["saturation"] = {
            name: getattr(params.saturation, name).tolist()
            for name in ("grid_id", "grid_iq", "lambda_m_of_iq",
                         "ld_of_idiq", "lq_of_idiq")}
    return data


def _metadata(cfg: ScenarioConfig, records: list[dict], exit_code: int) -> dict:
    voltage_limit = cfg.sim.supply_voltage / math.sqrt(3.0)
    warnings = []
    for record in records:
        magnitude = math.hypot(record["vd_cmd"], record["vq_cmd"])
        if magnitude > voltage_limit:
            warnings.append(
                f"command magnitude {magnitude:.3f} V exceeds advisory limit "
                f"{voltage_limit:.3f} V at rpm={record['rpm']} "
                f"cmd=({record['id_cmd']}, {record['iq_cmd']})")
    meta = {
        "tool": "pmdrive",
        "version": __version__,
        "machine": _params_dict(cfg.machine),
        "errors": {
            "offset_rad": cfg.errors.delta_theta0,
            "delay_s": cfg.errors.t_d,
            "offset_comp_rad": cfg.errors.delta_theta0_hat,
            "delay_comp_s": cfg.errors.t_d_hat,
        },
        "controller": {
            "mode": cfg.ctrl.mode.value,
            "bandwidth_rad_s": cfg.ctrl.bandwidth,
            "tau_f_s": cfg.ctrl.tau_f,
            "estimated_params": _params_dict(cfg.ctrl.estimated_params),
        },
        "sim": {
            "t_p_s": cfg.sim.t_p,
            "substeps": cfg.sim.substeps,
            "settle_time_s": cfg.sim.settle_time,
            "window_periods": cfg.sim.window,
            "supply_voltage": cfg.sim.supply_voltage,
        },
        "commands": [list(cmd) for cmd in cfg.commands],
        "speeds_rpm": list(cfg.speeds_rpm),
        "determinism": {"rng": None, "note": "runs are deterministic; no seed used"},
        "voltage_warnings": warnings,
        "exit_status": exit_code,
    }
    if cfg.ctrl.mode is ControllerMode.FEEDBACK_PI:
        gains = tune_pi(cfg.ctrl)
        meta["controller"]["gains"] = {"kp_d": gains.kp_d, "ki_d": gains.ki_d,
                                       "kp_q": gains.kp_q, "ki_q": gains.ki_q}
    return meta


GNUPLOT_TEMPLATE = """\
set datafile separator ','
set key autotitle columnhead
set xlabel 'speed [rpm]'
set ylabel 'torque [N*m]'
plot '{csv}' using 1:11 with linespoints title 'simulated', \\
     '{csv}' using 1:12 with linespoints title 'predicted'
"""


def _write_outputs(cfg: ScenarioConfig, records: list[dict], exit_code: int,
                   gnuplot: bool = False) -> None:
    out = Path(cfg.out)
    _write_csv(out, records)
    meta_path = out.parent / (out.stem + ".meta.json")
    meta_path.write_text(json.dumps(_metadata(cfg, records, exit_code),
                                    indent=2, sort_keys=True) + "\n")
    if gnuplot:
        gp_path = out.parent / (out.stem + ".gp")
        gp_path.write_text(GNUPLOT_TEMPLATE.format(csv=out.name))


def run_scenario(cfg: ScenarioConfig, jobs: int = 1,
                 gnuplot: bool = False) -> int:
    """Execute a scenario, write CSV + metadata, and return the exit code."""
    if cfg.out is None:
        raise ConfigurationError("no output path: set [run] out or pass --out")
    records = execute_scenario(cfg, jobs=jobs)
    exit_code = EXIT_OK if all(r["converged"] for r in records) else EXIT_PARTIAL
    _write_outputs(cfg, records, exit_code, gnuplot=gnuplot)
    return exit_code


def _print_summary(records: list[dict], file=None) -> None:
    file = file if file is not None else sys.stdout
    header = ("rpm", "id_cmd", "iq_cmd", "id", "iq", "torque_sim",
              "torque_oracle", "converged")
    print("  ".join(f"{h:>13s}" for h in header), file=file)
    for record in records:
        cells = []
        for key in header:
            value = record[key]
            if isinstance(value, bool):
                cells.append(f"{str(value).lower():>13s}")
            elif isinstance(value, float):
                cells.append(f"{value:13.6g}")
            else:
                cells.append(f"{value:>13}")
        print("  ".join(cells), file=file)


def _read_calibration_csv(path: Path) -> list[CalibrationSample]:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"omega_e_rad_s", "vd_cmd", "vq_cmd", "id_cmd", "iq_cmd",
                    "converged"}
        fields = set(reader.fieldnames or [])
        missing = required - fields
        if missing:
            raise ConfigurationError(
                f"{path}: missing required column(s): {', '.join(sorted(missing))}")
        samples = []
        for row in reader:
            if float(row["id_cmd"]) != 0.0 or float(row["iq_cmd"]) != 0.0:
                raise ConfigurationError(
                    f"{path}: calibration requires a zero-current-command sweep")
            if row["converged"].strip().lower() != "true":
                continue
            samples.append(CalibrationSample(omega_e=float(row["omega_e_rad_s"]),
                                             vd_cmd=float(row["vd_cmd"]),
                                             vq_cmd=float(row["vq_cmd"])))
    return samples


def calibrate_command(csv_path: str | Path, t_p: float, lambda_m: float,
                      out: str | None = None, file=None) -> int:
    """Fit offset and delay from a sweep CSV; print and optionally save."""
    file = file if file is not None else sys.stdout
    samples = _read_calibration_csv(Path(csv_path))
    result = fit_offset_and_delay(samples, t_p, lambda_m)
    record = {
        "offset_est_deg": math.degrees(result.delta_theta0_est),
        "offset_est_rad": result.delta_theta0_est,
        "t_d_est_us": result.t_d_est * 1e6,
        "residual_rms_rad": result.residual_rms,
        "n_samples": len(result.per_speed_errors),
    }
    print(f"offset estimate: {record['offset_est_deg']:.4f} deg "
          f"({record['offset_est_rad']:.6f} rad)", file=file)
    print(f"delay estimate:  {record['t_d_est_us']:.3f} us", file=file)
    print(f"fit residual:    {record['residual_rms_rad']:.3e} rad rms", file=file)
    if out is not None:
        Path(out).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="scenario config file (.toml or .json)")
    parser.add_argument("--offset-deg", type=float, default=None,
                        help="override true sensor offset [deg electrical]")
    parser.add_argument("--delay-us", type=float, default=None,
                        help="override true sensing delay [us]")
    parser.add_argument("--offset-comp-deg", type=float, default=None,
                        help="override offset compensation [deg electrical]")
    parser.add_argument("--delay-comp-us", type=float, default=None,
                        help="override delay compensation [us]")
    parser.add_argument("--mode", choices=[m.value for m in ControllerMode],
                        default=None, help="override controller mode")
    parser.add_argument("--out", default=None, help="override output CSV path")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for sweep points")
    parser.add_argument("--gnuplot", action="store_true",
                        help="also write a gnuplot script next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmdrive",
        description="PMSM drive simulation under position-sensing errors")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and print a summary")
    _add_scenario_args(sim)

    swp = sub.add_parser("sweep", help="run a scenario and write the CSV")
    _add_scenario_args(swp)

    cal = sub.add_parser("calibrate", help="fit offset/delay from a sweep CSV")
    cal.add_argument("csv", help="CSV from a zero-command feedback sweep")
    cal.add_argument("--preset", default=None, choices=sorted(PRESETS),
                     help="machine preset supplying lambda_m")
    cal.add_argument("--lambda-m", type=float, default=None,
                     help="PM flux linkage [Wb] (alternative to --preset)")
    cal.add_argument("--tp-us", type=float, default=DEFAULT_T_P * 1e6,
                     help="PWM period [us] removed from the fitted delay")
    cal.add_argument("--out", default=None, help="write the result record as JSON")

    pre = sub.add_parser("presets", help="preset utilities")
    pre_sub = pre.add_subparsers(dest="presets_command", required=True)
    pre_sub.add_parser("list", help="list built-in machine presets")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            cfg = apply_overrides(load_config(args.config), args)
            return run_scenario(cfg, jobs=args.jobs, gnuplot=args.gnuplot)
        if args.command == "simulate":
            cfg = apply_overrides(load_config(args.config), args)
            records = execute_scenario(cfg, jobs=args.jobs)
            exit_code = EXIT_OK if all(r["converged"] for r in records) \
                else EXIT_PARTIAL
            if cfg.out is not None:
                _write_outputs(cfg, records, exit_code, gnuplot=args.gnuplot)
            _print_summary(records)
            return exit_code
        if args.command == "calibrate":
            if (args.preset is None) == (args.lambda_m is None):
                raise ConfigurationError(
                    "calibrate needs exactly one of --preset or --lambda-m")
            lam = args.lambda_m if args.lambda_m is not None \
                else get_preset(args.preset).lambda_m
            return calibrate_command(args.csv, t_p=args.tp_us * 1e-6,
                                     lambda_m=lam, out=args.out)
        if args.command == "presets":
            print(f"{'name':<14s} {'R[ohm]':>10s} {'Ld[H]':>12s} {'Lq[H]':>12s} "
                  f"{'lambda_m[Wb]':>13s} {'p':>3s}")
            for name in sorted(PRESETS):
                params = PRESETS[name]
                print(f"{name:<14s} {params.R:>10.5g} {params.Ld:>12.6g} "
                      f"{params.Lq:>12.6g} {params.lambda_m:>13.6g} {params.p:>3d}")
            return EXIT_OK
        raise ConfigurationError(f"unknown command {args.command!r}")
    except Exception as exc:   # CLI boundary: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
