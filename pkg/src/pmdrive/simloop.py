"""Fixed-step closed-loop simulation of the drive.

One PWM period per controller step: sample currents and position at the
period start, compute the voltage command, apply the previous period's
command rotated by the forward-path angle, then integrate the plant with
RK4 sub-steps under that held voltage. Runs extract a window-averaged
steady state with a ripple-based convergence flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle
from .control import (ControllerConfig, ControllerMode, ControllerState,
                      feedback_voltage, feedforward_voltage)
from .errors import ConfigurationError, ConvergenceError
from .machine import (DriveState, MachineParams, electrical_derivatives,
                      evaluate_params, torque, wrap_angle)
from .sensing import PositionErrorModel, estimate_sync_currents

DEFAULT_T_P = 62.5e-6   # 16 kHz PWM [s]

# Ripple thresholds for the convergence flag: peak-to-peak below 0.5 % of
# the window mean, or below this absolute floor when the mean is near zero.
RIPPLE_REL = 5.0e-3
RIPPLE_ABS = 1.0e-3


@dataclass(frozen=True)
class SimConfig:
    """Timing and steady-state extraction settings."""

    t_p: float = DEFAULT_T_P   # PWM period [s]
    substeps: int = 8          # plant integration sub-steps per period
    settle_time: float = 0.2   # time simulated before the averaging window [s]
    window: float = 1.0        # averaging window length [electrical periods]
    supply_voltage: float = 12.0   # advisory DC supply for voltage warnings [V]

    def __post_init__(self):
        if not self.t_p > 0.0:
            raise ConfigurationError("t_p must be > 0")
        if not (isinstance(self.substeps, int) and self.substeps >= 1):
            raise ConfigurationError("substeps must be an integer >= 1")
        if not self.settle_time > 0.0:
            raise ConfigurationError("settle_time must be > 0")
        if not self.window > 0.0:
            raise ConfigurationError("window must be > 0")


@dataclass(frozen=True)
class SteadyStateResult:
    """Window-averaged steady state of one run."""

    id: float        # achieved d-axis current [A]
    iq: float        # achieved q-axis current [A]
    id_hat: float    # estimated d-axis current [A]
    iq_hat: float    # estimated q-axis current [A]
    vd_cmd: float    # commanded d-axis voltage [V]
    vq_cmd: float    # commanded q-axis voltage [V]
    torque: float    # [N*m]
    converged: bool


@dataclass
class TransportLagBuffer:
    """Holds the previous period's voltage command."""

    vd: float = 0.0
    vq: float = 0.0


def apply_transport_lag(vd_cmd: float, vq_cmd: float, omega_e: float,
                        delta_theta_e: float, t_p: float,
                        delay_buffer: TransportLagBuffer) -> tuple[float, float]:
    """Voltage applied to the plant during the current period [V].

    The command computed one period ago is applied now, rotated by the
    PWM-period angle plus the residual position error; the buffer then
    advances to hold this period's command.
    """
    angle = omega_e * t_p + delta_theta_e
    c = math.cos(angle)
    s = math.sin(angle)
    vd_app = c * delay_buffer.vd - s * delay_buffer.vq
    vq_app = s * delay_buffer.vd + c * delay_buffer.vq
    delay_buffer.vd = vd_cmd
    delay_buffer.vq = vq_cmd
    return vd_app, vq_app


def _rk4_affine_period(params: MachineParams, omega_e: float, t_p: float,
                       substeps: int):
    """Pre-compose the per-period RK4 update for a constant-parameter plant.

    The plant is linear, so the classical RK4 sub-step is an affine map of
    (id, iq) and the held voltage; composing the sub-steps once per run
    turns each simulated period into a handful of scalar operations.
    """
    r, ld, lq, lam = params.R, params.Ld, params.Lq, params.lambda_m
    h = t_p / substeps
    m = np.array([[-r / ld, -omega_e * lq / ld],
                  [omega_e * ld / lq, -r / lq]])
    hm = h * m
    eye = np.eye(2)
    # One RK4 sub-step of dy/dt = m y + u with u held: y+ = P y + Q u.
    p_step = eye + hm + hm @ hm / 2.0 + hm @ hm @ hm / 6.0 + hm @ hm @ hm @ hm / 24.0
    q_step = h * (eye + hm / 2.0 + hm @ hm / 6.0 + hm @ hm @ hm / 24.0)
    a = eye.copy()
    b = np.zeros((2, 2))
    for _ in range(substeps):
        a = p_step @ a
        b = p_step @ b + q_step
    # u = (vd/ld, (vq - omega_e*lam)/lq): fold the input scaling and the
    # BEMF offset into the composed map.
    bv = b @ np.diag([1.0 / ld, 1.0 / lq])
    const = bv @ np.array([0.0, -omega_e * lam])
    a11, a12, a21, a22 = a[0, 0], a[0, 1], a[1, 0], a[1, 1]
    b11, b12, b21, b22 = bv[0, 0], bv[0, 1], bv[1, 0], bv[1, 1]
    c1, c2 = const[0], const[1]

    def step(id_val, iq_val, vd, vq):
        return (a11 * id_val + a12 * iq_val + b11 * vd + b12 * vq + c1,
                a21 * id_val + a22 * iq_val + b21 * vd + b22 * vq + c2)

    return step


def _rk4_generic_period(params: MachineParams, omega_e: float, t_p: float,
                        substeps: int):
    """Per-period RK4 update evaluating scheduled parameters at every stage."""
    h = t_p / substeps

    def deriv(id_val, iq_val, vd, vq):
        eff = evaluate_params(params, id_val, iq_val)
        state = DriveState(theta_e=0.0, omega_e=omega_e, id=id_val, iq=iq_val)
        return electrical_derivatives(state, vd, vq, eff)

    def step(id_val, iq_val, vd, vq):
        for _ in range(substeps):
            k1d, k1q = deriv(id_val, iq_val, vd, vq)
            k2d, k2q = deriv(id_val + 0.5 * h * k1d, iq_val + 0.5 * h * k1q, vd, vq)
            k3d, k3q = deriv(id_val + 0.5 * h * k2d, iq_val + 0.5 * h * k2q, vd, vq)
            k4d, k4q = deriv(id_val + h * k3d, iq_val + h * k3q, vd, vq)
            id_val += (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
            iq_val += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        return id_val, iq_val

    return step


def _window_periods(omega_e: float, sim: SimConfig) -> int:
    """Number of PWM periods covering the averaging window."""
    if omega_e != 0.0:
        duration = sim.window * 2.0 * math.pi / abs(omega_e)
    else:
        duration = sim.window * 0.02
    return max(2, min(int(math.ceil(duration / sim.t_p)), 200_000))


def run_to_steady_state(machine: MachineParams, errors: PositionErrorModel,
                        ctrl: ControllerConfig, cmd_id: float, cmd_iq: float,
                        omega_e: float, sim: SimConfig,
                        _force_generic: bool = False) -> SteadyStateResult:
    """Simulate one operating point until the averaged window is ripple-free.

    Settles for sim.settle_time, averages one window, and keeps extending
    the settle time until the ripple criterion passes; raises
    ConvergenceError (carrying the partial averages) if ten settle times
    pass without convergence.
    """
    dt = sim.t_p
    delta_theta_e = errors.total_error(omega_e)
    ctrl_state = ControllerState()
    buffer = TransportLagBuffer()
    feedback = ctrl.mode is ControllerMode.FEEDBACK_PI

    if machine.saturation is None and not _force_generic:
        step_period = _rk4_affine_period(machine, omega_e, sim.t_p, sim.substeps)
    else:
        step_period = _rk4_generic_period(machine, omega_e, sim.t_p, sim.substeps)

    id_val = 0.0
    iq_val = 0.0
    theta_e = 0.0

    def advance(record):
        nonlocal id_val, iq_val, theta_e
        id_hat, iq_hat = estimate_sync_currents(id_val, iq_val, delta_theta_e)
        if feedback:
            vd_cmd, vq_cmd = feedback_voltage(cmd_id, cmd_iq, id_hat, iq_hat,
                                              omega_e, ctrl, ctrl_state, dt)
        else:
            vd_cmd, vq_cmd = feedforward_voltage(cmd_id, cmd_iq, omega_e,
                                                 ctrl, ctrl_state, dt)
        vd_app, vq_app = apply_transport_lag(vd_cmd, vq_cmd, omega_e,
                                             delta_theta_e, sim.t_p, buffer)
        if record is not None:
            te = torque(DriveState(theta_e, omega_e, id_val, iq_val), machine)
            record.append((id_val, iq_val, id_hat, iq_hat, vd_cmd, vq_cmd, te))
        id_val, iq_val = step_period(id_val, iq_val, vd_app, vq_app)
        theta_e = wrap_angle(theta_e + omega_e * sim.t_p)

    n_settle = max(1, int(math.ceil(sim.settle_time / sim.t_p)))
    n_window = _window_periods(omega_e, sim)
    max_periods = 10 * n_settle

    periods_done = 0
    result = None
    while True:
        for _ in range(n_settle):
            advance(None)
        periods_done += n_settle
        window: list[tuple] = []
        for _ in range(n_window):
            advance(window)
        periods_done += n_window
        samples = np.asarray(window)
        means = samples.mean(axis=0)
        ripple = samples.max(axis=0) - samples.min(axis=0)
        converged = bool(np.all(ripple <= np.maximum(RIPPLE_REL * np.abs(means),
                                                     RIPPLE_ABS)))
        result = SteadyStateResult(id=float(means[0]), iq=float(means[1]),
                                   id_hat=float(means[2]), iq_hat=float(means[3]),
                                   vd_cmd=float(means[4]), vq_cmd=float(means[5]),
                                   torque=float(means[6]), converged=converged)
        if converged:
            return result
        if periods_done >= max_periods:
            raise ConvergenceError(
                f"no steady state within {periods_done * sim.t_p:.3f} s "
                f"(ripple {ripple.max():.3g})", partial=result)


@dataclass(frozen=True)
class SweepScenario:
    """Everything but the speed for a family of runs."""

    machine: MachineParams
    errors: PositionErrorModel
    ctrl: ControllerConfig
    cmd_id: float
    cmd_iq: float
    sim: SimConfig


@dataclass(frozen=True)
class SweepRow:
    """One speed point of a sweep, paired with its closed-form prediction."""

    omega_e: float
    result: SteadyStateResult
    prediction: oracle.OraclePrediction | None
    failure: str | None


def run_sweep_point(scenario: SweepScenario, omega_e: float) -> SweepRow:
    """Run one speed point and pair it with the closed-form prediction."""
    if scenario.machine.saturation is None:
        prediction = oracle.predict_steady_state(
            scenario.ctrl.mode, (scenario.cmd_id, scenario.cmd_iq), omega_e,
            scenario.errors, scenario.sim.t_p, scenario.machine)
    else:
        prediction = None
    try:
        result = run_to_steady_state(scenario.machine, scenario.errors,
                                     scenario.ctrl, scenario.cmd_id,
                                     scenario.cmd_iq, omega_e, scenario.sim)
        failure = None
    except ConvergenceError as exc:
        result = exc.partial
        failure = str(exc)
    return SweepRow(omega_e=omega_e, result=result, prediction=prediction,
                    failure=failure)


def sweep(speeds: list[float], scenario: SweepScenario) -> list[SweepRow]:
    """Independent steady-state runs over a list of electrical speeds [rad/s].

    Results keep the input order; points that fail to converge are
    recorded with their partial averages instead of aborting the sweep.
    """
    if not speeds:
        raise ConfigurationError("speeds must be non-empty")
    return [run_sweep_point(scenario, omega_e) for omega_e in speeds]
