"""Closed-form steady-state predictions used to cross-check simulations.

Every converged simulation of a constant-parameter machine has an
algebraic steady state; these functions evaluate it directly so sweeps
can report simulation-vs-prediction residuals. All of them assume
accurate parameter estimates and require saturation to be disabled
(parameter-mismatch and saturation studies are run simulation-only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .control import ControllerMode
from .errors import ConfigurationError
from .machine import MachineParams
from .sensing import PositionErrorModel


def _require_constant_params(params: MachineParams) -> None:
    if params.saturation is not None:
        raise ConfigurationError(
            "closed-form predictions require saturation to be disabled")


@dataclass(frozen=True)
class OraclePrediction:
    """Predicted steady state at one operating point.

    Voltage fields are populated only where the source formula defines
    them (feedforward commands are always known; feedback commands have a
    closed form only for zero current commands).
    """

    id: float
    iq: float
    torque: float
    vd_cmd: float | None
    vq_cmd: float | None
    source: str


def ff_steady_currents(cmd: tuple[float, float], omega_e: float,
                       delta_theta_prime: float,
                       params: MachineParams) -> tuple[float, float]:
    """Steady-state currents under static feedforward control.

    The commanded voltage reaches the plant rotated by the total
    forward-path angle delta_theta_prime; with accurate estimates the
    achieved currents are an algebraic map of the commands plus a
    BEMF-misalignment term. For a non-salient machine the command map is
    a plane rotation corrected along the diagonal by the resistive
    cross-coupling; saliency additionally scales the off-diagonal terms.
    """
    _require_constant_params(params)
    r, ld, lq, lam = params.R, params.Ld, params.Lq, params.lambda_m
    c = math.cos(delta_theta_prime)
    s = math.sin(delta_theta_prime)
    den = r * r + omega_e * omega_e * ld * lq
    k = omega_e * r * (lq - ld) / den
    m11 = c - k * s
    m12 = -s * (r * r + omega_e * omega_e * lq * lq) / den
    m21 = s * (r * r + omega_e * omega_e * ld * ld) / den
    m22 = c + k * s
    bemf = omega_e * lam / den
    e_d = bemf * (-r * s + omega_e * lq * (1.0 - c))
    e_q = bemf * (-r * (1.0 - c) - omega_e * ld * s)
    id_cmd, iq_cmd = cmd
    return (m11 * id_cmd + m12 * iq_cmd + e_d,
            m21 * id_cmd + m22 * iq_cmd + e_q)


def ff_torque_nonsalient(cmd: tuple[float, float], omega_e: float,
                         delta_theta_prime: float,
                         params: MachineParams) -> float:
    """Steady-state feedforward torque [N*m] for a non-salient machine.

    Closed form of the torque at the feedforward steady-state currents;
    defined only when Ld == Lq.
    """
    _require_constant_params(params)
    if params.is_salient:
        raise ConfigurationError(
            "ff_torque_nonsalient requires a non-salient machine (Ld == Lq)")
    r, l0, lam, p = params.R, params.Ld, params.lambda_m, params.p
    c = math.cos(delta_theta_prime)
    s = math.sin(delta_theta_prime)
    den = r * r + omega_e * omega_e * l0 * l0
    id_cmd, iq_cmd = cmd
    return 1.5 * p * lam * (iq_cmd * c + id_cmd * s
                            - (omega_e * omega_e * l0 * lam / den) * s
                            - (omega_e * r * lam / den) * (1.0 - c))


def fb_steady_currents(cmd: tuple[float, float],
                       delta_theta_e: float) -> tuple[float, float]:
    """Steady-state currents under PI feedback with a position error.

    Integral action forces the measured currents onto the commands, so
    the true currents are the commands rotated the opposite way.
    """
    c = math.cos(delta_theta_e)
    s = math.sin(delta_theta_e)
    id_cmd, iq_cmd = cmd
    return c * id_cmd + s * iq_cmd, -s * id_cmd + c * iq_cmd


def fb_torque(cmd: tuple[float, float], delta_theta_e: float,
              params: MachineParams) -> float:
    """Steady-state feedback torque [N*m] including reluctance terms.

    Torque map evaluated at the rotated steady-state currents, written in
    double-angle form.
    """
    _require_constant_params(params)
    c = math.cos(delta_theta_e)
    s = math.sin(delta_theta_e)
    c2 = math.cos(2.0 * delta_theta_e)
    s2 = math.sin(2.0 * delta_theta_e)
    id_cmd, iq_cmd = cmd
    magnet = params.lambda_m * (iq_cmd * c - id_cmd * s)
    reluct = (params.Lq - params.Ld) * (id_cmd * iq_cmd * c2
                                        - 0.5 * (id_cmd ** 2 - iq_cmd ** 2) * s2)
    return 1.5 * params.p * (magnet + reluct)


def fb_zero_current_voltages(omega_e: float, delta_theta_prime: float,
                             params: MachineParams) -> tuple[float, float]:
    """Voltage commands [V] a feedback regulator settles to at zero commands.

    With zero current the plant voltage is pure BEMF; the regulator must
    command it pre-rotated against the forward-path angle, which makes the
    command pair a direct probe of the total position error.
    """
    _require_constant_params(params)
    bemf = omega_e * params.lambda_m
    return (math.sin(delta_theta_prime) * bemf,
            math.cos(delta_theta_prime) * bemf)


def commanded_torque(cmd: tuple[float, float],
                     estimated_params: MachineParams) -> float:
    """Torque command [N*m] equivalent to a current command pair."""
    id_cmd, iq_cmd = cmd
    est = estimated_params
    return 1.5 * est.p * (est.lambda_m + (est.Lq - est.Ld) * id_cmd) * iq_cmd


def _torque_at(params: MachineParams, id_val: float, iq_val: float) -> float:
    return 1.5 * params.p * (params.lambda_m + (params.Lq - params.Ld) * id_val) * iq_val


def predict_steady_state(mode: ControllerMode, cmd: tuple[float, float],
                         omega_e: float, errors: PositionErrorModel,
                         t_p: float, params: MachineParams) -> OraclePrediction:
    """Full prediction for one operating point of a sweep."""
    _require_constant_params(params)
    delta = errors.total_error(omega_e)
    delta_prime = errors.forward_angle(omega_e, t_p)
    if mode is ControllerMode.FEEDBACK_PI:
        id_pred, iq_pred = fb_steady_currents(cmd, delta)
        te = fb_torque(cmd, delta, params)
        if cmd == (0.0, 0.0):
            vd, vq = fb_zero_current_voltages(omega_e, delta_prime, params)
        else:
            vd = vq = None
        source = "fb_steady_state"
    else:
        id_pred, iq_pred = ff_steady_currents(cmd, omega_e, delta_prime, params)
        te = _torque_at(params, id_pred, iq_pred)
        vd = params.R * cmd[0] + omega_e * params.Lq * cmd[1]
        vq = -omega_e * params.Ld * cmd[0] + params.R * cmd[1] + omega_e * params.lambda_m
        source = "ff_steady_state"
    return OraclePrediction(id=id_pred, iq=iq_pred, torque=te,
                            vd_cmd=vd, vq_cmd=vq, source=source)
