"""Discrete-time current controllers.

Three architectures: static feedforward (plant inversion at DC), dynamic
feedforward (adds filtered-derivative terms for command transients) and
PI feedback with BEMF feedforward. No decoupling network, no anti-windup
and no voltage limiting; the controllers run once per PWM period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .errors import ConfigurationError, ModeMismatchError
from .machine import MachineParams, evaluate_params

DEFAULT_BANDWIDTH = 2.0 * math.pi * 400.0   # [rad/s]
DEFAULT_TAU_F = 1.0e-3                      # [s]


class ControllerMode(Enum):
    STATIC_FF = "static-ff"
    DYNAMIC_FF = "dynamic-ff"
    FEEDBACK_PI = "feedback"


@dataclass(frozen=True)
class ControllerConfig:
    """Controller selection and tuning.

    estimated_params is the controller's plant estimate; set it equal to
    the true machine parameters to model perfect estimation.
    """

    mode: ControllerMode
    estimated_params: MachineParams
    tau_f: float = DEFAULT_TAU_F          # derivative filter time constant [s]
    bandwidth: float = DEFAULT_BANDWIDTH  # target closed-loop bandwidth [rad/s]

    def __post_init__(self):
        if self.mode is ControllerMode.DYNAMIC_FF and not self.tau_f > 0.0:
            raise ConfigurationError("tau_f must be > 0 for the dynamic feedforward mode")
        if self.mode is ControllerMode.FEEDBACK_PI and not self.bandwidth > 0.0:
            raise ConfigurationError("bandwidth must be > 0 for the feedback mode")


@dataclass
class ControllerState:
    """Mutable per-run controller memory, zero at simulation start."""

    integrator_d: float = 0.0     # PI integrator [V]
    integrator_q: float = 0.0     # PI integrator [V]
    deriv_filter_d: float = 0.0   # low-pass state of the derivative estimate [A]
    deriv_filter_q: float = 0.0   # low-pass state of the derivative estimate [A]
    prev_cmd_id: float = 0.0      # previous command sample [A]
    prev_cmd_iq: float = 0.0      # previous command sample [A]


class PIGains(NamedTuple):
    kp_d: float   # [V/A]
    ki_d: float   # [V/(A*s)]
    kp_q: float   # [V/A]
    ki_q: float   # [V/(A*s)]


def tune_pi(cfg: ControllerConfig) -> PIGains:
    """Plant-inversion pole placement against the estimated parameters.

    Cancels the estimated electrical pole so each current loop behaves as
    a first-order system at the configured bandwidth.
    """
    if cfg.mode is not ControllerMode.FEEDBACK_PI:
        raise ModeMismatchError(f"tune_pi requires the feedback mode, got {cfg.mode}")
    est = cfg.estimated_params
    bw = cfg.bandwidth
    return PIGains(kp_d=est.Ld * bw, ki_d=est.R * bw,
                   kp_q=est.Lq * bw, ki_q=est.R * bw)


def _filtered_derivative(u: float, u_prev: float, w_prev: float,
                         tau_f: float, dt: float) -> tuple[float, float]:
    """One bilinear-transform step of the band-limited derivative.

    Low-pass state w tracks u with time constant tau_f; the derivative
    estimate is (u - w)/tau_f. Returns (derivative, new w).
    """
    den = 2.0 * tau_f + dt
    w = (dt * (u + u_prev) + (2.0 * tau_f - dt) * w_prev) / den
    return (u - w) / tau_f, w


def feedforward_voltage(cmd_id: float, cmd_iq: float, omega_e: float,
                        cfg: ControllerConfig, state: ControllerState,
                        dt: float) -> tuple[float, float]:
    """Feedforward voltage command [V] from the inverse plant model.

    Static mode inverts the plant at DC; dynamic mode adds L*di/dt terms
    computed with a band-limited derivative of the current commands. The
    parameter estimates are scheduled at the commanded currents.
    """
    if cfg.mode not in (ControllerMode.STATIC_FF, ControllerMode.DYNAMIC_FF):
        raise ModeMismatchError(f"feedforward_voltage requires a feedforward mode, got {cfg.mode}")
    est = evaluate_params(cfg.estimated_params, cmd_id, cmd_iq)
    vd = est.R * cmd_id + omega_e * est.Lq * cmd_iq
    vq = -omega_e * est.Ld * cmd_id + est.R * cmd_iq + omega_e * est.lambda_m
    if cfg.mode is ControllerMode.DYNAMIC_FF:
        sdot_d, state.deriv_filter_d = _filtered_derivative(
            cmd_id, state.prev_cmd_id, state.deriv_filter_d, cfg.tau_f, dt)
        sdot_q, state.deriv_filter_q = _filtered_derivative(
            cmd_iq, state.prev_cmd_iq, state.deriv_filter_q, cfg.tau_f, dt)
        vd += est.Ld * sdot_d
        vq += est.Lq * sdot_q
    state.prev_cmd_id = cmd_id
    state.prev_cmd_iq = cmd_iq
    return vd, vq


def feedback_voltage(cmd_id: float, cmd_iq: float, meas_id: float, meas_iq: float,
                     omega_e: float, cfg: ControllerConfig, state: ControllerState,
                     dt: float) -> tuple[float, float]:
    """PI voltage command [V] on the measured-current error plus BEMF feedforward.

    Integrators advance by backward Euler before the output is formed; no
    decoupling terms and no anti-windup.
    """
    if cfg.mode is not ControllerMode.FEEDBACK_PI:
        raise ModeMismatchError(f"feedback_voltage requires the feedback mode, got {cfg.mode}")
    gains = tune_pi(cfg)
    est = evaluate_params(cfg.estimated_params, cmd_id, cmd_iq)
    err_d = cmd_id - meas_id
    err_q = cmd_iq - meas_iq
    state.integrator_d += gains.ki_d * err_d * dt
    state.integrator_q += gains.ki_q * err_q * dt
    vd = gains.kp_d * err_d + state.integrator_d
    vq = gains.kp_q * err_q + state.integrator_q + omega_e * est.lambda_m
    return vd, vq
