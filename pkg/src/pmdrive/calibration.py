"""Extraction of sensor offset and delay from drive signals.

A zero-current feedback sweep leaves the total position error imprinted
on the voltage commands: the command vector is the BEMF rotated by the
total forward-path angle. Collecting that angle across speeds and
fitting it as an affine function of speed separates the delay (slope,
after removing the known PWM period) from the offset (intercept).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientExcitationError, UnderdeterminedFitError
from .machine import MachineParams

# Reject samples whose command vector is shorter than this [V]; the angle
# extraction degenerates as the BEMF vanishes at low speed.
VOLTAGE_FLOOR = 0.1

# Design-matrix condition number above which the fit is flagged.
CONDITION_LIMIT = 1.0e8


@dataclass(frozen=True)
class CalibrationSample:
    """One converged zero-current feedback point."""

    omega_e: float   # [rad/s]
    vd_cmd: float    # [V]
    vq_cmd: float    # [V]


@dataclass(frozen=True)
class CalibrationResult:
    delta_theta0_est: float   # recovered sensor offset [rad]
    t_d_est: float            # recovered sensing delay [s]
    residual_rms: float       # RMS residual of the affine fit [rad]
    per_speed_errors: tuple[tuple[float, float], ...]   # (omega_e, angle [rad])


def total_error_from_voltages(sample: CalibrationSample,
                              lambda_m: float) -> float:
    """Total forward-path angle [rad] from one zero-current command pair.

    The command vector is the BEMF pre-rotated against the forward-path
    angle, so the angle is the arctangent of the pair, with the BEMF sign
    folded in for reverse rotation.
    """
    magnitude = math.hypot(sample.vd_cmd, sample.vq_cmd)
    if magnitude < VOLTAGE_FLOOR:
        raise InsufficientExcitationError(
            f"command magnitude {magnitude:.3g} V below {VOLTAGE_FLOOR} V floor")
    if abs(sample.omega_e) * lambda_m < VOLTAGE_FLOOR:
        raise InsufficientExcitationError(
            f"expected BEMF {abs(sample.omega_e) * lambda_m:.3g} V below "
            f"{VOLTAGE_FLOOR} V floor")
    if sample.omega_e >= 0.0:
        return math.atan2(sample.vd_cmd, sample.vq_cmd)
    return math.atan2(-sample.vd_cmd, -sample.vq_cmd)


def _wrap_pi(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def fit_offset_and_delay(samples: list[CalibrationSample], t_p: float,
                         lambda_m: float) -> CalibrationResult:
    """Least-squares affine fit of the per-speed angle against speed.

    The slope is the total delay (sensing delay plus the known PWM period,
    which is removed deterministically); the intercept is the sensor
    offset. Angles are unwrapped toward the previous speed's branch before
    fitting so large speed-delay products cannot alias.
    """
    usable: list[tuple[float, float]] = []
    for sample in samples:
        try:
            angle = total_error_from_voltages(sample, lambda_m)
        except InsufficientExcitationError:
            continue
        usable.append((sample.omega_e, angle))
    usable.sort(key=lambda pair: pair[0])
    if len({w for w, _ in usable}) < 2:
        raise UnderdeterminedFitError(
            "need at least 2 distinct speeds with sufficient excitation")

    speeds = np.array([w for w, _ in usable])
    angles = np.array([a for _, a in usable])
    for i in range(1, angles.size):
        jump = angles[i] - angles[i - 1]
        angles[i] -= 2.0 * math.pi * round(jump / (2.0 * math.pi))

    design = np.column_stack([speeds, np.ones_like(speeds)])
    cond = float(np.linalg.cond(design))
    if cond > CONDITION_LIMIT:
        warnings.warn(f"ill-conditioned calibration fit (cond={cond:.3g})",
                      RuntimeWarning, stacklevel=2)
    coeffs, *_ = np.linalg.lstsq(design, angles, rcond=None)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    residuals = angles - design @ coeffs
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    return CalibrationResult(delta_theta0_est=_wrap_pi(intercept),
                             t_d_est=slope - t_p,
                             residual_rms=rms,
                             per_speed_errors=tuple((float(w), float(a))
                                                    for w, a in zip(speeds, angles)))


def ff_residual_errors(est_currents: tuple[float, float],
                       cmd_voltages: tuple[float, float], omega_e: float,
                       params: MachineParams,
                       current_floor: float = 1.0) -> float:
    """Rotation angle [rad] from the ideal currents to the estimated ones.

    The ideal currents are what the commanded voltages would drive through
    an error-free plant in steady state; the angle between that vector and
    the estimated currents exposes the sensing errors in feedforward
    operation. Note the measurement and forward paths both rotate, so for
    an uncompensated drive this angle compounds the residual error with
    the full forward-path angle.
    """
    r, ld, lq, lam = params.R, params.Ld, params.Lq, params.lambda_m
    vd, vq = cmd_voltages
    vq_net = vq - omega_e * lam
    den = r * r + omega_e * omega_e * ld * lq
    ideal_d = (r * vd - omega_e * lq * vq_net) / den
    ideal_q = (omega_e * ld * vd + r * vq_net) / den
    if math.hypot(ideal_d, ideal_q) < current_floor:
        raise InsufficientExcitationError(
            f"ideal current magnitude below {current_floor} A floor")
    est_d, est_q = est_currents
    cross = ideal_d * est_q - ideal_q * est_d
    dot = ideal_d * est_d + ideal_q * est_q
    return math.atan2(cross, dot)
