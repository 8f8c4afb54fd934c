"""Position measurement error model and erroneous frame transformations.

The sensing chain is reduced to its static errors: a constant sensor
offset and a dynamic delay that appears as a speed-proportional angle at
constant speed. Current measurement delay and quantization are neglected
(both are far below the position errors modelled here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, DegenerateSignalError
from .machine import wrap_angle


@dataclass(frozen=True)
class PositionErrorModel:
    """True sensor offset/delay and the compensation applied for them.

    The residual angle error at speed omega_e is
    ``omega_e*t_d + delta_theta0 - omega_e*t_d_hat - delta_theta0_hat``;
    velocity estimation is assumed exact, so the same omega_e multiplies
    both delay terms.
    """

    delta_theta0: float = 0.0       # true sensor offset [rad electrical]
    t_d: float = 0.0                # true sensing delay [s]
    delta_theta0_hat: float = 0.0   # compensated offset estimate [rad electrical]
    t_d_hat: float = 0.0            # compensated delay estimate [s]

    def __post_init__(self):
        if self.t_d < 0.0 or self.t_d_hat < 0.0:
            raise ConfigurationError("sensing delays must be non-negative")

    def total_error(self, omega_e: float) -> float:
        """Residual position error [rad] at constant speed."""
        return (omega_e * self.t_d + self.delta_theta0
                - omega_e * self.t_d_hat - self.delta_theta0_hat)

    def forward_angle(self, omega_e: float, t_p: float) -> float:
        """Total forward-path angle [rad]: residual error plus the one
        PWM-period rotation accumulated before the command is applied."""
        return omega_e * t_p + self.total_error(omega_e)


ZERO_ERRORS = PositionErrorModel()


@dataclass(frozen=True)
class QuadratureSample:
    """One corrected sine/cosine sensor sample (normalized)."""

    u_s: float
    u_c: float

    def __post_init__(self):
        if self.u_s == 0.0 and self.u_c == 0.0:
            raise DegenerateSignalError("quadrature sample (0, 0) carries no angle")


def decode_position(sample: QuadratureSample, p: int) -> float:
    """Electrical position [rad] from a quadrature sample.

    Quadrant-correct arctangent of the mechanical angle scaled by the
    pole pairs, wrapped to [0, 2*pi).
    """
    return wrap_angle(p * math.atan2(sample.u_s, sample.u_c))


def measured_position(theta_e_true: float, omega_e: float,
                      model: PositionErrorModel) -> float:
    """Position the controller sees at constant speed, wrapped to [0, 2*pi)."""
    return wrap_angle(theta_e_true + model.total_error(omega_e))


def phase_currents_from_two(ib: float, ic: float) -> tuple[float, float, float]:
    """Reconstruct (ia, ib, ic) from the two in-line measurements.

    Valid for a balanced three-wire machine where the phase currents sum
    to zero.
    """
    return -ib - ic, ib, ic


def estimate_sync_currents(id_true: float, iq_true: float,
                           delta_theta_e: float) -> tuple[float, float]:
    """Synchronous-frame current estimate under a position error.

    Rotates the true (id, iq) by the residual angle error; with zero
    error this is the identity.
    """
    c = math.cos(delta_theta_e)
    s = math.sin(delta_theta_e)
    return c * id_true - s * iq_true, s * id_true + c * iq_true
