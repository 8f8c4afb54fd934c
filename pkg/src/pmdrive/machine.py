"""dq-frame electrical model of permanent magnet synchronous machines.

Pure value types and functions: the plant derivative, the torque map and
current-dependent parameter scheduling. Speed is an exogenous input (the
machine is assumed to be held at constant speed by a dynamometer), so no
mechanical dynamics appear here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * math.pi

# Ld == Lq within this relative tolerance counts as non-salient.
SALIENCY_RTOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    return theta % TWO_PI


def _check_table(name, arr, expected_shape):
    if arr.shape != expected_shape:
        raise ConfigurationError(
            f"{name} has shape {arr.shape}, expected {expected_shape}"
        )
    if not np.all(arr > 0.0):
        raise ConfigurationError(f"{name} must be positive everywhere")


@dataclass(frozen=True)
class SaturationMaps:
    """Lookup tables scheduling machine parameters with current.

    PM flux linkage is a function of q-axis current only; the inductances
    vary with both currents. Queries outside the grids clamp to the edge
    values so the scheduled parameters stay physical.
    """

    grid_id: np.ndarray   # d-axis current breakpoints [A], strictly increasing
    grid_iq: np.ndarray   # q-axis current breakpoints [A], strictly increasing
    lambda_m_of_iq: np.ndarray   # [Wb], shape (len(grid_iq),)
    ld_of_idiq: np.ndarray       # [H], shape (len(grid_id), len(grid_iq))
    lq_of_idiq: np.ndarray       # [H], shape (len(grid_id), len(grid_iq))

    def __post_init__(self):
        for name in ("grid_id", "grid_iq", "lambda_m_of_iq"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ConfigurationError(f"{name} must be a non-empty 1-D array")
            object.__setattr__(self, name, arr)
        for name in ("ld_of_idiq", "lq_of_idiq"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ConfigurationError(f"{name} must be a 2-D array")
            object.__setattr__(self, name, arr)
        for name in ("grid_id", "grid_iq"):
            g = getattr(self, name)
            if g.size > 1 and not np.all(np.diff(g) > 0.0):
                raise ConfigurationError(f"{name} breakpoints must be strictly increasing")
        shape2 = (self.grid_id.size, self.grid_iq.size)
        _check_table("lambda_m_of_iq", self.lambda_m_of_iq, (self.grid_iq.size,))
        _check_table("ld_of_idiq", self.ld_of_idiq, shape2)
        _check_table("lq_of_idiq", self.lq_of_idiq, shape2)


@dataclass(frozen=True)
class MachineParams:
    """Electrical parameters of a PMSM.

    R is the total loop resistance seen by the controller (motor phase
    plus inverter FET). Optional saturation maps schedule Ld, Lq and
    lambda_m with the operating currents; R is never scheduled.
    """

    R: float          # loop resistance [ohm]
    Ld: float         # d-axis inductance [H]
    Lq: float         # q-axis inductance [H]
    lambda_m: float   # PM flux linkage [Wb]
    p: int            # pole pairs
    saturation: SaturationMaps | None = None

    def __post_init__(self):
        for name in ("R", "Ld", "Lq", "lambda_m"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0.0 and math.isfinite(value)):
                raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
        if not (isinstance(self.p, int) and self.p >= 1):
            raise ConfigurationError(f"p must be an integer >= 1, got {self.p!r}")

    @property
    def is_salient(self) -> bool:
        return abs(self.Ld - self.Lq) > SALIENCY_RTOL * max(self.Ld, self.Lq)


@dataclass(frozen=True)
class DriveState:
    """Instantaneous electrical state of the plant."""

    theta_e: float   # electrical position [rad], stored wrapped to [0, 2*pi)
    omega_e: float   # electrical velocity [rad/s]
    id: float        # d-axis current [A]
    iq: float        # q-axis current [A]

    def __post_init__(self):
        object.__setattr__(self, "theta_e", wrap_angle(self.theta_e))


def _bilinear_clamped(gx: np.ndarray, gy: np.ndarray, table: np.ndarray,
                      x: float, y: float) -> float:
    """Bilinear interpolation on a rectangular grid with clamp-to-edge."""
    x = min(max(x, gx[0]), gx[-1])
    y = min(max(y, gy[0]), gy[-1])
    if gx.size == 1:
        row0 = row1 = 0
        tx = 0.0
    else:
        i = int(np.searchsorted(gx, x))
        i = min(max(i, 1), gx.size - 1)
        row0, row1 = i - 1, i
        tx = (x - gx[row0]) / (gx[row1] - gx[row0])
    if gy.size == 1:
        col0 = col1 = 0
        ty = 0.0
    else:
        j = int(np.searchsorted(gy, y))
        j = min(max(j, 1), gy.size - 1)
        col0, col1 = j - 1, j
        ty = (y - gy[col0]) / (gy[col1] - gy[col0])
    f00 = table[row0, col0]
    f01 = table[row0, col1]
    f10 = table[row1, col0]
    f11 = table[row1, col1]
    return float((1 - tx) * ((1 - ty) * f00 + ty * f01)
                 + tx * ((1 - ty) * f10 + ty * f11))


def evaluate_params(base: MachineParams, id: float, iq: float) -> MachineParams:
    """Effective parameters at an operating point.

    Without saturation maps this is the identity. With maps, lambda_m is
    interpolated linearly over iq and the inductances bilinearly over
    (id, iq), clamping to the grid edges. The returned params carry no
    maps so they can be used directly in the plant equations.
    """
    maps = base.saturation
    if maps is None:
        return base
    lam = float(np.interp(iq, maps.grid_iq, maps.lambda_m_of_iq))
    ld = _bilinear_clamped(maps.grid_id, maps.grid_iq, maps.ld_of_idiq, id, iq)
    lq = _bilinear_clamped(maps.grid_id, maps.grid_iq, maps.lq_of_idiq, id, iq)
    return MachineParams(R=base.R, Ld=ld, Lq=lq, lambda_m=lam, p=base.p)


def electrical_derivatives(state: DriveState, vd: float, vq: float,
                           params: MachineParams) -> tuple[float, float]:
    """Current derivatives (dId/dt, dIq/dt) for the applied dq voltage.

    Uses the params as given; schedule them first with evaluate_params
    when modelling a saturated machine.
    """
    did = (vd - params.R * state.id - state.omega_e * params.Lq * state.iq) / params.Ld
    diq = (vq - params.R * state.iq + state.omega_e * params.Ld * state.id
           - state.omega_e * params.lambda_m) / params.Lq
    return did, diq


def torque(state: DriveState, params: MachineParams) -> float:
    """Electromagnetic torque [N*m] at the state's currents.

    Evaluates the scheduled parameters at (id, iq) when saturation maps
    are present.
    """
    eff = evaluate_params(params, state.id, state.iq)
    return 1.5 * eff.p * (eff.lambda_m + (eff.Lq - eff.Ld) * state.id) * state.iq


# Built-in machine presets for the two 9-slot 6-pole prototypes.
# R is the total loop: motor phase resistance plus FET resistance.
SPMSM_9S6P = MachineParams(R=8.72e-3, Ld=59.45e-6, Lq=59.45e-6,
                           lambda_m=7.69e-3, p=3)
IPMSM_9S6P = MachineParams(R=10.96e-3, Ld=102.02e-6, Lq=155.52e-6,
                           lambda_m=7.38e-3, p=3)

PRESETS: dict[str, MachineParams] = {
    "spmsm_9s6p": SPMSM_9S6P,
    "ipmsm_9s6p": IPMSM_9S6P,
}


def get_preset(name: str) -> MachineParams:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigurationError(f"unknown machine preset {name!r} (known: {known})") from None
