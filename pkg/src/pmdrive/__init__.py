"""Simulation and analysis of position-sensing errors in PMSM current control."""

__version__ = "0.1.0"

from .calibration import (CalibrationResult, CalibrationSample,
                          ff_residual_errors, fit_offset_and_delay,
                          total_error_from_voltages)
from .control import (ControllerConfig, ControllerMode, ControllerState,
                      PIGains, feedback_voltage, feedforward_voltage, tune_pi)
from .errors import (ConfigurationError, ConvergenceError,
                     DegenerateSignalError, InsufficientExcitationError,
                     ModeMismatchError, UnderdeterminedFitError)
from .machine import (IPMSM_9S6P, PRESETS, SPMSM_9S6P, DriveState,
                      MachineParams, SaturationMaps, electrical_derivatives,
                      evaluate_params, get_preset, torque)
from .oracle import (OraclePrediction, commanded_torque, fb_steady_currents,
                     fb_torque, fb_zero_current_voltages, ff_steady_currents,
                     ff_torque_nonsalient, predict_steady_state)
from .sensing import (QuadratureSample, PositionErrorModel, decode_position,
                      estimate_sync_currents, measured_position,
                      phase_currents_from_two)
from .simloop import (SimConfig, SteadyStateResult, SweepRow, SweepScenario,
                      TransportLagBuffer, apply_transport_lag,
                      run_to_steady_state, sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
