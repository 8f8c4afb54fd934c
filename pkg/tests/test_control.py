import math

import numpy as np
import pytest

from pmdrive import (ConfigurationError, ControllerConfig, ControllerMode,
                     ControllerState, DriveState, ModeMismatchError,
                     electrical_derivatives, feedback_voltage,
                     feedforward_voltage, get_preset, tune_pi)

BW = 2.0 * math.pi * 400.0


def _closed_loop(params, cfg, cmd_id, cmd_iq, omega_e, dt, n_periods, substeps=16):
    """Controller + plant without the PWM transport lag (controller scope)."""
    state = ControllerState()
    h = dt / substeps
    y = np.zeros(2)
    trace = []
    for _ in range(n_periods):
        if cfg.mode is ControllerMode.FEEDBACK_PI:
            vd, vq = feedback_voltage(cmd_id, cmd_iq, y[0], y[1], omega_e,
                                      cfg, state, dt)
        else:
            vd, vq = feedforward_voltage(cmd_id, cmd_iq, omega_e, cfg, state, dt)
        for _ in range(substeps):
            def f(yv):
                s = DriveState(0.0, omega_e, yv[0], yv[1])
                return np.array(electrical_derivatives(s, vd, vq, params))
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        trace.append((y[0], y[1], vd, vq, state.integrator_d, state.integrator_q))
    return np.asarray(trace)


class TestTunePi:
    def test_spmsm_q_gain(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI,
                               estimated_params=spmsm, bandwidth=BW)
        gains = tune_pi(cfg)
        assert gains.kp_q == pytest.approx(0.14942, abs=1e-5)
        assert gains.kp_d == gains.kp_q
        assert gains.ki_d == gains.ki_q == pytest.approx(spmsm.R * BW, rel=1e-12)

    def test_zero_bandwidth_rejected(self, spmsm):
        with pytest.raises(ConfigurationError):
            ControllerConfig(mode=ControllerMode.FEEDBACK_PI,
                             estimated_params=spmsm, bandwidth=0.0)

    def test_saliency_propagates(self, ipmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI,
                               estimated_params=ipmsm, bandwidth=BW)
        gains = tune_pi(cfg)
        assert gains.kp_d != gains.kp_q

    def test_wrong_mode_rejected(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.STATIC_FF,
                               estimated_params=spmsm)
        with pytest.raises(ModeMismatchError):
            tune_pi(cfg)


class TestFeedforwardVoltage:
    def test_pure_bemf(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.STATIC_FF, estimated_params=spmsm)
        vd, vq = feedforward_voltage(0.0, 0.0, 500.0, cfg, ControllerState(), 62.5e-6)
        assert vd == 0.0
        assert vq == pytest.approx(3.845, rel=1e-12)

    def test_resistive_drop(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.STATIC_FF, estimated_params=spmsm)
        vd, vq = feedforward_voltage(0.0, 100.0, 0.0, cfg, ControllerState(), 62.5e-6)
        assert vd == 0.0
        assert vq == pytest.approx(0.872, rel=1e-12)

    def test_wrong_mode_rejected(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI, estimated_params=spmsm)
        with pytest.raises(ModeMismatchError):
            feedforward_voltage(0.0, 0.0, 0.0, cfg, ControllerState(), 62.5e-6)

    def test_dynamic_settles_to_static(self, spmsm):
        # the start-up kick decays as exp(-t/tau_f): equal to within the
        # e^-10 remnant after 10 tau_f, and numerically equal soon after
        tau_f = 1e-3
        dt = 62.5e-6
        static = ControllerConfig(mode=ControllerMode.STATIC_FF, estimated_params=spmsm)
        dynamic = ControllerConfig(mode=ControllerMode.DYNAMIC_FF,
                                   estimated_params=spmsm, tau_f=tau_f)
        s_state, d_state = ControllerState(), ControllerState()
        v_static = v_dynamic = None
        n10 = int(math.ceil(10.0 * tau_f / dt))
        for _ in range(n10):
            v_static = feedforward_voltage(-20.0, 80.0, 700.0, static, s_state, dt)
            v_dynamic = feedforward_voltage(-20.0, 80.0, 700.0, dynamic, d_state, dt)
        assert v_dynamic[0] == pytest.approx(v_static[0], abs=1e-3)
        assert v_dynamic[1] == pytest.approx(v_static[1], abs=1e-3)
        for _ in range(int(math.ceil(15.0 * tau_f / dt))):
            v_static = feedforward_voltage(-20.0, 80.0, 700.0, static, s_state, dt)
            v_dynamic = feedforward_voltage(-20.0, 80.0, 700.0, dynamic, d_state, dt)
        assert v_dynamic[0] == pytest.approx(v_static[0], abs=1e-8)
        assert v_dynamic[1] == pytest.approx(v_static[1], abs=1e-8)

    def test_dynamic_kicks_on_step(self, spmsm):
        # derivative term is visible on the first sample of a command step
        dynamic = ControllerConfig(mode=ControllerMode.DYNAMIC_FF,
                                   estimated_params=spmsm, tau_f=1e-3)
        state = ControllerState()
        first = feedforward_voltage(0.0, 100.0, 0.0, dynamic, state, 62.5e-6)
        assert first[1] > 0.872 + 1.0


class TestFeedbackVoltage:
    def test_zero_error_zero_speed(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI, estimated_params=spmsm)
        vd, vq = feedback_voltage(0.0, 0.0, 0.0, 0.0, 0.0, cfg, ControllerState(), 62.5e-6)
        assert (vd, vq) == (0.0, 0.0)

    def test_bemf_feedforward_only(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI, estimated_params=spmsm)
        vd, vq = feedback_voltage(10.0, 50.0, 10.0, 50.0, 1000.0, cfg,
                                  ControllerState(), 62.5e-6)
        assert vd == 0.0
        assert vq == pytest.approx(7.69, rel=1e-12)

    def test_wrong_mode_rejected(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.STATIC_FF, estimated_params=spmsm)
        with pytest.raises(ModeMismatchError):
            feedback_voltage(0.0, 0.0, 0.0, 0.0, 0.0, cfg, ControllerState(), 62.5e-6)

    def test_step_reaches_95_percent_within_three_time_constants(self, spmsm):
        # decoupled condition (zero speed): the loop is the designed
        # first-order response at the configured bandwidth
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI,
                               estimated_params=spmsm, bandwidth=BW)
        dt = 62.5e-6
        horizon = 3.0 / BW
        trace = _closed_loop(spmsm, cfg, 0.0, 100.0, 0.0, dt,
                             n_periods=int(math.ceil(horizon / dt)))
        assert trace[-1, 1] >= 95.0

    def test_integrator_bounded(self, spmsm):
        cfg = ControllerConfig(mode=ControllerMode.FEEDBACK_PI,
                               estimated_params=spmsm, bandwidth=BW)
        trace = _closed_loop(spmsm, cfg, -50.0, 100.0, 1200.0, 62.5e-6, 4000)
        assert np.all(np.isfinite(trace))
        assert np.abs(trace[:, 4:]).max() < 50.0


class TestSteadyStateTracking:
    @pytest.mark.parametrize("preset", ["spmsm_9s6p", "ipmsm_9s6p"])
    @pytest.mark.parametrize("mode", [ControllerMode.STATIC_FF,
                                      ControllerMode.FEEDBACK_PI])
    def test_perfect_model_tracks_commands(self, preset, mode):
        # no sensing error and no transport lag: both controllers place the
        # currents on the commands
        params = get_preset(preset)
        cfg = ControllerConfig(mode=mode, estimated_params=params, bandwidth=BW)
        trace = _closed_loop(params, cfg, -30.0, 90.0, 900.0, 62.5e-6, 6000)
        assert trace[-1, 0] == pytest.approx(-30.0, rel=1e-3)
        assert trace[-1, 1] == pytest.approx(90.0, rel=1e-3)
