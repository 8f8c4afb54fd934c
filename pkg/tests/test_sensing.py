import math

import pytest
from hypothesis import given, strategies as st

from pmdrive import (ConfigurationError, DegenerateSignalError,
                     PositionErrorModel, QuadratureSample, decode_position,
                     estimate_sync_currents, measured_position,
                     phase_currents_from_two)

angles = st.floats(-10.0, 10.0)
currents = st.floats(-300.0, 300.0)


class TestDecodePosition:
    def test_zero_angle(self):
        assert decode_position(QuadratureSample(0.0, 1.0), 3) == 0.0

    def test_quarter_turn_times_p(self):
        theta = decode_position(QuadratureSample(1.0, 0.0), 3)
        assert theta == pytest.approx(3.0 * math.pi / 2.0)

    def test_diagonal(self):
        s = math.sqrt(2.0) / 2.0
        assert decode_position(QuadratureSample(s, s), 3) == pytest.approx(3.0 * math.pi / 4.0)

    def test_degenerate_sample_raises(self):
        with pytest.raises(DegenerateSignalError):
            QuadratureSample(0.0, 0.0)

    @given(theta_m=st.floats(-math.pi, math.pi, exclude_min=True),
           p=st.integers(1, 12))
    def test_ideal_signal_round_trip(self, theta_m, p):
        sample = QuadratureSample(math.sin(theta_m), math.cos(theta_m))
        expected = (p * theta_m) % (2.0 * math.pi)
        got = decode_position(sample, p)
        delta = (got - expected + math.pi) % (2.0 * math.pi) - math.pi
        assert delta == pytest.approx(0.0, abs=1e-9)


class TestMeasuredPosition:
    def test_perfect_sensing(self):
        model = PositionErrorModel()
        for omega_e in (0.0, 500.0, -2000.0):
            assert measured_position(1.0, omega_e, model) == pytest.approx(1.0)

    def test_delay_error_value(self):
        model = PositionErrorModel(t_d=52.5e-6)
        omega_e = 2.0 * math.pi * 160.0
        got = measured_position(0.0, omega_e, model)
        assert got == pytest.approx(omega_e * 52.5e-6, rel=1e-12)
        assert got == pytest.approx(0.05278, abs=5e-6)

    def test_full_compensation_cancels(self):
        deg15 = math.radians(15.0)
        model = PositionErrorModel(delta_theta0=deg15, t_d=40e-6,
                                   delta_theta0_hat=deg15, t_d_hat=40e-6)
        for omega_e in (0.0, 123.0, 4000.0):
            got = measured_position(0.0, omega_e, model)
            # circular distance to zero; exact cancellation can land at
            # either side of the wrap point
            dist = min(got, 2.0 * math.pi - got)
            assert dist == pytest.approx(0.0, abs=1e-12)

    def test_negative_delay_rejected(self):
        with pytest.raises(ConfigurationError):
            PositionErrorModel(t_d=-1e-6)
        with pytest.raises(ConfigurationError):
            PositionErrorModel(t_d_hat=-1e-6)

    @given(w1=st.floats(-5000, 5000), w2=st.floats(-5000, 5000))
    def test_error_affine_in_speed(self, w1, w2):
        # slope is the delay mismatch, intercept the offset mismatch
        model = PositionErrorModel(delta_theta0=0.2, t_d=50e-6,
                                   delta_theta0_hat=0.05, t_d_hat=10e-6)
        slope = model.t_d - model.t_d_hat
        intercept = model.delta_theta0 - model.delta_theta0_hat
        assert model.total_error(w1) == pytest.approx(slope * w1 + intercept, rel=1e-12)
        assert model.total_error(w2) - model.total_error(w1) == pytest.approx(
            slope * (w2 - w1), rel=1e-9, abs=1e-12)


class TestPhaseCurrents:
    @pytest.mark.parametrize("ib, ic, ia", [
        (0.0, 0.0, 0.0),
        (-5.0, -5.0, 10.0),
        (3.2, -7.1, 3.9),
    ])
    def test_reconstruction(self, ib, ic, ia):
        got = phase_currents_from_two(ib, ic)
        assert got[0] == pytest.approx(ia)
        assert got[1:] == (ib, ic)

    @given(ib=currents, ic=currents)
    def test_sum_is_zero(self, ib, ic):
        assert sum(phase_currents_from_two(ib, ic)) == pytest.approx(0.0, abs=1e-9)


class TestEstimateSyncCurrents:
    def test_identity_at_zero_error(self):
        assert estimate_sync_currents(10.0, 20.0, 0.0) == (10.0, 20.0)

    def test_fifteen_degrees(self):
        id_hat, iq_hat = estimate_sync_currents(0.0, 100.0, math.radians(15.0))
        assert id_hat == pytest.approx(-25.882, abs=1e-3)
        assert iq_hat == pytest.approx(96.593, abs=1e-3)

    @given(id_t=currents, iq_t=currents)
    def test_full_turn_periodicity(self, id_t, iq_t):
        a = estimate_sync_currents(id_t, iq_t, 0.0)
        b = estimate_sync_currents(id_t, iq_t, 2.0 * math.pi)
        assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-9)
        assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-9)

    @given(id_t=currents, iq_t=currents, delta=angles)
    def test_norm_preserved(self, id_t, iq_t, delta):
        id_hat, iq_hat = estimate_sync_currents(id_t, iq_t, delta)
        assert math.hypot(id_hat, iq_hat) == pytest.approx(
            math.hypot(id_t, iq_t), rel=1e-12, abs=1e-9)

    @given(id_t=currents, iq_t=currents, delta=angles)
    def test_inverse_rotation_round_trip(self, id_t, iq_t, delta):
        fwd = estimate_sync_currents(id_t, iq_t, delta)
        back = estimate_sync_currents(fwd[0], fwd[1], -delta)
        assert back[0] == pytest.approx(id_t, abs=1e-12 * max(1.0, abs(id_t)) + 1e-9)
        assert back[1] == pytest.approx(iq_t, abs=1e-12 * max(1.0, abs(iq_t)) + 1e-9)
