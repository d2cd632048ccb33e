import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lsgate.constants import TWO_PI
from lsgate.pulse import PulseEnvelope, Shape, make_schedule


def test_default_timing():
    s = make_schedule(2, 45e-6, 5e-6)
    assert s.delta / TWO_PI == pytest.approx(22.22e3, rel=1e-3)
    assert s.gate_time == pytest.approx(100e-6)
    kinds = [seg.kind for seg in s.segments]
    assert kinds == ["laser", "microwave", "laser", "microwave"]
    # echo pulses about opposite axes
    assert s.segments[3].axis_phase - s.segments[1].axis_phase == pytest.approx(math.pi)


def test_single_square_loop():
    s = make_schedule(1, 45e-6, 5e-6, echo=False, shape="square")
    assert len(s.segments) == 1
    assert s.duration == pytest.approx(TWO_PI / s.delta)


def test_envelope_values():
    env = PulseEnvelope(Shape.SIN2_RAMP, 2e-6, 45e-6)
    assert env.value(0.0) == 0.0
    assert env.value(1e-6) == pytest.approx(0.5)
    assert env.value(20e-6) == 1.0
    assert env.value(env.duration) == pytest.approx(0.0, abs=1e-30)
    sq = PulseEnvelope(Shape.SQUARE, 2e-6, 45e-6)
    assert sq.ramp_duration == 0.0
    assert sq.value(1e-9) == 1.0 and sq.value(44e-6) == 1.0


@given(st.floats(0.0, 1.0))
def test_envelope_bounded(x):
    env = PulseEnvelope(Shape.SIN2_RAMP, 2e-6, 45e-6)
    v = env.value(x * env.duration)
    assert 0.0 <= v <= 1.0


def test_envelope_smooth_at_ramp_edges():
    env = PulseEnvelope(Shape.SIN2_RAMP, 2e-6, 45e-6)
    h = 1e-12
    for t in (0.0 + h, 2e-6, env.duration - 2e-6, env.duration - h):
        left, right = env.value(t - h), env.value(t + h)
        assert abs(right - left) < 1e-5  # continuous
    # derivative vanishes where the ramp meets the flat top
    slope = abs(env.value(2e-6) - env.value(2e-6 - 1e-9)) / 1e-9
    assert slope * 2e-6 < 1e-2  # relative to the mean ramp slope 1/tau


@pytest.mark.parametrize("power", [1, 2])
def test_drive_area_closed_form(power):
    env = PulseEnvelope(Shape.SIN2_RAMP, 2e-6, 45e-6)
    num, _ = quad(lambda t: env.value(t) ** power, 0, env.duration, points=[2e-6, env.duration - 2e-6])
    assert env.drive_area(power) == pytest.approx(num, rel=1e-10)
    assert env.ramp_correction(power) == pytest.approx(num - 45e-6, abs=1e-15)


def test_schedule_validation():
    with pytest.raises(ValueError, match="flat top"):
        make_schedule(2, 4e-6, 5e-6, ramp=2e-6)
    with pytest.raises(ValueError):
        make_schedule(0)
    with pytest.raises(ValueError):
        make_schedule(2, detuning_sign=0)


@given(st.integers(1, 6), st.booleans())
@settings(max_examples=20)
def test_segments_contiguous(loops, echo):
    s = make_schedule(loops, 45e-6, 5e-6, echo)
    ends = [seg.start for seg in s.segments[1:]]
    assert np.allclose(ends, [seg.end for seg in s.segments[:-1]])
    assert len(s.laser_segments) == loops


def test_reversed_schedule():
    s = make_schedule(2, 45e-6, 5e-6)
    r = s.reversed()
    assert r.detuning_sign == -s.detuning_sign
    assert r.duration == pytest.approx(s.duration)
    assert [x.kind for x in r.segments] == ["microwave", "laser", "microwave", "laser"]
