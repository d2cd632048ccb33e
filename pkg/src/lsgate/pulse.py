"""Pulse envelopes and echoed multi-loop gate schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .constants import TWO_PI


class Shape(str, Enum):
    SQUARE = "square"
    SIN2_RAMP = "sin2"


@dataclass(frozen=True)
class PulseEnvelope:
    """A flat-topped laser pulse.

    ``loop_duration`` runs from the middle of the rise to the middle of the
    fall, so the pulse occupies ``loop_duration + ramp_duration`` in total.
    """

    shape: Shape = Shape.SIN2_RAMP
    ramp_duration: float = 2e-6
    loop_duration: float = 45e-6

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.shape is Shape.SQUARE:
            object.__setattr__(self, "ramp_duration", 0.0)
        if self.ramp_duration < 0 or self.loop_duration <= 0:
            raise ValueError("durations must be non-negative (loop strictly positive)")

    @property
    def duration(self) -> float:
        return self.loop_duration + self.ramp_duration

    def value(self, t: float) -> float:
        return envelope_value(self, t)

    def drive_area(self, power: int = 2) -> float:
        """Closed form of the integral of ``envelope**power`` over the pulse (power 1 or 2)."""
        tau = self.ramp_duration
        flat = self.loop_duration - tau
        ramp = {1: tau / 2, 2: 3 * tau / 8}[power]
        return flat + 2 * ramp

    def ramp_correction(self, power: int = 2) -> float:
        """Difference between the shaped and the square drive area over one loop."""
        return self.drive_area(power) - self.loop_duration


def envelope_value(env: PulseEnvelope, t: float) -> float:
    if t < 0 or t > env.duration:
        return 0.0
    tau = env.ramp_duration
    if env.shape is Shape.SQUARE or tau == 0:
        return 1.0
    if t < tau:
        return math.sin(0.5 * math.pi * t / tau) ** 2
    if t > env.duration - tau:
        return math.sin(0.5 * math.pi * (env.duration - t) / tau) ** 2
    return 1.0


@dataclass(frozen=True)
class Segment:
    kind: str  # "laser" or "microwave"
    start: float
    duration: float
    axis_phase: float = 0.0  # rotation axis angle in the xy-plane, microwave segments only
    angle: float = math.pi

    @property
    def end(self) -> float:
        return self.start + self.duration

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "start_s": self.start, "duration_s": self.duration}
        if self.kind == "microwave":
            d.update(axis_phase_rad=self.axis_phase, angle_rad=self.angle)
        return d


@dataclass(frozen=True)
class GateSchedule:
    """K phase-space loops, optionally separated by microwave pi pulses.

    ``detuning_sign`` fixes the beat note ``mu = w_str + detuning_sign * delta``.
    With the default of -1 the driven states pick up a positive geometric phase
    and the echoed two-loop gate is diag(1, i, i, 1); +1 gives its complex
    conjugate, which differs from it by the local Z x Z frame only.
    """

    loops: int
    envelope: PulseEnvelope
    t_pi: float = 5e-6
    echo: bool = True
    detuning_sign: int = -1
    microwave: str = "ideal"  # or "finite"
    microwave_error: float = 0.0
    segments: tuple[Segment, ...] = field(default=(), compare=False)

    @property
    def t_loop(self) -> float:
        return self.envelope.loop_duration

    @property
    def delta(self) -> float:
        return TWO_PI / self.t_loop

    @property
    def signed_delta(self) -> float:
        return self.detuning_sign * self.delta

    @property
    def gate_time(self) -> float:
        """Nominal gate time K (t_loop + t_pi), pulses counted mid-rise to mid-fall."""
        if self.echo:
            return self.loops * (self.t_loop + self.t_pi)
        return self.loops * self.t_loop

    @property
    def duration(self) -> float:
        return self.segments[-1].end if self.segments else 0.0

    @property
    def laser_segments(self) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.kind == "laser")

    def reversed(self) -> "GateSchedule":
        """Schedule implementing the inverse of the ideal gate.

        Segment order is reversed, microwave axes are flipped by pi and the
        beat detuning changes sign, which reverses the geometric phase.
        """
        segs = []
        t = 0.0
        for s in reversed(self.segments):
            phase = s.axis_phase + math.pi if s.kind == "microwave" else 0.0
            segs.append(Segment(s.kind, t, s.duration, phase, s.angle))
            t += s.duration
        return replace(self, detuning_sign=-self.detuning_sign, segments=tuple(segs))

    def to_dict(self) -> dict:
        return {
            "loops": self.loops,
            "t_loop_s": self.t_loop,
            "t_pi_s": self.t_pi,
            "ramp_s": self.envelope.ramp_duration,
            "shape": self.envelope.shape.value,
            "echo": self.echo,
            "delta_rad_s": self.delta,
            "delta_hz": self.delta / TWO_PI,
            "detuning_sign": self.detuning_sign,
            "gate_time_s": self.gate_time,
            "duration_s": self.duration,
            "ramp_correction_s": self.envelope.ramp_correction(),
            "segments": [s.to_dict() for s in self.segments],
        }


def make_schedule(
    loops: int = 2,
    t_loop: float = 45e-6,
    t_pi: float = 5e-6,
    echo: bool = True,
    envelope: PulseEnvelope | None = None,
    *,
    shape: Shape | str = Shape.SIN2_RAMP,
    ramp: float = 2e-6,
    detuning_sign: int = -1,
    microwave: str = "ideal",
    microwave_error: float = 0.0,
) -> GateSchedule:
    """Build the segment list ``[loop_1, R_x(pi), loop_2, R_-x(pi), ...]``.

    Echo pulses alternate between the +x and -x axes so that every pair
    multiplies to the identity.
    """
    if loops < 1:
        raise ValueError("need at least one loop")
    if envelope is None:
        envelope = PulseEnvelope(Shape(shape), ramp, t_loop)
    if envelope.loop_duration <= 2 * envelope.ramp_duration:
        raise ValueError(
            f"t_loop={envelope.loop_duration:g} s leaves no flat top for ramps of {envelope.ramp_duration:g} s"
        )
    if detuning_sign not in (-1, 1):
        raise ValueError("detuning_sign must be +1 or -1")
    if microwave not in ("ideal", "finite"):
        raise ValueError("microwave must be 'ideal' or 'finite'")
    segs = []
    t = 0.0
    for k in range(loops):
        segs.append(Segment("laser", t, envelope.duration))
        t += envelope.duration
        if echo:
            phase = 0.0 if k % 2 == 0 else math.pi
            segs.append(Segment("microwave", t, t_pi, phase))
            t += t_pi
    return GateSchedule(
        loops=loops,
        envelope=envelope,
        t_pi=t_pi,
        echo=echo,
        detuning_sign=detuning_sign,
        microwave=microwave,
        microwave_error=microwave_error,
        segments=tuple(segs),
    )
