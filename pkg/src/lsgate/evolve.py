"""Propagation of operator models through gate schedules, and gate metrics.

States are batches shaped ``(B, S, S, Dm)`` (see :mod:`lsgate.hamiltonian`).
Laser segments are integrated with an explicit 8th-order Runge-Kutta method
whose step is capped at a fraction of the fastest retained period; dark
segments (echo pulses) are applied in closed form because nothing but static
level shifts acts there.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import DOP853
from scipy.linalg import expm
from scipy.ndimage import uniform_filter1d
from scipy.optimize import minimize

from .hamiltonian import (
    DOWN,
    UP,
    BeamPair,
    FullModel,
    LevelScheme,
    LightShiftModel,
    OperatorModel,
    SDFModel,
)
from .pulse import GateSchedule, Segment, make_schedule

TARGET = np.diag([1, 1j, 1j, 1]).astype(complex)
_S2 = math.sqrt(2.0)
SYM = np.array([[1, 0, 0], [0, 1 / _S2, 0], [0, 1 / _S2, 0], [0, 0, 1]], dtype=complex)
TARGET_SYM = SYM.conj().T @ TARGET @ SYM
RADIAL_MODES = ("y_com", "y_str", "z_com", "z_str")


class StiffnessError(RuntimeError):
    """The integrator could not take a step at the required accuracy."""


class CalibrationError(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: int, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage


# --- states ---------------------------------------------------------------


@dataclass
class QuantumState:
    """Amplitudes over ion 1 level x ion 2 level x motional index.

    The motional index is row-major over ``mode_names`` with ``cutoffs + 1``
    Fock states each.
    """

    amplitudes: np.ndarray
    levels: tuple[str, ...]
    mode_names: tuple[str, ...]
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        S, Dm = len(self.levels), int(np.prod([c + 1 for c in self.cutoffs]))
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(S, S, Dm)

    @classmethod
    def basis(cls, model: OperatorModel, s1: int, s2: int, fock=None) -> "QuantumState":
        """Product state of internal levels ``(s1, s2)`` and Fock occupations ``fock``."""
        S, Dm = model.n_levels, model.motion.size
        psi = np.zeros((S, S, Dm), dtype=complex)
        fock = fock or [0] * len(model.motion.cutoffs)
        m = int(np.ravel_multi_index(tuple(fock), model.motion.dims))
        psi[s1, s2, m] = 1.0
        return cls(psi, model.levels, model.motion.names, model.motion.cutoffs)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def level_populations(self) -> np.ndarray:
        """Joint internal-level populations, shape (S, S)."""
        return np.sum(np.abs(self.amplitudes) ** 2, axis=2)

    def mode_populations(self) -> np.ndarray:
        """Fock distribution of every mode, list of arrays."""
        p = np.sum(np.abs(self.amplitudes) ** 2, axis=(0, 1)).reshape([c + 1 for c in self.cutoffs])
        axes = range(p.ndim)
        return [p.sum(axis=tuple(a for a in axes if a != m)) for m in axes]


# --- propagation ----------------------------------------------------------


def _amp_fn(seg: Segment, schedule: GateSchedule, amplitude: float, envelope_mode: str):
    # "intensity": the envelope profile is the laser intensity, so the light
    # shift follows it and the field follows its square root.  "field": the
    # envelope scales the field, so the light shift follows envelope**2.
    env = schedule.envelope
    if envelope_mode == "field":
        return lambda t: amplitude * env.value(t - seg.start)
    if envelope_mode == "intensity":
        return lambda t: amplitude * math.sqrt(env.value(t - seg.start))
    raise ValueError("envelope_mode must be 'field' or 'intensity'")


def _single_ion_microwave(model: OperatorModel, seg: Segment, schedule: GateSchedule) -> np.ndarray:
    """Single-ion internal-level unitary for a dark segment containing an echo pulse."""
    S = model.n_levels
    shifts = model.level_shifts
    if schedule.microwave == "ideal":
        half = np.diag(np.exp(-1j * shifts * seg.duration / 2))
        r = np.eye(S, dtype=complex)
        c, s = math.cos(seg.angle / 2), math.sin(seg.angle / 2)
        phi = seg.axis_phase
        r[DOWN, DOWN] = r[UP, UP] = c
        r[DOWN, UP] = -1j * s * np.exp(-1j * phi)
        r[UP, DOWN] = -1j * s * np.exp(1j * phi)
        return half @ r @ half
    rabi = seg.angle / seg.duration
    h = np.diag(shifts).astype(complex)
    h[DOWN, UP] += rabi / 2 * np.exp(-1j * seg.axis_phase)
    h[UP, DOWN] += rabi / 2 * np.exp(1j * seg.axis_phase)
    return expm(-1j * h * seg.duration)


def _apply_local(psi: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("ai,bj,nijm->nabm", u, u, psi)


@dataclass
class Trajectory:
    times: np.ndarray
    samples: np.ndarray | None  # (T, B, S, S, Dm)
    final: np.ndarray  # (B, S, S, Dm)
    n_evaluations: int = 0
    norm_drift: float = 0.0


def _max_step(model: OperatorModel, schedule: GateSchedule, samples_per_period: int) -> float:
    step = 2 * math.pi / max(model.fastest_frequency, 1e-30) / samples_per_period
    if schedule.envelope.ramp_duration > 0:
        step = min(step, schedule.envelope.ramp_duration / 20)
    return min(step, schedule.envelope.duration / 50)


def propagate_batch(model: OperatorModel, psi0: np.ndarray, schedule: GateSchedule, tol: float = 1e-10,
                    amplitude: float = 1.0, sample_times=None, envelope_mode: str = "intensity",
                    samples_per_period: int = 20) -> Trajectory:
    """Propagate a batch of states through every segment of ``schedule``.

    Parameters
    ----------
    tol : float
        Target accuracy of the final state.  Local errors accumulate over many
        steps, so the integrator runs with ``rtol = tol / 100`` and
        ``atol = tol / 1e4``; the resulting norm drift stays below ``tol``.
    amplitude : float
        Multiplier on the single-photon Rabi frequencies.
    sample_times : array, optional
        Times at which to record the batch (dense output inside laser segments).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    psi = np.array(psi0, dtype=complex, copy=True)
    if psi.ndim == 3:
        psi = psi[None]
    if psi.shape[1:] != model.shape:
        raise ValueError(f"state shape {psi.shape[1:]} does not match model {model.shape}")
    shape = psi.shape
    norm0 = np.linalg.norm(psi.reshape(shape[0], -1), axis=1)
    sample_times = np.asarray([] if sample_times is None else sample_times, dtype=float)
    samples = np.zeros((len(sample_times),) + shape, dtype=complex) if len(sample_times) else None
    filled = np.zeros(len(sample_times), dtype=bool)
    max_step = _max_step(model, schedule, samples_per_period)
    nfev = 0

    def record(t_lo, t_hi, fn):
        idx = np.nonzero((sample_times >= t_lo) & (sample_times <= t_hi) & ~filled)[0]
        for i in idx:
            samples[i] = fn(sample_times[i])
            filled[i] = True

    for seg in schedule.segments:
        if seg.kind == "microwave":
            record(seg.start, seg.start + 0.5 * seg.duration, lambda t, p=psi: p)
            psi = _apply_local(psi, _single_ion_microwave(model, seg, schedule))
            record(seg.start, seg.end, lambda t, p=psi: p)
            continue
        amp = _amp_fn(seg, schedule, amplitude, envelope_mode)

        def rhs(t, y):
            return model.apply(t, y.reshape(shape), amp(t)).ravel()

        solver = DOP853(rhs, seg.start, psi.ravel(), seg.end, rtol=max(tol / 100, 3e-14), atol=tol / 1e4, max_step=max_step,
                        first_step=min(max_step, 1e-10))
        record(seg.start, seg.start, lambda t, p=psi: p)
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise StiffnessError(
                    f"step size underflow at t={solver.t:.3e} s ({msg}); fastest retained frequency "
                    f"{model.fastest_frequency / (2 * math.pi):.3e} Hz"
                )
            if samples is not None:
                dense = solver.dense_output()
                record(dense.t_old, dense.t, lambda t: dense(t).reshape(shape))
        nfev += solver.nfev
        psi = solver.y.reshape(shape).copy()
    if samples is not None:
        record(-np.inf, np.inf, lambda t, p=psi: p)
    norm1 = np.linalg.norm(psi.reshape(shape[0], -1), axis=1)
    return Trajectory(sample_times, samples, psi, nfev, float(np.max(np.abs(norm1 - norm0))))


def propagate(model: OperatorModel, state: QuantumState, schedule: GateSchedule, tol: float = 1e-10,
              amplitude: float = 1.0, sample_times=None, envelope_mode: str = "intensity") -> Trajectory:
    """Propagate one :class:`QuantumState`; the trajectory carries a batch axis of length one."""
    if state.levels != model.levels or state.cutoffs != model.motion.cutoffs:
        raise ValueError("state basis does not match the model")
    return propagate_batch(model, state.amplitudes[None], schedule, tol, amplitude, sample_times, envelope_mode)


# --- gate metrics ---------------------------------------------------------


def avg_fidelity(kraus, target: np.ndarray, entanglement_factor: float = 1.0) -> float:
    """Average gate fidelity of a (possibly trace-decreasing) channel to a unitary.

    ``F = (sum_m |tr(V^dag K_m)|^2 + sum_m tr(K_m^dag K_m)) / (d (d + 1))``.
    ``entanglement_factor`` scales the first sum, which is how extra
    depolarizing error on the echo pulses enters.
    """
    d = target.shape[0]
    ov = sum(abs(np.trace(target.conj().T @ k)) ** 2 for k in kraus)
    tr = sum(np.trace(k.conj().T @ k).real for k in kraus)
    return float((entanglement_factor * ov + tr) / (d * (d + 1)))


def _z_frame(a: float, b: float) -> np.ndarray:
    za = np.array([1, np.exp(1j * a)])
    zb = np.array([1, np.exp(1j * b)])
    return np.diag(np.kron(za, zb))


def optimize_frame(kraus, target=TARGET, symmetric: bool = False, factor: float = 1.0):
    """Best local ``Z`` frame ``(a, b)``; for the symmetric block ``a == b``."""

    def cost(x):
        a, b = (x[0], x[0]) if symmetric else x
        v = _z_frame(a, b) @ target
        if symmetric:
            return -avg_fidelity([SYM.conj().T @ k @ SYM for k in kraus], SYM.conj().T @ v @ SYM, factor)
        return -avg_fidelity(kraus, v, factor)

    best = None
    for start in (0.0, math.pi / 2, math.pi, -math.pi / 2):
        x0 = [start] if symmetric else [start, start]
        r = minimize(cost, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        if best is None or r.fun < best.fun:
            best = r
    a, b = (best.x[0], best.x[0]) if symmetric else best.x
    return float(a), float(b), -float(best.fun)


def entangling_phase(u: np.ndarray) -> float:
    """Total conditional phase ``Phi_tot`` in [0, pi) of a diagonal-ish two-qubit block.

    Invariant under local Z rotations: ``2 Phi_tot = arg(u11 u22 / (u00 u33))``.
    """
    chi = np.angle(u[1, 1] * u[2, 2] * np.conj(u[0, 0] * u[3, 3]))
    return float((chi % (2 * math.pi)) / 2)


@dataclass
class GateResult:
    """Effective two-qubit process of one gate.

    ``kraus[m]`` maps the qubit basis to the qubit basis for motional outcome
    ``m`` (and thermal input index, if any).  ``fidelity`` is the
    symmetric-subspace average fidelity in the selected frame,
    ``fidelity_full`` the four-dimensional one.
    """

    kraus: list
    process: np.ndarray
    sym_process: np.ndarray
    fidelity: float
    fidelity_full: float
    fidelity_raw: float
    fidelity_full_raw: float
    fidelity_frame: float
    fidelity_full_frame: float
    leakage: float
    motional_error: float
    phase: float
    loop_phase: float
    frame: str = "raw"
    norm_drift: float = 0.0
    n_evaluations: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity

    @property
    def error_full(self) -> float:
        return 1.0 - self.fidelity_full

    def corrected_kraus(self) -> list[np.ndarray]:
        """Kraus operators with the best local-Z frame undone, so the target is diag(1, i, i, 1)."""
        a, b = self.extras.get("frame_angles", (0.0, 0.0))
        z = _z_frame(a, b).conj()
        return [z @ k for k in self.kraus]

    def to_dict(self) -> dict:
        return {
            "fidelity_sym": self.fidelity,
            "fidelity_full": self.fidelity_full,
            "fidelity_sym_raw": self.fidelity_raw,
            "fidelity_full_raw": self.fidelity_full_raw,
            "fidelity_sym_frame": self.fidelity_frame,
            "fidelity_full_frame": self.fidelity_full_frame,
            "error_sym": self.error,
            "error_full": self.error_full,
            "leakage": self.leakage,
            "motional_error": self.motional_error,
            "phase_total_rad": self.phase,
            "phase_per_loop_rad": self.loop_phase,
            "frame": self.frame,
            "norm_drift": self.norm_drift,
            "n_evaluations": self.n_evaluations,
            "process_real": self.process.real.tolist(),
            "process_imag": self.process.imag.tolist(),
            **self.extras,
        }


QUBIT_STATES = ((0, 0), (0, 1), (1, 0), (1, 1))


def thermal_weights(nbar: float, n_max: int, cutoff: float = 1e-6) -> np.ndarray:
    if nbar <= 0:
        return np.array([1.0])
    n = np.arange(n_max + 1)
    w = nbar**n / (1 + nbar) ** (n + 1)
    w = w[: max(1, int(np.searchsorted(-np.cumsum(w), -(1 - cutoff)) + 1))]
    return w / w.sum()


def process_kraus(final: np.ndarray, weights=np.array([1.0])) -> list[np.ndarray]:
    """Kraus operators from the propagated qubit basis (batch ordered input-Fock major)."""
    n_in = len(weights)
    Dm = final.shape[-1]
    out = []
    for f in range(n_in):
        block = final[4 * f: 4 * (f + 1)]  # (4, S, S, Dm)
        q = block[:, :2, :2, :].reshape(4, 4, Dm)  # input, output qubit, motion
        for m in range(Dm):
            out.append(math.sqrt(weights[f]) * q[:, :, m].T)
    return out


def gate_process(model: OperatorModel, schedule: GateSchedule, amplitude: float = 1.0, tol: float = 1e-10,
                 frame: str = "raw", nbar: float = 0.0, envelope_mode: str = "intensity",
                 target_loop_phase: float = math.pi / 4) -> GateResult:
    """Propagate the four qubit basis states from the motional ground state.

    The full basis is propagated, so relative phases are fixed without extra
    superposition probes.  Leakage (population outside the qubit levels) is
    counted as error.  ``frame="optimized"`` makes the reported fidelities
    the ones after the best local-Z frame correction.
    """
    if frame not in ("raw", "optimized"):
        raise ValueError("frame must be 'raw' or 'optimized'")
    gate_cut = model.motion.cutoffs[0]
    weights = thermal_weights(nbar, gate_cut)
    psi0 = []
    for f in range(len(weights)):
        for s1, s2 in QUBIT_STATES:
            fock = [f] + [0] * (len(model.motion.cutoffs) - 1)
            psi0.append(QuantumState.basis(model, s1, s2, fock).amplitudes)
    traj = propagate_batch(model, np.stack(psi0), schedule, tol, amplitude, envelope_mode=envelope_mode)
    kraus = process_kraus(traj.final, weights)
    process = kraus[0] / math.sqrt(weights[0])
    sym_kraus = [SYM.conj().T @ k @ SYM for k in kraus]

    factor = 1.0
    if schedule.echo and schedule.microwave_error > 0:
        # independent depolarizing on both qubits after every echo pulse, to first order
        factor = (1 - 1.5 * schedule.microwave_error) ** (2 * schedule.loops)

    f_full_raw = avg_fidelity(kraus, TARGET, factor)
    f_sym_raw = avg_fidelity(sym_kraus, TARGET_SYM, factor)
    fa, fb, f_full_frame = optimize_frame(kraus, TARGET, False, factor)
    _, _, f_sym_frame = optimize_frame(kraus, TARGET, True, factor)
    f_full_frame, f_sym_frame = max(f_full_frame, f_full_raw), max(f_sym_frame, f_sym_raw)

    in_qubit = sum(np.sum(np.abs(k) ** 2) for k in kraus) / 4
    leakage = float(max(0.0, 1.0 - in_qubit))
    motional = float(max(0.0, in_qubit - np.sum(np.abs(process) ** 2) / 4 * weights[0]))
    phase = entangling_phase(process)
    loops = schedule.loops
    loop_phase = phase / loops
    if abs(loop_phase - target_loop_phase) > 0.01:
        warnings.warn(f"per-loop phase {loop_phase:.4f} rad differs from {target_loop_phase:.4f}; "
                      "is the model calibrated?", stacklevel=2)
    use_frame = frame == "optimized"
    finals = {ch: float(channel_populations(traj.final[None, :4], model, ch)[0])
              for ch in ("D",) + model.motion.names}
    return GateResult(
        kraus=kraus,
        process=process,
        sym_process=SYM.conj().T @ process @ SYM,
        fidelity=f_sym_frame if use_frame else f_sym_raw,
        fidelity_full=f_full_frame if use_frame else f_full_raw,
        fidelity_raw=f_sym_raw,
        fidelity_full_raw=f_full_raw,
        fidelity_frame=f_sym_frame,
        fidelity_full_frame=f_full_frame,
        leakage=leakage,
        motional_error=motional,
        phase=phase,
        loop_phase=loop_phase,
        frame=frame,
        norm_drift=traj.norm_drift,
        n_evaluations=traj.n_evaluations,
        extras={"final_populations": finals, "frame_angles": [fa, fb]},
    )


# --- calibration ----------------------------------------------------------


def single_loop(schedule: GateSchedule) -> GateSchedule:
    """One un-echoed loop with the same envelope and detuning sign."""
    return make_schedule(1, echo=False, envelope=schedule.envelope, detuning_sign=schedule.detuning_sign)


def loop_phase(model: OperatorModel, schedule: GateSchedule, amplitude: float = 1.0, tol: float = 1e-10,
               envelope_mode: str = "intensity", reference: float = math.pi / 4) -> float:
    """Conditional geometric phase of a single loop at the given amplitude.

    ``|down, down>`` is uncoupled in every tier, so only the other three basis
    states are propagated.  The phase is defined modulo pi; the branch nearest
    ``reference`` is returned.
    """
    psi0 = np.stack([QuantumState.basis(model, s1, s2).amplitudes for s1, s2 in QUBIT_STATES[1:]])
    traj = propagate_batch(model, psi0, single_loop(schedule), tol, amplitude, envelope_mode=envelope_mode)
    d = [traj.final[i, s1, s2, 0] for i, (s1, s2) in enumerate(QUBIT_STATES[1:])]
    chi = np.angle(d[0] * d[1] * np.conj(d[2]) * np.exp(-2j * reference))
    return float(chi / 2 + reference)


def sdf_amplitude_seed(model: SDFModel, target_phase: float) -> float:
    """Closed-form amplitude for a square SDF loop: invert ``Phi = 2 pi (Omega eta_eff / delta)^2``."""
    omega = abs(model.detuning) * math.sqrt(target_phase / (2 * math.pi)) / model.eta_eff
    return math.sqrt(omega / model.omega)


def calibrate(model: OperatorModel, schedule: GateSchedule, target_phase: float = math.pi / 4,
              tol: float = 1e-10, phase_tol: float = 1e-9, envelope_mode: str = "intensity",
              bracket: tuple[float, float] = (0.5, 2.0), max_iter: int = 30) -> float:
    """Amplitude multiplier on ``g`` giving per-loop phase ``target_phase``.

    The phase grows close to ``amplitude**4``, so the root is found by secant
    steps on ``log(phase)`` against ``log(amplitude)``, seeded with slope 4.
    Iterates stay inside ``bracket`` (relative to the first estimate); the
    result is accurate to ``phase_tol`` rad in the phase.

    Raises
    ------
    CalibrationError
        The model has the wrong phase sign, or the iteration leaves the bracket
        or does not converge.
    """
    if target_phase == 0:
        return 0.0
    phi1 = loop_phase(model, schedule, 1.0, tol, envelope_mode, reference=0.0)
    if phi1 * target_phase <= 0:
        raise CalibrationError("model phase at unit amplitude has the wrong sign (or vanishes); "
                               "check detuning_sign")
    x_prev, g_prev = 0.0, math.log(phi1 / target_phase)
    x = -g_prev / 4
    lo, hi = x + math.log(bracket[0]), x + math.log(bracket[1])
    for _ in range(max_iter):
        if not lo <= x <= hi:
            raise CalibrationError(f"amplitude {math.exp(x):.6g} left the bracket "
                                   f"[{math.exp(lo):.6g}, {math.exp(hi):.6g}]")
        phi = loop_phase(model, schedule, math.exp(x), tol, envelope_mode, reference=target_phase)
        if abs(phi - target_phase) < phase_tol:
            return math.exp(x)
        if phi * target_phase <= 0:
            raise CalibrationError("phase changed sign during calibration")
        g = math.log(phi / target_phase)
        slope = (g - g_prev) / (x - x_prev) if x != x_prev else 4.0
        x_prev, g_prev = x, g
        x = x - g / slope
    raise CalibrationError(f"calibration did not converge in {max_iter} iterations")


# --- transient populations -------------------------------------------------


def moving_average(values: np.ndarray, dt: float, window: float) -> np.ndarray:
    n = max(1, int(round(window / dt)))
    return uniform_filter1d(values, size=n, axis=0, mode="nearest")


def channel_populations(samples: np.ndarray, model: OperatorModel, channel: str) -> np.ndarray:
    """Population of a channel averaged over the batch, for every sample.

    ``"D"`` is the total population of every level above the qubit pair;
    a mode name gives the probability of at least one quantum in that mode.
    """
    prob = np.abs(samples) ** 2  # (T, B, S, S, Dm)
    B = samples.shape[1]
    if channel == "D":
        qubit = prob[:, :, :2, :2, :].sum(axis=(2, 3, 4))
        return 1.0 - qubit.sum(axis=1) / B
    m = model.motion.names.index(channel)
    occ = model.motion.number_grid()[:, m]
    return prob[..., occ >= 1].sum(axis=(1, 2, 3, 4)) / B


@dataclass
class PopulationTrace:
    channel: str
    times: np.ndarray
    raw: np.ndarray
    filtered: np.ndarray

    @property
    def final(self) -> float:
        return float(self.raw[-1])

    @property
    def peak_filtered(self) -> float:
        return float(np.max(self.filtered))


def transient_populations(model: OperatorModel, schedule: GateSchedule, channels, amplitude: float = 1.0,
                          n_samples: int = 20000, window: float | None = None, tol: float = 1e-10,
                          envelope_mode: str = "intensity", inputs=QUBIT_STATES) -> dict[str, PopulationTrace]:
    """Channel populations over the gate, averaged over the qubit basis inputs.

    The filtered trace is a moving average over ``window`` (default one
    period ``2 pi / Delta`` of the single-photon detuning).
    """
    psi0 = np.stack([QuantumState.basis(model, s1, s2).amplitudes for s1, s2 in inputs])
    times = np.linspace(0.0, schedule.duration, n_samples)
    traj = propagate_batch(model, psi0, schedule, tol, amplitude, times, envelope_mode)
    if window is None:
        delta = getattr(getattr(model, "scheme", None), "delta", None)
        window = 2 * math.pi / delta if delta else 0.0
    dt = times[1] - times[0]
    out = {}
    for ch in channels:
        raw = channel_populations(traj.samples, model, ch)
        if amplitude == 0:
            raw = np.zeros_like(raw)
        filt = moving_average(raw, dt, window) if window else raw.copy()
        out[ch] = PopulationTrace(ch, times, raw, filt)
    return out


# --- physical setup and staged error ---------------------------------------


@dataclass(frozen=True)
class GateSetup:
    """Everything needed to build models of one gate configuration."""

    spectrum: object
    beams: BeamPair
    scheme: LevelScheme
    positions: np.ndarray | None = None
    max_dimension: int = 10_000

    def full(self, modes) -> FullModel:
        return FullModel(self.spectrum, self.beams, self.scheme, modes, self.positions, self.max_dimension)

    def lightshift(self, modes, **kw) -> LightShiftModel:
        return LightShiftModel(self.spectrum, self.beams, self.scheme, modes, self.positions, **kw)

    def sdf(self, n_max: int = 10) -> SDFModel:
        return SDFModel(self.spectrum, self.beams, self.scheme, n_max, self.positions)

    def replace(self, **kw) -> "GateSetup":
        return replace(self, **kw)


@dataclass
class StagedResult:
    amplitude: float
    stage1_error: float
    stage1: GateResult
    radial_populations: dict[str, float]
    com_population: float
    d_population: float

    @property
    def radial_total(self) -> float:
        return float(sum(self.radial_populations.values()))

    @property
    def total(self) -> float:
        return self.stage1_error + self.radial_total

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "stage1_error": self.stage1_error,
            "stage1_leakage": self.stage1.leakage,
            "stage1_phase_per_loop": self.stage1.loop_phase,
            "radial_populations": self.radial_populations,
            "radial_total": self.radial_total,
            "com_final_population": self.com_population,
            "d_final_population": self.d_population,
            "total": self.total,
        }


def staged_error(setup: GateSetup, schedule: GateSchedule, gate_cutoff: int = 10, spectator_cutoff: int = 1,
                 tol: float = 1e-10, amplitude: float | None = None, frame: str = "optimized",
                 envelope_mode: str = "intensity", radial_modes=RADIAL_MODES, optimize: bool = False) -> StagedResult:
    """Off-resonant error with spectators treated one at a time.

    1. Gate error with the axial com as the only spectator, after tuning the
       amplitude (phase calibration; ``optimize=True`` additionally minimises
       the error over a narrow amplitude window).
    2. Final population with at least one quantum in each radial spectator,
       at the same amplitude.
    3. The total is the sum of both.
    """
    gate = setup.spectrum.gate_mode.name
    try:
        model = setup.full({gate: gate_cutoff, "x_com": spectator_cutoff})
        if amplitude is None:
            amplitude = calibrate(model, schedule, tol=tol, envelope_mode=envelope_mode)
            if optimize:
                from scipy.optimize import minimize_scalar

                res = minimize_scalar(
                    lambda a: gate_process(model, schedule, a, tol, frame, envelope_mode=envelope_mode).error,
                    bounds=(0.99 * amplitude, 1.01 * amplitude), method="bounded", options={"xatol": 1e-5})
                amplitude = float(res.x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res1 = gate_process(model, schedule, amplitude, tol, frame, envelope_mode=envelope_mode)
    except Exception as exc:  # noqa: BLE001
        raise StageError(1, exc) from exc
    radial = {}
    try:
        for name in radial_modes:
            m = setup.full({gate: gate_cutoff, name: spectator_cutoff})
            if np.allclose(m.etas["A"][:, 1], 0) and np.allclose(m.etas["B"][:, 1], 0):
                radial[name] = 0.0
                continue
            tr = transient_populations(m, schedule, [name], amplitude, n_samples=2, tol=tol,
                                       envelope_mode=envelope_mode)
            radial[name] = max(0.0, tr[name].final)
    except Exception as exc:  # noqa: BLE001
        raise StageError(2, exc) from exc
    finals = res1.extras["final_populations"]
    return StagedResult(amplitude, res1.error, res1, radial, finals["x_com"], finals["D"])


def leakage_experiment(model: FullModel, schedule: GateSchedule, beam_select: str = "both",
                       amplitude: float = 1.0, tol: float = 1e-10, envelope_mode: str = "intensity",
                       n_samples: int = 4000) -> dict:
    """Leakage per gate starting from ``|up, up>`` with one or both beams.

    Returns the final population outside the qubit levels (``leakage``), its
    split over the excited levels, and the drive-averaged excited population
    during the laser pulses (``transient``) as a diagnostic.
    """
    if beam_select not in ("A", "B", "both", "none"):
        raise ValueError("beam_select must be A, B, both or none")
    m = model.with_beams(beam_select)
    psi0 = QuantumState.basis(m, UP, UP).amplitudes[None]
    times = np.linspace(0, schedule.duration, n_samples)
    traj = propagate_batch(m, psi0, schedule, tol, amplitude, times, envelope_mode)
    final = np.abs(traj.final[0]) ** 2
    per_level = {}
    for li, lvl in enumerate(m.levels[2:], start=2):
        per_level[lvl] = float(final[li, :, :].sum() + final[:, li, :].sum() - final[li, li, :].sum())
    leak = float(max(0.0, 1.0 - final[:2, :2, :].sum()))
    pop_t = channel_populations(traj.samples, m, "D")
    lit = np.zeros_like(times, dtype=bool)
    for seg in schedule.laser_segments:
        lit |= (times >= seg.start) & (times <= seg.end)
    transient = float(pop_t[lit].mean()) if lit.any() else 0.0
    if beam_select == "none" or amplitude == 0:
        leak, transient = 0.0, 0.0
        per_level = {k: 0.0 for k in per_level}
    return {"beam": beam_select, "leakage": leak, "levels": per_level, "transient": transient,
            "norm_drift": traj.norm_drift}

