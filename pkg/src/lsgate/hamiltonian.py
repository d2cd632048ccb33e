"""Operator models for the light-shift gate at three levels of approximation.

All models act on states shaped ``(batch, S, S, Dm)``: internal level of ion 1,
internal level of ion 2, then the motional Fock index (gate mode first, then
spectators, row-major).  They work in the interaction picture of the free
phonon and ion Hamiltonians, so only the laser drive appears explicitly; the
free motional phases are applied as diagonal factors inside each call.

``FULL``
    Every single-photon coupling from the upper qubit level to the D-state
    sublevels e-, e+ (and optionally e0), position operators kept to all
    orders in the Lamb-Dicke parameters.
``LIGHTSHIFT``
    Excited states adiabatically eliminated: a projector on the upper level
    times ``sin(dk . r + mu t + dphi)``.
``SDF``
    First order in the gate-mode Lamb-Dicke parameter, slow terms only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernels
from .constants import TWO_PI, ZEEMAN_HZ_PER_GAUSS
from .crystal import ModeSpectrum, lamb_dicke

DOWN, UP = 0, 1
QUBIT_LEVELS = ("down", "up")
FULL_LEVELS = ("down", "up", "e-", "e+")


class Tier(str, Enum):
    FULL = "full"
    LIGHTSHIFT = "lightshift"
    SDF = "sdf"


class DimensionError(ValueError):
    """The truncated Hilbert space exceeds the configured maximum."""


class SingularityError(ValueError):
    """The light-shift prefactor diverges (|Delta| close to mu/2)."""


@dataclass(frozen=True)
class BeamPair:
    """Two gate beams.  Rabi frequencies are angular; phases in radians.

    ``coupling_phases`` holds arg(g_A^-), arg(g_A^+), arg(g_B^-), arg(g_B^+).
    Beam A is detuned by +mu/2 and beam B by -mu/2 from the mean laser frequency.
    """

    g_a: float
    g_b: float
    mu: float
    k_a: np.ndarray
    k_b: np.ndarray
    phase_a: float = 0.0
    phase_b: float = 0.0
    coupling_phases: tuple = (0.0, 0.0, -math.pi / 2, math.pi / 2)
    e0_leak_rabi: float = 0.0
    symmetric: bool = True

    def __post_init__(self):
        object.__setattr__(self, "k_a", np.asarray(self.k_a, dtype=float))
        object.__setattr__(self, "k_b", np.asarray(self.k_b, dtype=float))
        if self.symmetric and not math.isclose(self.g_a, self.g_b, rel_tol=1e-12):
            raise ValueError("symmetric drive requires |g_A| == |g_B|")

    @property
    def delta_phi(self) -> float:
        return self.phase_a - self.phase_b

    @property
    def delta_k(self) -> np.ndarray:
        return self.k_a - self.k_b

    def coupling(self, beam: str, tau: int) -> complex:
        """Complex single-photon Rabi frequency g_beam^tau."""
        idx = {("A", -1): 0, ("A", 1): 1, ("B", -1): 2, ("B", 1): 3}[(beam, tau)]
        mag = self.g_a if beam == "A" else self.g_b
        return mag * np.exp(1j * self.coupling_phases[idx])

    def scaled(self, s: float) -> "BeamPair":
        return replace(self, g_a=self.g_a * s, g_b=self.g_b * s, e0_leak_rabi=self.e0_leak_rabi * s)


@dataclass(frozen=True)
class LevelScheme:
    """Single-photon detuning of e+- and optional extra structure.

    ``qubit_shift`` is a static shift of the upper qubit level (rad/s), used
    both for the residual F=2 Stark shift and for injected test detunings.
    """

    delta: float
    include_e0: bool = False
    qubit_shift: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("single-photon detuning must be positive")

    @classmethod
    def from_field(cls, gauss: float, **kw) -> "LevelScheme":
        return cls(TWO_PI * ZEEMAN_HZ_PER_GAUSS * gauss, **kw)

    @property
    def levels(self) -> tuple[str, ...]:
        return FULL_LEVELS + (("e0",) if self.include_e0 else ())

    def energy(self, level: str) -> float:
        return {"e+": self.delta, "e-": -self.delta}.get(level, 0.0)


# --- motional space -------------------------------------------------------


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def displacement_factor(eta: float, n_max: int) -> np.ndarray:
    """``exp(-i eta (a + a^dag))`` on a Fock space truncated at ``n_max``, exact."""
    a = annihilation(n_max)
    vals, vecs = np.linalg.eigh(a + a.T)
    return (vecs * np.exp(-1j * eta * vals)) @ vecs.T


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


@dataclass(frozen=True)
class MotionalSpace:
    names: tuple[str, ...]
    cutoffs: tuple[int, ...]
    frequencies: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cutoffs)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def number_grid(self) -> np.ndarray:
        """Occupation of every mode at every motional index, shape (Dm, n_modes)."""
        grids = np.meshgrid(*[np.arange(d) for d in self.dims], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def energies(self) -> np.ndarray:
        return self.number_grid() @ self.frequencies

    def displacement(self, etas) -> np.ndarray:
        return kron_all(displacement_factor(e, n) for e, n in zip(etas, self.cutoffs))

    def quadrature(self, etas) -> np.ndarray:
        """``sum_m eta_m (a_m + a_m^dag)`` as a dense matrix."""
        out = np.zeros((self.size, self.size), dtype=complex)
        for m, eta in enumerate(etas):
            parts = [np.eye(d) for d in self.dims]
            a = annihilation(self.cutoffs[m])
            parts[m] = a + a.T
            out += eta * kron_all(parts)
        return out

    def lowering(self, m: int) -> np.ndarray:
        parts = [np.eye(d) for d in self.dims]
        parts[m] = annihilation(self.cutoffs[m])
        return kron_all(parts)


def motional_space(spectrum: ModeSpectrum, modes) -> MotionalSpace:
    """``modes`` maps mode names (e.g. ``"x_str"``) to Fock cutoffs, gate mode first."""
    modes = dict(modes)
    names = tuple(modes)
    freqs = np.array([spectrum.modes[spectrum.index(n)].frequency for n in names])
    for n, c in modes.items():
        if c < 0:
            raise ValueError(f"negative cutoff for {n}")
    return MotionalSpace(names, tuple(int(modes[n]) for n in names), freqs)


def _mode_etas(spectrum: ModeSpectrum, k, names) -> np.ndarray:
    lde = lamb_dicke(spectrum, k) if np.linalg.norm(k) > 0 else None
    out = np.zeros((2, len(names)))
    if lde is not None:
        for m, n in enumerate(names):
            out[:, m] = lde.eta[:, spectrum.index(n)]
    return out


# --- models ---------------------------------------------------------------


class OperatorModel:
    """Common interface: ``apply(t, psi, amp)`` returns ``-i H(t) psi``.

    ``amp`` is the instantaneous laser field amplitude relative to full drive;
    Rabi frequencies scale with ``amp`` and light shifts with ``amp**2``.
    """

    tier: Tier
    levels: tuple[str, ...]
    motion: MotionalSpace
    level_shifts: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_levels, self.n_levels, self.motion.size)

    @property
    def dimension(self) -> int:
        return self.n_levels**2 * self.motion.size

    def index(self, level: str) -> int:
        return self.levels.index(level)

    def apply(self, t: float, psi: np.ndarray, amp: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def hamiltonian(self, t: float, amp: float = 1.0) -> np.ndarray:
        """Dense H(t); only sensible for small spaces."""
        eye = np.eye(self.dimension, dtype=complex).reshape((self.dimension,) + self.shape)
        cols = 1j * self.apply(t, eye, amp)
        return cols.reshape(self.dimension, self.dimension).T

    def _diag(self, psi):
        sh = self.level_shifts
        return (sh[:, None] + sh[None, :])[None, :, :, None] * psi

    @property
    def fastest_frequency(self) -> float:
        raise NotImplementedError

    def scaled(self, s: float) -> "OperatorModel":
        raise NotImplementedError


def _check_dimension(dim, max_dimension):
    if dim > max_dimension:
        raise DimensionError(f"Hilbert space dimension {dim} exceeds the maximum {max_dimension}")


class FullModel(OperatorModel):
    tier = Tier.FULL

    def __init__(self, spectrum, beams, scheme, modes, positions=None, max_dimension=10_000,
                 beam_select="both"):
        self.spectrum = spectrum
        self.beams = beams
        self.scheme = scheme
        self.levels = scheme.levels
        self.motion = motional_space(spectrum, modes)
        self.positions = spectrum.positions if positions is None else np.asarray(positions, float)
        self.beam_select = beam_select
        _check_dimension(self.dimension, max_dimension)
        self.max_dimension = max_dimension
        S = self.n_levels
        self.level_shifts = np.zeros(S)
        self.level_shifts[UP] = scheme.qubit_shift
        self._energies = self.motion.energies()

        beam_k = {"A": beams.k_a, "B": beams.k_b}
        beam_phase = {"A": beams.phase_a, "B": beams.phase_b}
        sign = {"A": 1.0, "B": -1.0}
        on = {"A": beam_select in ("A", "both"), "B": beam_select in ("B", "both")}
        self.etas = {b: _mode_etas(spectrum, beam_k[b], self.motion.names) for b in "AB"}
        self._mats = np.empty((2, 2, self.motion.size, self.motion.size), dtype=complex)
        amp = np.zeros((2, 2, S), dtype=complex)
        freq = np.zeros((2, S))
        for bi, b in enumerate("AB"):
            for j in range(2):
                self._mats[j, bi] = self.motion.displacement(self.etas[b][j])
                if not on[b]:
                    continue
                static = np.exp(-1j * (beam_phase[b] + beam_k[b] @ np.array([self.positions[j], 0, 0])))
                for tau, lvl in ((-1, "e-"), (1, "e+")):
                    amp[j, bi, self.index(lvl)] = beams.coupling(b, tau) * static
                if b == "A" and scheme.include_e0:
                    amp[j, bi, self.index("e0")] = beams.e0_leak_rabi * static
            for li, lvl in enumerate(self.levels):
                freq[bi, li] = scheme.energy(lvl) - sign[b] * beams.mu / 2
        self._amp = amp
        self._freq = freq

    def coefficients(self, t: float, amp: float = 1.0) -> np.ndarray:
        return amp * self._amp * np.exp(1j * self._freq * t)[None, :, :]

    def apply(self, t, psi, amp=1.0):
        rot = np.exp(1j * self._energies * t)
        coef = self.coefficients(t, amp)
        return kernels.apply_couplings(
            np.ascontiguousarray(psi), rot, self._mats, np.ascontiguousarray(coef), UP, self.level_shifts
        )

    @property
    def fastest_frequency(self) -> float:
        return self.scheme.delta + abs(self.beams.mu) / 2

    def scaled(self, s):
        return self.__class__(self.spectrum, self.beams.scaled(s), self.scheme,
                              dict(zip(self.motion.names, self.motion.cutoffs)), self.positions,
                              self.max_dimension, self.beam_select)

    def with_beams(self, beam_select: str) -> "FullModel":
        if beam_select not in ("A", "B", "both", "none"):
            raise ValueError("beam_select must be A, B, both or none")
        return self.__class__(self.spectrum, self.beams, self.scheme,
                              dict(zip(self.motion.names, self.motion.cutoffs)), self.positions,
                              self.max_dimension, beam_select)

    def second_order_shift(self) -> float:
        """Time-averaged second-order light shift of the upper qubit level (rad/s).

        Each Fourier component of the coupling to level ``l`` contributes
        ``-|c|^2 / freq``; e+ and e- cancel for a symmetric drive.
        """
        total = 0.0
        for j in (0,):
            for bi in range(2):
                for li in range(self.n_levels):
                    c = self._amp[j, bi, li]
                    if c != 0:
                        total += -abs(c) ** 2 / self._freq[bi, li]
        return total


def lightshift_prefactor(g: float, delta: float, mu: float, exact: bool = True, warn_ratio: float = 0.2) -> float:
    if g / delta > warn_ratio:
        warnings.warn(f"g/Delta = {g / delta:.3f} exceeds {warn_ratio}; adiabatic elimination is crude",
                      stacklevel=2)
    if not exact:
        return 4 * g**2 / delta
    denom = delta**2 - mu**2 / 4
    if abs(denom) < 1e-6 * delta**2:
        raise SingularityError("|Delta| is too close to mu/2")
    return 4 * g**2 * delta / denom


class LightShiftModel(OperatorModel):
    """Projector on the upper level times ``sin(dk . r_j + mu t + dphi)``.

    ``order=None`` keeps the position operator to all orders; ``order=1``
    linearises it, reproducing the AC-Stark and first-sideband terms.
    """

    tier = Tier.LIGHTSHIFT
    levels = QUBIT_LEVELS

    def __init__(self, spectrum, beams, scheme, modes, positions=None, order=None, exact_prefactor=True,
                 warn_ratio=0.2, max_dimension=10_000):
        self.spectrum, self.beams, self.scheme = spectrum, beams, scheme
        self.motion = motional_space(spectrum, modes)
        self.positions = spectrum.positions if positions is None else np.asarray(positions, float)
        self.order = order
        self.exact_prefactor = exact_prefactor
        self.warn_ratio = warn_ratio
        self.max_dimension = max_dimension
        _check_dimension(self.dimension, max_dimension)
        self.prefactor = lightshift_prefactor(beams.g_a, scheme.delta, beams.mu, exact_prefactor, warn_ratio)
        self.level_shifts = np.array([0.0, scheme.qubit_shift])
        self.etas = _mode_etas(spectrum, beams.delta_k, self.motion.names)
        self._energies = self.motion.energies()
        self._offsets = np.array([beams.delta_k @ np.array([x, 0, 0]) for x in self.positions]) + beams.delta_phi
        if order is None:
            self._ops = [self.motion.displacement(-self.etas[j]) for j in range(2)]  # exp(+i eta X)
        elif order == 1:
            quad = [self.motion.quadrature(self.etas[j]) for j in range(2)]
            self._ops = [np.eye(self.motion.size) + 1j * q for q in quad]
        else:
            raise ValueError("order must be None or 1")

    def operator(self, j: int, t: float) -> np.ndarray:
        """``sin(dk . r_j(t) + mu t + dphi)`` on the motional space (linearised if order=1)."""
        rot = np.exp(1j * self._energies * t)
        w = rot[:, None] * self._ops[j] * rot.conj()[None, :]
        theta = self._offsets[j] + self.beams.mu * t
        if self.order == 1:
            # sin(theta) + cos(theta) * sum eta X, with W = 1 + i sum eta X
            quad = (w - np.eye(self.motion.size)) / 1j
            return math.sin(theta) * np.eye(self.motion.size) + math.cos(theta) * quad
        return (np.exp(1j * theta) * w - np.exp(-1j * theta) * w.conj().T) / 2j

    def apply(self, t, psi, amp=1.0):
        out = self._diag(psi)
        scale = self.prefactor * amp**2
        if scale != 0:
            for j in range(2):
                op = self.operator(j, t)
                if j == 0:
                    out[:, UP] += scale * psi[:, UP] @ op.T
                else:
                    out[:, :, UP] += scale * psi[:, :, UP] @ op.T
        return -1j * out

    @property
    def fastest_frequency(self) -> float:
        return abs(self.beams.mu) + float(np.max(self.motion.frequencies)) * max(self.motion.cutoffs)

    def scaled(self, s):
        return LightShiftModel(self.spectrum, self.beams.scaled(s), self.scheme,
                               dict(zip(self.motion.names, self.motion.cutoffs)), self.positions, self.order,
                               self.exact_prefactor, self.warn_ratio, self.max_dimension)


class SDFModel(OperatorModel):
    """``Omega sum_j eta_j (1 + sz_j)(a e^{i d t + i phi_j} + h.c.)`` on the gate mode.

    ``d = mu - w_str`` carries the detuning sign; ``eta_j`` are the signed
    per-ion gate-mode Lamb-Dicke parameters.  The geometric phase per closed
    loop on |up,down> is ``2 pi (Omega * eta_eff / d)**2`` with ``eta_eff = 2 |eta|``,
    the factor two coming from ``1 + sz = 2`` on the upper level.
    """

    tier = Tier.SDF
    levels = QUBIT_LEVELS

    def __init__(self, spectrum, beams, scheme, n_max=10, positions=None, omega=None):
        self.spectrum, self.beams, self.scheme = spectrum, beams, scheme
        gate = spectrum.gate_mode
        self.motion = motional_space(spectrum, {gate.name: n_max})
        self.positions = spectrum.positions if positions is None else np.asarray(positions, float)
        self.omega = beams.g_a**2 / scheme.delta if omega is None else omega
        self.detuning = beams.mu - gate.frequency
        self.etas = _mode_etas(spectrum, beams.delta_k, self.motion.names)[:, 0]
        self.phases = np.array([beams.delta_k @ np.array([x, 0, 0]) for x in self.positions]) + beams.delta_phi
        self.level_shifts = np.array([0.0, scheme.qubit_shift])
        self._a = annihilation(n_max)

    @property
    def eta_eff(self) -> float:
        return 2 * abs(self.etas[1])

    def force(self, t: float, j: int) -> np.ndarray:
        op = self._a * np.exp(1j * (self.detuning * t + self.phases[j]))
        return op + op.conj().T

    def apply(self, t, psi, amp=1.0):
        out = self._diag(psi)
        scale = self.omega * amp**2
        if scale != 0:
            for j in range(2):
                op = (scale * 2 * self.etas[j]) * self.force(t, j)
                if j == 0:
                    out[:, UP] += psi[:, UP] @ op.T
                else:
                    out[:, :, UP] += psi[:, :, UP] @ op.T
        return -1j * out

    def loop_phase(self) -> float:
        """Closed-form geometric phase of one square-pulse loop, 2 pi (Omega eta_eff / d)^2."""
        return TWO_PI * (self.omega * self.eta_eff / self.detuning) ** 2

    @property
    def fastest_frequency(self) -> float:
        return abs(self.detuning)

    def scaled(self, s):
        return SDFModel(self.spectrum, self.beams.scaled(s), self.scheme, self.motion.cutoffs[0], self.positions,
                        self.omega * s**2)


def build_full(spectrum, beams, scheme, modes, positions=None, max_dimension=10_000) -> FullModel:
    return FullModel(spectrum, beams, scheme, modes, positions, max_dimension)


def build_lightshift(spectrum, beams, scheme, modes, positions=None, **kw) -> LightShiftModel:
    return LightShiftModel(spectrum, beams, scheme, modes, positions, **kw)


def build_sdf(spectrum, beams, scheme, n_max=10, positions=None) -> SDFModel:
    return SDFModel(spectrum, beams, scheme, n_max, positions)


def full_dimension(n_levels: int, cutoffs) -> int:
    return n_levels**2 * int(np.prod([c + 1 for c in cutoffs]))
