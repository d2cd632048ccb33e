"""Two-ion crystal geometry, normal modes and Lamb-Dicke parameters.

Frequencies are ordinary (Hz) on :class:`TrapConfig` and angular (rad/s)
everywhere else.  Mode participation vectors follow a fixed sign convention:
centre-of-mass vectors are positive on both ions, stretch vectors are
negative on ion 1 and positive on ion 2, so that ``B_j = (-1)**j / sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import (
    ELEMENTARY_CHARGE,
    EPSILON_0,
    HBAR,
    QUADRUPOLE_WAVELENGTH,
    TWO_PI,
    YB171_MASS,
)

AXES = ("x", "y", "z")
_AXIS_VEC = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}


class CrystalInstabilityError(ValueError):
    """The requested trap does not hold a linear two-ion crystal."""


@dataclass(frozen=True)
class TrapConfig:
    axial_freq: float
    radial_freq_y: float
    radial_freq_z: float
    ion_mass: float = YB171_MASS
    ion_count: int = 2
    magnetic_field: float = 5.57

    def __post_init__(self):
        if self.ion_count != 2:
            raise ValueError("only two-ion crystals are supported")
        for name in ("axial_freq", "radial_freq_y", "radial_freq_z", "ion_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def angular(self) -> dict[str, float]:
        return {
            "x": TWO_PI * self.axial_freq,
            "y": TWO_PI * self.radial_freq_y,
            "z": TWO_PI * self.radial_freq_z,
        }


@dataclass(frozen=True)
class Mode:
    axis: str
    label: str
    frequency: float
    participation: np.ndarray = field(repr=False)

    @property
    def name(self) -> str:
        return f"{self.axis}_{self.label}"


@dataclass(frozen=True)
class ModeSpectrum:
    modes: tuple[Mode, ...]
    positions: np.ndarray
    ion_mass: float

    def mode(self, axis: str, label: str) -> Mode:
        for m in self.modes:
            if m.axis == axis and m.label == label:
                return m
        raise KeyError(f"no mode {axis}/{label}")

    def index(self, name: str) -> int:
        for i, m in enumerate(self.modes):
            if m.name == name:
                return i
        raise KeyError(name)

    @property
    def gate_mode(self) -> Mode:
        return self.mode("x", "str")

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    def participation_matrix(self, axis: str) -> np.ndarray:
        """Columns are the com and stretch participation vectors on ``axis``."""
        return np.column_stack([self.mode(axis, "com").participation, self.mode(axis, "str").participation])

    def to_dict(self) -> dict:
        return {
            "ion_mass_kg": self.ion_mass,
            "equilibrium_positions_m": self.positions.tolist(),
            "modes": [
                {
                    "axis": m.axis,
                    "label": m.label,
                    "frequency_hz": m.frequency / TWO_PI,
                    "participation": m.participation.tolist(),
                }
                for m in self.modes
            ],
        }


def equilibrium_spacing(axial_angular: float, mass: float) -> float:
    return (ELEMENTARY_CHARGE**2 / (2 * np.pi * EPSILON_0 * mass * axial_angular**2)) ** (1.0 / 3.0)


def _sorted_eig(matrix):
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def normal_modes(trap: TrapConfig) -> ModeSpectrum:
    """Harmonic normal modes of the two-ion crystal.

    The Coulomb Hessian is diagonalised per principal axis in units of the
    axial frequency; the lower eigenvalue on every axis is the com mode for
    the axial direction and the stretch mode for the radial directions.
    """
    w = trap.angular
    wx = w["x"]
    for ax in ("y", "z"):
        if w[ax] <= wx:
            raise CrystalInstabilityError(
                f"radial frequency along {ax} ({w[ax] / TWO_PI:.4g} Hz) does not exceed the axial "
                f"frequency ({wx / TWO_PI:.4g} Hz); the two ions would not form a linear crystal"
            )
    d = equilibrium_spacing(wx, trap.ion_mass)
    positions = np.array([-d / 2, d / 2])

    # dimensionless positions in units of (e^2 / 4 pi eps0 m wx^2)^(1/3): |u1 - u2|^3 = 2
    inv_r3 = 0.5
    axial = np.array([[1 + 2 * inv_r3, -2 * inv_r3], [-2 * inv_r3, 1 + 2 * inv_r3]])
    modes = []
    for ax in AXES:
        if ax == "x":
            mat = axial
        else:
            r2 = (w[ax] / wx) ** 2
            mat = np.array([[r2 - inv_r3, inv_r3], [inv_r3, r2 - inv_r3]])
        vals, vecs = _sorted_eig(mat)
        for k in range(2):
            vec = vecs[:, k]
            symmetric = np.sign(vec[0]) == np.sign(vec[1])
            if symmetric:
                vec = vec * np.sign(vec[0])
                label = "com"
            else:
                vec = vec * np.sign(vec[1])
                label = "str"
            modes.append(Mode(ax, label, float(wx * np.sqrt(vals[k])), vec.copy()))
    modes.sort(key=lambda m: (AXES.index(m.axis), m.label != "com"))
    return ModeSpectrum(tuple(modes), positions, trap.ion_mass)


@dataclass(frozen=True)
class LambDickeSet:
    """Lamb-Dicke parameters ``eta[j, m]`` of ion ``j`` for mode ``m``.

    The mode's principal axis selects the component of ``delta_k``, so the
    ``[j][alpha][nu]`` indexing collapses onto the mode list of the spectrum.
    """

    eta: np.ndarray
    delta_k: np.ndarray
    mode_names: tuple[str, ...]

    def __getitem__(self, key):
        j, name = key
        return float(self.eta[j, self.mode_names.index(name)])

    @property
    def gate(self) -> float:
        """Magnitude of the axial-stretch parameter, |dk| sqrt(hbar / 4 m w_str) for axial dk."""
        return float(abs(self.eta[1, self.mode_names.index("x_str")]))


def lamb_dicke(spectrum: ModeSpectrum, delta_k) -> LambDickeSet:
    delta_k = np.asarray(delta_k, dtype=float)
    if delta_k.shape != (3,):
        raise ValueError("delta_k must be a 3-vector")
    if not np.linalg.norm(delta_k) > 0:
        raise ValueError("|delta_k| must be positive")
    eta = np.empty((2, len(spectrum.modes)))
    for m_idx, mode in enumerate(spectrum.modes):
        extent = np.sqrt(HBAR / (2 * spectrum.ion_mass * mode.frequency))
        eta[:, m_idx] = delta_k @ _AXIS_VEC[mode.axis] * mode.participation * extent
    return LambDickeSet(eta, delta_k.copy(), tuple(m.name for m in spectrum.modes))


def beam_wavevectors(wavelength: float = QUADRUPOLE_WAVELENGTH, geometry: str = "orthogonal"):
    """Wave-vectors of the two gate beams.

    ``orthogonal`` places the beams at 90 degrees with their difference along the
    trap axis; each beam's radial component is split equally between y and z.
    ``counter`` makes them counter-propagate along the trap axis.
    """
    k = TWO_PI / wavelength
    if geometry == "orthogonal":
        k_a = k * np.array([1 / np.sqrt(2), 0.5, 0.5])
        k_b = k * np.array([-1 / np.sqrt(2), 0.5, 0.5])
    elif geometry == "counter":
        k_a = k * np.array([1.0, 0.0, 0.0])
        k_b = k * np.array([-1.0, 0.0, 0.0])
    else:
        raise ValueError(f"unknown beam geometry {geometry!r}")
    return k_a, k_b


def phase_matched_positions(spectrum: ModeSpectrum, delta_k) -> np.ndarray:
    """Ion positions shifted so ``dk . (x2 - x1)`` is the nearest multiple of 2 pi.

    Models an experimenter trimming the axial confinement until the force is in
    phase on both ions; the mode frequencies are left untouched.
    """
    dk = float(np.asarray(delta_k)[0])
    if dk == 0:
        return spectrum.positions.copy()
    d = spectrum.spacing
    n = max(1, round(abs(dk) * d / TWO_PI))
    d_new = n * TWO_PI / abs(dk)
    return np.array([-d_new / 2, d_new / 2])
