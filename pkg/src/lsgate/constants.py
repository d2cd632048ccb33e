"""Physical constants and species defaults used throughout the package."""

from scipy import constants as _c

HBAR = _c.hbar
ELEMENTARY_CHARGE = _c.e
EPSILON_0 = _c.epsilon_0
ATOMIC_MASS = _c.physical_constants["atomic mass constant"][0]
TWO_PI = 2.0 * _c.pi

YB171_MASS = 171 * ATOMIC_MASS
# S1/2 -> D3/2 quadrupole line; not stated with the gate parameters, so only a default.
QUADRUPOLE_WAVELENGTH = 435.5e-9
# D3/2 Zeeman splitting between the m=0 and m=+-1 sublevels of F=1, per Gauss.
ZEEMAN_HZ_PER_GAUSS = 1.4e6
D32_LIFETIME = 52.7e-3
