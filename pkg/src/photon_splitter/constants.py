"""Physical constants (SI, CODATA 2018) used by the package."""

import math

#: Planck constant, J s (exact since the 2019 SI redefinition).
PLANCK = 6.62607015e-34
#: Reduced Planck constant, J s.
HBAR = PLANCK / (2.0 * math.pi)
#: Vacuum electric permittivity, F/m.
EPSILON_0 = 8.8541878128e-12
#: Speed of light in vacuum, m/s (exact).
SPEED_OF_LIGHT = 299792458.0

CONSTANTS = {
    "planck": PLANCK,
    "hbar": HBAR,
    "epsilon_0": EPSILON_0,
    "speed_of_light": SPEED_OF_LIGHT,
}
