"""Natural units: the probe transition fixes every scale (Gamma = c = lambda = 1)."""

import numpy as np

GAMMA = 1.0          # spontaneous decay rate of the probe transition
LIGHT_SPEED = 1.0
WAVELENGTH = 1.0
WAVENUMBER = 2.0 * np.pi / WAVELENGTH

# Coupling of a single dipole to the paraxial probe mode.  The value is fixed
# by energy conservation of the mode-projected input-output relations
# (R + T + L = 1 with L >= 0); it encodes the resonant scattering cross
# section 3*lambda^2/(2*pi) measured against the Gaussian mode area.
MODE_COUPLING = np.sqrt(3.0 * GAMMA * LIGHT_SPEED * WAVELENGTH**2 / (8.0 * np.pi))
