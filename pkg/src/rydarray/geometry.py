"""Disc-shaped square lattice and the paraxial Gaussian probe mode."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModeError, ParameterError
from .units import WAVELENGTH, WAVENUMBER

# Default dipole orientation: circular polarization in the array plane.
# Makes the in-plane dipole-dipole kernel isotropic, |p.r_hat|^2 = 1/2.
CIRCULAR_POLARIZATION = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)

POLARIZATION_PRESETS = {
    "circular": CIRCULAR_POLARIZATION,
    "linear_x": np.array([1.0, 0.0, 0.0], dtype=complex),
    "linear_y": np.array([0.0, 1.0, 0.0], dtype=complex),
}


@dataclass(frozen=True)
class Lattice:
    """Atom positions (units of lambda, z = 0 plane) plus dipole orientation."""

    positions: np.ndarray          # (N, 3) float
    a: float                       # lattice constant
    diameter_sites: int
    polarization: np.ndarray       # complex unit 3-vector

    def __post_init__(self):
        pos = np.atleast_2d(np.array(self.positions, dtype=float, copy=True))
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.shape[1] != 3:
            raise ParameterError("lattice positions must be 3-vectors")
        pol = np.array(self.polarization, dtype=complex, copy=True).reshape(3)
        norm = np.linalg.norm(pol)
        if norm == 0:
            raise ParameterError("polarization vector must be nonzero")
        pos.setflags(write=False)
        pol = pol / norm
        pol.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "polarization", pol)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    def without_site(self, j: int) -> "Lattice":
        """Lattice with site j removed (an empty-site defect)."""
        keep = np.delete(self.positions, j, axis=0)
        return Lattice(keep, self.a, self.diameter_sites, self.polarization)


def resolve_polarization(value) -> np.ndarray:
    """Accept a preset name or an explicit complex 3-vector."""
    if isinstance(value, str):
        try:
            return POLARIZATION_PRESETS[value]
        except KeyError:
            raise ParameterError(
                f"unknown polarization preset {value!r}; "
                f"choose from {sorted(POLARIZATION_PRESETS)}"
            ) from None
    return np.asarray(value, dtype=complex).reshape(3)


def build_disc_lattice(diameter_sites: int, a: float, polarization=None) -> Lattice:
    """Square-lattice sites within a disc of diameter `diameter_sites` atoms.

    The disc center sits on a lattice site for odd diameters and on a
    plaquette center for even ones, so the site count along a principal
    axis equals `diameter_sites`.  Sites are ordered row-major (by y, then x).
    """
    if int(diameter_sites) != diameter_sites or diameter_sites < 1:
        raise ParameterError("diameter_sites must be a positive integer")
    if not (a > 0):
        raise ParameterError("lattice constant must be positive")
    ell = int(diameter_sites)
    # Integer arithmetic keeps the boundary test exact: with doubled
    # coordinates q = 2i + (ell odd? 0 : 1), membership is q_x^2 + q_y^2 <= ell^2,
    # and no site can land exactly on the boundary for either parity.
    parity = 0 if ell % 2 else 1
    reach = ell // 2 + 1
    rows = []
    for j in range(-reach, reach + 1):
        qy = 2 * j + parity
        for i in range(-reach, reach + 1):
            qx = 2 * i + parity
            if qx * qx + qy * qy <= ell * ell:
                rows.append((0.5 * a * qx, 0.5 * a * qy, 0.0))
    if polarization is None:
        polarization = CIRCULAR_POLARIZATION
    return Lattice(np.array(rows), a, ell, resolve_polarization(polarization))


@dataclass(frozen=True)
class ProbeMode:
    """Fundamental Gaussian beam, normalized so that the transverse integral
    of |E|^2 equals the beam power at every z."""

    power: float
    w0: float
    focus_z: float = 0.0

    def __post_init__(self):
        if not (self.power > 0):
            raise ParameterError("beam power must be positive")
        if not (self.w0 > 0):
            raise ParameterError("beam waist must be positive")

    @property
    def rayleigh_range(self) -> float:
        return np.pi * self.w0**2 / WAVELENGTH

    def width_squared(self, z) -> np.ndarray:
        zeta = np.asarray(z, dtype=float) - self.focus_z
        return self.w0**2 + (WAVELENGTH * zeta / (np.pi * self.w0)) ** 2


def probe_amplitude(mode: ProbeMode, r) -> np.ndarray:
    """Complex beam envelope at points r (shape (..., 3)).

    Waist at z = focus_z where the transverse phase is flat; away from focus
    the envelope carries the curvature and Gouy phases of the paraxial
    solution (the e^{ikz} carrier is left out).
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 1
    r = np.atleast_2d(r)
    rho2 = r[..., 0] ** 2 + r[..., 1] ** 2
    zeta = r[..., 2] - mode.focus_z
    zr = mode.rayleigh_range
    w2 = mode.w0**2 * (1.0 + (zeta / zr) ** 2)
    inv_radius = zeta / (zeta**2 + zr**2)        # 1/R(z), finite at focus
    gouy = np.arctan2(zeta, zr)
    amp = np.sqrt(2.0 * mode.power / np.pi) / np.sqrt(w2)
    phase = 0.5 * WAVENUMBER * rho2 * inv_radius - gouy
    out = amp * np.exp(-rho2 / w2) * np.exp(1j * phase)
    return out[0] if scalar else out


def defect_weights(lattice: Lattice, mode: ProbeMode) -> np.ndarray:
    """Sampling probabilities for an empty-site defect, p_j ~ |E(r_j)|^2."""
    if lattice.n_atoms == 0:
        raise ParameterError("defect weights need a nonempty lattice")
    intensity = np.abs(probe_amplitude(mode, lattice.positions)) ** 2
    total = intensity.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateModeError("probe field vanishes on every lattice site")
    return intensity / total
