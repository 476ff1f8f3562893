"""Photon-mediated dipole-dipole couplings and collective mode parameters.

The coherent (J) and dissipative (Gamma) couplings come from the free-space
electromagnetic Green tensor contracted with the dipole orientation.  For a
(possibly complex) unit polarization p and separation direction r_hat the
contraction only enters through c2 = |p* . r_hat|^2, which reduces to cos^2
of the dipole angle for linear polarization and to 1/2 for circular in-plane
polarization with in-plane separations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateModeError, ParameterError
from .geometry import Lattice, ProbeMode, probe_amplitude
from .units import GAMMA, WAVENUMBER

PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CouplingMatrix:
    """Pairwise couplings in units of Gamma: J (zero diagonal) and G with
    G_ii = Gamma.  Both are real symmetric; G is positive semidefinite."""

    J: np.ndarray
    G: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.J.shape[0]

    def effective_single_excitation(self) -> np.ndarray:
        """A = -J - i G / 2, the undetuned single-excitation generator."""
        return -self.J - 0.5j * self.G

    def validate(self):
        J, G = self.J, self.G
        if J.shape != G.shape or J.shape[0] != J.shape[1]:
            raise DataError("coupling matrices must be square and congruent")
        if not np.allclose(J, J.T, atol=1e-12):
            raise DataError("J must be symmetric")
        if not np.allclose(G, G.T, atol=1e-12):
            raise DataError("G must be symmetric")
        if J.shape[0] and np.max(np.abs(np.diag(J))) > 0:
            raise DataError("J must have zero diagonal")
        if J.shape[0] and not np.allclose(np.diag(G), GAMMA, atol=1e-12):
            raise DataError("G must carry the single-atom rate on the diagonal")
        if J.shape[0]:
            lo = np.linalg.eigvalsh(G).min()
            if lo < -PSD_TOLERANCE * GAMMA:
                raise DataError(f"G is not positive semidefinite (min eig {lo:.3e})")


@dataclass(frozen=True)
class CollectiveParams:
    """Shift and emission rate of the drive-matched collective mode."""

    delta_c: float
    gamma_c: float


def _kernel(kr: np.ndarray, c2: np.ndarray):
    """Lehmberg-type functions of kr and c2 = |p* . r_hat|^2."""
    sin, cos = np.sin(kr), np.cos(kr)
    transverse = 1.0 - c2
    longitudinal = 1.0 - 3.0 * c2
    g = 1.5 * GAMMA * (
        transverse * sin / kr + longitudinal * (cos / kr**2 - sin / kr**3)
    )
    j = 0.75 * GAMMA * (
        -transverse * cos / kr + longitudinal * (sin / kr**2 + cos / kr**3)
    )
    return j, g


def pair_coupling(r_i, r_j, polarization) -> tuple[float, float]:
    """(J_ij, Gamma_ij) for two atoms; the i = j self-term is excluded."""
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    sep = r_i - r_j
    dist = np.linalg.norm(sep)
    if dist == 0.0:
        raise ParameterError("pair_coupling requires distinct positions")
    pol = np.asarray(polarization, dtype=complex)
    pol = pol / np.linalg.norm(pol)
    c2 = np.abs(np.dot(np.conj(pol), sep / dist)) ** 2
    j, g = _kernel(np.asarray(dist * WAVENUMBER), np.asarray(c2))
    return float(j), float(g)


def coupling_matrices(lattice: Lattice) -> CouplingMatrix:
    """Element-wise dipole kernel over all pairs; G_ii = Gamma, J_ii = 0."""
    n = lattice.n_atoms
    if n == 0:
        out = CouplingMatrix(np.zeros((0, 0)), np.zeros((0, 0)))
        return out
    pos = lattice.positions
    sep = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(sep, axis=-1)
    np.fill_diagonal(dist, 1.0)  # placeholder, overwritten below
    rhat = sep / dist[..., None]
    c2 = np.abs(np.tensordot(rhat, np.conj(lattice.polarization), axes=([-1], [0]))) ** 2
    j, g = _kernel(dist * WAVENUMBER, c2)
    np.fill_diagonal(j, 0.0)
    np.fill_diagonal(g, GAMMA)
    # symmetrize away rounding asymmetry from the pairwise evaluation
    j = 0.5 * (j + j.T)
    g = 0.5 * (g + g.T)
    out = CouplingMatrix(j, g)
    out.validate()
    return out


def collective_params(coupling: CouplingMatrix, lattice: Lattice, mode: ProbeMode) -> CollectiveParams:
    """Shift and linewidth of the collective mode matched to the probe.

    With v the normalized field profile over the sites and A = -J - iG/2,
    the mode eigenvalue is <v|A|v> = -delta_c - i*gamma_c/2: gamma_c is the
    collective emission rate and +delta_c the probe detuning at which the
    drive-matched resonance sits (the sign convention keeps both positive
    for a subwavelength array probed near its reflection optimum).
    """
    field = probe_amplitude(mode, lattice.positions)
    norm = np.linalg.norm(field)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateModeError("probe mode has no overlap with the lattice")
    v = field / norm
    val = np.vdot(v, coupling.effective_single_excitation() @ v)
    params = CollectiveParams(delta_c=float(-val.real), gamma_c=float(-2.0 * val.imag))
    if params.gamma_c <= 0:
        raise DegenerateModeError("collective mode has nonpositive emission rate")
    return params
