"""Single-excitation steady state: reflection/transmission spectra, EIT
windows, and the response to an empty-site defect."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dipoles import CouplingMatrix
from .errors import ConditioningError, ParameterError
from .geometry import Lattice, ProbeMode, defect_weights, probe_amplitude
from .hilbert import EffectiveOperator
from .units import GAMMA, LIGHT_SPEED, MODE_COUPLING

SOLVE_RTOL = 1e-10
REFINE_STEPS = 4


@dataclass
class SteadyAmplitudes:
    """Perturbative steady state per excitation sector (c0 ~ 1)."""

    c0: complex
    c1: np.ndarray
    c2: np.ndarray | None
    epsilon: float               # sqrt(P) drive reference

    def e_part(self, n_atoms: int) -> np.ndarray:
        return self.c1[:n_atoms]

    def s_part(self, n_atoms: int) -> np.ndarray:
        return self.c1[n_atoms:]


def _refined_solve(matrix, rhs, dense_solve=True):
    """Direct solve with iterative refinement to SOLVE_RTOL."""
    try:
        x = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"singular sector Hamiltonian: {exc}") from exc
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return x
    for _ in range(REFINE_STEPS):
        residual = rhs - matrix @ x
        if np.linalg.norm(residual) <= SOLVE_RTOL * scale:
            return x
        x = x + np.linalg.solve(matrix, residual)
    if np.linalg.norm(rhs - matrix @ x) > SOLVE_RTOL * scale:
        raise ConditioningError(
            "sector-1 solve did not reach the residual target",
            condition_estimate=float(np.linalg.cond(matrix)),
        )
    return x


def solve_linear_steady(op: EffectiveOperator, epsilon: float = 1.0) -> SteadyAmplitudes:
    """c1 = -H1^{-1} D01, with residual <= 1e-10 * ||D01||.

    With the control field off the Rydberg states decouple and stay empty,
    so the solve restricts to the e block (the full matrix would be
    singular through the inert s rows).
    """
    dim = op.H1.shape[0]
    if dim == 0:
        return SteadyAmplitudes(1.0, np.zeros(0, complex), None, epsilon)
    c1 = np.zeros(dim, dtype=complex)
    if op.control_rabi == 0.0:
        n = dim // 2
        c1[:n] = _refined_solve(op.H1[:n, :n], -op.D01[:n])
    else:
        c1[:] = _refined_solve(op.H1, -op.D01)
    return SteadyAmplitudes(1.0, c1, None, epsilon)


def mode_overlap_sum(amps: SteadyAmplitudes, lattice: Lattice, mode: ProbeMode) -> complex:
    """s = i g/(c P) sum_j E*(r_j) c1_{e_j}: the scattered amplitude projected
    onto the probe mode, normalized to the incident amplitude."""
    if not (mode.power > 0):
        raise ParameterError("beam power must be positive")
    n = lattice.n_atoms
    if n == 0:
        return 0.0 + 0.0j
    field = probe_amplitude(mode, lattice.positions)
    return 1j * MODE_COUPLING / (LIGHT_SPEED * mode.power) * np.vdot(field, amps.e_part(n))


def rtl_coefficients(amps: SteadyAmplitudes, lattice: Lattice, mode: ProbeMode):
    """(R, T, L) of the probe at leading order in the drive."""
    s = mode_overlap_sum(amps, lattice, mode)
    transmitted = abs(1.0 + s) ** 2
    reflected = abs(s) ** 2
    return reflected, transmitted, 1.0 - transmitted - reflected


def _es_hamiltonian(kernel_e, detuning, control_rabi, two_photon_detuning):
    """Sector-1 Hamiltonian from a precomputed e-exchange kernel."""
    n = kernel_e.shape[0]
    if control_rabi == 0.0:
        h = kernel_e + detuning * np.eye(n)
        return h, n
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, :n] = kernel_e + detuning * np.eye(n)
    h[n:, n:] = two_photon_detuning * np.eye(n)
    h[:n, n:] = -control_rabi * np.eye(n)
    h[n:, :n] = -control_rabi * np.eye(n)
    return h, n


def spectrum_scan(
    lattice: Lattice,
    mode: ProbeMode,
    coupling: CouplingMatrix,
    detuning_grid,
    control_rabi: float = 0.0,
    two_photon_offset: float = 0.0,
):
    """Rows (delta, R, T, L) over a probe-frequency scan.

    Scanning the probe frequency shifts the one- and two-photon detunings
    together: at probe detuning delta the Rydberg state sits at
    delta - two_photon_offset, so the transparency window is centered at
    delta = two_photon_offset.
    """
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    if detuning_grid.size == 0:
        raise ParameterError("empty detuning grid")
    field = probe_amplitude(mode, lattice.positions)
    b = MODE_COUPLING * field
    kernel = coupling.effective_single_excitation()
    np.fill_diagonal(kernel, -0.5j * GAMMA)
    rows = []
    for delta in detuning_grid:
        h, n = _es_hamiltonian(kernel, delta, control_rabi, delta - two_photon_offset)
        rhs = np.zeros(h.shape[0], dtype=complex)
        rhs[:n] = b
        try:
            c1 = _refined_solve(h, rhs)
        except ConditioningError as exc:
            raise ConditioningError(f"scan point delta={delta:g}: {exc}") from exc
        s = 1j * MODE_COUPLING / (LIGHT_SPEED * mode.power) * np.vdot(field, c1[:n])
        transmitted = abs(1.0 + s) ** 2
        reflected = abs(s) ** 2
        rows.append((float(delta), reflected, transmitted, 1.0 - transmitted - reflected))
    return np.array(rows)


def defect_average(
    lattice: Lattice,
    mode: ProbeMode,
    coupling: CouplingMatrix,
    detuning: float,
):
    """Average change of (R, T, L) from one empty site sampled with
    probability p_j ~ |E(r_j)|^2 (two-level response, no control field)."""
    n = lattice.n_atoms
    if n < 2:
        raise ParameterError("defect averaging needs at least two atoms")
    weights = defect_weights(lattice, mode)
    field = probe_amplitude(mode, lattice.positions)
    b = MODE_COUPLING * field
    kernel = coupling.effective_single_excitation()
    np.fill_diagonal(kernel, -0.5j * GAMMA)
    h_full = kernel + detuning * np.eye(n)
    prefactor = 1j * MODE_COUPLING / (LIGHT_SPEED * mode.power)

    def rtl_from(h, bb, ff):
        c1 = _refined_solve(h, bb)
        s = prefactor * np.vdot(ff, c1)
        transmitted = abs(1.0 + s) ** 2
        reflected = abs(s) ** 2
        return np.array([reflected, transmitted, 1.0 - transmitted - reflected])

    base = rtl_from(h_full, b, field)
    change = np.zeros(3)
    for j in range(n):
        keep = np.arange(n) != j
        sub = rtl_from(h_full[np.ix_(keep, keep)], b[keep], field[keep])
        change += weights[j] * (sub - base)
    return change[0], change[1], change[2]
