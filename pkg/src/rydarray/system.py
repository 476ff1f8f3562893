"""Wiring helper: lattice + beam + drive parameters -> assembled operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dipoles import CouplingMatrix, coupling_matrices
from .geometry import Lattice, ProbeMode, probe_amplitude
from .hilbert import (
    EffectiveOperator,
    TruncatedBasis,
    assemble_effective,
    enumerate_basis,
    mode_lowering_operator,
)
from .units import LIGHT_SPEED, MODE_COUPLING


@dataclass(frozen=True)
class ArraySystem:
    """Everything downstream solvers need for one parameter point."""

    lattice: Lattice
    mode: ProbeMode
    coupling: CouplingMatrix
    basis: TruncatedBasis
    operator: EffectiveOperator
    field: np.ndarray            # E(r_j)
    drive: np.ndarray            # b_j = g E(r_j)

    @property
    def n_atoms(self) -> int:
        return self.lattice.n_atoms

    def output_operator(self, channel: str) -> sp.csr_matrix:
        """Photon operator of the transmitted ("fwd") or reflected ("bwd")
        mode on the truncated space: a = delta_fwd * sqrt(P) + i g/(c sqrt(P))
        * sum_j E*(r_j) sigma_ge^(j)."""
        if channel not in ("fwd", "bwd"):
            raise ValueError("channel must be 'fwd' or 'bwd'")
        scale = 1j * MODE_COUPLING / (LIGHT_SPEED * np.sqrt(self.mode.power))
        out = scale * mode_lowering_operator(self.basis, np.conj(self.field))
        if channel == "fwd":
            out = out + np.sqrt(self.mode.power) * sp.identity(
                self.basis.dim_total, dtype=complex, format="csr"
            )
        return out.tocsr()


def build_system(
    lattice: Lattice,
    mode: ProbeMode,
    detuning: float,
    control_rabi: float = 0.0,
    two_photon_detuning: float = 0.0,
    blockade: str = "full",
    c6: float = 0.0,
    rydberg_dephasing: float = 0.0,
    coupling: CouplingMatrix | None = None,
    basis: TruncatedBasis | None = None,
) -> ArraySystem:
    if coupling is None:
        coupling = coupling_matrices(lattice)
    if basis is None:
        basis = enumerate_basis(lattice.n_atoms, blockade)
    field = probe_amplitude(mode, lattice.positions)
    drive = MODE_COUPLING * field
    distances = None
    if basis.blockade_mode == "vdw" and c6:
        sep = lattice.positions[:, None, :] - lattice.positions[None, :, :]
        distances = np.linalg.norm(sep, axis=-1)
        np.fill_diagonal(distances, np.inf)
    operator = assemble_effective(
        basis,
        coupling,
        drive,
        detuning=detuning,
        control_rabi=control_rabi,
        two_photon_detuning=two_photon_detuning,
        c6=c6,
        pair_distances=distances,
        rydberg_dephasing=rydberg_dephasing,
    )
    return ArraySystem(
        lattice=lattice,
        mode=mode,
        coupling=coupling,
        basis=basis,
        operator=operator,
        field=field,
        drive=drive,
    )
