"""Optical response of two-dimensional Rydberg-atom arrays under EIT.

Linear reflection/transmission spectra, empty-site defect response, and
two-time photon correlations of a weakly driven disc-shaped array with
photon-mediated dipole interactions and a Rydberg blockade.
"""

__version__ = "0.1.0"

from .geometry import (
    CIRCULAR_POLARIZATION,
    Lattice,
    ProbeMode,
    build_disc_lattice,
    defect_weights,
    probe_amplitude,
)
from .dipoles import (
    CollectiveParams,
    CouplingMatrix,
    collective_params,
    coupling_matrices,
    pair_coupling,
)
from .hilbert import (
    EffectiveOperator,
    TruncatedBasis,
    assemble_effective,
    enumerate_basis,
)
from .linear import (
    SteadyAmplitudes,
    defect_average,
    rtl_coefficients,
    solve_linear_steady,
    spectrum_scan,
)
from .correlations import (
    CorrelationRecord,
    collapse_check,
    correlation_g1,
    correlation_g2,
    delay_time,
    output_apply,
    solve_two_excitation_steady,
    two_photon_density,
)
from .system import ArraySystem, build_system
from .validation import (
    JumpChannels,
    TrajectoryRecord,
    dense_master_oracle,
    diagonalize_dissipator,
    mcwf_evolve,
)
from .config import ScenarioConfig, dump_config, load_config
from .units import GAMMA, LIGHT_SPEED, MODE_COUPLING, WAVELENGTH, WAVENUMBER

__all__ = [
    "ArraySystem",
    "CIRCULAR_POLARIZATION",
    "CollectiveParams",
    "CorrelationRecord",
    "CouplingMatrix",
    "EffectiveOperator",
    "GAMMA",
    "JumpChannels",
    "Lattice",
    "LIGHT_SPEED",
    "MODE_COUPLING",
    "ProbeMode",
    "ScenarioConfig",
    "SteadyAmplitudes",
    "TrajectoryRecord",
    "TruncatedBasis",
    "WAVELENGTH",
    "WAVENUMBER",
    "assemble_effective",
    "build_disc_lattice",
    "build_system",
    "collapse_check",
    "collective_params",
    "correlation_g1",
    "correlation_g2",
    "coupling_matrices",
    "defect_average",
    "defect_weights",
    "delay_time",
    "dense_master_oracle",
    "diagonalize_dissipator",
    "dump_config",
    "enumerate_basis",
    "load_config",
    "mcwf_evolve",
    "output_apply",
    "pair_coupling",
    "probe_amplitude",
    "rtl_coefficients",
    "solve_linear_steady",
    "solve_two_excitation_steady",
    "spectrum_scan",
    "two_photon_density",
]
