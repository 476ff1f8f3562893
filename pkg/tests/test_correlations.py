import numpy as np
import pytest

from rydarray import (
    ProbeMode,
    build_disc_lattice,
    build_system,
    collapse_check,
    collective_params,
    correlation_g1,
    correlation_g2,
    coupling_matrices,
    delay_time,
    dense_master_oracle,
    output_apply,
    rtl_coefficients,
    solve_linear_steady,
    solve_two_excitation_steady,
    two_photon_density,
)
from rydarray.correlations import channel_fluxes, default_tau_grid, state_vector
from rydarray.errors import ParameterError
from rydarray.geometry import CIRCULAR_POLARIZATION, Lattice
from rydarray.units import MODE_COUPLING


def pair_system(power=1e-6, omega=0.4, delta=0.1, delta2=-0.15, blockade="off", c6=0.0):
    positions = np.array([[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]])
    lattice = Lattice(positions, 0.6, 2, CIRCULAR_POLARIZATION)
    mode = ProbeMode(power=power, w0=1.5)
    system = build_system(
        lattice, mode, detuning=delta, control_rabi=omega,
        two_photon_detuning=delta2, blockade=blockade, c6=c6,
    )
    amps = solve_linear_steady(system.operator)
    solve_two_excitation_steady(system, amps)
    return lattice, mode, system, amps


class TestTwoExcitationSteady:
    def test_unblockaded_strong_control_factorizes(self):
        # doubly-Rydberg amplitudes approach the dark-state product b_i b_j / Om^2
        lattice = build_disc_lattice(3, 0.8)
        omega = 60.0
        mode = ProbeMode(power=1e-6, w0=1.5)
        system = build_system(
            lattice, mode, detuning=0.1, control_rabi=omega,
            two_photon_detuning=0.0, blockade="off",
        )
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        basis = system.basis
        b = system.drive
        for (i, j) in basis.pairs_ss:
            idx = basis.index_ss[i, j]
            product = b[i] * b[j] / omega**2
            assert amps.c2[idx] == pytest.approx(product, rel=0.02)

    def test_full_blockade_removes_double_rydberg(self):
        lattice = build_disc_lattice(3, 0.8)
        mode = ProbeMode(power=1e-6, w0=1.5)
        system = build_system(
            lattice, mode, detuning=0.05, control_rabi=0.5, blockade="full"
        )
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        assert len(system.basis.pairs_ss) == 0
        assert len(amps.c2) == system.basis.dim2

    def test_amplitudes_scale_quadratically_with_drive(self, disc6, coupling6):
        norms = []
        for eps in (1e-3, 5e-4):
            mode = ProbeMode(power=eps**2, w0=1.7)
            system = build_system(disc6, mode, detuning=0.05, control_rabi=0.3,
                                  coupling=coupling6)
            amps = solve_linear_steady(system.operator)
            solve_two_excitation_steady(system, amps)
            norms.append((np.linalg.norm(amps.c1), np.linalg.norm(amps.c2)))
        assert norms[0][0] / norms[1][0] == pytest.approx(2.0, rel=1e-9)
        assert norms[0][1] / norms[1][1] == pytest.approx(4.0, rel=1e-9)

    def test_steady_state_residual(self, disc6, coupling6):
        mode = ProbeMode(power=1e-6, w0=1.7)
        system = build_system(disc6, mode, detuning=0.05, control_rabi=0.3,
                              coupling=coupling6)
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        rhs = -(system.operator.D12 @ amps.c1)
        residual = np.linalg.norm(system.operator.H2 @ amps.c2 - rhs)
        assert residual <= 1e-10 * np.linalg.norm(rhs)


class TestOutputApply:
    def test_vacuum_passthrough(self):
        lattice, mode, system, _ = pair_system()[0], None, None, None
        # rebuilt explicitly for a pure ground state
        lattice, mode, system, _ = pair_system()
        ground = np.zeros(system.basis.dim_total, dtype=complex)
        ground[0] = 1.0
        out = output_apply(system, "fwd", ground)
        assert out[0] == pytest.approx(np.sqrt(mode.power))
        assert np.allclose(out[1:], 0.0)

    def test_reflected_component_from_linear_state(self):
        lattice, mode, system, amps = pair_system()
        linear_only = state_vector(
            system, type(amps)(amps.c0, amps.c1, np.zeros_like(amps.c2), amps.epsilon)
        )
        out = output_apply(system, "bwd", linear_only)
        n = lattice.n_atoms
        field = system.field
        expected = (
            1j * MODE_COUPLING / np.sqrt(mode.power) * np.vdot(field, amps.c1[:n])
        )
        assert out[0] == pytest.approx(expected, rel=1e-12)

    def test_reflected_flux_equals_reflectivity(self):
        lattice, mode, system, amps = pair_system(omega=0.0, delta2=0.0)
        steady = state_vector(system, amps)
        flux = np.linalg.norm(output_apply(system, "bwd", steady)) ** 2
        big_r, _, _ = rtl_coefficients(amps, lattice, mode)
        assert flux / mode.power == pytest.approx(big_r, rel=1e-4)


class TestAgainstDenseOracle:
    def test_two_atom_all_channels(self, pair_chain):
        # blockade via a strong pair shift; moderate drive keeps the dense
        # oracle far from its double-precision floor
        lattice, coupling = pair_chain
        c6 = 40.0 * 0.6**6
        mode = ProbeMode(power=1e-6, w0=1.5)
        system = build_system(
            lattice, mode, detuning=0.1, control_rabi=0.4,
            two_photon_detuning=-0.15, blockade="vdw", c6=c6, coupling=coupling,
        )
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        taus = np.array([0.0, 0.5, 2.0])
        pairs = [("fwd", "fwd"), ("bwd", "bwd"), ("fwd", "bwd"), ("bwd", "fwd")]
        record = correlation_g2(system, amps, pairs, taus)
        dist = np.array([[np.inf, 0.6], [0.6, np.inf]])
        oracle = dense_master_oracle(
            lattice, mode, coupling, detuning=0.1, control_rabi=0.4,
            two_photon_detuning=-0.15, vdw_shifts=c6 / dist**6,
            tau_grid=taus, channel_pairs=pairs, g1_channels=("fwd", "bwd"),
        )
        for pair in pairs:
            got, want = record.g2[pair], oracle.g2[pair]
            assert np.allclose(got, want, rtol=1e-3)
        # forward channels agree much more tightly; the reflected flux is
        # second order in the drive and saturates first
        assert np.allclose(record.g2[("fwd", "fwd")],
                           oracle.g2[("fwd", "fwd")], rtol=2e-5)

    def test_converges_to_oracle_with_weakening_drive(self, pair_chain):
        lattice, coupling = pair_chain
        errors = []
        for power in (4e-5, 4e-6):
            mode = ProbeMode(power=power, w0=1.5)
            system = build_system(
                lattice, mode, detuning=0.1, control_rabi=0.4,
                two_photon_detuning=-0.15, blockade="off", coupling=coupling,
            )
            amps = solve_linear_steady(system.operator)
            solve_two_excitation_steady(system, amps)
            taus = np.array([0.0, 1.0])
            record = correlation_g2(system, amps, [("bwd", "bwd")], taus)
            oracle = dense_master_oracle(
                lattice, mode, coupling, detuning=0.1, control_rabi=0.4,
                two_photon_detuning=-0.15, tau_grid=taus,
                channel_pairs=[("bwd", "bwd")],
            )
            err = np.max(np.abs(record.g2[("bwd", "bwd")] - oracle.g2[("bwd", "bwd")])
                         / np.abs(oracle.g2[("bwd", "bwd")]))
            errors.append(err)
        assert errors[1] < errors[0]
        assert errors[1] < 1e-4


class TestCorrelationShapes:
    def test_g2_nonnegative_and_settles_to_one(self, disc6, coupling6):
        mode = ProbeMode(power=1e-6, w0=1.7)
        omega = 0.1
        system = build_system(disc6, mode, detuning=0.05, control_rabi=omega,
                              coupling=coupling6)
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        gamma_c = collective_params(coupling6, disc6, mode).gamma_c
        td = delay_time(gamma_c, omega)
        taus = np.concatenate([[0.0], np.geomspace(td / 10, 20 * td, 24)])
        record = correlation_g2(system, amps, [("fwd", "fwd")], taus)
        values = record.g2[("fwd", "fwd")]
        assert np.all(values >= 0)
        assert values[-1] == pytest.approx(1.0, abs=0.02)

    def test_g2_curves_independent_of_drive_strength(self, pair_chain):
        lattice, coupling = pair_chain
        curves = []
        for power in (1e-8, 2.5e-9):
            mode = ProbeMode(power=power, w0=1.5)
            system = build_system(
                lattice, mode, detuning=0.1, control_rabi=0.4,
                two_photon_detuning=-0.15, blockade="off", coupling=coupling,
            )
            amps = solve_linear_steady(system.operator)
            solve_two_excitation_steady(system, amps)
            record = correlation_g2(
                system, amps,
                [("fwd", "fwd"), ("bwd", "bwd")], np.array([0.0, 0.4, 1.2]),
            )
            curves.append(record)
        for pair in (("fwd", "fwd"), ("bwd", "bwd")):
            assert np.allclose(curves[0].g2[pair], curves[1].g2[pair], rtol=1e-6)

    def test_g1_normalized_and_coherent(self, disc6, coupling6):
        mode = ProbeMode(power=1e-6, w0=1.7)
        omega = 0.1
        system = build_system(disc6, mode, detuning=0.05, control_rabi=omega,
                              coupling=coupling6)
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        gamma_c = collective_params(coupling6, disc6, mode).gamma_c
        td = delay_time(gamma_c, omega)
        taus = np.array([0.0, td / 3, td])
        g1 = correlation_g1(system, amps, "fwd", taus)
        assert abs(g1[0]) == pytest.approx(1.0, abs=1e-12)
        # transmitted light stays coherent over the delay window
        assert np.all(np.abs(g1) > 0.9)

    def test_empty_lattice_is_fully_coherent(self):
        lattice = Lattice(np.zeros((0, 3)), 0.75, 0, CIRCULAR_POLARIZATION)
        mode = ProbeMode(power=1e-6, w0=2.0)
        system = build_system(lattice, mode, detuning=0.0)
        amps = solve_linear_steady(system.operator)
        g1 = correlation_g1(system, amps, "fwd", np.array([0.0, 2.0, 10.0]))
        assert np.allclose(g1, 1.0, atol=1e-14)

    def test_heralded_emission_nearly_symmetric(self, disc6, coupling6):
        # after a reflected detection at full blockade and strong two-level
        # reflection, conditional forward and backward fluxes agree
        mode = ProbeMode(power=1e-6, w0=1.7)
        system = build_system(disc6, mode, detuning=0.05, control_rabi=0.05,
                              coupling=coupling6)
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        record = correlation_g2(
            system, amps, [("bwd", "fwd"), ("bwd", "bwd")], np.array([0.0])
        )
        fwd = record.rho2[("bwd", "fwd")][0]
        bwd = record.rho2[("bwd", "bwd")][0]
        assert fwd == pytest.approx(bwd, rel=0.10)


class TestSpatialDensities:
    def test_counterpropagating_symmetry_and_positivity(self, pair_chain):
        lattice, coupling = pair_chain
        mode = ProbeMode(power=1e-6, w0=1.5)
        system = build_system(
            lattice, mode, detuning=0.1, control_rabi=0.4,
            two_photon_detuning=-0.15, blockade="off", coupling=coupling,
        )
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        taus = np.linspace(0.0, 3.0, 13)
        record = correlation_g2(
            system, amps,
            [("fwd", "bwd"), ("bwd", "fwd"), ("bwd", "bwd")], taus,
        )
        rho = two_photon_density(record)
        fwd_bwd = rho["maps"][("fwd", "bwd")]
        bwd_fwd = rho["maps"][("bwd", "fwd")]
        assert np.allclose(fwd_bwd, bwd_fwd.T, atol=1e-10 * fwd_bwd.max())
        for grid in rho["maps"].values():
            assert np.all(grid >= 0)

    def test_reroutes_join_at_the_array_plane(self, disc6, coupling6):
        # at strong blockade the counter-propagating density at the plane
        # joins the doubly-reflected one
        mode = ProbeMode(power=1e-6, w0=1.7)
        system = build_system(disc6, mode, detuning=0.05, control_rabi=0.05,
                              coupling=coupling6)
        amps = solve_linear_steady(system.operator)
        solve_two_excitation_steady(system, amps)
        taus = np.linspace(0.0, 2.0, 5)
        record = correlation_g2(
            system, amps, [("bwd", "fwd"), ("bwd", "bwd")], taus
        )
        assert record.rho2[("bwd", "fwd")][0] == pytest.approx(
            record.rho2[("bwd", "bwd")][0], rel=0.10
        )


class TestDelayAndCollapse:
    def test_delay_time_values(self):
        assert delay_time(2.0, 1.0) == pytest.approx(1.0)
        assert delay_time(2.0, 2.0) == pytest.approx(0.25)   # doubling quarters it
        with pytest.raises(ParameterError):
            delay_time(2.0, 0.0)

    def test_default_grid_shape(self):
        grid = default_tau_grid(3.0)
        assert len(grid) == 60
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(30.0)
        assert np.all(np.diff(grid) > 0)

    def test_slow_control_correlations_collapse(self, disc6, coupling6):
        # rescaling tau by the group delay collapses the pair correlations
        # in the narrow-window regime
        mode = ProbeMode(power=1e-6, w0=1.7)
        gamma_c = collective_params(coupling6, disc6, mode).gamma_c
        curves = []
        for omega in (0.03, 0.05, 0.08):
            td = delay_time(gamma_c, omega)
            taus = np.concatenate([[0.0], np.geomspace(td / 50, 5 * td, 25)])
            system = build_system(disc6, mode, detuning=0.05, control_rabi=omega,
                                  coupling=coupling6)
            amps = solve_linear_steady(system.operator)
            solve_two_excitation_steady(system, amps)
            record = correlation_g2(system, amps, [("fwd", "fwd")], taus)
            curves.append((taus / td, record.g2[("fwd", "fwd")]))
        assert collapse_check(curves) < 0.15

    def test_collapse_check_flags_mismatched_curves(self):
        x = np.linspace(0, 5, 50)
        same = [(x, np.exp(-x)), (x, np.exp(-x))]
        assert collapse_check(same) == 0.0
        different = [(x, np.exp(-x)), (x, np.exp(-x / 4))]
        assert collapse_check(different) > 0.15
        with pytest.raises(ParameterError):
            collapse_check([(x, np.exp(-x))])
