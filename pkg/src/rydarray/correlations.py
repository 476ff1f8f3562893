"""Two-excitation steady states and two-time photon statistics.

The pair correlations are evaluated by quantum regression on the truncated
space: a photon detection applies the output-mode operator to the steady
state, the conditional state evolves under the full effective generator
(drive included), and the flux of the second channel is read off the
evolved state.  The evolution is numerically stabilized by propagating the
deviation from the re-prepared steady state, which decays to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConditioningError, ParameterError
from .linear import SOLVE_RTOL, SteadyAmplitudes
from .system import ArraySystem

DENSE_SECTOR2_CUTOFF = 900
CHANNELS = ("fwd", "bwd")


@dataclass
class CorrelationRecord:
    """Sampled two-time statistics for one parameter point."""

    tau_grid: np.ndarray
    g2: dict                       # (alpha, beta) -> array over tau
    g1: dict                       # alpha -> complex array over tau
    rho2: dict = field(default_factory=dict)   # (alpha, beta) -> unnormalized numerators
    control_rabi: float = 0.0
    delay: float = 0.0
    fluxes: dict = field(default_factory=dict)


def state_vector(system: ArraySystem, amps: SteadyAmplitudes) -> np.ndarray:
    """Stack (c0, c1, c2) into one vector on the truncated space."""
    dim2 = system.basis.dim2
    c2 = amps.c2 if amps.c2 is not None else np.zeros(dim2, dtype=complex)
    return np.concatenate([[amps.c0], amps.c1, c2])


def solve_two_excitation_steady(
    system: ArraySystem, amps: SteadyAmplitudes
) -> SteadyAmplitudes:
    """c2 = -H2^{-1} (D12 c1) with relative residual <= 1e-10."""
    if amps.c1 is None:
        raise ParameterError("sector-1 amplitudes must be solved first")
    op = system.operator
    basis = system.basis
    dim2 = basis.dim2
    if dim2 == 0:
        amps.c2 = np.zeros(0, dtype=complex)
        return amps
    rhs_full = -(op.D12 @ amps.c1)
    # With the control off only doubly-e states are driven and coupled; the
    # s-containing rows would make the block singular, so restrict.
    if op.control_rabi == 0.0:
        active = np.arange(len(basis.pairs_ee))
    else:
        active = np.arange(dim2)
    rhs = rhs_full[active]
    scale = np.linalg.norm(rhs)
    amps.c2 = np.zeros(dim2, dtype=complex)
    if scale == 0.0:
        return amps
    h2 = op.H2[active][:, active] if len(active) < dim2 else op.H2
    if len(active) <= DENSE_SECTOR2_CUTOFF:
        dense = h2.toarray()
        try:
            c2 = np.linalg.solve(dense, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"singular two-excitation block: {exc}") from exc
        residual = np.linalg.norm(dense @ c2 - rhs)
        if residual > SOLVE_RTOL * scale:
            c2 += np.linalg.solve(dense, rhs - dense @ c2)
            residual = np.linalg.norm(dense @ c2 - rhs)
    else:
        lu = spla.splu(h2.tocsc())
        c2 = lu.solve(rhs)
        residual = np.linalg.norm(h2 @ c2 - rhs)
        if residual > SOLVE_RTOL * scale:
            c2 += lu.solve(rhs - h2 @ c2)
            residual = np.linalg.norm(h2 @ c2 - rhs)
    if residual > SOLVE_RTOL * scale:
        raise ConditioningError(
            "two-excitation solve did not reach the residual target"
        )
    amps.c2[active] = c2
    return amps


def output_apply(system: ArraySystem, channel: str, state: np.ndarray) -> np.ndarray:
    """Apply the output-mode photon operator of `channel` to a state vector."""
    return system.output_operator(channel) @ state


def channel_fluxes(system: ArraySystem, steady: np.ndarray) -> dict:
    """Unconditional photon fluxes <a^dag a> per channel from the truncated
    steady state (the g2 denominators)."""
    return {
        ch: float(np.linalg.norm(output_apply(system, ch, steady)) ** 2)
        for ch in CHANNELS
    }


def _propagate_on_grid(generator: sp.csr_matrix, state: np.ndarray, tau_grid: np.ndarray):
    """Yield the state at each tau of a sorted grid, carried forward."""
    current = state.astype(complex)
    prev = 0.0
    for tau in tau_grid:
        step = tau - prev
        if step > 0:
            current = spla.expm_multiply((-1j * step) * generator, current)
        prev = tau
        yield current


def correlation_pair(
    system: ArraySystem,
    amps: SteadyAmplitudes,
    first: str,
    tau_grid: np.ndarray,
):
    """Regression sweep after one detection in channel `first`.

    Returns (numerators, g1_numerator) with numerators[beta][k] =
    <a_first^dag(0) a_beta^dag(tau_k) a_beta(tau_k) a_first(0)> and the
    first-order correlator u^dag phi(tau) for g1.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(tau_grid) < 0) or np.any(tau_grid < 0):
        raise ParameterError("tau grid must be sorted and nonnegative")
    steady = state_vector(system, amps)
    conditional = output_apply(system, first, steady)
    ground_amp = conditional[0]
    deviation = conditional - ground_amp * steady
    generator = system.operator.total_generator()
    out_ops = {ch: system.output_operator(ch) for ch in CHANNELS}
    numerators = {ch: np.empty(len(tau_grid)) for ch in CHANNELS}
    g1_num = np.empty(len(tau_grid), dtype=complex)
    for k, dev in enumerate(_propagate_on_grid(generator, deviation, tau_grid)):
        phi = ground_amp * steady + dev
        for ch in CHANNELS:
            numerators[ch][k] = np.linalg.norm(out_ops[ch] @ phi) ** 2
        g1_num[k] = np.vdot(conditional, phi)
    return numerators, g1_num


def correlation_g2(
    system: ArraySystem,
    amps: SteadyAmplitudes,
    channels,
    tau_grid,
) -> CorrelationRecord:
    """Normalized pair correlations g2_{alpha beta}(tau) for channel pairs.

    `channels` is an iterable of (alpha, beta) with alpha the first
    detection; one regression sweep per distinct alpha covers both betas.
    """
    channels = [tuple(c) for c in channels]
    for alpha, beta in channels:
        if alpha not in CHANNELS or beta not in CHANNELS:
            raise ParameterError(f"unknown channel pair {(alpha, beta)}")
    if amps.c2 is None:
        solve_two_excitation_steady(system, amps)
    tau_grid = np.asarray(tau_grid, dtype=float)
    steady = state_vector(system, amps)
    fluxes = channel_fluxes(system, steady)
    record = CorrelationRecord(
        tau_grid=tau_grid,
        g2={},
        g1={},
        control_rabi=system.operator.control_rabi,
        fluxes=fluxes,
    )
    for alpha in {a for a, _ in channels}:
        numerators, g1_num = correlation_pair(system, amps, alpha, tau_grid)
        record.g1[alpha] = g1_num / fluxes[alpha]
        for a, beta in channels:
            if a != alpha:
                continue
            record.rho2[(alpha, beta)] = numerators[beta]
            record.g2[(alpha, beta)] = numerators[beta] / (fluxes[alpha] * fluxes[beta])
    return record


def correlation_g1(
    system: ArraySystem,
    amps: SteadyAmplitudes,
    channel: str,
    tau_grid,
) -> np.ndarray:
    """First-order coherence g1_alpha(tau), normalized to 1 at tau = 0."""
    if amps.c2 is None:
        solve_two_excitation_steady(system, amps)
    tau_grid = np.asarray(tau_grid, dtype=float)
    steady = state_vector(system, amps)
    flux = channel_fluxes(system, steady)[channel]
    _, g1_num = correlation_pair(system, amps, channel, tau_grid)
    return g1_num / flux


def delay_time(gamma_c: float, control_rabi: float) -> float:
    """EIT group delay of the transmitted light."""
    if control_rabi <= 0:
        raise ParameterError("delay time needs a positive control coupling")
    return gamma_c / (2.0 * control_rabi**2)


def default_tau_grid(delay: float, n_points: int = 60, span: float = 10.0) -> np.ndarray:
    """tau = 0 plus log-spaced points out to span * delay."""
    if delay <= 0:
        raise ParameterError("delay must be positive")
    tail = np.geomspace(delay / 100.0, span * delay, n_points - 1)
    return np.concatenate([[0.0], tail])


def collapse_check(curves) -> float:
    """Largest pairwise RMS difference between rescaled correlation curves.

    `curves` is a list of (tau_over_delay, values); each is interpolated
    onto the shared overlap grid before comparison.
    """
    curves = [(np.asarray(x, float), np.asarray(y, float)) for x, y in curves]
    if len(curves) < 2:
        raise ParameterError("collapse check needs at least two curves")
    lo = max(x.min() for x, _ in curves)
    hi = min(x.max() for x, _ in curves)
    if hi <= lo:
        raise ParameterError("rescaled curves do not overlap")
    grid = np.linspace(lo, hi, 200)
    resampled = [np.interp(grid, x, y) for x, y in curves]
    worst = 0.0
    for i in range(len(resampled)):
        for j in range(i + 1, len(resampled)):
            rms = np.sqrt(np.mean((resampled[i] - resampled[j]) ** 2))
            worst = max(worst, rms)
    return worst


def two_photon_density(
    record: CorrelationRecord,
    z_grid: np.ndarray | None = None,
) -> dict:
    """Spatial pair densities rho_{alpha beta}(z, z') with z = c tau.

    Both coordinates measure distance from the array along the respective
    propagation direction; the photon farther out was emitted earlier, so
    the entry at (z, z') is the time-ordered numerator at |z - z'|.
    """
    if z_grid is None:
        z_grid = record.tau_grid
    z_grid = np.asarray(z_grid, dtype=float)
    sep = np.abs(z_grid[:, None] - z_grid[None, :])
    maps = {}
    for (alpha, beta), values in record.rho2.items():
        forward_order = np.interp(sep, record.tau_grid, values)
        reverse = record.rho2.get((beta, alpha))
        if reverse is None:
            maps[(alpha, beta)] = forward_order
            continue
        reverse_order = np.interp(sep, record.tau_grid, reverse)
        # z >= z': the alpha photon (at z) was emitted first
        z_ge = z_grid[:, None] >= z_grid[None, :]
        maps[(alpha, beta)] = np.where(z_ge, forward_order, reverse_order)
    return {"z_grid": z_grid, "maps": maps}
