"""Independent cross-checks: a quantum-jump (MCWF) engine on the truncated
space and a dense master-equation oracle for up to three atoms."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dipoles import CouplingMatrix
from .errors import DataError, NumericsError, ParameterError
from .geometry import Lattice, ProbeMode, probe_amplitude
from .hilbert import atom_lowering_operators
from .system import ArraySystem
from .units import GAMMA, LIGHT_SPEED, MODE_COUPLING

PSD_CLAMP = 1e-10


@dataclass(frozen=True)
class JumpChannels:
    """Collective decay channels: rates and mode vectors diagonalizing the
    dissipative coupling matrix."""

    rates: np.ndarray       # (N,), descending
    vectors: np.ndarray     # (N, N), column m belongs to rates[m]

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


def diagonalize_dissipator(coupling: CouplingMatrix) -> JumpChannels:
    """Spectral decomposition of G; tiny negative eigenvalues are clamped."""
    g = coupling.G
    if not np.allclose(g, g.T, atol=1e-12):
        raise DataError("dissipative coupling matrix must be symmetric")
    rates, vectors = np.linalg.eigh(g)
    if rates.min() < -PSD_CLAMP * GAMMA:
        raise DataError(
            f"dissipator is not positive semidefinite (min rate {rates.min():.3e})"
        )
    rates = np.clip(rates, 0.0, None)
    order = np.argsort(rates)[::-1]
    return JumpChannels(rates=rates[order], vectors=vectors[:, order])


@dataclass
class TrajectoryRecord:
    """One quantum-jump trajectory: reproducible from (master seed, index)."""

    master_seed: int
    index: int
    jump_times: np.ndarray
    jump_channels: np.ndarray
    sample_times: np.ndarray
    observables: dict
    duration: float


def _trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class JumpEngine:
    """Batched norm-threshold quantum-jump propagation.

    The non-Hermitian generator (drive included) is exponentiated once for
    the base step and for a ladder of binary substeps used to refine jump
    times.  Trajectories carry independent counter-based RNG streams, so
    results do not depend on batch organisation or worker count.
    """

    def __init__(
        self,
        system: ArraySystem,
        channels: JumpChannels,
        dt: float,
        bisection_levels: int = 10,
        sector2_bound: float = 1e-3,
    ):
        if dt <= 0:
            raise ParameterError("time step must be positive")
        self.system = system
        self.channels = channels
        self.dt = float(dt)
        self.bisection_levels = int(bisection_levels)
        self.sector2_bound = float(sector2_bound)
        basis = system.basis
        full_dim = basis.dim_total
        # With the control off, the Rydberg-containing states are unreachable;
        # restricting to the live subspace shrinks the propagator a lot.
        if system.operator.control_rabi == 0.0:
            n = basis.n_atoms
            active = np.concatenate([
                [0],
                1 + np.arange(n),
                1 + basis.dim1 + np.arange(len(basis.pairs_ee)),
            ]).astype(np.int64)
        else:
            active = np.arange(full_dim, dtype=np.int64)
        self.active = active
        self.dim = len(active)
        generator = system.operator.total_generator().tocsr()
        generator = generator[active][:, active].toarray()
        # one matrix exponential at the finest substep, then repeated squaring
        finest = scipy.linalg.expm(
            -1j * (dt / 2**bisection_levels) * generator
        )
        ladder = [finest]
        for _ in range(bisection_levels - 1):
            ladder.append(ladder[-1] @ ladder[-1])
        self.sub_propagators = ladder[::-1]        # index k-1 holds dt / 2^k
        self.propagator = self.sub_propagators[0] @ self.sub_propagators[0]
        self.lowering = [
            op.tocsr()[active][:, active]
            for op in atom_lowering_operators(system.basis)
        ]
        n1 = basis.dim1
        in_sector2 = (active >= 1 + n1)
        self.sector2_rows = np.flatnonzero(in_sector2)

    def _channel_amplitudes(self, state: np.ndarray):
        """Per-channel collapsed states and jump weights for one state."""
        stacked = np.column_stack([op @ state for op in self.lowering])
        collapsed = stacked @ self.channels.vectors.conj()
        weights = self.channels.rates * np.sum(np.abs(collapsed) ** 2, axis=0)
        return collapsed, weights

    def _apply_jump(self, state: np.ndarray, rng: np.random.Generator):
        collapsed, weights = self._channel_amplitudes(state)
        total = weights.sum()
        if total <= 0:
            raise NumericsError("jump requested from a state with no decay weight")
        probs = weights / total
        channel = int(rng.choice(len(probs), p=probs))
        new_state = collapsed[:, channel]
        return new_state / np.linalg.norm(new_state), channel, probs

    def _refine_and_jump(self, state, threshold, rng, t_base):
        """Locate the crossing of `threshold` inside one base step, apply the
        jump there, and finish the remainder of the step (further crossings
        are handled the same way).  Returns (state, new_threshold, events)."""
        events = []
        psi = state
        consumed = 0.0            # time already resolved within the base step
        guard = 0
        while True:
            guard += 1
            if guard > 8:
                raise NumericsError("too many jumps inside a single step")
            # binary search: advance while the norm stays above threshold
            offset = 0.0
            window = self.dt - consumed
            for level, sub in enumerate(self.sub_propagators, start=1):
                step = self.dt / 2**level
                if offset + step > window + 1e-15:
                    continue
                candidate = sub @ psi
                if np.vdot(candidate, candidate).real >= threshold:
                    psi = candidate
                    offset += step
            psi, channel, _ = self._apply_jump(psi, rng)
            consumed += offset
            events.append((t_base + consumed, channel))
            threshold = rng.uniform()
            # finish the base step in greedy binary pieces, watching the norm
            crossed = False
            left = self.dt - consumed
            for level, sub in enumerate(self.sub_propagators, start=1):
                step = self.dt / 2**level
                if step > left + 1e-15:
                    continue
                candidate = sub @ psi
                if np.vdot(candidate, candidate).real < threshold:
                    crossed = True
                    break
                psi = candidate
                left -= step
                consumed = self.dt - left
            if not crossed:
                return psi, threshold, events

    def run(
        self,
        n_trajectories: int,
        t_end: float,
        master_seed: int,
        sample_every: int = 1,
        observables: dict | None = None,
        initial_state: np.ndarray | None = None,
        batch_size: int = 1024,
        first_index: int = 0,
        return_states: bool = False,
    ):
        observables = {
            name: op.tocsr()[self.active][:, self.active]
            for name, op in (observables or {}).items()
        }
        n_steps = int(round(t_end / self.dt))
        sample_steps = np.arange(0, n_steps + 1, sample_every)
        sample_times = sample_steps * self.dt
        if initial_state is None:
            initial_state = np.zeros(self.dim, dtype=complex)
            initial_state[0] = 1.0
        initial_state = np.asarray(initial_state, dtype=complex)
        per_trajectory = initial_state.ndim == 2
        if initial_state.shape[0] != self.dim:
            initial_state = initial_state[self.active]
        records = []
        final_states = np.empty((self.dim, n_trajectories), dtype=complex)
        for start in range(0, n_trajectories, batch_size):
            count = min(batch_size, n_trajectories - start)
            indices = [first_index + start + k for k in range(count)]
            if per_trajectory:
                init = initial_state[:, start:start + count]
            else:
                init = initial_state
            batch_records, batch_states = self._run_batch(
                indices, n_steps, sample_steps, sample_times,
                observables, init, master_seed,
            )
            records.extend(batch_records)
            final_states[:, start:start + count] = batch_states
        if return_states:
            return records, final_states
        return records

    def _run_batch(
        self, indices, n_steps, sample_steps, sample_times,
        observables, initial_state, master_seed,
    ):
        count = len(indices)
        rngs = [_trajectory_rng(master_seed, idx) for idx in indices]
        if initial_state.ndim == 2:
            states = initial_state.astype(complex).copy()
        else:
            states = np.tile(initial_state[:, None], (1, count)).astype(complex)
        states /= np.linalg.norm(states, axis=0, keepdims=True)
        thresholds = np.array([rng.uniform() for rng in rngs])
        jumps = [[] for _ in range(count)]
        samples = {
            name: np.empty((len(sample_steps), count)) for name in observables
        }
        sample_cursor = 0
        overflow = 0.0

        def record_samples(cursor):
            norms2 = np.sum(np.abs(states) ** 2, axis=0)
            for name, op in observables.items():
                acted = op @ states
                vals = np.sum(np.conj(states) * acted, axis=0).real / norms2
                samples[name][cursor] = vals

        if sample_steps[0] == 0:
            record_samples(0)
            sample_cursor = 1
        for step in range(1, n_steps + 1):
            previous = states
            states = self.propagator @ states
            norms2 = np.sum(np.abs(states) ** 2, axis=0)
            crossed = np.flatnonzero(norms2 < thresholds)
            for col in crossed:
                psi, new_threshold, events = self._refine_and_jump(
                    previous[:, col], thresholds[col], rngs[col], (step - 1) * self.dt
                )
                states[:, col] = psi
                thresholds[col] = new_threshold
                jumps[col].extend(events)
            sector2 = np.sum(np.abs(states[self.sector2_rows]) ** 2, axis=0)
            overflow = max(overflow, float(np.max(sector2 / np.sum(np.abs(states) ** 2, axis=0))))
            if sample_cursor < len(sample_steps) and step == sample_steps[sample_cursor]:
                record_samples(sample_cursor)
                sample_cursor += 1
        if overflow > self.sector2_bound:
            warnings.warn(
                f"two-excitation population reached {overflow:.2e}; "
                "the drive may be too strong for the truncation",
                RuntimeWarning,
                stacklevel=2,
            )
        out = []
        for k, idx in enumerate(indices):
            times = np.array([t for t, _ in jumps[k]])
            chans = np.array([c for _, c in jumps[k]], dtype=int)
            out.append(
                TrajectoryRecord(
                    master_seed=master_seed,
                    index=idx,
                    jump_times=times,
                    jump_channels=chans,
                    sample_times=sample_times,
                    observables={name: vals[:, k].copy() for name, vals in samples.items()},
                    duration=float(sample_times[-1]),
                )
            )
        return out, states / np.linalg.norm(states, axis=0, keepdims=True)


def mcwf_evolve(
    system: ArraySystem,
    t_end: float,
    dt: float,
    n_trajectories: int,
    seed: int,
    sample_every: int = 1,
    observables: dict | None = None,
    initial_state: np.ndarray | None = None,
    channels: JumpChannels | None = None,
) -> list[TrajectoryRecord]:
    """Quantum-jump unraveling of the driven array; see JumpEngine."""
    if channels is None:
        channels = diagonalize_dissipator(system.coupling)
    engine = JumpEngine(system, channels, dt)
    return engine.run(
        n_trajectories,
        t_end,
        master_seed=seed,
        sample_every=sample_every,
        observables=observables,
        initial_state=initial_state,
    )


def mcwf_reflection_transmission(
    system: ArraySystem,
    t_end: float,
    dt: float,
    n_trajectories: int,
    seed: int,
    burn_in: float = 0.0,
    initial_state: np.ndarray | None = None,
):
    """Trajectory-averaged (R, T) with standard errors.

    Averages the per-trajectory time-averaged mode fluxes after `burn_in`.
    """
    power = system.mode.power
    obs = {
        "R": (system.output_operator("bwd").conj().T @ system.output_operator("bwd")) / power,
        "T": (system.output_operator("fwd").conj().T @ system.output_operator("fwd")) / power,
    }
    records = mcwf_evolve(
        system, t_end, dt, n_trajectories, seed,
        observables=obs, initial_state=initial_state,
    )
    keep = records[0].sample_times >= burn_in
    means = {}
    errors = {}
    for name in obs:
        per_traj = np.array([rec.observables[name][keep].mean() for rec in records])
        means[name] = float(per_traj.mean())
        errors[name] = float(per_traj.std(ddof=1) / np.sqrt(len(per_traj)))
    return means, errors, records


def mcwf_pair_correlation(
    system: ArraySystem,
    first: str,
    second: str,
    t_spawn: float,
    tau_grid,
    n_trajectories: int,
    seed: int,
    dt: float = 0.05,
    channels: JumpChannels | None = None,
):
    """Trajectory estimate of g2_{first,second}(tau) with detection at t_spawn.

    Each base trajectory runs from the ground state to t_spawn; a detection
    in `first` then collapses the state (weight = its mode flux), and the
    conditioned ensemble continues with jumps while the flux of `second` is
    sampled.  Returns (g2 estimates, standard errors) over tau_grid.
    """
    if channels is None:
        channels = diagonalize_dissipator(system.coupling)
    engine = JumpEngine(system, channels, dt)
    tau_grid = np.asarray(tau_grid, dtype=float)
    a_first = system.output_operator(first).tocsr()[engine.active][:, engine.active]
    flux_second_op = system.output_operator(second)
    flux_second = {"flux": (flux_second_op.conj().T @ flux_second_op).tocsr()}
    flux_first_op = (
        system.output_operator(first).conj().T @ system.output_operator(first)
    )

    base_records, base_states = engine.run(
        n_trajectories, t_spawn, master_seed=seed,
        sample_every=max(1, int(round(t_spawn / dt))),
        observables={"flux_first": flux_first_op},
        return_states=True,
    )
    weights = np.linalg.norm(a_first @ base_states, axis=0) ** 2
    flux_first = np.array(
        [rec.observables["flux_first"][-1] for rec in base_records]
    )
    spawned = a_first @ base_states
    spawned /= np.linalg.norm(spawned, axis=0, keepdims=True)

    t_end = max(tau_grid.max(), dt)
    cond_records = engine.run(
        n_trajectories, t_end, master_seed=seed + 1,
        sample_every=1,
        observables=flux_second,
        initial_state=spawned,
        return_states=False,
    )
    sample_times = cond_records[0].sample_times
    idx = np.array([int(np.argmin(np.abs(sample_times - tau))) for tau in tau_grid])
    cond_flux = np.array([rec.observables["flux"][idx] for rec in cond_records])

    # steady fluxes for the denominator, time-averaged over the base ensemble
    denom_first = flux_first.mean()
    numer = weights[:, None] * cond_flux
    # the unconditional flux of `second` estimated from the same ensemble
    denom_second_records = engine.run(
        n_trajectories, t_end, master_seed=seed + 2,
        sample_every=1,
        observables=flux_second,
        initial_state=base_states,
        return_states=False,
    )
    denom_second = np.mean(
        [rec.observables["flux"].mean() for rec in denom_second_records]
    )
    estimate = numer.mean(axis=0) / (denom_first * denom_second)
    stderr = numer.std(axis=0, ddof=1) / np.sqrt(n_trajectories) / (
        denom_first * denom_second
    )
    return estimate, stderr


# --------------------------------------------------------------------------
# Dense master-equation oracle (N <= 3, full 3^N space, no truncation)
# --------------------------------------------------------------------------

_KET_G, _KET_E, _KET_S = 0, 1, 2


def _single_atom_ops():
    sigma = {}
    for a, i in (("g", 0), ("e", 1), ("s", 2)):
        for b, j in (("g", 0), ("e", 1), ("s", 2)):
            m = np.zeros((3, 3), dtype=complex)
            m[i, j] = 1.0
            sigma[a + b] = m
    return sigma


def _embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    mats = [np.eye(3, dtype=complex)] * n
    mats[site] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


@dataclass
class OracleResult:
    rho_ss: np.ndarray
    reflection: float
    transmission: float
    loss: float
    fluxes: dict
    g2: dict = field(default_factory=dict)
    g1: dict = field(default_factory=dict)
    tau_grid: np.ndarray | None = None


class DenseMasterOracle:
    """Exact steady state and two-time functions of the full Liouvillian."""

    def __init__(
        self,
        lattice: Lattice,
        mode: ProbeMode,
        coupling: CouplingMatrix,
        detuning: float,
        control_rabi: float = 0.0,
        two_photon_detuning: float = 0.0,
        vdw_shifts: np.ndarray | None = None,
    ):
        n = lattice.n_atoms
        if n > 3:
            raise ParameterError("dense oracle is limited to three atoms")
        self.n = n
        self.dim = 3**n
        self.mode = mode
        sig = _single_atom_ops()
        field_vals = probe_amplitude(mode, lattice.positions)
        drive = MODE_COUPLING * field_vals
        self.field = field_vals

        ham = np.zeros((self.dim, self.dim), dtype=complex)
        self.sigma_ge = []
        for j in range(n):
            n_e = _embed(sig["ee"], j, n)
            n_s = _embed(sig["ss"], j, n)
            s_eg = _embed(sig["eg"], j, n)
            s_es = _embed(sig["es"], j, n)
            self.sigma_ge.append(_embed(sig["ge"], j, n))
            ham += detuning * n_e + two_photon_detuning * n_s
            ham -= drive[j] * s_eg + np.conj(drive[j]) * s_eg.conj().T
            ham -= control_rabi * (s_es + s_es.conj().T)
        for i in range(n):
            for j in range(n):
                if i != j:
                    ham -= coupling.J[i, j] * self.sigma_ge[i].conj().T @ self.sigma_ge[j]
        if vdw_shifts is not None:
            for i in range(n):
                for j in range(i + 1, n):
                    ham += vdw_shifts[i, j] * _embed(sig["ss"], i, n) @ _embed(sig["ss"], j, n)
        self.hamiltonian = ham

        eye = np.eye(self.dim)
        liouv = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
        for i in range(n):
            for j in range(n):
                gij = coupling.G[i, j]
                if gij == 0.0:
                    continue
                lower_j = self.sigma_ge[j]
                raise_i = self.sigma_ge[i].conj().T
                combo = raise_i @ lower_j
                liouv += 0.5 * gij * (
                    2.0 * np.kron(lower_j, raise_i.T)
                    - np.kron(combo, eye)
                    - np.kron(eye, combo.T)
                )
        self.liouvillian = liouv
        self._eig = None

    def output_operator(self, channel: str) -> np.ndarray:
        op = np.zeros((self.dim, self.dim), dtype=complex)
        scale = 1j * MODE_COUPLING / (LIGHT_SPEED * np.sqrt(self.mode.power))
        for j in range(self.n):
            op += scale * np.conj(self.field[j]) * self.sigma_ge[j]
        if channel == "fwd":
            op += np.sqrt(self.mode.power) * np.eye(self.dim)
        return op

    def steady_state(self) -> np.ndarray:
        """Long-time limit of the evolution started from the atomic ground
        state: the non-decaying spectral component of |G><G|.

        The kernel of the Liouvillian can be degenerate (undriven Rydberg
        coherences are conserved), so projecting the physical initial state
        picks the reachable stationary state.
        """
        d = self.dim
        vals, vecs, inv = self._eigensystem()
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1.0
        coeff = inv @ rho0.reshape(-1)
        keep = vals.real > -1e-9 * GAMMA
        if not np.any(keep):
            raise NumericsError("oracle Liouvillian has no stationary mode")
        rho = (vecs[:, keep] @ coeff[keep]).reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        trace = np.trace(rho).real
        if abs(trace) < 1e-9:
            raise NumericsError("oracle stationary component is traceless")
        rho /= trace
        # declared stationary when one decay time changes the state by < 1e-10
        drift = np.linalg.norm(
            self.propagate(rho.reshape(-1), np.array([1.0 / GAMMA]))[0] - rho.reshape(-1)
        )
        if drift > 1e-10:
            raise NumericsError(f"oracle steady state drifts by {drift:.2e} per decay time")
        return rho

    def _eigensystem(self):
        if self._eig is None:
            vals, vecs = scipy.linalg.eig(self.liouvillian)
            self._eig = (vals, vecs, np.linalg.inv(vecs))
        return self._eig

    def propagate(self, vec_rho: np.ndarray, taus: np.ndarray) -> list[np.ndarray]:
        """exp(L tau) applied through the spectral decomposition of L."""
        vals, vecs, inv = self._eigensystem()
        coeff = inv @ vec_rho
        return [vecs @ (np.exp(vals * tau) * coeff) for tau in taus]

    def linear_response(self, rho=None):
        if rho is None:
            rho = self.steady_state()
        power = self.mode.power
        fluxes = {}
        for ch in ("fwd", "bwd"):
            a = self.output_operator(ch)
            fluxes[ch] = float(np.trace(a.conj().T @ a @ rho).real)
        transmission = fluxes["fwd"] / power
        reflection = fluxes["bwd"] / power
        return OracleResult(
            rho_ss=rho,
            reflection=reflection,
            transmission=transmission,
            loss=1.0 - transmission - reflection,
            fluxes=fluxes,
        )

    def two_time(self, tau_grid, channel_pairs, g1_channels=()):
        """Quantum regression on the full Liouvillian."""
        tau_grid = np.asarray(tau_grid, dtype=float)
        rho = self.steady_state()
        result = self.linear_response(rho)
        result.tau_grid = tau_grid
        ops = {ch: self.output_operator(ch) for ch in ("fwd", "bwd")}
        number = {ch: ops[ch].conj().T @ ops[ch] for ch in ops}
        for alpha, beta in channel_pairs:
            seeded = ops[alpha] @ rho @ ops[alpha].conj().T
            evolved = self.propagate(seeded.reshape(-1), tau_grid)
            numerator = np.array(
                [np.trace(number[beta] @ s.reshape(self.dim, self.dim)).real for s in evolved]
            )
            result.g2[(alpha, beta)] = numerator / (
                result.fluxes[alpha] * result.fluxes[beta]
            )
        for alpha in g1_channels:
            seeded = ops[alpha] @ rho
            evolved = self.propagate(seeded.reshape(-1), tau_grid)
            numerator = np.array(
                [np.trace(ops[alpha].conj().T @ s.reshape(self.dim, self.dim)) for s in evolved]
            )
            result.g1[alpha] = numerator / result.fluxes[alpha]
        return result


def dense_master_oracle(
    lattice: Lattice,
    mode: ProbeMode,
    coupling: CouplingMatrix,
    detuning: float,
    control_rabi: float = 0.0,
    two_photon_detuning: float = 0.0,
    tau_grid=None,
    channel_pairs=(),
    g1_channels=(),
    vdw_shifts=None,
) -> OracleResult:
    """Steady state plus requested two-time functions of the full model."""
    oracle = DenseMasterOracle(
        lattice, mode, coupling, detuning,
        control_rabi=control_rabi,
        two_photon_detuning=two_photon_detuning,
        vdw_shifts=vdw_shifts,
    )
    if tau_grid is None:
        return oracle.linear_response()
    return oracle.two_time(tau_grid, channel_pairs, g1_channels)
