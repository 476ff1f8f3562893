"""Excitation-truncated basis with blockade constraints and the block
non-Hermitian Hamiltonian with drive couplings.

States are grouped by total excitation number n <= 2.  Sector 1 holds the
2N states |e_j>, |s_j> (e block first).  Sector 2 holds |e_i e_j> (i<j),
then |e_i s_j> (ordered pairs, i != j), then |s_i s_j> (i<j) unless the
blockade removes doubly-excited Rydberg states.  All two-atom states are
normalized products on distinct atoms, so operator matrix elements carry
no extra symmetrization factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dipoles import CouplingMatrix
from .errors import DataError, ParameterError
from .units import GAMMA

BLOCKADE_MODES = ("full", "vdw", "off")


@dataclass(frozen=True)
class TruncatedBasis:
    n_atoms: int
    blockade_mode: str
    pairs_ee: np.ndarray       # (n_ee, 2), i < j
    pairs_es: np.ndarray       # (n_es, 2), (e-atom, s-atom), i != j
    pairs_ss: np.ndarray       # (n_ss, 2), i < j; empty unless allowed
    index_ee: np.ndarray       # (N, N) -> sector-2 index or -1
    index_es: np.ndarray
    index_ss: np.ndarray

    @property
    def dim1(self) -> int:
        return 2 * self.n_atoms

    @property
    def dim2(self) -> int:
        return len(self.pairs_ee) + len(self.pairs_es) + len(self.pairs_ss)

    @property
    def dim_total(self) -> int:
        return 1 + self.dim1 + self.dim2

    def e_index(self, j):
        return j

    def s_index(self, j):
        return self.n_atoms + j

    def sector2_labels(self):
        """Human-readable state labels, mainly for debugging."""
        labels = [f"e{i}e{j}" for i, j in self.pairs_ee]
        labels += [f"e{i}s{j}" for i, j in self.pairs_es]
        labels += [f"s{i}s{j}" for i, j in self.pairs_ss]
        return labels


def enumerate_basis(n_atoms: int, blockade: str = "full") -> TruncatedBasis:
    """Deterministically ordered basis for at most two excitations total."""
    if n_atoms < 0:
        raise ParameterError("atom count cannot be negative")
    if blockade not in BLOCKADE_MODES:
        raise ParameterError(f"blockade must be one of {BLOCKADE_MODES}")
    n = int(n_atoms)
    iu, ju = np.triu_indices(n, k=1)
    pairs_sorted = np.column_stack([iu, ju]) if n > 1 else np.zeros((0, 2), int)
    # ordered pairs (i, j), i != j, lexicographic
    gi, gj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = gi != gj
    pairs_ordered = np.column_stack([gi[mask], gj[mask]])

    pairs_ee = pairs_sorted
    pairs_es = pairs_ordered
    pairs_ss = pairs_sorted if blockade in ("vdw", "off") else np.zeros((0, 2), int)

    def index_map(pairs, offset):
        m = np.full((n, n), -1, dtype=np.int64)
        if len(pairs):
            m[pairs[:, 0], pairs[:, 1]] = offset + np.arange(len(pairs))
        return m

    n_ee, n_es = len(pairs_ee), len(pairs_es)
    index_ee = index_map(pairs_ee, 0)
    index_ee = np.maximum(index_ee, index_ee.T)      # unordered lookup
    index_es = index_map(pairs_es, n_ee)
    index_ss = index_map(pairs_ss, n_ee + n_es)
    index_ss = np.maximum(index_ss, index_ss.T)
    return TruncatedBasis(
        n_atoms=n,
        blockade_mode=blockade,
        pairs_ee=pairs_ee,
        pairs_es=pairs_es,
        pairs_ss=pairs_ss,
        index_ee=index_ee,
        index_es=index_es,
        index_ss=index_ss,
    )


@dataclass(frozen=True)
class EffectiveOperator:
    """Sector Hamiltonians and drive blocks of the no-jump generator.

    H1, H2 act within sectors 1 and 2.  D01 = <1|H|G> and D12 = <2|H|1> are
    the drive-coupling blocks of the same Hamiltonian (they inherit the
    minus sign of the light-atom coupling, so the steady-state relations
    c1 = -H1^{-1} D01 and c2 = -H2^{-1} D12 c1 hold as written).
    """

    basis: TruncatedBasis
    H1: np.ndarray
    H2: sp.csr_matrix
    D01: np.ndarray
    D12: sp.csr_matrix
    drive: np.ndarray
    detuning: float
    control_rabi: float
    two_photon_detuning: float

    def total_generator(self) -> sp.csr_matrix:
        """Full Hamiltonian on sectors 0+1+2, drive included."""
        d01 = sp.csr_matrix(self.D01.reshape(-1, 1))
        h1 = sp.csr_matrix(self.H1)
        blocks = [
            [sp.csr_matrix((1, 1)), d01.conj().T, None],
            [d01, h1, self.D12.conj().T],
            [None, self.D12, self.H2],
        ]
        return sp.bmat(blocks, format="csr")


def _pair_diag(pairs, values_e, values_s, kind):
    """Diagonal of a two-excitation block from per-atom diagonal terms."""
    if kind == "ee":
        return values_e[pairs[:, 0]] + values_e[pairs[:, 1]]
    if kind == "es":
        return values_e[pairs[:, 0]] + values_s[pairs[:, 1]]
    return values_s[pairs[:, 0]] + values_s[pairs[:, 1]]


def assemble_effective(
    basis: TruncatedBasis,
    coupling: CouplingMatrix,
    drive: np.ndarray,
    detuning: float,
    control_rabi: float = 0.0,
    two_photon_detuning: float = 0.0,
    c6: float = 0.0,
    pair_distances: np.ndarray | None = None,
    rydberg_dephasing: float = 0.0,
) -> EffectiveOperator:
    """Assemble H1, H2 and the drive blocks D01, D12.

    `drive` is the per-atom coupling b_j = g E(r_j); the Hamiltonian matrix
    elements are -b_j.  In "vdw" mode the doubly-Rydberg states carry the
    diagonal shift c6 / r_ij^6 and `pair_distances` must be supplied.
    """
    n = basis.n_atoms
    drive = np.asarray(drive, dtype=complex).reshape(n)
    if coupling.n_atoms != n:
        raise DataError("coupling matrix does not match atom count")
    if not np.all(np.isfinite(coupling.J)) or not np.all(np.isfinite(coupling.G)):
        raise DataError("couplings contain non-finite entries")
    if not np.all(np.isfinite(drive)):
        raise DataError("drive amplitudes contain non-finite entries")

    kernel = -coupling.J - 0.5j * coupling.G     # e <-> e exchange, i != j
    diag_e = detuning - 0.5j * np.diag(coupling.G)
    diag_s = np.full(n, two_photon_detuning - 0.5j * rydberg_dephasing)

    # ---- sector 1 ----
    h1 = np.zeros((2 * n, 2 * n), dtype=complex)
    h1[:n, :n] = kernel
    h1[:n, :n][np.diag_indices(n)] = diag_e
    h1[n:, n:] = np.diag(diag_s)
    if control_rabi:
        h1[:n, n:] -= control_rabi * np.eye(n)
        h1[n:, :n] -= control_rabi * np.eye(n)

    d01 = np.zeros(2 * n, dtype=complex)
    d01[:n] = -drive

    # ---- sector 2 ----
    rows, cols, vals = [], [], []
    pairs_ee, pairs_es, pairs_ss = basis.pairs_ee, basis.pairs_es, basis.pairs_ss
    idx_ee, idx_es, idx_ss = basis.index_ee, basis.index_es, basis.index_ss
    atoms = np.arange(n)

    def add(r, c, v):
        if len(r):
            rows.append(np.asarray(r, dtype=np.int64))
            cols.append(np.asarray(c, dtype=np.int64))
            vals.append(np.asarray(v, dtype=complex))

    # diagonals
    dim2 = basis.dim2
    diag = np.concatenate([
        _pair_diag(pairs_ee, diag_e, None, "ee") if len(pairs_ee) else [],
        _pair_diag(pairs_es, diag_e, diag_s, "es") if len(pairs_es) else [],
        _pair_diag(pairs_ss, None, diag_s, "ss") if len(pairs_ss) else [],
    ]) if dim2 else np.zeros(0, dtype=complex)
    if len(pairs_ss):
        if basis.blockade_mode == "vdw":
            if c6 and pair_distances is None:
                raise ParameterError("vdw blockade needs pair distances")
            if c6:
                r6 = pair_distances[pairs_ss[:, 0], pairs_ss[:, 1]] ** 6
                diag[idx_ss[pairs_ss[:, 0], pairs_ss[:, 1]]] += c6 / r6
    add(np.arange(dim2), np.arange(dim2), diag)

    # e-excitation exchange with one spectator excitation
    for i in range(n):
        others = atoms[atoms != i]
        if len(others) < 2:
            continue
        jj, kk = np.meshgrid(others, others, indexing="ij")
        off = jj != kk
        jj, kk = jj[off], kk[off]
        # spectator e at i: |e_i e_j> -> |e_i e_k>
        add(idx_ee[i, jj], idx_ee[i, kk], kernel[jj, kk])
    for j in range(n):
        others = atoms[atoms != j]
        if len(others) < 2:
            continue
        ii, kk = np.meshgrid(others, others, indexing="ij")
        off = ii != kk
        ii, kk = ii[off], kk[off]
        # spectator s at j: |e_i s_j> -> |e_k s_j>
        add(idx_es[ii, j], idx_es[kk, j], kernel[ii, kk])

    # control coupling e <-> s on one atom
    if control_rabi and len(pairs_ee):
        i, j = pairs_ee[:, 0], pairs_ee[:, 1]
        # |e_i e_j> <-> |e_i s_j> and |e_j s_i>
        add(idx_ee[i, j], idx_es[i, j], np.full(len(i), -control_rabi))
        add(idx_es[i, j], idx_ee[i, j], np.full(len(i), -control_rabi))
        add(idx_ee[i, j], idx_es[j, i], np.full(len(i), -control_rabi))
        add(idx_es[j, i], idx_ee[i, j], np.full(len(i), -control_rabi))
    if control_rabi and len(pairs_ss):
        i, j = pairs_ss[:, 0], pairs_ss[:, 1]
        # |s_i s_j> <-> |e_i s_j> and |e_j s_i>
        add(idx_ss[i, j], idx_es[i, j], np.full(len(i), -control_rabi))
        add(idx_es[i, j], idx_ss[i, j], np.full(len(i), -control_rabi))
        add(idx_ss[i, j], idx_es[j, i], np.full(len(i), -control_rabi))
        add(idx_es[j, i], idx_ss[i, j], np.full(len(i), -control_rabi))

    if rows:
        h2 = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim2, dim2),
        )
    else:
        h2 = sp.csr_matrix((dim2, dim2), dtype=complex)

    # ---- drive block sector 1 -> 2 ----
    rows, cols, vals = [], [], []
    if len(pairs_ee):
        i, j = pairs_ee[:, 0], pairs_ee[:, 1]
        # adding e_j on top of |e_i>, and e_i on top of |e_j>
        add(idx_ee[i, j], i, -drive[j])
        add(idx_ee[i, j], j, -drive[i])
    if len(pairs_es):
        i, j = pairs_es[:, 0], pairs_es[:, 1]
        # adding e_i on top of |s_j>
        add(idx_es[i, j], n + j, -drive[i])
    if rows:
        d12 = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim2, 2 * n),
        )
    else:
        d12 = sp.csr_matrix((dim2, 2 * n), dtype=complex)

    return EffectiveOperator(
        basis=basis,
        H1=h1,
        H2=h2,
        D01=d01,
        D12=d12,
        drive=drive,
        detuning=float(detuning),
        control_rabi=float(control_rabi),
        two_photon_detuning=float(two_photon_detuning),
    )


def mode_lowering_operator(basis: TruncatedBasis, projection: np.ndarray) -> sp.csr_matrix:
    """Sum_j w_j sigma_ge^(j) on the truncated space for weights w_j.

    With w_j = E*(r_j) this is the atomic part of the output-mode operators.
    """
    n = basis.n_atoms
    w = np.asarray(projection, dtype=complex).reshape(n)
    dim = basis.dim_total
    rows, cols, vals = [], [], []
    # sector 1 -> 0
    rows.append(np.zeros(n, dtype=np.int64))
    cols.append(1 + np.arange(n))
    vals.append(w.copy())
    off1, off2 = 1, 1 + basis.dim1
    if len(basis.pairs_ee):
        i, j = basis.pairs_ee[:, 0], basis.pairs_ee[:, 1]
        src = off2 + basis.index_ee[i, j]
        rows.append(off1 + j)          # lower e_i -> |e_j>
        cols.append(src)
        vals.append(w[i])
        rows.append(off1 + i)          # lower e_j -> |e_i>
        cols.append(src)
        vals.append(w[j])
    if len(basis.pairs_es):
        i, j = basis.pairs_es[:, 0], basis.pairs_es[:, 1]
        src = off2 + basis.index_es[i, j]
        rows.append(off1 + n + j)      # lower e_i -> |s_j>
        cols.append(src)
        vals.append(w[i])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )


def atom_lowering_operators(basis: TruncatedBasis) -> list[sp.csr_matrix]:
    """sigma_ge^(j) for each atom, used to build collective jump operators."""
    n = basis.n_atoms
    ops = []
    eye = np.eye(n)
    for j in range(n):
        ops.append(mode_lowering_operator(basis, eye[j]))
    return ops
