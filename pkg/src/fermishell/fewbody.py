"""Few-body Fock-space kernel.

A state of q_up + q_dn fermions on a short lattice is stored as the
amplitude matrix M of shape d_up x d_dn over the lexicographically
ordered occupation bases of the two spin sectors.  One Trotter step is

    M  <-  phase ∘ (U_up @ M @ U_dn^T)

where the sector unitaries are built element-by-element as determinants
of submatrices of the single-particle propagator, and ``phase`` is the
element-wise exponential of the interaction table.
"""

from dataclasses import dataclass, field
from itertools import combinations
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .model import SPIN_UP, SPIN_DN, build_potential


class SectorBasis:
    """All n-particle occupation sets of a lattice with ``nsites`` sites,
    in lexicographic order.  Occupations are stored as 0-based offsets."""

    def __init__(self, nsites, n):
        if not 0 <= n <= nsites:
            raise ConfigurationError(
                f"cannot place {n} fermions on {nsites} sites")
        self.nsites = nsites
        self.n = n
        if n == 0:
            self.states = np.zeros((1, 0), dtype=np.int64)
        else:
            self.states = np.array(list(combinations(range(nsites), n)),
                                   dtype=np.int64)
        self.index = {tuple(s): i for i, s in enumerate(self.states)}
        self._occ = None
        self._hops = None

    def __len__(self):
        return len(self.states)

    @property
    def dim(self):
        return len(self.states)

    def occupancy(self):
        """(d, nsites) 0/1 matrix of site occupations."""
        if self._occ is None:
            occ = np.zeros((self.dim, self.nsites))
            if self.n:
                np.put_along_axis(occ, self.states, 1.0, axis=1)
            self._occ = occ
        return self._occ

    def hop_table(self):
        """Index arrays (src, dst, i, j, sign) enumerating all nonzero
        matrix elements <dst| c+_i c_j |src> over the basis."""
        if self._hops is not None:
            return self._hops
        src, dst, ii, jj, sign = [], [], [], [], []
        for a, state in enumerate(self.states):
            occ = set(state)
            for pos_j, j in enumerate(state):
                src.append(a)
                dst.append(a)
                ii.append(j)
                jj.append(j)
                sign.append(1.0)
                rest = [x for x in state if x != j]
                for i in range(self.nsites):
                    if i in occ:
                        continue
                    pos_i = sum(1 for x in rest if x < i)
                    new = tuple(sorted(rest + [i]))
                    src.append(a)
                    dst.append(self.index[new])
                    ii.append(i)
                    jj.append(j)
                    sign.append(-1.0 if (pos_i + pos_j) % 2 else 1.0)
        self._hops = (np.array(src, dtype=np.int64),
                      np.array(dst, dtype=np.int64),
                      np.array(ii, dtype=np.int64),
                      np.array(jj, dtype=np.int64),
                      np.array(sign))
        return self._hops


@lru_cache(maxsize=None)
def enumerate_basis(nsites, n):
    return SectorBasis(nsites, n)


def single_particle_hamiltonian(spec, sites, spin):
    """Tridiagonal hopping + on-site potential on a contiguous sublattice.

    Periodic corner elements appear only when the sublattice is the full
    lattice and the model is periodic.
    """
    sites = np.asarray(sites, dtype=np.int64)
    m = len(sites)
    H = np.zeros((m, m))
    H[np.arange(m), np.arange(m)] = build_potential(spec, sites, spin)
    off = np.arange(m - 1)
    H[off, off + 1] = -spec.J
    H[off + 1, off] = -spec.J
    if m == spec.L and spec.boundary == "periodic" and m > 2:
        H[0, m - 1] += -spec.J
        H[m - 1, 0] += -spec.J
    return H


def sector_unitary_from_single(u1, n, basis):
    """Propagator on the n-fermion sector: element (b, b') is the
    determinant of u1 restricted to rows states[b], columns states[b']."""
    u1 = np.asarray(u1)
    if u1.shape != (basis.nsites, basis.nsites):
        raise ConfigurationError("single-particle propagator has wrong shape")
    if n != basis.n:
        raise ConfigurationError("particle count does not match basis")
    return _kernels.sector_unitary(u1, basis.states)


def interaction_table(basis_up, basis_dn, U):
    """d_up x d_dn matrix of on-site interaction energies U * |overlap|."""
    if basis_up.nsites != basis_dn.nsites:
        raise ConfigurationError("bases live on different sublattices")
    counts = _kernels.overlap_counts(basis_up.states, basis_dn.states,
                                     basis_up.nsites)
    return U * counts.astype(float)


@dataclass
class PropagatorBundle:
    """One Trotter step worth of precomputed operators."""

    u_up: np.ndarray       # d_up x d_up
    u_dn_t: np.ndarray     # transpose of the dn sector unitary
    phase: np.ndarray      # d_up x d_dn, unit-modulus interaction phases
    dt: float


@dataclass
class FewBodyState:
    M: np.ndarray
    basis_up: SectorBasis
    basis_dn: SectorBasis
    sites: np.ndarray      # absolute 1-based site indices of the sublattice

    @property
    def norm(self):
        return float(np.linalg.norm(self.M))


class FewBodyProblem:
    """A fixed (sublattice, particle numbers, model) evolution problem.

    Caches bases, the interaction table and per-dt propagator bundles.
    ``j_ref`` sets the time unit: phases accumulate as (H / j_ref) * t
    with t in units of tau = hbar / j_ref.
    """

    def __init__(self, spec, sites, n_up, n_dn, j_ref=None):
        self.spec = spec
        self.sites = np.asarray(sites, dtype=np.int64)
        if np.any(np.diff(self.sites) != 1):
            raise ConfigurationError("sublattice must be contiguous")
        self.n_up = n_up
        self.n_dn = n_dn
        self.j_ref = spec.J if j_ref is None else j_ref
        m = len(self.sites)
        self.basis_up = enumerate_basis(m, n_up)
        self.basis_dn = enumerate_basis(m, n_dn)
        self._vtable = interaction_table(self.basis_up, self.basis_dn, spec.U)
        self._bundles = {}

    @property
    def dim(self):
        return self.basis_up.dim * self.basis_dn.dim

    def bundle(self, dt):
        key = round(dt, 15)
        if key not in self._bundles:
            u_up = self._single_unitary(SPIN_UP, dt)
            u_dn = self._single_unitary(SPIN_DN, dt)
            U_up = sector_unitary_from_single(u_up, self.n_up, self.basis_up)
            U_dn = sector_unitary_from_single(u_dn, self.n_dn, self.basis_dn)
            phase = np.exp(-1j * dt * self._vtable / self.j_ref)
            self._bundles[key] = PropagatorBundle(
                U_up, U_dn.T.copy(), phase, dt)
        return self._bundles[key]

    def _single_unitary(self, spin, dt):
        H = single_particle_hamiltonian(self.spec, self.sites, spin)
        w, v = np.linalg.eigh(H / self.j_ref)
        return (v * np.exp(-1j * dt * w)) @ v.T

    def initial_amplitudes(self, up_positions, dn_positions):
        """Basis state with the given absolute site occupations; phase +1
        for creation operators applied in ascending site order."""
        M = np.zeros((self.basis_up.dim, self.basis_dn.dim), dtype=complex)
        a = self.basis_up.index[self._offsets(up_positions)]
        b = self.basis_dn.index[self._offsets(dn_positions)]
        M[a, b] = 1.0
        return M

    def _offsets(self, positions):
        lo = self.sites[0]
        offs = tuple(sorted(int(p) - lo for p in positions))
        if offs and (offs[0] < 0 or offs[-1] >= len(self.sites)):
            raise ConfigurationError("occupied site outside sublattice")
        return offs

    def state(self, M):
        return FewBodyState(M, self.basis_up, self.basis_dn, self.sites)

    def evolve_sampled(self, M0, times, dt, sample, exact_times=False):
        """Evolve amplitudes from t=0 and call ``sample(Ms)`` at each
        requested time.

        ``M0`` may be a single matrix or a stack (..., d_up, d_dn); all
        members advance in lockstep.  With ``exact_times`` a final partial
        step lands exactly on each sample time; otherwise sample times
        snap to the nearest multiple of dt.  Returns (actual_times,
        list of sample results).
        """
        Ms = np.array(M0, dtype=complex)
        out, actual = [], []
        if exact_times:
            t_cur = 0.0
            for t in times:
                span = t - t_cur
                if span < -1e-12:
                    raise ConfigurationError("times must be non-decreasing")
                nfull = int(np.floor(span / dt + 1e-9)) if span > 0 else 0
                Ms = _steps(Ms, self.bundle(dt), nfull)
                rem = span - nfull * dt
                if rem > 1e-12:
                    Ms = _steps(Ms, self.bundle(rem), 1)
                t_cur = t
                actual.append(t)
                out.append(sample(Ms))
        else:
            step_cur = 0
            for t in times:
                target = int(round(t / dt))
                if target < step_cur:
                    raise ConfigurationError("times must be non-decreasing")
                Ms = _steps(Ms, self.bundle(dt), target - step_cur)
                step_cur = target
                actual.append(step_cur * dt)
                out.append(sample(Ms))
        return np.array(actual), out


def _steps(Ms, bundle, n):
    for _ in range(n):
        Ms = bundle.phase * (bundle.u_up @ Ms @ bundle.u_dn_t)
    return Ms


def trotter_step(state, bundle):
    """One first-order split step on a FewBodyState."""
    M = bundle.phase * (bundle.u_up @ state.M @ bundle.u_dn_t)
    return FewBodyState(M, state.basis_up, state.basis_dn, state.sites)


# ---------------------------------------------------------------------------
# observables


def _sector_dm(M, spin):
    if spin == SPIN_UP:
        return M @ M.conj().T
    return M.T @ M.conj()


def occupancy_matrix(state, spin):
    """Two-point matrix <c+_i c_j> of one spin component, indexed by
    sublattice offset.  Hermitian, PSD, trace = particle number."""
    basis = state.basis_up if spin == SPIN_UP else state.basis_dn
    rho = _sector_dm(state.M, spin)
    return _kernels.gamma_accumulate(rho, basis.hop_table(), basis.nsites)


def densities(M, basis_up, basis_dn, spin):
    """On-site occupation of one spin component (diagonal of the
    occupancy matrix), supporting stacked amplitudes (..., d_up, d_dn)."""
    W = np.abs(M) ** 2
    if spin == SPIN_UP:
        return W.sum(axis=-1) @ basis_up.occupancy()
    return W.sum(axis=-2) @ basis_dn.occupancy()


def imbalance(M, basis_up, basis_dn, sites, spin):
    """Even-minus-odd occupation difference of one spin component,
    normalized so a CDW (atoms on even sites) gives +1 at t=0."""
    n = densities(M, basis_up, basis_dn, spin)
    parity = np.where(np.asarray(sites) % 2 == 0, 1.0, -1.0)
    natoms = (basis_up if spin == SPIN_UP else basis_dn).n
    return (n @ parity) / natoms


def bipartite_ee(state, cut):
    """Von Neumann entropy (nats) across the bond between sublattice
    sites ``cut`` and ``cut``+1 (1-based local indices)."""
    m = state.basis_up.nsites
    if not 1 <= cut <= m - 1:
        raise ConfigurationError(f"cut {cut} outside 1..{m - 1}")
    up_split = [_split(s, cut) for s in state.basis_up.states]
    dn_split = [_split(s, cut) for s in state.basis_dn.states]
    left_idx, right_idx = {}, {}
    entries = []
    for a, (ul, ur) in enumerate(up_split):
        for b, (dl, dr) in enumerate(dn_split):
            v = state.M[a, b]
            if v == 0:
                continue
            sgn = -1.0 if (len(ur) * len(dl)) % 2 else 1.0
            il = left_idx.setdefault((ul, dl), len(left_idx))
            ir = right_idx.setdefault((ur, dr), len(right_idx))
            entries.append((il, ir, sgn * v))
    psi = np.zeros((len(left_idx), len(right_idx)), dtype=complex)
    for il, ir, v in entries:
        psi[il, ir] = v
    s = np.linalg.svd(psi, compute_uv=False)
    p = s ** 2
    p = p[p > 1e-14]
    return float(-(p * np.log(p)).sum())


def _split(occ, cut):
    left = tuple(x for x in occ if x < cut)
    right = tuple(x for x in occ if x >= cut)
    return left, right


def density_correlation_matrix(state):
    """Connected density-density correlations C_ij over sublattice
    offsets, with n counting both spin components."""
    W = np.abs(state.M) ** 2
    Au = state.basis_up.occupancy()
    Ad = state.basis_dn.occupancy()
    wa = W.sum(axis=1)
    wb = W.sum(axis=0)
    cross = Au.T @ W @ Ad
    second = ((Au * wa[:, None]).T @ Au + (Ad * wb[:, None]).T @ Ad
              + cross + cross.T)
    n_tot = Au.T @ wa + Ad.T @ wb
    return second - np.outer(n_tot, n_tot)


def density_correlator(state, i, j):
    """Connected correlator between absolute sites i and j."""
    lo = int(state.sites[0])
    C = density_correlation_matrix(state)
    return float(C[i - lo, j - lo].real)
