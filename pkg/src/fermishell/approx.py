"""Shell-truncated per-atom occupancy matrices.

For each atom r of spin sigma, the many-body problem is reduced to a
few-body one by (1) keeping only the same-spin atoms within the
kappa_same-shell of the atom's site, (2) keeping only the opposite-spin
atoms within the kappa_opp-shell, and (3) truncating the lattice to a
window of half-width ell around the site.  The per-atom two-point
matrix Gamma^{sigma,r}, normalized to trace 1, is evolved with the
few-body engine; their (optionally corrected) sum approximates the full
occupancy matrix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .exact import DEFAULT_DT, DEFAULT_BUDGET_MIB, check_budget
from .fewbody import FewBodyProblem, occupancy_matrix
from .model import SPIN_UP, shell_sites


@dataclass(frozen=True)
class TruncatedProblem:
    """One atom's few-body problem after the three approximations."""

    center_index: int        # which sigma-atom of the configuration
    center_site: int
    spin: str
    sites: tuple             # contiguous sublattice, absolute 1-based
    up_positions: tuple
    dn_positions: tuple

    @property
    def q_same(self):
        same = (self.up_positions if self.spin == SPIN_UP
                else self.dn_positions)
        return len(same) - 1

    @property
    def q_opp(self):
        opp = (self.dn_positions if self.spin == SPIN_UP
               else self.up_positions)
        return len(opp)


def window_sites(center, ell, L):
    """Sublattice of half-width ell around ``center``, clipped to the
    lattice; a window that covers the whole chain keeps all of it."""
    if 2 * ell + 1 >= L:
        return tuple(range(1, L + 1))
    return tuple(range(max(1, center - ell), min(L, center + ell) + 1))


def apply_approximations(initial, r, spin, shells):
    """Truncate a FullConfiguration to atom r's few-body problem."""
    same_all = initial.positions(spin)
    if not 0 <= r < len(same_all):
        raise ConfigurationError(f"no atom {r} of spin {spin}")
    L = initial.spec.L
    i_r = same_all[r]
    window = window_sites(i_r, shells.ell, L)
    keep = {}
    for sp, kappa in ((spin, shells.kappa_same),
                      (("dn" if spin == SPIN_UP else "up"),
                       shells.kappa_opp)):
        shell = set(shell_sites(i_r, min(kappa, L - 1), L))
        shell.add(i_r)
        keep[sp] = tuple(p for p in initial.positions(sp)
                         if p in shell and window[0] <= p <= window[-1])
    return TruncatedProblem(r, i_r, spin, window,
                            keep["up"], keep["dn"])


@dataclass
class PerAtomGamma:
    """Trace-1 occupancy matrix of one atom, dense on its sublattice
    block and zero elsewhere."""

    L: int
    sites: tuple
    block: np.ndarray

    def to_dense(self):
        out = np.zeros((self.L, self.L), dtype=complex)
        lo = self.sites[0] - 1
        hi = self.sites[-1]
        out[lo:hi, lo:hi] = self.block
        return out


def gamma_sigma_r_trace(problem, spec, times, dt=DEFAULT_DT,
                        budget_mib=DEFAULT_BUDGET_MIB, j_ref=None):
    """Evolve one truncated problem and return (actual_times,
    list of PerAtomGamma) on the requested grid."""
    few = FewBodyProblem(spec, np.array(problem.sites),
                         len(problem.up_positions),
                         len(problem.dn_positions), j_ref=j_ref)
    check_budget(few.dim, budget_mib)
    M0 = few.initial_amplitudes(problem.up_positions, problem.dn_positions)
    norm = 1.0 / (1.0 + problem.q_same)

    def sample(Ms):
        G = occupancy_matrix(few.state(Ms), problem.spin)
        return PerAtomGamma(spec.L, problem.sites, norm * G)

    return few.evolve_sampled(M0, times, dt, sample)


def gamma_sigma_r(problem, spec, t, dt=DEFAULT_DT,
                  budget_mib=DEFAULT_BUDGET_MIB):
    """PerAtomGamma at a single time."""
    _, gs = gamma_sigma_r_trace(problem, spec, [t], dt, budget_mib)
    return gs[0]


def _duplicate_groups(dense, tol=1e-10):
    """Group indices whose matrices are numerically identical."""
    group = list(range(len(dense)))
    for j in range(len(dense)):
        for i in range(j):
            if group[i] == i and np.allclose(dense[i], dense[j],
                                             atol=tol, rtol=0.0):
                group[j] = i
                break
    return group


def assemble_gamma(per_atom, order=1):
    """Occupancy matrix from per-atom contributions.

    Order 1 is the plain sum.  Orders 2 and 3 subtract/add the ordered
    products over distinct atoms and rescale by eta so the trace equals
    the atom count; cross terms between numerically identical per-atom
    matrices (which arise when k_same > 0) are dropped, since repeated
    factors are not meaningful there.
    """
    if not per_atom:
        raise ConfigurationError("no per-atom matrices to assemble")
    if order not in (1, 2, 3):
        raise ConfigurationError(f"unsupported order {order}")
    dense = [g.to_dense() for g in per_atom]
    n = len(dense)
    total = sum(dense)
    if order == 1:
        return total
    group = _duplicate_groups(dense)
    raw = total.copy()
    pair = np.zeros_like(total)
    for j in range(n):
        for jp in range(n):
            if jp == j or group[jp] == group[j]:
                continue
            pair += dense[j] @ dense[jp]
    raw -= pair
    if order == 3:
        triple = np.zeros_like(total)
        for j in range(n):
            for jp in range(n):
                if jp == j or group[jp] == group[j]:
                    continue
                left = dense[j] @ dense[jp]
                for jpp in range(n):
                    if (jpp in (j, jp)
                            or group[jpp] in (group[j], group[jp])):
                        continue
                    triple += left @ dense[jpp]
        raw += triple
    tr = np.trace(raw).real
    if abs(tr) < 1e-300:
        raise ConfigurationError("vanishing trace in correction assembly")
    return (n / tr) * raw


def approx_imbalance_trace(initial, spin, shells, times, dt=DEFAULT_DT,
                           order=1, budget_mib=DEFAULT_BUDGET_MIB):
    """Imbalance of one spin component of a pure configuration via the
    per-atom decomposition.  Returns (actual_times, values)."""
    atoms = initial.positions(spin)
    if not atoms:
        raise ConfigurationError(f"no atoms of spin {spin}")
    per_time = None
    actual = None
    for r in range(len(atoms)):
        problem = apply_approximations(initial, r, spin, shells)
        actual, gs = gamma_sigma_r_trace(problem, initial.spec, times, dt,
                                         budget_mib)
        if per_time is None:
            per_time = [[] for _ in gs]
        for row, g in zip(per_time, gs):
            row.append(g)
    L = initial.spec.L
    parity = np.where(np.arange(1, L + 1) % 2 == 0, 1.0, -1.0)
    vals = np.array([
        float(parity @ np.diag(assemble_gamma(row, order)).real)
        / len(atoms)
        for row in per_time])
    return actual, vals
