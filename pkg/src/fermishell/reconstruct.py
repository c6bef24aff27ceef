"""Canonical many-body state from single-spin density matrices.

Per-atom occupancy matrices are first antisymmetrized into a
single-spin many-particle density matrix; a pair of those (one per
spin component) is then lifted to a low-entropy "parent" mixture of
pure product-sector states whose partial traces reproduce the inputs,
via a remainder recursion that pairs eigenvalues in decreasing order.
"""

import json
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import (ConfigurationError, NumericalDegradationError,
                     ResourceLimitError)
from .fewbody import enumerate_basis

RANK_TOL = 1e-12


@dataclass
class SpinSectorDensity:
    """Hermitian PSD trace-1 matrix over one spin's N-particle sector."""

    rho: np.ndarray
    nsites: int = 0
    n: int = 0

    def validate(self, tol=1e-10):
        r = self.rho
        if not np.allclose(r, r.conj().T, atol=tol):
            raise NumericalDegradationError("density not Hermitian")
        if abs(np.trace(r).real - 1.0) > tol:
            raise NumericalDegradationError("density trace is not 1")
        if np.linalg.eigvalsh(r).min() < -1e-12:
            raise NumericalDegradationError("density not PSD")
        return self


def _perm_sign(p):
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        clen = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


def single_spin_density(per_atom, budget_dim=3000):
    """Antisymmetrized product of per-atom occupancy matrices.

    Element (alpha, beta) of the N-particle sector density is the
    signed double-permutation sum over atom-to-slot assignments; the
    inner permutation collapses to a determinant.  Normalized to
    trace 1.  Meaningful when the per-atom matrices have essentially
    disjoint support (the k_same = 0 regime).
    """
    if not per_atom:
        raise ConfigurationError("no per-atom matrices")
    dense = [np.asarray(g.to_dense() if hasattr(g, "to_dense") else g)
             for g in per_atom]
    N = len(dense)
    L = dense[0].shape[0]
    basis = enumerate_basis(L, N)
    if basis.dim > budget_dim:
        raise ResourceLimitError(
            f"sector dimension {basis.dim} exceeds budget {budget_dim}",
            dimension=basis.dim)
    perms = [(p, _perm_sign(p)) for p in permutations(range(N))]
    d = basis.dim
    rho = np.zeros((d, d), dtype=complex)
    K = np.empty((N, N), dtype=complex)
    for a, alpha in enumerate(basis.states):
        for b, beta in enumerate(basis.states):
            acc = 0.0 + 0.0j
            for p, sgn in perms:
                for r in range(N):
                    K[r, :] = dense[r][alpha[p[r]], beta]
                acc += sgn * np.linalg.det(K)
            rho[a, b] = acc
    tr = np.trace(rho).real
    if tr <= 0:
        raise NumericalDegradationError(
            "antisymmetrized density has non-positive trace")
    return SpinSectorDensity(rho / tr, L, N)


@dataclass
class ParentState:
    """Orthogonal unnormalized pure vectors on the product sector space,
    stored as d_up x d_dn matrices; weights are their squared norms."""

    vectors: list
    weights: np.ndarray
    rank_history: list = field(default_factory=list)

    @property
    def r(self):
        return len(self.vectors)

    def assemble(self):
        """Dense density matrix rho* on the flattened product space."""
        d = self.vectors[0].size
        rho = np.zeros((d, d), dtype=complex)
        for psi in self.vectors:
            v = psi.reshape(-1)
            rho += np.outer(v, v.conj())
        return rho

    def trace_out_dn(self):
        out = np.zeros((self.vectors[0].shape[0],) * 2, dtype=complex)
        for psi in self.vectors:
            out += psi @ psi.conj().T
        return out

    def trace_out_up(self):
        out = np.zeros((self.vectors[0].shape[1],) * 2, dtype=complex)
        for psi in self.vectors:
            out += psi.T @ psi.conj()
        return out

    def to_json(self):
        return json.dumps({
            "weights": self.weights.tolist(),
            "vectors": [{"re": p.real.tolist(), "im": p.imag.tolist()}
                        for p in self.vectors],
        })


def _ordered_eigh(R):
    """Eigenpairs in decreasing eigenvalue order with a deterministic
    phase and tie-break (lexicographic comparison of rounded vectors)."""
    w, V = np.linalg.eigh(R)
    cols = []
    for i in range(len(w)):
        v = V[:, i]
        pivot = np.argmax(np.abs(v))
        phase = v[pivot] / abs(v[pivot]) if abs(v[pivot]) > 0 else 1.0
        v = v / phase
        key = tuple(np.round(v.real, 12)) + tuple(np.round(v.imag, 12))
        cols.append((-round(float(w[i]), 14), key, float(w[i]), v))
    cols.sort(key=lambda c: (c[0], c[1]))
    return ([c[2] for c in cols], [c[3] for c in cols])


def canonical_parent(rho_up, rho_dn, tol=RANK_TOL):
    """Parent mixture whose partial traces reproduce the two inputs.

    Each iteration diagonalizes the two remainders, pairs eigenvalues
    in decreasing order, and extracts one pure vector carrying
    min(lam_up_i, lam_dn_i) from every pair (relative phases set to 0);
    at least one eigenvalue is exhausted per step, so the remainder
    rank sum strictly decreases and the iteration terminates.
    """
    R_up = np.array(rho_up.rho if hasattr(rho_up, "rho") else rho_up,
                    dtype=complex)
    R_dn = np.array(rho_dn.rho if hasattr(rho_dn, "rho") else rho_dn,
                    dtype=complex)
    vectors, weights, ranks = [], [], []
    while True:
        tr_u = np.trace(R_up).real
        tr_d = np.trace(R_dn).real
        if abs(tr_u - tr_d) > 1e-10:
            raise NumericalDegradationError(
                f"remainder traces diverged: {tr_u} vs {tr_d}")
        if tr_u < 1e-12:
            break
        wu, Vu = _ordered_eigh(R_up)
        wd, Vd = _ordered_eigh(R_dn)
        if min(wu[-1], wd[-1]) < -1e-10:
            raise NumericalDegradationError("remainder lost positivity")
        ru = sum(1 for x in wu if x > tol)
        rd = sum(1 for x in wd if x > tol)
        ranks.append(ru + rd)
        n = min(ru, rd)
        if n == 0:
            break
        c = np.minimum(wu[:n], wd[:n])
        psi = np.zeros((R_up.shape[0], R_dn.shape[0]), dtype=complex)
        for i in range(n):
            psi += np.sqrt(c[i]) * np.outer(Vu[i], Vd[i])
        vectors.append(psi)
        weights.append(float(np.sum(c)))
        for i in range(n):
            R_up -= c[i] * np.outer(Vu[i], Vu[i].conj())
            R_dn -= c[i] * np.outer(Vd[i], Vd[i].conj())
        if len(ranks) > 1 and ranks[-1] >= ranks[-2]:
            raise NumericalDegradationError(
                "remainder rank sum failed to decrease")
    return ParentState(vectors, np.array(weights), ranks)


def parent_entropy(parent):
    """Von Neumann entropy (nats) of the parent mixture from its
    orthogonal-component weights."""
    w = np.asarray(parent.weights)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum())
