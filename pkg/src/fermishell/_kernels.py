"""Hot combinatorial kernels with numba-accelerated and numpy paths.

The numba path is used by default when numba imports cleanly; setting the
environment variable ``FERMISHELL_NUMBA=0`` selects the pure-numpy
fallbacks instead (``benchmarks/kernel_bench.py`` compares the two).
The two paths agree to floating-point accumulation accuracy.
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("FERMISHELL_NUMBA", "1") != "0"

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap


def binom_table(nmax):
    """Pascal triangle C[n, k] for 0 <= n, k <= nmax."""
    C = np.zeros((nmax + 1, nmax + 1), dtype=np.int64)
    C[:, 0] = 1
    for n in range(1, nmax + 1):
        for k in range(1, n + 1):
            C[n, k] = C[n - 1, k - 1] + C[n - 1, k]
    return C


# ---------------------------------------------------------------------------
# sector unitary: element (b, b') = det of the n x n submatrix of the
# single-particle propagator with rows states[b] and columns states[b']


def _sector_unitary_np(u1, states):
    d, n = states.shape
    if n == 0:
        return np.ones((1, 1), dtype=complex)
    out = np.empty((d, d), dtype=complex)
    block = max(1, (1 << 22) // (d * n * n))
    for lo in range(0, d, block):
        hi = min(lo + block, d)
        # sub[b, bp, r, c] = u1[states[lo+b, r], states[bp, c]]
        sub = u1[states[lo:hi][:, None, :, None], states[None, :, None, :]]
        out[lo:hi, :] = np.linalg.det(sub)
    return out


@njit(cache=True, nogil=True)
def _sector_unitary_nb(u1, states):  # pragma: no cover - compiled
    d, n = states.shape
    out = np.empty((d, d), dtype=np.complex128)
    sub = np.empty((n, n), dtype=np.complex128)
    for b in range(d):
        for bp in range(d):
            for r in range(n):
                for c in range(n):
                    sub[r, c] = u1[states[b, r], states[bp, c]]
            out[b, bp] = np.linalg.det(sub)
    return out


def sector_unitary(u1, states):
    states = np.ascontiguousarray(states, dtype=np.int64)
    if states.shape[1] == 0:
        return np.ones((1, 1), dtype=complex)
    if states.shape[1] == 1:
        return u1[states[:, 0][:, None], states[:, 0][None, :]].copy()
    u1 = np.ascontiguousarray(u1, dtype=np.complex128)
    if USE_NUMBA:
        return _sector_unitary_nb(u1, states)
    return _sector_unitary_np(u1, states)


# ---------------------------------------------------------------------------
# occupancy-matrix accumulation from a sector density matrix and a
# precomputed hop table (see basis.hop_table)


def _gamma_accumulate_np(rho, src, dst, ii, jj, sign, nsites):
    vals = sign * rho[src, dst]
    flat = ii * nsites + jj
    re = np.bincount(flat, weights=vals.real, minlength=nsites * nsites)
    im = np.bincount(flat, weights=vals.imag, minlength=nsites * nsites)
    return (re + 1j * im).reshape(nsites, nsites)


@njit(cache=True, nogil=True)
def _gamma_accumulate_nb(rho, src, dst, ii, jj, sign, nsites):  # pragma: no cover
    out = np.zeros((nsites, nsites), dtype=np.complex128)
    for t in range(src.shape[0]):
        out[ii[t], jj[t]] += sign[t] * rho[src[t], dst[t]]
    return out


def gamma_accumulate(rho, table, nsites):
    src, dst, ii, jj, sign = table
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if USE_NUMBA:
        return _gamma_accumulate_nb(rho, src, dst, ii, jj, sign, nsites)
    return _gamma_accumulate_np(rho, src, dst, ii, jj, sign, nsites)


# ---------------------------------------------------------------------------
# interaction table: number of commonly occupied sites per basis pair


def _overlap_counts_np(occ_a, occ_b):
    return np.rint(occ_a @ occ_b.T).astype(np.int64)


@njit(cache=True, nogil=True)
def _overlap_counts_nb(states_a, states_b, nsites):  # pragma: no cover
    da, na = states_a.shape
    db, nb = states_b.shape
    mask = np.zeros(nsites, dtype=np.int64)
    out = np.zeros((da, db), dtype=np.int64)
    for a in range(da):
        for r in range(na):
            mask[states_a[a, r]] = 1
        for b in range(db):
            c = 0
            for r in range(nb):
                c += mask[states_b[b, r]]
            out[a, b] = c
        for r in range(na):
            mask[states_a[a, r]] = 0
    return out


def overlap_counts(states_a, states_b, nsites):
    states_a = np.ascontiguousarray(states_a, dtype=np.int64)
    states_b = np.ascontiguousarray(states_b, dtype=np.int64)
    if states_a.shape[1] == 0 or states_b.shape[1] == 0:
        return np.zeros((states_a.shape[0], states_b.shape[0]),
                        dtype=np.int64)
    if USE_NUMBA:
        return _overlap_counts_nb(states_a, states_b, nsites)
    occ_a = np.zeros((states_a.shape[0], nsites))
    occ_b = np.zeros((states_b.shape[0], nsites))
    np.put_along_axis(occ_a, states_a, 1.0, axis=1)
    np.put_along_axis(occ_b, states_b, 1.0, axis=1)
    return _overlap_counts_np(occ_a, occ_b)
