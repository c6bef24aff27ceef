from itertools import combinations
from math import comb

import numpy as np
import pytest
from scipy.stats import unitary_group

from fermishell._kernels import (USE_NUMBA, _gamma_accumulate_nb,
                                 _gamma_accumulate_np, _overlap_counts_nb,
                                 _overlap_counts_np, _sector_unitary_nb,
                                 _sector_unitary_np, binom_table,
                                 gamma_accumulate, overlap_counts,
                                 sector_unitary)
from fermishell.fewbody import enumerate_basis

numba_only = pytest.mark.skipif(not USE_NUMBA,
                                reason="numpy fallback selected")


def test_binom_table_matches_math_comb():
    C = binom_table(12)
    for n in range(13):
        for k in range(13):
            assert C[n, k] == (comb(n, k) if k <= n else 0)


def _states(L, n):
    return np.array(list(combinations(range(L), n)), dtype=np.int64)


def test_sector_unitary_is_unitary():
    rng = np.random.default_rng(0)
    u1 = unitary_group.rvs(6, random_state=rng)
    for n in (0, 1, 2, 3):
        states = _states(6, n) if n else np.zeros((1, 0), dtype=np.int64)
        U = sector_unitary(u1, states)
        d = U.shape[0]
        assert np.allclose(U @ U.conj().T, np.eye(d), atol=1e-12)


@numba_only
def test_sector_unitary_paths_agree():
    rng = np.random.default_rng(1)
    u1 = unitary_group.rvs(7, random_state=rng)
    for n in (2, 3, 4):
        states = _states(7, n)
        a = _sector_unitary_np(u1, states)
        b = _sector_unitary_nb(np.ascontiguousarray(u1), states)
        assert np.allclose(a, b, atol=1e-13)


@numba_only
def test_gamma_accumulate_paths_agree():
    rng = np.random.default_rng(2)
    basis = enumerate_basis(6, 2)
    d = basis.dim
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    rho /= np.trace(rho).real
    src, dst, ii, jj, sign = basis.hop_table()
    a = _gamma_accumulate_np(rho, src, dst, ii, jj, sign, 6)
    b = _gamma_accumulate_nb(np.ascontiguousarray(rho), src, dst, ii, jj,
                             sign, 6)
    assert np.allclose(a, b, atol=1e-13)
    assert np.trace(gamma_accumulate(rho, (src, dst, ii, jj, sign),
                                     6)).real == pytest.approx(2.0)


@numba_only
def test_overlap_counts_paths_agree():
    a = _states(8, 3)
    b = _states(8, 2)
    got = overlap_counts(a, b, 8)
    occ_a = np.zeros((a.shape[0], 8))
    occ_b = np.zeros((b.shape[0], 8))
    np.put_along_axis(occ_a, a, 1.0, axis=1)
    np.put_along_axis(occ_b, b, 1.0, axis=1)
    assert np.array_equal(got, _overlap_counts_np(occ_a, occ_b))
    assert np.array_equal(got, _overlap_counts_nb(a, b, 8))


def test_overlap_counts_empty_sector():
    a = np.zeros((1, 0), dtype=np.int64)
    b = _states(5, 2)
    assert np.array_equal(overlap_counts(a, b, 5),
                          np.zeros((1, b.shape[0]), dtype=np.int64))
