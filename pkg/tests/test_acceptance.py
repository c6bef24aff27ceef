"""End-to-end acceptance suite.

Each test covers one numbered acceptance criterion and prints a single
pass/fail line with the measured figure of merit.  The heavy criteria
(4, 7, 8) run for several minutes each; the full module stays within a
desktop-scale half hour per criterion.
"""

import json
import os
from itertools import combinations
from math import comb

import numpy as np
import pytest

from fermishell import (CdwEnsembleSpec, FewBodyProblem, FullConfiguration,
                        ModelSpec, ShellSpec, approx_imbalance_trace,
                        bessel_occupancy, canonical_parent,
                        cdw_imbalance_trace, config_multiplicity,
                        densities, dominant_peak, exact_evolve,
                        exact_imbalance_trace, fourier_spectrum,
                        parent_entropy, perturbative_side_peak,
                        steady_state_average)
from fermishell.cdw import _center_tasks, correlation_profile, ee_trace
from fermishell.cli import run as cli_run
from fermishell.reconstruct import SpinSectorDensity

from bruteforce import FockOracle


def _report(n, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {n} ({name}): {status} — {detail}")
    assert ok, f"criterion {n}: {detail}"


def test_criterion_01_exactness_limit():
    spec = ModelSpec(L=8, U=5.0, delta_dn=3.0, delta_up=3.0,
                     boundary="periodic")
    cfg = FullConfiguration(spec, (2, 6), (4, 8))
    times = np.linspace(0.0, 20.0, 41)
    _, ex = exact_imbalance_trace(cfg, "dn", times, dt=1.0 / 200)
    _, ap = approx_imbalance_trace(cfg, "dn", ShellSpec(4, 8, 8), times,
                                   dt=1.0 / 200)
    sup = float(np.abs(np.asarray(ex) - ap).max())
    _report(1, "exactness limit", sup <= 1e-8, f"sup-norm {sup:.3e}")


def test_criterion_02_bessel_closed_form():
    delta = 3.0
    spec = ModelSpec(L=61, delta_dn=delta, delta_up=delta)
    cfg = FullConfiguration(spec, (), (31,))
    t_bloch = 2.0 * np.pi / delta
    times = np.linspace(0.0, 10 * t_bloch, 81)
    actual, states = exact_evolve(cfg, times, dt=1.0 / 400,
                                  exact_times=True)
    sites = np.arange(1, 62)
    err = 0.0
    for t, st in zip(actual, states):
        dens = densities(st.M, st.basis_up, st.basis_dn, "dn")
        err = max(err, np.abs(
            dens - bessel_occupancy(sites, 31, t, 1.0, delta)).max())
    _, rev = exact_evolve(cfg, [t_bloch], dt=1.0 / 400, exact_times=True)
    center = densities(rev[0].M, rev[0].basis_up, rev[0].basis_dn, "dn")[30]
    rev_dev = abs(center - 1.0)
    ok = err <= 1e-6 and rev_dev <= 1e-6
    _report(2, "non-interacting analytics", ok,
            f"max density error {err:.3e}, revival deficit {rev_dev:.3e}")


def test_criterion_03_trotter_oracle():
    # one atom of each spin inside a five-site sublattice, strong
    # interactions, evolved to five tunneling times
    spec = ModelSpec(L=5, U=5.0)
    few = FewBodyProblem(spec, np.arange(1, 6), 1, 1)
    M0 = few.initial_amplitudes((2,), (4,))
    oracle = FockOracle(5)
    v0 = oracle.vector_from_M(M0, few.basis_up, few.basis_dn)
    v_ref = oracle.evolve(oracle.hamiltonian(spec), v0, 5.0)
    errs = {}
    fid = None
    for dt in (1.0 / 400, 1.0 / 800):
        _, Ms = few.evolve_sampled(M0, [5.0], dt, lambda M: M.copy(),
                                   exact_times=True)
        v = oracle.vector_from_M(Ms[0], few.basis_up, few.basis_dn)
        errs[dt] = np.linalg.norm(v - v_ref)
        if dt == 1.0 / 400:
            fid = abs(np.vdot(v_ref, v))
    ratio = errs[1.0 / 400] / errs[1.0 / 800]
    ok = fid >= 1.0 - 1e-6 and 1.7 <= ratio <= 2.3
    _report(3, "few-body oracle", ok,
            f"fidelity {fid:.9f}, halving ratio {ratio:.3f}")


def test_criterion_04_shell_convergence():
    spec = ModelSpec(L=40, U=5.0, delta_dn=3.3, delta_up=3.3)
    times = np.linspace(0.0, 100.0, 101)
    vals = {}
    for k in (2, 3, 4, 5):
        ens = CdwEnsembleSpec(spec=spec, shells=ShellSpec.from_k(6, 0, k),
                              lam_up=0.5, weighting="exact",
                              translation_invariant=True)
        vals[k] = cdw_imbalance_trace(ens, "dn", times, dt=0.01,
                                      workers=8).values
    d23 = float(np.abs(vals[2] - vals[3]).max())
    d45 = float(np.abs(vals[4] - vals[5]).max())
    _report(4, "shell convergence", d45 <= d23 / 3.0,
            f"sup |k4-k5| {d45:.4f} vs |k2-k3|/3 {d23 / 3.0:.4f}")


def test_criterion_05_polynomial_in_filling():
    spec = ModelSpec(L=40, U=4.0, delta_dn=3.0, delta_up=3.0)
    shells = ShellSpec.from_k(4, 0, 2)
    times = [2.0, 5.0]

    def trace_at(lam):
        ens = CdwEnsembleSpec(spec=spec, shells=shells, lam_up=lam,
                              weighting="stirling",
                              translation_invariant=True)
        return cdw_imbalance_trace(ens, "dn", times, dt=0.005).values

    lams = [0.0, 0.5, 1.0]
    coef = np.linalg.solve(np.vander(lams, 3),
                           np.array([trace_at(l) for l in lams]))
    pred = np.vander([0.25], 3) @ coef
    dev = float(np.abs(pred[0] - trace_at(0.25)).max())
    _report(5, "polynomial filling law", dev <= 1e-10,
            f"quadratic interpolation error {dev:.3e}")


def test_criterion_06_side_peak():
    spec = ModelSpec(L=40, U=1.0, delta_dn=3.0, delta_up=3.0)
    times = np.linspace(0.0, 200.0, 2001)
    ens = CdwEnsembleSpec(spec=spec, shells=ShellSpec.from_k(6, 0, 2),
                          lam_up=0.5, weighting="exact",
                          translation_invariant=True)
    trace = cdw_imbalance_trace(ens, "dn", times, dt=0.01, workers=8)
    s = fourier_spectrum(trace)
    bin_w = s.nu[1] - s.nu[0]
    main = dominant_peak(s, nu_min=1.0)
    side = dominant_peak(s, exclude=[(main, 0.12)], nu_min=1.0, nu_max=5.0)
    lo, hi = perturbative_side_peak(1.0, 1.0, 3.0)
    # the perturbative pair brackets the side peak (the closed form is a
    # leading-order estimate, exact only as J/Delta -> 0)
    ok = (lo - 1.5 * bin_w <= side <= hi + 1.5 * bin_w
          and abs(side - main) > 3 * bin_w)
    _report(6, "interaction side peak", ok,
            f"side peak at {side:.3f}J inside [{lo:.2f}, {hi:.2f}] "
            f"(bin {bin_w:.4f})")


def test_criterion_07_entanglement_log_growth():
    spec = ModelSpec(L=40, U=5.0, potential="aubry_andre", delta_aa=8.0)
    times = np.arange(0.0, 100.01, 0.5)
    traces = {}
    for q in (3, 4):
        traces[q] = ee_trace(spec, 7, 20, 0, q, "dn", times, dt=0.025,
                             n_phases=12, workers=2)
    # the secular log-growth trend sits under a fast oscillation at the
    # detuning frequency; average it out over ~10 tunneling times
    t = np.asarray(traces[4].times)
    S = np.asarray(traces[4].values)
    w = 21
    S_sm = np.convolve(S, np.ones(w) / w, mode="valid")
    t_sm = t[w // 2: len(t) - w // 2]
    sel = (t_sm >= 3.0) & (t_sm <= 100.0)
    r = float(np.corrcoef(S_sm[sel], np.log(t_sm[sel]))[0, 1])
    s4 = steady_state_average(traces[4], (50.0, 100.0), n_points=8)
    s3 = steady_state_average(traces[3], (50.0, 100.0), n_points=8)
    rel = abs(s4 - s3) / s4
    ok = r >= 0.98 and rel <= 0.10
    _report(7, "entanglement log growth", ok,
            f"Pearson(S, ln t) {r:.4f}, steady-state q-gap {rel:.3f}")


def test_criterion_08_correlator_crossover():
    def plateau(delta, q):
        spec = ModelSpec(L=40, U=5.0, potential="aubry_andre",
                         delta_aa=delta)
        samples = np.linspace(225.0, 300.0, 6)
        sites, vals = correlation_profile(spec, 6, 20, 0, q, "dn",
                                          samples, dt=1.0 / 80,
                                          n_phases=12, workers=2)
        far = np.abs(np.asarray(sites) - 20) >= 4
        return float(vals[far].mean())

    deltas = np.arange(1.0, 9.0)
    plat3 = {d: plateau(d, 3) for d in deltas}
    plat2 = {d: plateau(d, 2) for d in deltas}
    gaps = {d: abs(plat3[d] - plat2[d]) for d in deltas}
    ratio = plat3[1.0] / plat3[8.0]
    argmax = max(gaps, key=gaps.get)
    ok = ratio >= 10.0 and 3.0 <= argmax <= 4.0
    _report(8, "correlator crossover", ok,
            f"plateau ratio D=1/D=8 {ratio:.1f}, gap maximal at "
            f"D={argmax:.0f}J")


def test_criterion_09_reconstruction_contracts():
    rng = np.random.default_rng(42)
    worst = 0.0
    for trial in range(100):
        dims = rng.integers(2, 21, size=2)
        pair = []
        for d in dims:
            rank = int(rng.integers(1, d + 1))
            A = rng.normal(size=(d, rank)) \
                + 1j * rng.normal(size=(d, rank))
            rho = A @ A.conj().T
            pair.append(SpinSectorDensity(rho / np.trace(rho).real))
        parent = canonical_parent(*pair)
        worst = max(worst,
                    np.abs(parent.trace_out_dn() - pair[0].rho).max(),
                    np.abs(parent.trace_out_up() - pair[1].rho).max())
        hist = parent.rank_history
        assert all(a > b for a, b in zip(hist, hist[1:]))
    # identical spectra terminate at a pure parent
    lam = np.array([0.45, 0.35, 0.2])
    Qu, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    Qd, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    ru = SpinSectorDensity(Qu[:, :3] @ np.diag(lam) @ Qu[:, :3].T)
    rd = SpinSectorDensity(Qd[:, :3] @ np.diag(lam) @ Qd[:, :3].T)
    ent = parent_entropy(canonical_parent(ru, rd))
    ok = worst <= 1e-10 and abs(ent) <= 1e-12
    _report(9, "reconstruction contracts", ok,
            f"worst partial-trace error {worst:.3e}, "
            f"equal-spectrum entropy {ent:.3e}")


def test_criterion_10_combinatorics():
    ok = True
    for k_opp in range(9):
        for k_same in range(k_opp + 1):
            total = sum(comb(k_same, q) * comb(k_opp - k_same, m)
                        for q in range(k_same + 1)
                        for m in range(k_opp - k_same + 1))
            ok = ok and total == 2 ** k_opp
    worst = 0.0
    for L in (8, 12, 16):
        for N_same in range(1, L // 2):
            N_opp = L // 2 - N_same
            spec = ModelSpec(L=L, U=1.0, delta_dn=1.0, delta_up=1.0)
            ens = CdwEnsembleSpec(spec=spec,
                                  shells=ShellSpec.from_k(L // 2, 1, 2),
                                  lam_up=2 * N_same / L, weighting="exact")
            norm = comb(L // 2 - 1, N_opp)
            total = sum(w.sum() * norm
                        for c in range(2, L + 1, 2)
                        for _, _, w in _center_tasks(ens, c, "up", N_opp))
            want = N_same * comb(L // 2, N_same)
            worst = max(worst, abs(total - want))
            ok = ok and abs(total - want) < 1e-9 * want
    _report(10, "combinatorics", ok,
            f"2^k identity exact, weight-total worst error {worst:.3e}")


def test_criterion_11_determinism(tmp_path):
    doc = {"model": {"L": 12, "U": 2.0, "delta_dn": 3.0, "delta_up": 3.0},
           "shells": {"ell": 3, "k_same": 0, "k_opp": 1},
           "grid": {"t_max": 2.0, "n_samples": 9},
           "dt": 0.01,
           "trace": {"spin": "dn", "translation_invariant": True}}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    blobs = []
    for workers, sub in ((1, "a"), (8, "b")):
        out = str(tmp_path / sub)
        assert cli_run(["trace", "--config", str(cfg), "--out", out,
                        "--workers", str(workers)]) == 0
        rundir = os.path.join(out, os.listdir(out)[0])
        with open(os.path.join(rundir, "trace.csv"), "rb") as fh:
            blobs.append(fh.read())
    ok = blobs[0] == blobs[1]
    _report(11, "determinism", ok,
            f"1 vs 8 workers byte-identical: {ok}")
