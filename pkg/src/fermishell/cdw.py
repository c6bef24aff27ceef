"""Ensemble averaging over the incoherent charge-density-wave state.

The initial state has every even site singly occupied, with spin up
at filling lam_up (fraction of even sites) and spin down at 1-lam_up,
incoherently averaged over all spin assignments.  After the shell
truncation, only the assignment of the even sites inside the two
shells matters, so the full average collapses to a weighted sum of
2^{k_opp} few-body traces per center site (times phase/J averaging).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from math import comb

import numpy as np

from .approx import window_sites
from .errors import ConfigurationError
from .exact import DEFAULT_DT, DEFAULT_BUDGET_MIB, check_budget
from .fewbody import (FewBodyProblem, bipartite_ee,
                      density_correlation_matrix, imbalance)
from .model import AUBRY_ANDRE, SPIN_UP, STARK, shell_sites

WEIGHT_EXACT = "exact"
WEIGHT_STIRLING = "stirling"


@dataclass(frozen=True)
class CdwEnsembleSpec:
    """Ensemble, truncation and averaging directives for one trace."""

    spec: object               # ModelSpec
    shells: object             # ShellSpec
    lam_up: float = 0.5
    weighting: str = WEIGHT_EXACT
    n_phases: int = 12
    translation_invariant: bool = False
    j_ensemble: tuple = ()     # ((J, weight), ...); empty = single spec.J

    def __post_init__(self):
        if not 0.0 <= self.lam_up <= 1.0:
            raise ConfigurationError("lam_up must lie in [0, 1]")
        if self.weighting not in (WEIGHT_EXACT, WEIGHT_STIRLING):
            raise ConfigurationError(
                f"unknown weighting {self.weighting!r}")
        if self.spec.L % 2:
            raise ConfigurationError("CDW ensemble needs an even lattice")
        if self.translation_invariant and (
                self.spec.potential != STARK or self.spec.alpha != 0.0):
            raise ConfigurationError(
                "translation invariance holds only for the pure Stark tilt")

    def lam(self, spin):
        return self.lam_up if spin == SPIN_UP else 1.0 - self.lam_up


@dataclass
class TimeTrace:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray = None
    metadata: dict = field(default_factory=dict)


def config_multiplicity(L, N_opp, k_opp, q_opp):
    """Number of even-site spin assignments outside the opposite-spin
    shell compatible with q_opp opposite-spin atoms inside it."""
    outside = L // 2 - k_opp - 1
    need = N_opp - q_opp
    if q_opp < 0 or need < 0 or outside < 0 or need > outside:
        return 0
    return comb(outside, need)


def _shell_evens(center, shells, L):
    """Even sites of the same-spin shell (inner) and of the remaining
    opposite-spin shell ring (outer), restricted to the ell-window."""
    window = window_sites(center, shells.ell, L)
    lo, hi = window[0], window[-1]
    inner = [s for s in shell_sites(center, min(shells.kappa_same, L - 1), L)
             if s % 2 == 0 and lo <= s <= hi]
    opp = [s for s in shell_sites(center, min(shells.kappa_opp, L - 1), L)
           if s % 2 == 0 and lo <= s <= hi]
    outer = sorted(set(opp) - set(inner))
    return window, sorted(inner), outer


def _class_configs(center, inner, outer, q_same, n_outer):
    """All shell spin assignments of one (q_same, m) class: which inner
    even sites carry the traced spin, which outer sites keep the other
    spin (outer traced-spin atoms become holes)."""
    configs = []
    for extra in combinations(inner, q_same):
        opp_inner = sorted(set(inner) - set(extra))
        for kept in combinations(outer, n_outer):
            same = sorted((center,) + extra)
            opp = sorted(opp_inner + list(kept))
            configs.append((tuple(same), tuple(opp)))
    return configs


def _evolve_class(spec, window, configs, spin, times, dt, weights,
                  j_ref, budget_mib):
    """Weighted imbalance trace of one batch of same-dimension configs."""
    n_same = len(configs[0][0])
    n_opp = len(configs[0][1])
    n_up, n_dn = (n_same, n_opp) if spin == SPIN_UP else (n_opp, n_same)
    few = FewBodyProblem(spec, np.array(window), n_up, n_dn, j_ref=j_ref)
    check_budget(len(configs) * few.dim, budget_mib)
    M0 = np.stack([
        few.initial_amplitudes(same if spin == SPIN_UP else opp,
                               opp if spin == SPIN_UP else same)
        for same, opp in configs])
    w = np.asarray(weights)

    def sample(Ms):
        vals = imbalance(Ms, few.basis_up, few.basis_dn, few.sites, spin)
        return float(vals @ w)

    actual, vals = few.evolve_sampled(M0, times, dt, sample)
    return actual, np.array(vals)


def few_body_imbalance(center, q_same, q_opp, shells, spec, spin, times,
                       dt=DEFAULT_DT, budget_mib=DEFAULT_BUDGET_MIB):
    """Uniform average over all shell configurations of one
    (q_same, q_opp) class around one center."""
    window, inner, outer = _shell_evens(center, shells, spec.L)
    n_outer = q_opp - (len(inner) - q_same)
    if not 0 <= q_same <= len(inner) or not 0 <= n_outer <= len(outer):
        raise ConfigurationError(
            f"class ({q_same}, {q_opp}) is empty for these shells")
    configs = _class_configs(center, inner, outer, q_same, n_outer)
    weights = np.full(len(configs), 1.0 / len(configs))
    actual, vals = _evolve_class(spec, window, configs, spin, times, dt,
                                 weights, spec.J, budget_mib)
    return TimeTrace(actual, vals,
                     metadata={"center": center, "q_same": q_same,
                               "q_opp": q_opp, "configs": len(configs)})


def _centers(ens):
    L = ens.spec.L
    if ens.translation_invariant:
        return [2 * max(1, round(L / 4))]
    return list(range(2, L + 1, 2))


def _phases_of(spec, n_phases):
    if spec.potential != AUBRY_ANDRE or n_phases <= 1:
        return [spec]
    offs = 2.0 * np.pi * np.arange(n_phases) / n_phases
    return [spec.with_phase(spec.phi + float(o)) for o in offs]


def _phase_specs(ens):
    return _phases_of(ens.spec, ens.n_phases)


def _center_tasks(ens, center, spin, N_opp):
    """(window, configs, weights) batches for one center; weights sum
    to 1 over the whole center."""
    L = ens.spec.L
    lam_opp = 1.0 - ens.lam(spin)
    window, inner, outer = _shell_evens(center, ens.shells, L)
    k_eff = len(inner) + len(outer)
    norm = comb(L // 2 - 1, N_opp)
    tasks = []
    for q_same in range(len(inner) + 1):
        for n_outer in range(len(outer) + 1):
            q_opp = (len(inner) - q_same) + n_outer
            if ens.weighting == WEIGHT_EXACT:
                w_cfg = config_multiplicity(L, N_opp, k_eff, q_opp) / norm
            else:
                w_cfg = lam_opp ** q_opp * (1.0 - lam_opp) ** (k_eff - q_opp)
            if w_cfg == 0.0:
                continue
            configs = _class_configs(center, inner, outer, q_same, n_outer)
            tasks.append((window, configs,
                          np.full(len(configs), w_cfg)))
    return tasks


def cdw_imbalance_trace(ens, spin, times, dt=DEFAULT_DT, workers=1,
                        budget_mib=DEFAULT_BUDGET_MIB):
    """Ensemble-averaged imbalance of one spin component.

    Averages, in this order of weighting: exact-multiplicity (or
    Stirling-limit) configuration weights per center, a uniform sum
    over center sites (dropped under translation invariance), a uniform
    detuning-phase average for the quasiperiodic model, and an optional
    weighted J-ensemble.  The reduction order is fixed, so results are
    bit-identical for any worker count.
    """
    spec = ens.spec
    L = spec.L
    lam_same = ens.lam(spin)
    N_same = round(lam_same * L / 2)
    N_opp = L // 2 - N_same
    if ens.weighting == WEIGHT_EXACT:
        if abs(lam_same * L / 2 - N_same) > 1e-9:
            raise ConfigurationError(
                "exact weighting needs integer atom numbers; "
                f"lam*L/2 = {lam_same * L / 2}")
        if N_same < 1:
            raise ConfigurationError("traced spin has no atoms")
    if ens.shells.k_same > ens.shells.k_opp:
        raise ConfigurationError(
            "same-spin shell must not contain more even sites than the "
            "opposite-spin shell")

    j_list = ens.j_ensemble or ((spec.J, 1.0),)
    j_total = sum(w for _, w in j_list)
    phase_specs = _phase_specs(ens)
    centers = _centers(ens)

    jobs = []
    for Jv, wj in j_list:
        for pspec in phase_specs:
            run_spec = replace(pspec, J=Jv)
            for center in centers:
                for window, configs, weights in _center_tasks(
                        ens, center, spin, N_opp):
                    scale = wj / (j_total * len(phase_specs) * len(centers))
                    jobs.append((run_spec, window, configs,
                                 weights * scale))

    def run(job):
        run_spec, window, configs, weights = job
        return _evolve_class(run_spec, window, configs, spin, times, dt,
                             weights, spec.J, budget_mib)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    actual = results[0][0]
    total = np.zeros(len(actual))
    for a, vals in results:
        total += vals
    meta = {"spin": spin, "weighting": ens.weighting,
            "centers": len(centers), "phases": len(phase_specs),
            "evolutions": sum(len(job[2]) for job in jobs)}
    return TimeTrace(actual, total, metadata=meta)


# ---------------------------------------------------------------------------
# single few-body studies sharing the detuning-phase averaging


def study_positions(center, q_same, q_opp, window):
    """Initial pattern for entanglement/correlation studies: the traced
    atom at ``center``, opposite-spin atoms on alternating even offsets
    +-2, +-4, ..., then same-spin extras on the next free even offsets."""
    lo, hi = window[0], window[-1]
    offsets = []
    step = 2
    while len(offsets) < 2 * (q_same + q_opp) + 4 and step <= hi - lo:
        for o in (step, -step):
            if lo <= center + o <= hi:
                offsets.append(o)
        step += 2
    if len(offsets) < q_same + q_opp:
        raise ConfigurationError("window too small for the atom pattern")
    opp = sorted(center + o for o in offsets[:q_opp])
    same = sorted([center] + [center + o
                              for o in offsets[q_opp:q_opp + q_same]])
    return tuple(same), tuple(opp)


def _study_problem(spec, ell, center, q_same, q_opp, spin):
    window = window_sites(center, ell, spec.L)
    same, opp = study_positions(center, q_same, q_opp, window)
    n_up, n_dn = ((len(same), len(opp)) if spin == SPIN_UP
                  else (len(opp), len(same)))
    return window, same, opp, n_up, n_dn


def ee_trace(spec, ell, center, q_same, q_opp, spin, times,
             dt=DEFAULT_DT, n_phases=12, cut=None, workers=1,
             budget_mib=DEFAULT_BUDGET_MIB):
    """Bipartite entanglement entropy of the few-body study state,
    cut at the center bond, averaged over detuning phases."""
    window, same, opp, n_up, n_dn = _study_problem(
        spec, ell, center, q_same, q_opp, spin)
    if cut is None:
        cut = center - window[0] + 1
    phase_specs = _phases_of(spec, n_phases)

    def run(pspec):
        few = FewBodyProblem(pspec, np.array(window), n_up, n_dn,
                             j_ref=spec.J)
        check_budget(few.dim, budget_mib)
        M0 = few.initial_amplitudes(
            same if spin == SPIN_UP else opp,
            opp if spin == SPIN_UP else same)
        return few.evolve_sampled(
            M0, times, dt, lambda Ms: bipartite_ee(few.state(Ms), cut))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, phase_specs))
    else:
        results = [run(p) for p in phase_specs]
    actual = results[0][0]
    vals = np.mean([r[1] for r in results], axis=0)
    return TimeTrace(actual, vals,
                     metadata={"cut": cut, "phases": len(phase_specs),
                               "positions": {"same": same, "opp": opp}})


def correlation_profile(spec, ell, center, q_same, q_opp, spin,
                        sample_times, dt=DEFAULT_DT, n_phases=12,
                        workers=1, budget_mib=DEFAULT_BUDGET_MIB):
    """Time- and phase-averaged |C_{center,j}| against absolute site j.

    Returns (sites, averaged values)."""
    window, same, opp, n_up, n_dn = _study_problem(
        spec, ell, center, q_same, q_opp, spin)
    i0 = center - window[0]
    phase_specs = _phases_of(spec, n_phases)

    def run(pspec):
        few = FewBodyProblem(pspec, np.array(window), n_up, n_dn,
                             j_ref=spec.J)
        check_budget(few.dim, budget_mib)
        M0 = few.initial_amplitudes(
            same if spin == SPIN_UP else opp,
            opp if spin == SPIN_UP else same)
        _, rows = few.evolve_sampled(
            M0, sample_times, dt,
            lambda Ms: np.abs(
                density_correlation_matrix(few.state(Ms))[i0]))
        return np.mean(rows, axis=0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, phase_specs))
    else:
        results = [run(p) for p in phase_specs]
    return np.array(window), np.mean(results, axis=0)
