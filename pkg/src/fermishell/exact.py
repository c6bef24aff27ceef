"""Brute-force oracle: evolve the full many-body problem on small
lattices with the same Trotter engine, for validation of every
approximation."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ResourceLimitError
from .fewbody import (FewBodyProblem, densities, imbalance,
                      single_particle_hamiltonian, occupancy_matrix)
from .model import SPIN_UP, SPIN_DN

DEFAULT_DT = 1.0 / 200.0  # tunneling times per Trotter step
DEFAULT_BUDGET_MIB = 2048.0


@dataclass(frozen=True)
class FullConfiguration:
    """A pure initial basis state on the full lattice."""

    spec: object                # ModelSpec
    up_positions: tuple = ()
    dn_positions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "up_positions",
                           tuple(int(p) for p in self.up_positions))
        object.__setattr__(self, "dn_positions",
                           tuple(int(p) for p in self.dn_positions))
        for ps in (self.up_positions, self.dn_positions):
            if any(b <= a for a, b in zip(ps, ps[1:])):
                raise ConfigurationError(
                    "positions must be strictly increasing per spin")
            if ps and (ps[0] < 1 or ps[-1] > self.spec.L):
                raise ConfigurationError("positions outside lattice")

    def positions(self, spin):
        return self.up_positions if spin == SPIN_UP else self.dn_positions


def check_budget(dim, budget_mib):
    """Refuse problems whose amplitude matrix would not fit in memory."""
    need_mib = dim * 16.0 / 2 ** 20
    if need_mib > budget_mib:
        raise ResourceLimitError(
            f"state of dimension {dim} needs {need_mib:.0f} MiB, "
            f"budget is {budget_mib:.0f} MiB", dimension=dim)


def full_problem(config, budget_mib=DEFAULT_BUDGET_MIB, j_ref=None):
    from math import comb
    spec = config.spec
    n_up = len(config.up_positions)
    n_dn = len(config.dn_positions)
    # refuse before enumerating the bases, which is itself expensive
    check_budget(comb(spec.L, n_up) * comb(spec.L, n_dn), budget_mib)
    return FewBodyProblem(spec, np.arange(1, spec.L + 1), n_up, n_dn,
                          j_ref=j_ref)


def exact_evolve(config, times, dt=DEFAULT_DT,
                 budget_mib=DEFAULT_BUDGET_MIB, exact_times=False):
    """Full-lattice states on the requested time grid.

    Returns (actual_times, list of FewBodyState)."""
    problem = full_problem(config, budget_mib)
    M0 = problem.initial_amplitudes(config.up_positions,
                                    config.dn_positions)
    actual, states = problem.evolve_sampled(
        M0, times, dt, lambda Ms: problem.state(Ms.copy()),
        exact_times=exact_times)
    return actual, states


def exact_imbalance_trace(config, spin, times, dt=DEFAULT_DT,
                          budget_mib=DEFAULT_BUDGET_MIB):
    """Imbalance of one spin component of a pure configuration."""
    problem = full_problem(config, budget_mib)
    M0 = problem.initial_amplitudes(config.up_positions,
                                    config.dn_positions)
    actual, vals = problem.evolve_sampled(
        M0, times, dt,
        lambda Ms: imbalance(Ms, problem.basis_up, problem.basis_dn,
                             problem.sites, spin))
    return actual, np.array(vals)


def energy_expectation(state, spec):
    """<H> of a few-body state, in units of J (validation helper)."""
    e = 0.0
    for spin in (SPIN_UP, SPIN_DN):
        basis = state.basis_up if spin == SPIN_UP else state.basis_dn
        if basis.n == 0:
            continue
        H1 = single_particle_hamiltonian(spec, state.sites, spin)
        e += np.trace(H1 @ occupancy_matrix(state, spin)).real
    if spec.U != 0.0:
        W = np.abs(state.M) ** 2
        Au = state.basis_up.occupancy()
        Ad = state.basis_dn.occupancy()
        e += spec.U * float(np.einsum("ab,ai,bi->", W, Au, Ad))
    return e
