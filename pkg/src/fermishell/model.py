"""Hamiltonian parameters, on-site potentials and shell geometry.

Site indices are 1-based and always refer to the full lattice, so a
truncated sublattice sees the same local potential as the full chain.
Sites 2, 4, ... are "even" (the initially occupied sites of a CDW).
All energies are measured in units of the hopping J and times in units
of the tunneling time tau = hbar/J.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError

# Wavelength ratio of the detuning lattice; rational surrogate of an
# irrational number, (sqrt(5)-1)/2.
GOLDEN_BETA = (np.sqrt(5.0) - 1.0) / 2.0

STARK = "stark"
AUBRY_ANDRE = "aubry_andre"

SPIN_UP = "up"
SPIN_DN = "dn"


def other_spin(spin):
    if spin == SPIN_UP:
        return SPIN_DN
    if spin == SPIN_DN:
        return SPIN_UP
    raise ConfigurationError(f"unknown spin label {spin!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the 1D Fermi-Hubbard chain with an on-site potential.

    Exactly one potential family is active: a linear tilt (``stark``,
    possibly spin dependent) or a quasiperiodic cosine (``aubry_andre``).
    The harmonic confinement ``alpha`` applies to both.
    """

    L: int
    J: float = 1.0
    U: float = 0.0
    potential: str = STARK
    delta_dn: float = 0.0
    delta_up: float = 0.0
    delta_aa: float = 0.0
    beta: float = GOLDEN_BETA
    phi: float = 0.0
    alpha: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if self.J <= 0:
            raise ConfigurationError("hopping J must be positive")
        if self.L < 2:
            raise ConfigurationError("lattice must have at least 2 sites")
        if self.potential not in (STARK, AUBRY_ANDRE):
            raise ConfigurationError(
                f"unknown potential kind {self.potential!r}")
        if self.boundary not in ("open", "periodic"):
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")
        if self.potential == STARK and self.delta_aa != 0.0:
            raise ConfigurationError(
                "delta_aa must be zero for the stark potential")
        if self.potential == AUBRY_ANDRE and (
                self.delta_dn != 0.0 or self.delta_up != 0.0):
            raise ConfigurationError(
                "tilts must be zero for the aubry_andre potential")

    def with_phase(self, phi):
        return replace(self, phi=phi)

    def tilt(self, spin):
        return self.delta_dn if spin == SPIN_DN else self.delta_up


def build_potential(spec, sites, spin):
    """On-site energies V_i for the given absolute site indices.

    ``sites`` may be any array of (1-based) full-lattice site indices;
    restriction to a sublattice is just evaluation at those indices.
    """
    i = np.asarray(sites, dtype=float)
    harm = spec.alpha * (i - spec.L / 2.0) ** 2
    if spec.potential == STARK:
        return spec.tilt(spin) * i + harm
    if spec.potential == AUBRY_ANDRE:
        return spec.delta_aa * np.cos(2.0 * np.pi * spec.beta * i
                                      + spec.phi) + harm
    raise ConfigurationError(f"unknown potential kind {spec.potential!r}")


def kappa_to_k(kappa):
    """Number of even sites k in a kappa-shell around an even center.

    kappa in {4n, 4n+1, 4n+2} gives k = 2n; kappa = 4n+3 gives k = 2n+1.
    """
    if kappa < 0:
        raise ConfigurationError("shell size must be non-negative")
    return 2 * (kappa // 4) + (1 if kappa % 4 == 3 else 0)


def kappa_for_k(k):
    """Smallest shell size kappa whose even-site count is k."""
    if k < 0:
        raise ConfigurationError("k must be non-negative")
    if k == 0:
        return 0
    return 2 * k if k % 2 == 0 else 2 * k + 1


def shell_sites(center, kappa, L):
    """The kappa sites nearest to ``center``, excluding the center itself.

    Ties at equal distance are broken toward the lower site index; near a
    lattice edge the shell fills from the available side.
    """
    if not 1 <= center <= L:
        raise ConfigurationError(f"center {center} outside lattice [1, {L}]")
    if kappa > L - 1:
        raise ConfigurationError(
            f"shell size {kappa} exceeds available sites {L - 1}")
    candidates = sorted((i for i in range(1, L + 1) if i != center),
                        key=lambda i: (abs(i - center), i))
    return candidates[:kappa]


@dataclass(frozen=True)
class ShellSpec:
    """Sublattice half-width and shell sizes for one truncated problem.

    ``kappa_same`` is the shell of the center atom's own spin component,
    ``kappa_opp`` the shell of the other component.
    """

    ell: int
    kappa_same: int
    kappa_opp: int

    def __post_init__(self):
        if self.ell < 0:
            raise ConfigurationError("ell must be non-negative")
        if self.kappa_same > 2 * self.ell or self.kappa_opp > 2 * self.ell:
            raise ConfigurationError(
                "shell sizes must not exceed 2*ell")

    @property
    def k_same(self):
        return kappa_to_k(self.kappa_same)

    @property
    def k_opp(self):
        return kappa_to_k(self.kappa_opp)

    @classmethod
    def from_k(cls, ell, k_same, k_opp):
        return cls(ell, kappa_for_k(k_same), kappa_for_k(k_opp))
