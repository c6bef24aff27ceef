"""Post-processing of time traces: spectra, error metrics, convergence
extrapolation, steady states and analytic references.

Frequencies are reported as nu in units of J/h, so a trace oscillating
as cos(Delta * t/tau) peaks at nu = Delta.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .errors import ConfigurationError


@dataclass
class Spectrum:
    nu: np.ndarray          # frequencies, units J/h
    magnitude: np.ndarray


def _grid_of(trace):
    if hasattr(trace, "times"):
        return np.asarray(trace.times), np.asarray(trace.values)
    t, v = trace
    return np.asarray(t), np.asarray(v)


def fourier_spectrum(trace, window=None):
    """One-sided Fourier magnitude of the mean-subtracted trace.

    Resolution is 1/T_total; optional ``window="hann"`` for long-trace
    figure reproduction (default none, raw peaks)."""
    t, v = _grid_of(trace)
    if len(t) < 2:
        raise ConfigurationError("trace too short for a spectrum")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise ConfigurationError("spectrum needs a uniform time grid")
    x = v - v.mean()
    if window == "hann":
        x = x * np.hanning(len(x))
    elif window is not None:
        raise ConfigurationError(f"unknown window {window!r}")
    mag = np.abs(np.fft.rfft(x))
    nu = 2.0 * np.pi * np.fft.rfftfreq(len(x), d=dts[0])
    return Spectrum(nu, mag)


def dominant_peak(spectrum, exclude=(), nu_min=0.0, nu_max=None):
    """Frequency of the largest magnitude outside the excluded
    (center, halfwidth) windows."""
    mask = spectrum.nu >= nu_min
    if nu_max is not None:
        mask &= spectrum.nu <= nu_max
    for center, half in exclude:
        mask &= np.abs(spectrum.nu - center) > half
    if not mask.any():
        raise ConfigurationError("exclusions leave no frequencies")
    idx = np.flatnonzero(mask)
    return float(spectrum.nu[idx[np.argmax(spectrum.magnitude[idx])]])


def rms_deviation(a, b, b_stderr=None):
    """Root-mean-square deviation between two traces on a common grid,
    with linear error propagation from b's per-point uncertainty."""
    ta, va = _grid_of(a)
    tb, vb = _grid_of(b)
    if len(ta) != len(tb) or not np.allclose(ta, tb, atol=1e-12):
        raise ConfigurationError("traces live on different grids")
    if b_stderr is None:
        b_stderr = getattr(b, "stderr", None)
    diff = np.abs(va - vb)
    n = len(diff)
    rms = float(np.sqrt((diff ** 2).sum() / n))
    if b_stderr is None or rms == 0.0:
        return rms, 0.0
    unc = float((diff * np.asarray(b_stderr)).sum() / (n * rms))
    return rms, unc


def extrapolate_convergence(ks, values):
    """Least-squares fit of values to a + b/k; returns (a, b)."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ks) < 2:
        raise ConfigurationError("need at least two points to extrapolate")
    if np.ptp(ks) == 0:
        raise ConfigurationError("all k values are equal; fit is singular")
    A = np.column_stack([np.ones_like(ks), 1.0 / ks])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    return float(coef[0]), float(coef[1])


def steady_state_average(trace, window, n_points=10):
    """Mean of the samples nearest to n_points evenly spaced targets in
    the window."""
    t, v = _grid_of(trace)
    t1, t2 = window
    if t1 < t[0] - 1e-9 or t2 > t[-1] + 1e-9 or t2 < t1:
        raise ConfigurationError("window outside trace grid")
    targets = np.linspace(t1, t2, n_points)
    idx = np.abs(t[None, :] - targets[:, None]).argmin(axis=1)
    return float(v[idx].mean())


def perturbative_side_peak(J, U, delta):
    """Interaction side-peak frequencies delta -/+ 4J^2 U/(delta^2-U^2),
    valid for J << delta; singular at U = +-delta."""
    if abs(abs(U) - abs(delta)) < 1e-12:
        raise ConfigurationError(
            "perturbative estimate breaks down at U = +-Delta")
    off = 4.0 * J ** 2 * U / (delta ** 2 - U ** 2)
    return delta - off, delta + off


def bessel_occupancy(i, j, t, J, delta):
    """Occupancy |J_{i-j}((4J/Delta) sin(Delta t / 2))|^2 of a single
    non-interacting atom on a tilted lattice (t in units of tau)."""
    if delta == 0:
        raise ConfigurationError("closed form needs a nonzero tilt")
    arg = (4.0 * J / delta) * np.sin(delta * np.asarray(t) / 2.0)
    return jv(np.asarray(i) - np.asarray(j), arg) ** 2


def plateau_correlation(j_values, c_values, j_range):
    """Mean of the averaged |C_{i0,j}| over a site range (inclusive)."""
    j_values = np.asarray(j_values)
    c_values = np.asarray(c_values)
    lo, hi = j_range
    mask = (j_values >= lo) & (j_values <= hi)
    if not mask.any():
        raise ConfigurationError("plateau range selects no sites")
    return float(c_values[mask].mean())


def confinement_from_revival(L, T_r):
    """Harmonic confinement alpha = 1/(2 L T_r) reproducing a density
    revival at time T_r (in tau) on an L-site chain."""
    if L <= 0 or T_r <= 0:
        raise ConfigurationError("L and T_r must be positive")
    return 1.0 / (2.0 * L * T_r)
