"""Spectral gain rules driven by the a priori SNR.

All rules take linear xi (and, for the amplitude estimator, the a
posteriori SNR gamma) and return a gain in [0, 1] that multiplies the
noisy magnitude.  The short-time amplitude estimator follows the
classical MMSE solution with modified Bessel functions; above nu = 700
it falls back to its Wiener limit to stay in floating-point range.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class GainRule(Enum):
    WIENER = "wiener"
    SRWF = "srwf"
    MMSE_STSA = "mmse-stsa"


NU_OVERFLOW = 700.0
_BESSEL_CROSSOVER = 15.0


def gain_wiener(xi) -> np.ndarray:
    """Wiener filter xi / (1 + xi)."""
    xi = np.asarray(xi, dtype=np.float64)
    return xi / (1.0 + xi)


def gain_srwf(xi) -> np.ndarray:
    """Square-root Wiener filter sqrt(xi / (1 + xi)), the pipeline default."""
    return np.sqrt(gain_wiener(xi))


def _bessel_series(x, order: int) -> np.ndarray:
    # Ascending series, all terms positive, converges fast for x <= 15.
    t = 0.25 * x * x
    term = np.ones_like(x) if order == 0 else 0.5 * x
    total = term.copy()
    for k in range(1, 60):
        term = term * t / (k * (k + order))
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _bessel_asymptotic_scaled(x, order: int) -> np.ndarray:
    # exp(-x) I_order(x) ~ (2 pi x)^(-1/2) sum_k t_k for large x, where
    # t_k / t_{k-1} = ((2k-1)^2 - 4 order^2) / (8 k x).
    mu = 4.0 * order * order
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, 12):
        term = term * ((2 * k - 1) ** 2 - mu) / (8.0 * k * x)
        total += term
    return total / np.sqrt(2.0 * np.pi * x)


def _bessel_ie(x, order: int) -> np.ndarray:
    """exp(-x) I_order(x) for x >= 0, order 0 or 1, ~1e-10 accurate."""
    x = np.asarray(x, dtype=np.float64)
    small = x <= _BESSEL_CROSSOVER
    out = np.empty_like(x)
    if np.any(small):
        xs = x[small]
        out[small] = _bessel_series(xs, order) * np.exp(-xs)
    if np.any(~small):
        out[~small] = _bessel_asymptotic_scaled(x[~small], order)
    return out


def bessel_i0e(x) -> np.ndarray:
    return _bessel_ie(x, 0)


def bessel_i1e(x) -> np.ndarray:
    return _bessel_ie(x, 1)


def gain_mmse_stsa(xi, gamma) -> np.ndarray:
    """MMSE short-time spectral amplitude gain.

    nu = xi * gamma / (1 + xi)
    G  = (sqrt(pi)/2) (sqrt(nu)/gamma) exp(-nu/2) [(1+nu) I0(nu/2) + nu I1(nu/2)]

    computed in exponentially scaled form; cells with nu > 700 use the
    Wiener limit.  gamma must be strictly positive.
    """
    xi = np.asarray(xi, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(gamma))):
        raise ValueError("xi and gamma must be finite")
    if np.any(xi < 0) or np.any(gamma <= 0):
        raise ValueError("xi must be >= 0 and gamma > 0")
    xi, gamma = np.broadcast_arrays(xi, gamma)
    nu = xi * gamma / (1.0 + xi)
    safe = nu <= NU_OVERFLOW
    nu_s = np.where(safe, nu, 0.0)
    g = (
        (0.5 * np.sqrt(np.pi))
        * (np.sqrt(nu_s) / gamma)
        * ((1.0 + nu_s) * bessel_i0e(0.5 * nu_s) + nu_s * bessel_i1e(0.5 * nu_s))
    )
    return np.where(safe, g, gain_wiener(xi))


def gain_for(rule: GainRule, xi, gamma=None) -> np.ndarray:
    if rule is GainRule.WIENER:
        return gain_wiener(xi)
    if rule is GainRule.SRWF:
        return gain_srwf(xi)
    if rule is GainRule.MMSE_STSA:
        if gamma is None:
            raise ValueError("mmse-stsa requires gamma")
        return gain_mmse_stsa(xi, gamma)
    raise ValueError(f"unknown gain rule {rule!r}")


def apply_gain(noisy, xi, rule: GainRule, gamma=None):
    """Scale the noisy magnitudes by the rule's gain, keeping the phase.

    Returns a new spectrogram; the phase array is copied bit-for-bit.
    """
    from .dsp import SpectroGram

    if np.shape(xi) != noisy.magnitude.shape:
        raise ValueError("xi shape must match the spectrogram")
    g = gain_for(rule, xi, gamma)
    return SpectroGram(noisy.magnitude * g, noisy.phase.copy(), noisy.config)
