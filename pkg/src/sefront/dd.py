"""Decision-directed a priori SNR estimation with a recursive noise tracker.

The classical non-neural baseline: noise power is tracked by a gated
first-order recursion (updates only where the cell looks speech-absent),
and xi is the usual weighted blend of the previous frame's post-gain
amplitude estimate and the instantaneous max(gamma - 1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dsp import AnalysisConfig, DEFAULT_CONFIG, AudioSignal, istft, stft
from .gain import GainRule, gain_for

ALPHA_DD = 0.98
ALPHA_NOISE = 0.98
BETA_ABSENCE = 2.0
INIT_FRAMES = 10
_POWER_FLOOR = 1e-12


@dataclass
class NoiseTracker:
    """Per-bin noise power estimate lambda_d with its recursion constants."""

    lambda_d: np.ndarray | None = None
    alpha: float = ALPHA_NOISE
    beta: float = BETA_ABSENCE

    @classmethod
    def from_frames(cls, power_frames, alpha: float = ALPHA_NOISE,
                    beta: float = BETA_ABSENCE) -> "NoiseTracker":
        """Initialize from the arithmetic mean power of the first frames."""
        frames = np.atleast_2d(np.asarray(power_frames, dtype=np.float64))
        if frames.shape[0] == 0:
            raise ValueError("need at least one frame to initialize")
        lam = np.maximum(frames.mean(axis=0), _POWER_FLOOR)
        return cls(lam, alpha, beta)

    @property
    def initialized(self) -> bool:
        return self.lambda_d is not None


def track_noise(state: NoiseTracker, noisy_power_frame) -> NoiseTracker:
    """One gated recursion step.

    Cells with |X|^2 < beta * lambda_d update as
    lambda_d <- alpha * lambda_d + (1 - alpha) * |X|^2; the rest keep
    their value.  The estimate stays strictly positive.
    """
    if not state.initialized:
        raise ValueError("tracker not initialized: call NoiseTracker.from_frames first")
    p = np.asarray(noisy_power_frame, dtype=np.float64)
    if p.shape != state.lambda_d.shape:
        raise ValueError("power frame shape does not match the tracker")
    absent = p < state.beta * state.lambda_d
    lam = np.where(
        absent, state.alpha * state.lambda_d + (1.0 - state.alpha) * p, state.lambda_d
    )
    return replace(state, lambda_d=lam)


@dataclass
class DdState:
    """Carry-over between frames: previous post-gain amplitude squared."""

    prev_amp_sq: np.ndarray
    alpha: float = ALPHA_DD


def dd_xi(
    state: DdState,
    noisy_power_frame,
    lambda_d,
    rule: GainRule = GainRule.SRWF,
):
    """One decision-directed step; returns (xi, gamma, next state).

    gamma = |X|^2 / lambda_d
    xi    = alpha * prev_amp_sq / lambda_d + (1 - alpha) * max(gamma - 1, 0)

    The state advances with (G |X|)^2 where G is the rule's gain for
    this frame, so the recursion sees the enhanced amplitude.
    """
    p = np.asarray(noisy_power_frame, dtype=np.float64)
    lam = np.maximum(np.asarray(lambda_d, dtype=np.float64), _POWER_FLOOR)
    gamma = p / lam
    xi = state.alpha * state.prev_amp_sq / lam + (1.0 - state.alpha) * np.maximum(
        gamma - 1.0, 0.0
    )
    g = gain_for(rule, xi, np.maximum(gamma, _POWER_FLOOR))
    next_state = replace(state, prev_amp_sq=(g * g) * p)
    return xi, gamma, next_state


def tracked_noise_power(
    power: np.ndarray,
    alpha: float = ALPHA_NOISE,
    beta: float = BETA_ABSENCE,
    init_frames: int = INIT_FRAMES,
) -> np.ndarray:
    """lambda_d per frame for a whole power spectrogram.

    The first init_frames frames share the initial mean estimate; the
    recursion starts after them.
    """
    power = np.asarray(power, dtype=np.float64)
    n_init = min(init_frames, power.shape[0])
    tracker = NoiseTracker.from_frames(power[:n_init], alpha, beta)
    lam = np.empty_like(power)
    for l in range(power.shape[0]):
        if l >= n_init:
            tracker = track_noise(tracker, power[l])
        lam[l] = tracker.lambda_d
    return lam


def enhance_dd(
    noisy,
    rule: GainRule = GainRule.SRWF,
    config: AnalysisConfig = DEFAULT_CONFIG,
    alpha_dd: float = ALPHA_DD,
    alpha_noise: float = ALPHA_NOISE,
    beta: float = BETA_ABSENCE,
    init_frames: int = INIT_FRAMES,
) -> AudioSignal:
    """Full single-channel baseline: stft, track, dd, gain, istft.

    Output length equals the input length; resynthesis reuses the noisy
    phase.  An all-zero input comes back all zero.
    """
    if isinstance(noisy, AudioSignal):
        n_out = len(noisy)
    else:
        n_out = np.asarray(noisy).size
    spec = stft(noisy, config)
    power = spec.magnitude**2
    lam = tracked_noise_power(power, alpha_noise, beta, init_frames)
    state = DdState(np.zeros(spec.config.n_bins), alpha_dd)
    gains = np.empty_like(power)
    for l in range(spec.n_frames):
        xi, gamma, state = dd_xi(state, power[l], lam[l], rule)
        gains[l] = gain_for(rule, xi, np.maximum(gamma, _POWER_FLOOR))
    from .dsp import SpectroGram

    shaped = SpectroGram(spec.magnitude * gains, spec.phase, spec.config)
    return istft(shaped, n_out)
