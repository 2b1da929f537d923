"""A priori SNR: oracle values, the bounded training-target map, statistics.

The a priori SNR xi of a noisy spectral cell is the ratio of clean to
noise power.  For training targets it is compressed through the normal
CDF in the dB domain, parameterised per frequency bin by the mean and
standard deviation of xi_dB over a mixed corpus, so every target lands
in (0, 1) and the inverse map recovers xi_dB exactly on the interior.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf, erfc

from .dsp import AnalysisConfig, DEFAULT_CONFIG, SpectroGram, stft, _samples

NOISE_POWER_FLOOR = 1e-12
MAP_CLAMP = 1e-7
SIGMA_FLOOR_DB = 0.1
STATS_XI_FLOOR = 1e-12  # keeps xi_dB finite when a clean cell is exactly zero

_SQRT2 = np.sqrt(2.0)
_STATS_MAGIC = "xistats-v1"


def oracle_xi(clean: SpectroGram, noise: SpectroGram) -> np.ndarray:
    """Instantaneous a priori SNR |S|^2 / max(|D|^2, 1e-12) per cell.

    Both spectrograms must come from the same framing of the same-length
    components of a mixture.
    """
    if clean.magnitude.shape != noise.magnitude.shape:
        raise ValueError("clean and noise spectrogram shapes differ")
    s2 = clean.magnitude**2
    d2 = np.maximum(noise.magnitude**2, NOISE_POWER_FLOOR)
    return s2 / d2


def xi_to_db(xi: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(xi)


def db_to_xi(xi_db: np.ndarray) -> np.ndarray:
    return 10.0 ** (np.asarray(xi_db, dtype=np.float64) / 10.0)


@dataclass
class XiStats:
    """Per-bin mean and standard deviation of xi_dB over a corpus."""

    mu_db: np.ndarray
    sigma_db: np.ndarray
    n_frames: int = 0

    def __post_init__(self):
        self.mu_db = np.atleast_1d(np.asarray(self.mu_db, dtype=np.float64))
        self.sigma_db = np.atleast_1d(np.asarray(self.sigma_db, dtype=np.float64))
        if self.mu_db.shape != self.sigma_db.shape or self.mu_db.ndim != 1:
            raise ValueError("mu and sigma must be 1-D and the same length")
        if self.mu_db.size == 0:
            raise ValueError("stats must cover at least one bin")
        if not (np.all(np.isfinite(self.mu_db)) and np.all(np.isfinite(self.sigma_db))):
            raise ValueError("stats must be finite")
        if np.any(self.sigma_db <= 0):
            raise ValueError("sigma must be strictly positive")

    @property
    def n_bins(self) -> int:
        return self.mu_db.size


def map_xi(xi_db, stats: XiStats) -> np.ndarray:
    """Map xi_dB into (0, 1) through the per-bin normal CDF.

    bar_xi = 0.5 * (1 + erf((xi_dB - mu) / (sigma * sqrt(2)))).
    Broadcasts over leading frame axes; the last axis must match the
    stats length.
    """
    xi_db = np.asarray(xi_db, dtype=np.float64)
    if xi_db.shape[-1] != stats.n_bins:
        raise ValueError("last axis must match the stats bin count")
    z = (xi_db - stats.mu_db) / (stats.sigma_db * _SQRT2)
    return 0.5 * (1.0 + erf(z))


def inverse_erf(y) -> np.ndarray:
    """Inverse of erf, accurate to better than 1e-12 on (-1, 1).

    A closed-form rational/log initial guess is polished with Newton
    steps: against erf on the well-conditioned centre, against erfc in
    the tails (where 1 - |y| is exact and erfc keeps full relative
    accuracy), so the result is machine-accurate everywhere the bounded
    map can land.
    """
    y = np.asarray(y, dtype=np.float64)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.empty_like(y)
    interior = np.abs(y) < 1.0
    out[~interior] = np.where(y[~interior] >= 1.0, np.inf, -np.inf)

    yi = y[interior]
    sign = np.where(yi < 0.0, -1.0, 1.0)
    ay = np.abs(yi)
    # Winitzki-style initial guess.
    a = 0.147
    ln1m = np.log1p(-ay * ay)
    t = 2.0 / (np.pi * a) + 0.5 * ln1m
    x = np.sqrt(np.sqrt(t * t - ln1m / a) - t)

    half_sqrt_pi = 0.5 * np.sqrt(np.pi)
    centre = ay <= 0.5
    tail = ~centre
    xc = x[centre]
    for _ in range(3):
        xc = xc - (erf(xc) - ay[centre]) * half_sqrt_pi * np.exp(xc * xc)
    comp = 1.0 - ay[tail]  # exact: ay in [0.5, 1)
    xt = x[tail]
    for _ in range(3):
        xt = xt + (erfc(xt) - comp) * half_sqrt_pi * np.exp(xt * xt)
    x[centre] = xc
    x[tail] = xt
    out[interior] = sign * x
    return out[0] if scalar else out


def unmap_xi(bar_xi, stats: XiStats) -> np.ndarray:
    """Invert the bounded map back to linear xi.

    Inputs are clamped to [1e-7, 1 - 1e-7] before inversion, so saturated
    network outputs stay finite; interior values round-trip to within
    1e-9 dB of the original xi_dB.
    """
    bar = np.asarray(bar_xi, dtype=np.float64)
    if bar.shape[-1] != stats.n_bins:
        raise ValueError("last axis must match the stats bin count")
    bar = np.clip(bar, MAP_CLAMP, 1.0 - MAP_CLAMP)
    xi_db = stats.sigma_db * _SQRT2 * inverse_erf(2.0 * bar - 1.0) + stats.mu_db
    return db_to_xi(xi_db)


def stats_from_xi_db(xi_db_frames: np.ndarray, n_frames: int | None = None) -> XiStats:
    """Per-bin sample mean / sample std (ddof 1) with the 0.1 dB sigma floor."""
    pooled = np.asarray(xi_db_frames, dtype=np.float64)
    if pooled.ndim != 2 or pooled.shape[0] == 0:
        raise ValueError("need a non-empty (frames x bins) array")
    mu = pooled.mean(axis=0)
    if pooled.shape[0] > 1:
        sigma = pooled.std(axis=0, ddof=1)
    else:
        sigma = np.zeros_like(mu)
    sigma = np.maximum(sigma, SIGMA_FLOOR_DB)
    return XiStats(mu, sigma, pooled.shape[0] if n_frames is None else n_frames)


def _content_key(signal) -> str:
    x = _samples(signal)
    return hashlib.blake2b(x.tobytes(), digest_size=16).hexdigest()


def estimate_stats(
    clean_signals,
    noise_signals,
    snr_range=range(-10, 21, 5),
    seed: int = 0,
    config: AnalysisConfig = DEFAULT_CONFIG,
) -> XiStats:
    """Pool oracle xi_dB over a seeded mixing schedule and take per-bin stats.

    Each clean recording is paired with one noise recording, a random
    section of it, and one SNR from snr_range.  Both corpora are ordered
    by content digest before the schedule is drawn, so the result is
    invariant to the order the recordings are passed in.  Clean cells
    with zero magnitude enter the pool at the -120 dB floor.
    """
    from .corpus import mixing_gain  # local import, corpus does not import snr

    clean_list = [_samples(s) for s in clean_signals]
    noise_list = [_samples(s) for s in noise_signals]
    snrs = list(snr_range)
    if not clean_list or not noise_list:
        raise ValueError("clean and noise corpora must be non-empty")
    if not snrs:
        raise ValueError("empty grid")

    clean_list.sort(key=lambda x: hashlib.blake2b(x.tobytes(), digest_size=16).digest())
    noise_list.sort(key=lambda x: hashlib.blake2b(x.tobytes(), digest_size=16).digest())

    rng = np.random.default_rng(seed)
    pool = []
    for x in clean_list:
        d = noise_list[rng.integers(len(noise_list))]
        if d.size < x.size:  # short noise is tiled before the section is cut
            d = np.tile(d, -(-x.size // d.size))
        offset = int(rng.integers(d.size - x.size + 1))
        snr_db = snrs[rng.integers(len(snrs))]
        section = d[offset : offset + x.size]
        g = mixing_gain(x, section, snr_db)
        xi = oracle_xi(stft(x, config), stft(g * section, config))
        pool.append(xi_to_db(np.maximum(xi, STATS_XI_FLOOR)))
    pooled = np.concatenate(pool, axis=0)
    return stats_from_xi_db(pooled)


def save_stats(stats: XiStats, path) -> None:
    """Write the line-oriented text format: header, mu row, sigma row."""
    lines = [
        f"{_STATS_MAGIC} {stats.n_bins} {stats.n_frames}",
        " ".join(f"{v:.17g}" for v in stats.mu_db),
        " ".join(f"{v:.17g}" for v in stats.sigma_db),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_stats(path) -> XiStats:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 3:
        raise ValueError(f"stats file: expected 3 lines, got {len(lines)}")
    head = lines[0].split()
    if len(head) != 3 or head[0] != _STATS_MAGIC:
        raise ValueError("stats file: bad header")
    n_bins, n_frames = int(head[1]), int(head[2])
    mu = np.array([float(v) for v in lines[1].split()])
    sigma = np.array([float(v) for v in lines[2].split()])
    if mu.size != n_bins or sigma.size != n_bins:
        raise ValueError(f"stats file: expected {n_bins} values per row")
    return XiStats(mu, sigma, n_frames)
