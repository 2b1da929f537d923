"""Short-time Fourier analysis and synthesis for 16 kHz speech.

Framing uses a 32 ms symmetric Hamming window with a 16 ms shift and a
512-point DFT, keeping the 257-bin single-sided spectrum (DC and Nyquist
included).  Synthesis is weighted overlap-add: the analysis window is
reused for synthesis and each output sample is normalised by the summed
squared window, which reconstructs unmodified spectra exactly at any
frame position, including the partially covered edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 16000


@dataclass
class AudioSignal:
    """Mono waveform, float64 samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class AnalysisConfig:
    """Frame/DFT geometry. Defaults give 257 bins at 16 kHz."""

    frame_len: int = 512
    frame_shift: int = 256
    fft_size: int = 512

    def __post_init__(self):
        if self.frame_len < 2:
            raise ValueError("frame_len must be at least 2")
        if not 0 < self.frame_shift <= self.frame_len:
            raise ValueError("frame_shift must be in (0, frame_len]")
        if self.fft_size < self.frame_len:
            raise ValueError("fft_size must cover frame_len")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


DEFAULT_CONFIG = AnalysisConfig()


@dataclass
class SpectroGram:
    """Single-sided magnitude/phase spectra, one row per frame."""

    magnitude: np.ndarray
    phase: np.ndarray
    config: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        self.magnitude = np.asarray(self.magnitude, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        if self.magnitude.shape != self.phase.shape:
            raise ValueError("magnitude and phase shapes differ")
        if self.magnitude.ndim != 2:
            raise ValueError("spectra must be 2-D (frames x bins)")
        if self.magnitude.shape[1] != self.config.n_bins:
            raise ValueError(
                f"bins: expected {self.config.n_bins}, got {self.magnitude.shape[1]}"
            )
        if np.any(self.magnitude < 0):
            raise ValueError("magnitude must be non-negative")

    @property
    def n_frames(self) -> int:
        return self.magnitude.shape[0]


def _samples(signal) -> np.ndarray:
    if isinstance(signal, AudioSignal):
        return signal.samples
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    return x


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window, w[i] = 0.54 - 0.46 cos(2 pi i / (n - 1)).

    Every value is strictly positive (edge value 0.08), which keeps the
    overlap-add normalisation well defined.
    """
    if n < 2:
        raise ValueError("window length must be at least 2")
    i = np.arange(n, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (n - 1))


def frame_count(n_samples: int, frame_shift: int) -> int:
    return -(-n_samples // frame_shift)


def frame_signal(signal, config: AnalysisConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Slice a signal into overlapping frames, zero-padding the tail.

    Frame l covers samples [l * frame_shift, l * frame_shift + frame_len).
    The frame count is ceil(len / frame_shift), so every sample lands in
    at least one frame.
    """
    x = _samples(signal)
    if x.size == 0:
        raise ValueError("cannot frame an empty signal")
    n_frames = frame_count(x.size, config.frame_shift)
    padded = np.zeros((n_frames - 1) * config.frame_shift + config.frame_len)
    padded[: x.size] = x
    offsets = config.frame_shift * np.arange(n_frames)
    idx = offsets[:, None] + np.arange(config.frame_len)[None, :]
    return padded[idx]


def stft(signal, config: AnalysisConfig = DEFAULT_CONFIG) -> SpectroGram:
    """Windowed forward transform. Unnormalized DFT, single-sided bins."""
    frames = frame_signal(signal, config) * hamming_window(config.frame_len)
    spec = np.fft.rfft(frames, n=config.fft_size, axis=1)
    return SpectroGram(np.abs(spec), np.angle(spec), config)


def synthesis_length(n_frames: int, config: AnalysisConfig = DEFAULT_CONFIG) -> int:
    return (n_frames - 1) * config.frame_shift + config.frame_len


def istft(spec: SpectroGram, out_len: int | None = None) -> AudioSignal:
    """Weighted overlap-add synthesis with per-sample window normalisation.

    out_len defaults to the full synthesizable span. Requesting more
    samples than the frames cover is an error.
    """
    cfg = spec.config
    total = synthesis_length(spec.n_frames, cfg)
    if out_len is None:
        out_len = total
    if out_len > total:
        raise ValueError(f"out_len {out_len} exceeds synthesizable length {total}")
    if out_len < 0:
        raise ValueError("out_len must be non-negative")

    window = hamming_window(cfg.frame_len)
    frames = np.fft.irfft(
        spec.magnitude * np.exp(1j * spec.phase), n=cfg.fft_size, axis=1
    )[:, : cfg.frame_len]
    frames *= window

    out = np.zeros(total)
    norm = np.zeros(total)
    wsq = window * window
    for l in range(spec.n_frames):
        start = l * cfg.frame_shift
        out[start : start + cfg.frame_len] += frames[l]
        norm[start : start + cfg.frame_len] += wsq
    out /= norm  # window strictly positive, so norm > 0 everywhere
    return AudioSignal(out[:out_len])
