"""Corpus tools: PCM WAV I/O, SNR-controlled mixing, test-set manifests.

Recordings are 16-bit mono PCM at 16 kHz.  Loading divides by 32768;
saving rounds back, so a load/save cycle of a conforming file is
byte-identical.  Mixing scales the noise section so the full-signal
power ratio hits the requested SNR exactly, then rescales all three
components together if the mixture would clip.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dsp import SAMPLE_RATE, AudioSignal, _samples

PCM_SCALE = 32768.0
CLIP_TARGET = 0.99


class WavFormatError(ValueError):
    """A WAV file that is not 16-bit mono PCM at 16 kHz."""


def load_wav(path) -> AudioSignal:
    """Read a PCM WAV file, checking every format property by name."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise WavFormatError(f"{path.name}: {exc}") from exc
    if n_channels != 1:
        raise WavFormatError(f"{path.name}: channels: expected 1, got {n_channels}")
    if sampwidth != 2:
        raise WavFormatError(
            f"{path.name}: sample_width: expected 2 bytes, got {sampwidth}"
        )
    if rate != SAMPLE_RATE:
        raise WavFormatError(
            f"{path.name}: sample_rate: expected {SAMPLE_RATE}, got {rate}"
        )
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return AudioSignal(data, rate)


def wav_length(path) -> int:
    """Sample count from the header alone, with the same format checks."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise WavFormatError(
                    f"{path.name}: channels: expected 1, got {wf.getnchannels()}"
                )
            if wf.getframerate() != SAMPLE_RATE:
                raise WavFormatError(
                    f"{path.name}: sample_rate: expected {SAMPLE_RATE}, "
                    f"got {wf.getframerate()}"
                )
            return wf.getnframes()
    except wave.Error as exc:
        raise WavFormatError(f"{path.name}: {exc}") from exc


def save_wav(signal, path) -> None:
    """Write 16-bit mono PCM; amplitudes clip to the representable range."""
    x = _samples(signal)
    rate = signal.sample_rate if isinstance(signal, AudioSignal) else SAMPLE_RATE
    if rate != SAMPLE_RATE:
        raise WavFormatError(f"sample_rate: expected {SAMPLE_RATE}, got {rate}")
    q = np.clip(np.rint(x * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(q.tobytes())


def mixing_gain(clean, noise_section, snr_db: float) -> float:
    """Noise scale g with mean-square powers giving exactly snr_db."""
    x = _samples(clean)
    d = _samples(noise_section)
    p_clean = float(np.mean(x * x))
    p_noise = float(np.mean(d * d))
    if p_clean <= 0.0:
        raise ValueError("clean signal has zero power")
    if p_noise <= 0.0:
        raise ValueError("noise section has zero power")
    return float(np.sqrt(p_clean / p_noise * 10.0 ** (-snr_db / 10.0)))


class MixResult(NamedTuple):
    noisy: AudioSignal
    clean: AudioSignal
    noise: AudioSignal


def mix_at_snr(clean, noise, snr_db: float, noise_offset: int = 0) -> MixResult:
    """Mix a noise section into the clean signal at an exact SNR.

    The section starts at noise_offset and must cover the clean length.
    If the mixture peaks above 1.0, all three returned components are
    rescaled together to a 0.99 peak, preserving the SNR and the exact
    identity noisy == clean + noise.
    """
    x = _samples(clean)
    d_full = _samples(noise)
    if x.size == 0:
        raise ValueError("clean signal is empty")
    if noise_offset < 0 or noise_offset + x.size > d_full.size:
        raise ValueError(
            f"noise section [{noise_offset}, {noise_offset + x.size}) "
            f"outside noise length {d_full.size}"
        )
    section = d_full[noise_offset : noise_offset + x.size]
    g = mixing_gain(x, section, snr_db)
    d = g * section
    noisy = x + d
    peak = float(np.max(np.abs(noisy))) if noisy.size else 0.0
    if peak > 1.0:
        scale = CLIP_TARGET / peak
        x = x * scale
        d = d * scale
        noisy = noisy * scale
    return MixResult(AudioSignal(noisy), AudioSignal(x), AudioSignal(d))


@dataclass(frozen=True)
class MixSpec:
    """One mixing job: where the components live and how to combine them."""

    clean_path: str
    noise_path: str
    snr_db: float
    noise_offset: int
    output_path: str


@dataclass
class Manifest:
    entries: list[MixSpec] = field(default_factory=list)
    seed: int | None = None
    snr_grid: tuple[float, ...] = ()

    def __len__(self):
        return len(self.entries)


def _fmt_snr(snr_db: float) -> str:
    return f"{snr_db:g}"


def build_test_manifest(
    clean_dir,
    noise_dir,
    per_noise_count: int,
    snr_grid,
    seed: int = 0,
) -> Manifest:
    """Draw the evaluation grid: per noise recording, sample clean files
    without replacement and expand each pair over every SNR in the grid,
    with a fresh random noise offset per entry.

    Directory listings are sorted by name, so a fixed seed fixes the
    manifest byte for byte.
    """
    snrs = [float(s) for s in snr_grid]
    if not snrs:
        raise ValueError("empty grid")
    if per_noise_count < 1:
        raise ValueError("per_noise_count must be at least 1")
    clean_paths = sorted(Path(clean_dir).glob("*.wav"))
    noise_paths = sorted(Path(noise_dir).glob("*.wav"))
    if not clean_paths:
        raise ValueError(f"no .wav files in {clean_dir}")
    if not noise_paths:
        raise ValueError(f"no .wav files in {noise_dir}")
    if per_noise_count > len(clean_paths):
        raise ValueError(
            f"per_noise_count {per_noise_count} exceeds {len(clean_paths)} clean files"
        )

    clean_lens = {p: wav_length(p) for p in clean_paths}
    noise_lens = {p: wav_length(p) for p in noise_paths}

    rng = np.random.default_rng(seed)
    entries = []
    for noise_path in noise_paths:
        picks = rng.choice(len(clean_paths), size=per_noise_count, replace=False)
        for ci in picks:
            clean_path = clean_paths[int(ci)]
            n_clean = clean_lens[clean_path]
            n_noise = noise_lens[noise_path]
            if n_noise < n_clean:
                raise ValueError(
                    f"{noise_path.name}: shorter than clean file {clean_path.name}"
                )
            for snr_db in snrs:
                offset = int(rng.integers(n_noise - n_clean + 1))
                out_name = (
                    f"{clean_path.stem}__{noise_path.stem}__{_fmt_snr(snr_db)}dB.wav"
                )
                entries.append(
                    MixSpec(
                        str(clean_path), str(noise_path), snr_db, offset, out_name
                    )
                )
    return Manifest(entries, seed, tuple(snrs))


def save_manifest(manifest: Manifest, path) -> None:
    """Tab-separated records: clean, noise, snr_db, noise_offset, output."""
    lines = [
        "\t".join(
            (
                e.clean_path,
                e.noise_path,
                _fmt_snr(e.snr_db),
                str(e.noise_offset),
                e.output_path,
            )
        )
        for e in manifest.entries
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_manifest(path) -> Manifest:
    entries = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"manifest line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            entries.append(
                MixSpec(parts[0], parts[1], float(parts[2]), int(parts[3]), parts[4])
            )
        except ValueError as exc:
            raise ValueError(f"manifest line {lineno}: {exc}") from exc
    return Manifest(entries)


def run_mix_entry(entry: MixSpec, out_dir) -> Path:
    """Mix one manifest entry and write the noisy WAV into out_dir."""
    clean = load_wav(entry.clean_path)
    noise = load_wav(entry.noise_path)
    mixed = mix_at_snr(clean, noise, entry.snr_db, entry.noise_offset)
    out_path = Path(out_dir) / entry.output_path
    save_wav(mixed.noisy, out_path)
    return out_path
