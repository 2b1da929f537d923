import numpy as np
import pytest

from sefront.dsp import (
    AnalysisConfig,
    AudioSignal,
    DEFAULT_CONFIG,
    SpectroGram,
    frame_count,
    frame_signal,
    hamming_window,
    istft,
    stft,
    synthesis_length,
)


def test_hamming_known_values():
    # n=4: cos terms at 0, 2pi/3, 4pi/3, 2pi
    np.testing.assert_allclose(
        hamming_window(4), [0.08, 0.77, 0.77, 0.08], atol=1e-12
    )


def test_hamming_symmetric_and_positive():
    w = hamming_window(512)
    np.testing.assert_allclose(w, w[::-1], atol=0)
    assert np.all(w > 0)
    np.testing.assert_allclose(w[0], 0.08, atol=1e-12)


def test_hamming_rejects_short():
    with pytest.raises(ValueError):
        hamming_window(1)


def test_frame_count_ceil():
    assert frame_count(512, 256) == 2
    assert frame_count(256, 256) == 1
    assert frame_count(1024, 256) == 4
    assert frame_count(513, 256) == 3
    assert frame_count(1, 256) == 1


def test_frame_signal_layout_and_padding():
    x = np.arange(600, dtype=float)
    frames = frame_signal(x)
    assert frames.shape == (3, 512)
    np.testing.assert_array_equal(frames[0], x[:512])
    np.testing.assert_array_equal(frames[1, :344], x[256:])
    assert np.all(frames[1, 344:] == 0)
    np.testing.assert_array_equal(frames[2, :88], x[512:])
    assert np.all(frames[2, 88:] == 0)


def test_frame_signal_rejects_empty():
    with pytest.raises(ValueError):
        frame_signal(np.array([]))


def test_stft_shapes():
    rng = np.random.default_rng(0)
    spec = stft(rng.normal(0, 0.1, 16000))
    assert spec.magnitude.shape == (63, 257)
    assert spec.phase.shape == (63, 257)
    assert np.all(spec.magnitude >= 0)
    assert np.all(np.abs(spec.phase) <= np.pi + 1e-12)


def test_stft_matches_straight_line_transform():
    # one frame recomputed by hand: window, then a plain rfft
    rng = np.random.default_rng(1)
    x = rng.normal(0, 0.1, 1200)
    spec = stft(x)
    ref = np.fft.rfft(x[256:768] * hamming_window(512), n=512)
    np.testing.assert_allclose(spec.magnitude[1], np.abs(ref), rtol=1e-12)
    np.testing.assert_allclose(spec.phase[1], np.angle(ref), rtol=1e-12, atol=1e-12)


def test_round_trip_random_signals():
    rng = np.random.default_rng(7)
    for n in (16000, 20011, 48000):
        x = rng.uniform(-0.5, 0.5, n)
        y = istft(stft(x), out_len=n)
        assert np.max(np.abs(y.samples - x)) < 1e-10


def test_round_trip_cosine():
    t = np.arange(8000) / 16000.0
    x = 0.7 * np.cos(2 * np.pi * 440.0 * t)
    y = istft(stft(x), out_len=x.size)
    assert np.max(np.abs(y.samples - x)) < 1e-10


def test_round_trip_zeros():
    y = istft(stft(np.zeros(4096)), out_len=4096)
    np.testing.assert_array_equal(y.samples, np.zeros(4096))


def test_istft_default_length_covers_frames():
    spec = stft(np.ones(1000))
    assert synthesis_length(spec.n_frames) == 3 * 256 + 512
    assert len(istft(spec)) == 3 * 256 + 512


def test_istft_rejects_over_long_request():
    spec = stft(np.ones(1000))
    with pytest.raises(ValueError):
        istft(spec, out_len=synthesis_length(spec.n_frames) + 1)


def test_audio_signal_validation():
    s = AudioSignal([0.0, 0.5, -0.5])
    assert s.samples.dtype == np.float64
    assert len(s) == 3
    with pytest.raises(ValueError):
        AudioSignal(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        AudioSignal(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AudioSignal(np.zeros(4), sample_rate=0)


def test_analysis_config_validation():
    assert DEFAULT_CONFIG.n_bins == 257
    with pytest.raises(ValueError):
        AnalysisConfig(frame_shift=0)
    with pytest.raises(ValueError):
        AnalysisConfig(frame_shift=513)
    with pytest.raises(ValueError):
        AnalysisConfig(fft_size=256)


def test_spectrogram_validation():
    mag = np.ones((3, 257))
    ph = np.zeros((3, 257))
    assert SpectroGram(mag, ph).n_frames == 3
    with pytest.raises(ValueError):
        SpectroGram(mag, np.zeros((2, 257)))
    with pytest.raises(ValueError):
        SpectroGram(-mag, ph)
    with pytest.raises(ValueError):
        SpectroGram(np.ones((3, 100)), np.zeros((3, 100)))
