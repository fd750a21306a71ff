import numpy as np
import pytest
from scipy import signal as sps

from codec.corpus import aligned_narrowband, iter_frames
from codec.highband import (
    HighbandFrameCode,
    HighbandState,
    SynthesisState,
    decode_envelope,
    decoded_envelope,
    encode_envelope,
    extend_excitation,
    gain_match,
    gain_match_filter,
    highband_vector,
    highpass_filter,
    local_envelope,
    path_delay,
    regenerate_highband,
    synthesize_highband,
    whiten,
)
from codec.vq import Codebook
from dsp.lpc import FilterState, LpcModel
from dsp.signal import AudioBuffer, resampler_delay
from exceptions import PreconditionError


def _ar_frame(n, seed, pole=0.9):
    rng = np.random.default_rng(seed)
    return sps.lfilter([1.0], [1.0, -pole], 0.05 * rng.standard_normal(n))


def _smooth_codebook(seed=0, size=16):
    rng = np.random.default_rng(seed)
    k = np.arange(40)
    vectors = [a * np.cos(np.pi * k / 40 * f) - 0.3 * k for a, f in zip(rng.uniform(2, 10, size), rng.uniform(0.5, 3, size))]
    return Codebook(np.array(vectors))


def _lowband_energy(x):
    y = sps.lfilter(gain_match_filter().taps, [1.0], x)
    return float(np.dot(y, y))


def test_rectified_sine_follows_the_full_wave_series():
    n = 1600
    x = np.sin(2 * np.pi * 400 * np.arange(n) / 16000)
    spectrum = np.fft.rfft(extend_excitation(AudioBuffer(x, 16000)).samples)
    assert spectrum[0].real / n == pytest.approx(2 / np.pi, abs=2e-3)
    assert 2 * np.abs(spectrum[80]) / n == pytest.approx(4 / (3 * np.pi), abs=2e-3)
    with pytest.raises(PreconditionError):
        extend_excitation(AudioBuffer(x[:800], 8000))


def test_rectification_keeps_peaks_on_the_harmonic_grid():
    rng = np.random.default_rng(14)
    t = np.arange(4000)
    x = sum(rng.uniform(0.2, 1.0) / h * np.sin(2 * np.pi * h * t / 80 + rng.uniform(0, 2 * np.pi)) for h in range(1, 18))
    power = np.abs(np.fft.rfft(extend_excitation(AudioBuffer(x, 16000)).samples)) ** 2
    db = 10 * np.log10(power + 1e-12 * power.max())
    peaks, _ = sps.find_peaks(db, height=np.median(db) + 20.0)
    # 4 Hz bins, so multiples of 200 Hz sit on every 50th bin
    assert peaks.size >= 10
    offsets = np.minimum(peaks % 50, 50 - peaks % 50)
    assert np.all(offsets <= 1)


def test_whitening_flattens_a_coloured_frame():
    x = _ar_frame(256, 1)
    y, state, passthrough = whiten(AudioBuffer(x, 16000), FilterState.zeros(16))
    assert not passthrough
    assert state.order == 16
    rho_in = np.dot(x[1:], x[:-1]) / np.dot(x, x)
    rho_out = np.dot(y.samples[1:], y.samples[:-1]) / np.dot(y.samples, y.samples)
    assert rho_in > 0.7
    assert abs(rho_out) < 0.2


def test_whitening_keeps_white_noise_level():
    x = 0.1 * np.random.default_rng(2).standard_normal(256)
    y, _, _ = whiten(AudioBuffer(x, 16000), FilterState.zeros(16))
    assert np.dot(y.samples, y.samples) == pytest.approx(np.dot(x, x), rel=0.3)


def test_whitening_passes_a_silent_frame_through():
    y, state, passthrough = whiten(AudioBuffer(np.zeros(256), 16000), FilterState.zeros(16))
    assert passthrough
    np.testing.assert_array_equal(y.samples, 0.0)
    np.testing.assert_array_equal(state.memory, 0.0)


def test_gain_match_equalizes_the_telephone_band():
    rng = np.random.default_rng(3)
    ref = AudioBuffer(0.3 * rng.standard_normal(256), 16000)
    src = AudioBuffer(0.01 * rng.standard_normal(256), 16000)
    out = gain_match(src, ref)
    assert _lowband_energy(out.samples) == pytest.approx(_lowband_energy(ref.samples), rel=1e-9)

    silent = AudioBuffer(np.zeros(256), 16000)
    np.testing.assert_array_equal(gain_match(silent, ref).samples, 0.0)
    np.testing.assert_array_equal(gain_match(src, silent).samples, 0.0)
    with pytest.raises(PreconditionError):
        gain_match(src, AudioBuffer(np.zeros(128), 16000))


def test_envelope_code_ignores_frame_level():
    cb = _smooth_codebook()
    x = _ar_frame(256, 4, pole=-0.6)
    np.testing.assert_allclose(highband_vector(10 * x), highband_vector(x), atol=1e-8)
    assert encode_envelope(10 * x, cb) == encode_envelope(x, cb)
    np.testing.assert_array_equal(highband_vector(np.zeros(256)), np.zeros(40))
    with pytest.raises(PreconditionError):
        highband_vector(np.zeros(128))


def test_frame_silent_under_the_window_codes_as_flat():
    # the analysis window is zero at sample 0, so without pre-emphasis nothing reaches it
    x = np.zeros(256)
    x[0] = 0.5
    np.testing.assert_array_equal(highband_vector(x, preemph=0.0), np.zeros(40))
    cb = _smooth_codebook()
    assert encode_envelope(x, cb, preemph=0.0).index == encode_envelope(np.zeros(256), cb).index


def test_local_envelope_tracks_the_wideband_level():
    rng = np.random.default_rng(5)
    wide = 0.05 * rng.standard_normal(2048)
    nb = sps.resample_poly(wide, 1, 2)
    local, _ = local_envelope(nb[512:640], 0.0)
    # white 16 kHz noise band-limited to 4 kHz keeps half its power below 4 kHz
    assert np.mean(local[4:20]) == pytest.approx(10 * np.log10(0.05**2), abs=3.0)


def test_decoded_models_are_stable():
    cb = _smooth_codebook(seed=6)
    rng = np.random.default_rng(7)
    for index in range(cb.size):
        nb = _ar_frame(128, index, pole=rng.uniform(-0.9, 0.9))
        model = decode_envelope(HighbandFrameCode(index), cb, nb)
        assert model.order == 16
        assert model.is_stable
    silent = decode_envelope(HighbandFrameCode(0), cb, np.zeros(128))
    assert silent.is_stable


def test_decoded_envelope_keeps_the_codeword_shape():
    cb = _smooth_codebook(seed=8)
    nb = _ar_frame(128, 9)
    env = decoded_envelope(HighbandFrameCode(3), cb, nb)
    shape = env.points[24:] - env.points[24:].mean()
    np.testing.assert_allclose(shape, cb.vectors[3] - cb.vectors[3].mean(), atol=1e-9)


def test_flat_spectrum_decodes_flat_within_codebook_distortion():
    rng = np.random.default_rng(13)
    wb = AudioBuffer(0.05 * rng.standard_normal(256 * 40), 16000)
    k = np.arange(40)
    cb = Codebook(np.vstack([np.zeros(40)] + [8.0 * np.cos(np.pi * k * f / 40) for f in (1.0, 2.0, 3.0)]))
    decoded, distortion = [], []
    for frame in list(iter_frames(wb, aligned_narrowband(wb)))[2:-1]:
        code = encode_envelope(frame.wideband, cb, 0.0)
        error = highband_vector(frame.wideband, 0.0) - cb.vectors[code.index]
        distortion.append(np.sqrt(np.mean(error**2)))
        decoded.append(decoded_envelope(code, cb, frame.narrowband, 0.0).points)
    average = np.mean(decoded, axis=0)
    assert np.std(average) <= np.mean(distortion) + 1.0


def test_synthesis_stays_above_the_telephone_band():
    rng = np.random.default_rng(10)
    exc = AudioBuffer(0.1 * rng.standard_normal(8192), 16000)
    out, _ = synthesize_highband(exc, LpcModel.flat(16), SynthesisState())
    f, psd = sps.welch(out.samples[1024:], fs=16000, nperseg=512)
    low = np.mean(psd[(f > 500) & (f < 3000)])
    high = np.mean(psd[(f > 4500) & (f < 7500)])
    assert 10 * np.log10(low / high) < -40.0

    silent, _ = synthesize_highband(AudioBuffer(np.zeros(256), 16000), LpcModel.flat(16), SynthesisState())
    np.testing.assert_array_equal(silent.samples, 0.0)


def test_regenerated_band_of_silence_is_silent():
    out, state, passthrough = regenerate_highband(np.zeros(128), HighbandFrameCode(1), _smooth_codebook(), HighbandState())
    assert out.shape == (256,)
    np.testing.assert_array_equal(out, 0.0)
    assert passthrough
    assert isinstance(state, HighbandState)


def test_regenerated_band_has_energy_for_speechlike_input():
    cb = _smooth_codebook()
    state = HighbandState()
    rng = np.random.default_rng(11)
    t = np.arange(128 * 12)
    nb = 0.2 * np.sign(np.sin(2 * np.pi * 120 * t / 8000)) + 0.01 * rng.standard_normal(t.size)
    frames = []
    for i in range(12):
        out, state, _ = regenerate_highband(nb[i * 128 : (i + 1) * 128], HighbandFrameCode(2), cb, state)
        frames.append(out)
    tail = np.concatenate(frames[4:])
    assert np.all(np.isfinite(tail))
    assert np.dot(tail, tail) > 0.0


def test_path_delay_combines_resampler_and_highpass():
    assert path_delay() == resampler_delay() + (highpass_filter().taps.size - 1) // 2
