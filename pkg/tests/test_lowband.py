import numpy as np
import pytest

from codec.lowband import (
    OscillatorState,
    build_basis,
    emitted_harmonics,
    extract_targets,
    ls_fit,
    synthesize_lowband,
)
from dsp.lpc import hanning_window
from dsp.pitch import PitchInfo
from exceptions import DegenerateInputError, PreconditionError

VOICED_100HZ = PitchInfo(80.0, 0.9)


def _wideband(n, *components):
    t = np.arange(n) / 16000.0
    return sum(a * np.sin(2 * np.pi * f * t + phi) for f, a, phi in components)


def test_basis_columns():
    basis = build_basis(64.0)
    assert basis.matrix.shape == (128, 5)
    w = hanning_window(128)
    np.testing.assert_allclose(basis.matrix[:, 0], w)
    assert basis.matrix[16, 1] == pytest.approx(w[16])
    assert basis.matrix[16, 2] == pytest.approx(0.0, abs=1e-15)
    assert basis.matrix[8, 3] == pytest.approx(w[8])
    with pytest.raises(PreconditionError):
        build_basis(3.0)
    with pytest.raises(PreconditionError):
        build_basis(300.0)


def test_ls_fit_matches_lstsq():
    rng = np.random.default_rng(0)
    basis = build_basis(57.0)
    y = rng.standard_normal(128)
    expected = np.linalg.lstsq(basis.matrix, y, rcond=None)[0]
    np.testing.assert_allclose(ls_fit(basis, y).coeffs, expected, atol=1e-10)
    with pytest.raises(PreconditionError):
        ls_fit(basis, y[:100])


def test_ls_fit_agrees_with_lstsq_across_pitch_range():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        basis = build_basis(rng.uniform(20.0, 160.0))
        y = rng.standard_normal(128)
        expected = np.linalg.lstsq(basis.matrix, y, rcond=None)[0]
        assert np.max(np.abs(ls_fit(basis, y).coeffs - expected)) <= 1e-9


def test_singular_basis_is_degenerate():
    with pytest.raises(DegenerateInputError):
        ls_fit(build_basis(4.0), np.ones(128))


def test_extracts_first_two_harmonic_amplitudes():
    x = _wideband(512, (100.0, 0.3, 0.2), (200.0, 0.1, 1.1))
    amps = extract_targets(x[256:], VOICED_100HZ, history=x[:256])
    assert amps.amp1 == pytest.approx(0.3, rel=0.01)
    assert amps.amp2 == pytest.approx(0.1, rel=0.01)
    np.testing.assert_allclose(amps.gains_db, 20 * np.log10([0.3, 0.1]), atol=0.1)


def test_out_of_band_tone_gives_no_harmonics():
    x = _wideband(512, (1000.0, 0.5, 0.0))
    amps = extract_targets(x[256:], VOICED_100HZ, history=x[:256])
    assert np.all(amps.gains_db < -60.0)


def test_rectified_target_follows_the_full_wave_series():
    x = _wideband(512, (100.0, 0.4, 0.0))
    amps = extract_targets(x[256:], VOICED_100HZ, history=x[:256], rectify=True)
    assert amps.coeffs[0] == pytest.approx(2 * 0.4 / np.pi, rel=0.02)
    assert amps.amp2 == pytest.approx(4 * 0.4 / (3 * np.pi), rel=0.02)
    assert amps.amp1 < 0.01


def test_silent_or_unvoiced_frames_are_skipped():
    assert extract_targets(np.zeros(256), VOICED_100HZ) is None
    x = _wideband(256, (100.0, 0.3, 0.0))
    assert extract_targets(x, PitchInfo(80.0, 0.1)) is None
    with pytest.raises(PreconditionError):
        extract_targets(np.ones(128), VOICED_100HZ)


def test_emitted_harmonics_follow_the_band():
    assert emitted_harmonics(40.0) == (False, False)
    assert emitted_harmonics(100.0) == (True, True)
    assert emitted_harmonics(150.0) == (True, True)
    assert emitted_harmonics(200.0) == (True, False)
    assert emitted_harmonics(300.0) == (True, False)
    assert emitted_harmonics(301.0) == (False, False)


def test_split_synthesis_is_identical():
    gains = np.array([-20.0, -26.0])
    whole, whole_state = synthesize_lowband(120.0, gains, OscillatorState(), length=512)
    first, state = synthesize_lowband(120.0, gains, OscillatorState(), length=256)
    second, state = synthesize_lowband(120.0, gains, state, length=256)
    np.testing.assert_array_equal(np.concatenate([first.samples, second.samples]), whole.samples)
    assert state == whole_state


def test_gain_changes_ramp_without_steps():
    low, state = synthesize_lowband(100.0, np.array([-40.0, -40.0]), OscillatorState())
    high, _ = synthesize_lowband(100.0, np.array([-10.0, -10.0]), state)
    joined = np.concatenate([low.samples, high.samples])
    # largest sample-to-sample change stays within what the sinusoids themselves produce
    assert np.max(np.abs(np.diff(joined))) < 2 * np.pi * 300 / 16000 * 2 * 10 ** (-10 / 20)


def test_very_low_gain_is_inaudible():
    out, _ = synthesize_lowband(100.0, np.array([-200.0, -200.0]), OscillatorState())
    assert np.max(np.abs(out.samples)) < 1e-9


def test_unvoiced_and_out_of_band_frames_fade_to_silence():
    _, state = synthesize_lowband(100.0, np.array([-10.0, -10.0]), OscillatorState())
    out, state = synthesize_lowband(100.0, np.array([-10.0, -10.0]), state, voicing=0.1)
    assert np.any(out.samples[:63])
    np.testing.assert_array_equal(out.samples[64:], 0.0)
    assert state.prev_gains == (0.0, 0.0)

    silent, _ = synthesize_lowband(400.0, np.array([-10.0, -10.0]), OscillatorState())
    np.testing.assert_array_equal(silent.samples, 0.0)
    with pytest.raises(PreconditionError):
        synthesize_lowband(0.0, np.array([-10.0, -10.0]), OscillatorState())


def test_analysis_recovers_synthesized_gains():
    gains = np.array([-18.0, -27.0])
    first, state = synthesize_lowband(100.0, gains, OscillatorState())
    second, _ = synthesize_lowband(100.0, gains, state)
    amps = extract_targets(second.samples, VOICED_100HZ, history=first.samples)
    np.testing.assert_allclose(amps.gains_db, gains, atol=0.5)
