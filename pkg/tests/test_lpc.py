import numpy as np
import pytest
from scipy import linalg
from scipy import signal as sps

from dsp.lpc import (
    ENVELOPE_POINTS,
    EnvelopeSpectrum,
    FilterState,
    LpcModel,
    autocorrelation,
    de_emphasis,
    envelope_to_lpc,
    frame_envelope,
    hanning_window,
    inverse_filter,
    levinson_durbin,
    lpc_to_envelope,
    pre_emphasis,
    pre_emphasis_db,
    reflection_coefficients,
    synthesis_filter,
)
from exceptions import DegenerateInputError, PreconditionError, StabilityError


def _resonant_model():
    angles = 2 * np.pi * np.array([500.0, 2500.0]) / 16000
    poles = np.concatenate([0.9 * np.exp(1j * angles), 0.9 * np.exp(-1j * angles)])
    return LpcModel(np.real(np.poly(poles)))


def test_hanning_window_values():
    np.testing.assert_allclose(hanning_window(4), [0.0, 0.5, 1.0, 0.5], atol=1e-15)
    with pytest.raises(PreconditionError):
        hanning_window(1)


def test_levinson_recovers_ar2_process():
    rng = np.random.default_rng(0)
    x = sps.lfilter([1.0], [1.0, -1.3, 0.8], rng.standard_normal(20000))
    model = levinson_durbin(autocorrelation(x, 2) / x.size)
    np.testing.assert_allclose(model.coeffs, [1.0, -1.3, 0.8], atol=0.05)
    assert model.is_stable
    assert not model.truncated


def test_levinson_matches_toeplitz_solve():
    rng = np.random.default_rng(1)
    x = sps.lfilter([1.0], [1.0, -0.5, 0.3], rng.standard_normal(4000))
    r = autocorrelation(x, 10)
    model = levinson_durbin(r)
    expected = linalg.solve_toeplitz(r[:10], -r[1:11])
    np.testing.assert_allclose(model.coeffs[1:], expected, rtol=1e-8, atol=1e-10)
    assert model.residual_energy == pytest.approx(r[0] + np.dot(expected, r[1:11]), rel=1e-8)


def _step_up(reflection):
    a = np.array([1.0])
    for k in reflection:
        padded = np.append(a, 0.0)
        a = padded + k * padded[::-1]
    return a


def _autocorrelation_of(reflection):
    """Exact unit-energy autocorrelation of the AR model with these reflection coefficients."""
    r = [1.0]
    a = np.array([1.0])
    err = 1.0
    for i, k in enumerate(reflection, start=1):
        r.append(-k * err - np.dot(a[1:i], r[i - 1 : 0 : -1]))
        padded = np.append(a, 0.0)
        a = padded + k * padded[::-1]
        err *= 1.0 - k * k
    return np.array(r)


def test_levinson_recovers_random_stable_models():
    rng = np.random.default_rng(11)
    for _ in range(500):
        reflection = rng.uniform(-0.95, 0.95, rng.integers(2, 17))
        model = levinson_durbin(_autocorrelation_of(reflection))
        assert not model.truncated
        assert np.all(np.abs(model.reflection) < 1.0)
        np.testing.assert_allclose(model.coeffs, _step_up(reflection), atol=1e-6)
        np.testing.assert_allclose(model.reflection, reflection, atol=1e-6)


def test_levinson_rejects_zero_energy_and_truncates_singular():
    with pytest.raises(DegenerateInputError):
        levinson_durbin(np.zeros(5))
    model = levinson_durbin(np.array([1.0, 1.0, 1.0]))
    assert model.truncated
    assert model.order == 2


def test_reflection_coefficients_round_trip():
    model = levinson_durbin(np.array([1.0, 0.5, 0.1, -0.05]))
    np.testing.assert_allclose(reflection_coefficients(model.coeffs), model.reflection, atol=1e-12)
    assert reflection_coefficients([1.0, -2.0, 1.1]) is None


def test_envelope_round_trip_within_half_db():
    model = _resonant_model()
    env = lpc_to_envelope(model, 0.1)
    back = envelope_to_lpc(env, model.order)
    again = lpc_to_envelope(back, back.gain)
    assert np.max(np.abs(again.points - env.points)) < 0.5


def _log_spectral_rms(a, b):
    return float(np.sqrt(np.mean((a.points - b.points) ** 2)))


def test_envelope_round_trip_over_random_models():
    rng = np.random.default_rng(12)
    errors = []
    for _ in range(1000):
        model = LpcModel(_step_up(rng.uniform(-0.7, 0.7, 16)))
        env = lpc_to_envelope(model, rng.uniform(1e-3, 1.0))
        back = envelope_to_lpc(env, 16)
        assert back.is_stable
        errors.append(_log_spectral_rms(lpc_to_envelope(back, back.gain), env))
    assert np.mean(errors) < 0.5
    assert np.quantile(errors, 0.95) < 0.5


def test_constant_envelope_gives_a_white_model():
    back = envelope_to_lpc(EnvelopeSpectrum(np.full(ENVELOPE_POINTS, -20.0)), 16)
    np.testing.assert_allclose(back.coeffs[1:], 0.0, atol=1e-9)
    assert 10 * np.log10(back.residual_energy) == pytest.approx(-20.0, abs=1e-9)


def test_envelope_peak_becomes_a_resonance():
    k = np.arange(ENVELOPE_POINTS)
    env = EnvelopeSpectrum(40.0 * np.exp(-0.5 * ((k - 20) / 1.5) ** 2))
    model = envelope_to_lpc(env, 16)
    roots = np.roots(model.coeffs)
    strongest = roots[np.argmax(np.abs(roots))]
    assert abs(abs(np.angle(strongest)) * 16000 / (2 * np.pi) - 2500.0) < 250.0


def test_envelope_needs_sixty_four_points():
    assert EnvelopeSpectrum.frequencies()[-1] == 125.0 * (ENVELOPE_POINTS - 1)
    with pytest.raises(PreconditionError):
        EnvelopeSpectrum(np.zeros(40))
    with pytest.raises(PreconditionError):
        envelope_to_lpc(EnvelopeSpectrum(np.zeros(ENVELOPE_POINTS)), 0)


def test_frame_envelope_is_at_per_sample_level():
    rng = np.random.default_rng(2)
    sigma = 0.05
    env, model = frame_envelope(sigma * rng.standard_normal(1024), 16, 0.0)
    assert model.is_stable
    assert abs(np.mean(env.points) - 10 * np.log10(sigma**2)) < 1.5


def test_de_emphasis_inverts_pre_emphasis_across_chunks():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 300)
    whole = pre_emphasis(x, 0.7)
    chunked = np.concatenate([pre_emphasis(x[:100], 0.7), pre_emphasis(x[100:], 0.7, last=x[99])])
    np.testing.assert_allclose(chunked, whole, atol=1e-15)

    first, last = de_emphasis(whole[:150], 0.7)
    second, _ = de_emphasis(whole[150:], 0.7, last)
    np.testing.assert_allclose(np.concatenate([first, second]), x, atol=1e-12)


def test_emphasis_rejects_coefficient_out_of_range():
    with pytest.raises(PreconditionError):
        pre_emphasis(np.ones(4), 1.0)
    with pytest.raises(PreconditionError):
        de_emphasis(np.ones(4), -0.1)


def test_pre_emphasis_db_is_flat_for_zero_coefficient():
    np.testing.assert_allclose(pre_emphasis_db(0.0, 16000, 64), np.zeros(64), atol=1e-12)
    curve = pre_emphasis_db(0.7, 16000, 64)
    assert curve[0] == pytest.approx(20 * np.log10(0.3))
    assert np.all(np.diff(curve) > 0)


def test_inverse_and_synthesis_filters_stream_and_invert():
    rng = np.random.default_rng(4)
    model = _resonant_model()
    x = rng.standard_normal(512)

    state = FilterState.zeros(model.order)
    residual = []
    for chunk in np.array_split(x, 5):
        e, state = inverse_filter(chunk, model, state)
        residual.append(e)
    residual = np.concatenate(residual)
    np.testing.assert_allclose(residual, sps.lfilter(model.coeffs, [1.0], x), atol=1e-10)

    state = FilterState.zeros(model.order)
    rebuilt = []
    for chunk in np.array_split(residual, 3):
        y, state = synthesis_filter(chunk, model, state)
        rebuilt.append(y)
    np.testing.assert_allclose(np.concatenate(rebuilt), x, atol=1e-9)


def test_synthesis_refuses_unstable_model():
    model = LpcModel(np.array([1.0, -2.0, 1.1]))
    assert not model.is_stable
    with pytest.raises(StabilityError):
        synthesis_filter(np.ones(8), model, FilterState.zeros(2))


def test_filter_state_must_match_order():
    with pytest.raises(PreconditionError):
        inverse_filter(np.ones(8), LpcModel.flat(4), FilterState.zeros(3))
