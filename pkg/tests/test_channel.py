import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstpon.channel import (
    DEFAULT_CD,
    ChannelConfig,
    JonesMatrix,
    add_awgn,
    apply_cd,
    apply_cfo_and_phase_noise,
    apply_jones,
    impair_burst,
    jones_from_params,
    multiplex_bursts,
    random_jones,
    rop_to_snr,
)
from burstpon.core import SAMPLE_RATE, SYMBOL_RATE, DualPolWaveform, ParameterError

angles = st.floats(-2 * np.pi, 2 * np.pi)


def _noise(n, seed=0):
    rng = np.random.default_rng(seed)
    return DualPolWaveform(rng.normal(size=n) + 1j * rng.normal(size=n),
                           rng.normal(size=n) + 1j * rng.normal(size=n), SAMPLE_RATE)


# ---------------------------------------------------------------- Jones

def test_jones_identity_and_swap():
    np.testing.assert_allclose(jones_from_params(0, 0, 0).m, np.eye(2), atol=1e-15)
    swap = jones_from_params(np.pi / 2, 0, 0).m
    assert np.allclose(np.diag(swap), 0, atol=1e-15)
    np.testing.assert_allclose(np.abs(swap[[0, 1], [1, 0]]), 1)


@settings(max_examples=100, deadline=None)
@given(angles, angles, angles)
def test_jones_unitary_and_unit_determinant(theta, phi, psi):
    J = jones_from_params(theta, phi, psi)
    np.testing.assert_allclose(J.m @ J.H.m, np.eye(2), atol=1e-12)
    assert abs(abs(np.linalg.det(J.m)) - 1) <= 1e-12


def test_random_jones_unitary():
    rng = np.random.default_rng(0)
    for _ in range(50):
        J = random_jones(rng)
        np.testing.assert_allclose(J.m @ J.H.m, np.eye(2), atol=1e-12)


def test_jones_shape_check():
    with pytest.raises(ParameterError):
        JonesMatrix(np.eye(3))


def test_apply_jones_identity_power_and_inverse():
    w = _noise(256)
    assert np.array_equal(apply_jones(w, JonesMatrix.identity()).stack(), w.stack())
    J = jones_from_params(0.3, 1.1, -0.7)
    out = apply_jones(w, J)
    np.testing.assert_allclose(np.sum(np.abs(out.stack()) ** 2, 0), np.sum(np.abs(w.stack()) ** 2, 0), rtol=1e-9)
    np.testing.assert_allclose(apply_jones(out, J.H).stack(), w.stack(), atol=1e-9)


# ---------------------------------------------------------------- CD

def test_cd_zero_is_identity():
    w = _noise(64)
    assert apply_cd(w, 0.0) is w


def test_cd_default_is_20km_ssmf():
    assert DEFAULT_CD == pytest.approx(340.0)


def test_cd_all_pass_and_round_trip():
    w = _noise(4096)
    out = apply_cd(w, 340.0)
    assert np.sum(np.abs(out.stack()) ** 2) == pytest.approx(np.sum(np.abs(w.stack()) ** 2), rel=1e-9)
    back = apply_cd(out, -340.0)
    assert np.sqrt(np.mean(np.abs(back.stack() - w.stack()) ** 2)) <= 1e-6


def test_cd_group_delay_sign():
    # exp(+j pi lambda^2 DL f^2 / c): group delay -dphi/dw = -lambda^2 DL f / c, so
    # a positive-frequency pulse arrives early relative to a negative-frequency one
    n = 8192
    t = np.arange(n)
    env = np.exp(-0.5 * ((t - n / 2) / 40) ** 2)
    f0 = 8e9
    hi = env * np.exp(2j * np.pi * f0 * t / SAMPLE_RATE)
    lo = env * np.exp(-2j * np.pi * f0 * t / SAMPLE_RATE)
    w = DualPolWaveform(hi, lo, SAMPLE_RATE)
    out = apply_cd(w, 340.0)
    centroid = [np.sum(t * np.abs(r) ** 2) / np.sum(np.abs(r) ** 2) for r in out.stack()]
    lam = 1550e-9
    expected = 2 * lam**2 * 340e-12 / 1e-9 * f0 / 299_792_458.0 * SAMPLE_RATE  # samples between the two
    assert centroid[1] - centroid[0] == pytest.approx(expected, rel=0.02)


# ---------------------------------------------------------------- CFO and phase noise

def test_cfo_identity():
    w = _noise(16)
    assert apply_cfo_and_phase_noise(w, 0.0, 0.0) is w


def test_cfo_shifts_cw_by_exactly_one_ghz():
    n = 4096
    w = DualPolWaveform(np.ones(n), np.ones(n), SAMPLE_RATE)
    out = apply_cfo_and_phase_noise(w, 1e9, 0.0)
    f = np.fft.fftfreq(n, 1 / SAMPLE_RATE)
    assert f[np.argmax(np.abs(np.fft.fft(out.x)))] == pytest.approx(1e9)
    np.testing.assert_allclose(out.x, out.y)


def test_phase_noise_increment_variance():
    n = 200_000
    lw = 100e3
    w = DualPolWaveform(np.ones(n), np.ones(n), SAMPLE_RATE)
    out = apply_cfo_and_phase_noise(w, 0.0, lw, seed=3)
    inc = np.diff(np.unwrap(np.angle(out.x)))
    assert np.var(inc) == pytest.approx(2 * np.pi * lw / SAMPLE_RATE, rel=0.02)
    np.testing.assert_allclose(out.x, out.y)  # one common process on both pols


def test_phase_noise_is_seeded():
    w = DualPolWaveform(np.ones(100), np.ones(100), SAMPLE_RATE)
    a = apply_cfo_and_phase_noise(w, 1e8, 1e5, seed=7).x
    b = apply_cfo_and_phase_noise(w, 1e8, 1e5, seed=7).x
    c = apply_cfo_and_phase_noise(w, 1e8, 1e5, seed=8).x
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# ---------------------------------------------------------------- AWGN

def test_awgn_infinite_snr_is_identity():
    w = _noise(16)
    assert add_awgn(w, np.inf) is w


@pytest.mark.parametrize("snr_db", [0.0, 13.0, 25.0])
def test_awgn_power_ratio_oracle(snr_db):
    n = 100_000
    w = _noise(n, 1)
    out = add_awgn(w, snr_db, seed=2)
    noise = out.stack() - w.stack()
    for p in range(2):
        # per polarization, noise referred to the symbol-rate bandwidth
        p_sig = np.mean(np.abs(w.stack()[p]) ** 2)
        p_noise_inband = np.mean(np.abs(noise[p]) ** 2) * SYMBOL_RATE / SAMPLE_RATE
        assert 10 * np.log10(p_sig / p_noise_inband) == pytest.approx(snr_db, abs=0.1)


def test_awgn_is_seeded_and_circular():
    w = _noise(50_000)
    a = add_awgn(w, 10.0, seed=1).stack() - w.stack()
    b = add_awgn(w, 10.0, seed=1).stack() - w.stack()
    assert np.array_equal(a, b)
    assert np.var(a.real) == pytest.approx(np.var(a.imag), rel=0.05)


def test_awgn_zero_power_error():
    z = DualPolWaveform(np.zeros(10), np.zeros(10), SAMPLE_RATE)
    with pytest.raises(ParameterError):
        add_awgn(z, 10.0)


# ---------------------------------------------------------------- multiplexing

def test_multiplex_single_burst_identity():
    w = _noise(100)
    cap = multiplex_bursts([w], guard_ns=0.0)
    assert np.array_equal(cap.waveform.stack(), w.stack())
    assert cap.burst_starts == (0,)


def test_multiplex_guard_samples():
    a, b = _noise(100, 1), _noise(100, 2)
    cap = multiplex_bursts([a, b], guard_ns=40.0)
    assert cap.burst_starts == (0, 100 + 2560)
    assert np.all(cap.waveform.stack()[:, 100:2660] == 0)
    assert len(cap.waveform) == 2760


def test_multiplex_gain_scales_power():
    w = _noise(1000)
    cap = multiplex_bursts([w, w], guard_ns=40.0, gains=[1.0, 0.5])
    s = cap.burst_starts
    arr = cap.waveform.stack()
    p1 = np.mean(np.abs(arr[:, s[0] : s[0] + 1000]) ** 2)
    p2 = np.mean(np.abs(arr[:, s[1] : s[1] + 1000]) ** 2)
    assert p2 / p1 == pytest.approx(0.25)


def test_multiplex_errors():
    with pytest.raises(ParameterError):
        multiplex_bursts([_noise(10)], guard_ns=-1.0)
    with pytest.raises(ParameterError):
        multiplex_bursts([])


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("kwargs", [{"snr_db": float("nan")}, {"guard_ns": -1.0}, {"linewidth": -1.0}])
def test_channel_config_invariants(kwargs):
    with pytest.raises(ParameterError):
        ChannelConfig(**kwargs)


def test_impair_burst_with_nothing_enabled_is_identity():
    w = _noise(64)
    np.testing.assert_allclose(impair_burst(w, ChannelConfig()).stack(), w.stack())


def test_rop_map_is_affine():
    assert rop_to_snr(-30.0, 1.0, 43.0) == pytest.approx(13.0)
    assert rop_to_snr(-28.0, 0.5, 27.0) == pytest.approx(13.0)
