import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burstpon.channel import apply_cfo_and_phase_noise
from burstpon.core import SAMPLE_RATE, SYMBOL_RATE, DualPolWaveform, ParameterError, design_rrc, filter_same
from burstpon.framer import (
    CONSTELLATION,
    PREAMBLE_B_SIGNS,
    QAM_SCALE,
    SHORT_FRAME,
    FrameConfig,
    assemble_burst,
    build_preamble_b,
    decide_16qam,
    demap_16qam,
    dump_frame_csv,
    gen_tone_preamble,
    gen_zadoff_chu,
    map_16qam,
    pulse_shape,
)

ALL_CODEWORDS = np.array([(v >> s) & 1 for v in range(16) for s in (3, 2, 1, 0)], dtype=np.int8)


# ---------------------------------------------------------------- 16QAM

def test_gray_table_anchor():
    assert map_16qam([0, 0, 0, 0])[0] == pytest.approx((1 + 1j) / np.sqrt(10))


def test_unit_average_power():
    assert np.mean(np.abs(map_16qam(ALL_CODEWORDS)) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.mean(np.abs(CONSTELLATION) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_levels_are_odd_integers_over_sqrt10():
    s = map_16qam(ALL_CODEWORDS) / QAM_SCALE
    assert set(np.round(s.real)) == {-3, -1, 1, 3} and set(np.round(s.imag)) == {-3, -1, 1, 3}


def test_exhaustive_round_trip():
    assert np.array_equal(demap_16qam(map_16qam(ALL_CODEWORDS)), ALL_CODEWORDS)


def test_gray_neighbours_differ_by_one_bit():
    sym = map_16qam(ALL_CODEWORDS)
    words = ALL_CODEWORDS.reshape(16, 4)
    d = np.abs(sym[:, None] - sym[None, :])
    nearest = np.isclose(d, 2 * QAM_SCALE)
    for i, j in zip(*np.nonzero(nearest)):
        assert np.sum(words[i] != words[j]) == 1


def test_map_length_error():
    with pytest.raises(ParameterError):
        map_16qam([0, 1, 1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=4, max_size=400).filter(lambda b: len(b) % 4 == 0),
       st.floats(0, 0.99 / np.sqrt(10)), st.floats(0, 2 * np.pi))
def test_demap_tolerates_noise_inside_decision_region(bits, r, ang):
    sym = map_16qam(bits) + r * np.exp(1j * ang) / np.sqrt(2)
    assert np.array_equal(demap_16qam(sym), np.asarray(bits, dtype=np.int8))


def test_decide_snaps_to_nearest_point():
    pts = CONSTELLATION + 0.3 * QAM_SCALE
    np.testing.assert_allclose(decide_16qam(pts), CONSTELLATION)
    assert decide_16qam([10 + 10j])[0] == pytest.approx((3 + 3j) * QAM_SCALE)


# ---------------------------------------------------------------- preamble A

def test_tone_closed_forms():
    a = gen_tone_preamble(128, 2.0)
    np.testing.assert_allclose(a[0, :4], 2.0 * np.array([1, -1, 1, -1]), atol=1e-12)
    np.testing.assert_allclose(a[1, :4], 2.0 * np.array([1, 1j, -1, -1j]), atol=1e-12)


def test_tone_fft_oracle():
    a = gen_tone_preamble(128)
    for row, bin_ in ((0, 64), (1, 32)):
        spec = np.abs(np.fft.fft(a[row]))
        assert np.argmax(spec) == bin_
        assert np.sum(spec > 1e-9 * spec.max()) == 1


@pytest.mark.parametrize("args", [(127, 1.0), (0, 1.0), (128, 0.0)])
def test_tone_preconditions(args):
    with pytest.raises(ParameterError):
        gen_tone_preamble(*args)


@pytest.mark.parametrize("df", [-750e6, 250e6, 1e9])
def test_tones_shift_by_exactly_delta_f(df):
    n = 4096
    a = gen_tone_preamble(n // 2)  # 2 sps by sample repetition keeps both lines
    w = DualPolWaveform.from_array(np.repeat(a, 2, axis=1), SAMPLE_RATE)
    out = apply_cfo_and_phase_noise(w, df, 0.0)
    f = np.fft.fftfreq(n, 1 / SAMPLE_RATE)
    peak_x = f[np.argmax(np.abs(np.fft.fft(out.x)))]
    peak_y = f[np.argmax(np.abs(np.fft.fft(out.y)))]
    res = SAMPLE_RATE / n
    assert abs(peak_x - (SYMBOL_RATE / 2 + df)) <= res
    assert abs(peak_y - (SYMBOL_RATE / 4 + df)) <= res


# ---------------------------------------------------------------- CAZAC / preamble B

def test_zc_first_value_and_modulus():
    for root in (1, 3, 5, 63):
        zc = gen_zadoff_chu(64, root)
        assert zc.values[0] == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(zc.values), 1, atol=1e-15)


def test_zc_brute_force_periodic_autocorrelation():
    z = gen_zadoff_chu(64, 1).values
    for shift in range(1, 64):
        assert abs(np.sum(z * np.conj(np.roll(z, shift)))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([8, 16, 32, 64, 128]), st.integers(0, 200))
def test_zc_cazac_property_any_coprime_root(n, r):
    root = 2 * r + 1  # odd roots are coprime with powers of two
    z = gen_zadoff_chu(n, root).values
    ac = np.fft.ifft(np.abs(np.fft.fft(z)) ** 2)
    assert np.max(np.abs(ac[1:])) <= 1e-9 * n


def test_zc_non_coprime_root():
    with pytest.raises(ParameterError):
        gen_zadoff_chu(64, 2)


def test_preamble_b_sign_pattern():
    zc = gen_zadoff_chu(64)
    b = build_preamble_b(zc)
    assert b.shape == (2, 192)
    blocks = b.reshape(2, 3, 64)
    np.testing.assert_allclose(blocks[0, 2], -blocks[0, 0])
    for p in range(2):
        for k in range(3):
            np.testing.assert_allclose(blocks[p, k], PREAMBLE_B_SIGNS[p, k] * zc.values)
    assert PREAMBLE_B_SIGNS[0, :2] @ PREAMBLE_B_SIGNS[1, :2] == 0


def test_preamble_b_cross_correlation_oracle():
    b = build_preamble_b(gen_zadoff_chu(64))
    auto = abs(np.vdot(b[0], b[0]))
    cross = abs(np.vdot(b[1], b[0]))
    assert cross <= auto / 3 + 1e-9


def test_preamble_b_unit_power():
    b = build_preamble_b(gen_zadoff_chu(64))
    assert np.mean(np.abs(b) ** 2) == pytest.approx(1.0)


# ---------------------------------------------------------------- frame

def test_default_frame_length():
    f = assemble_burst()
    assert f.symbols.shape == (2, 33792) == (2, 320 + 1014 * 33 + 10)
    assert f.config.preamble_length == 320
    assert f.symbols.shape[1] / SYMBOL_RATE == pytest.approx(1.056e-6)


def test_pilot_layout():
    f = assemble_burst(SHORT_FRAME)
    assert f.pilot_positions[0] == 320
    assert np.all(np.diff(f.pilot_positions) == 33)
    np.testing.assert_allclose(f.symbols[:, f.pilot_positions], f.pilot_values)
    np.testing.assert_allclose(f.pilot_values[0], f.pilot_values[1])
    assert np.allclose(np.abs(f.pilot_values), np.abs(3 + 3j) / np.sqrt(10))


def test_payload_carries_source_bits():
    f = assemble_burst(SHORT_FRAME, 5)
    for p in range(2):
        assert np.array_equal(demap_16qam(f.symbols[p, f.data_positions]), f.source_bits[p])
    assert f.data_positions.size == 250 * 32
    assert not np.intersect1d(f.data_positions, f.pilot_positions).size


def test_frame_is_deterministic_per_seed():
    a, b, c = assemble_burst(SHORT_FRAME, 1), assemble_burst(SHORT_FRAME, 1), assemble_burst(SHORT_FRAME, 2)
    assert np.array_equal(a.symbols, b.symbols)
    assert not np.array_equal(a.source_bits, c.source_bits)
    np.testing.assert_allclose(a.pilot_values, c.pilot_values)


def test_zero_groups_rejected():
    with pytest.raises(ParameterError):
        assemble_burst(FrameConfig(n_groups=0))


def test_frame_dump(tmp_path):
    f = assemble_burst(FrameConfig(n_groups=2))
    path = dump_frame_csv(f, tmp_path / "frame.csv")
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "pol", "re", "im"]
    assert len(rows) == 1 + 2 * f.symbols.shape[1]
    assert complex(float(rows[1][2]), float(rows[1][3])) == f.symbols[0, 0]


# ---------------------------------------------------------------- pulse shaping

def test_pulse_shape_impulse_response():
    rrc = design_rrc()
    sym = np.zeros((2, 8), complex)
    sym[0, 0] = 1
    w = pulse_shape(sym, rrc)
    assert w.sample_rate == SAMPLE_RATE
    np.testing.assert_allclose(w.x[: len(rrc)], rrc.taps, atol=1e-12)
    assert np.allclose(w.y, 0, atol=1e-15)


def test_pulse_shape_spectrum_occupancy():
    rrc = design_rrc()
    w = pulse_shape(assemble_burst(SHORT_FRAME, 3), rrc)
    n = 1024
    segs = w.x[: len(w) // n * n].reshape(-1, n) * np.hanning(n)
    psd = np.mean(np.abs(np.fft.fft(segs, axis=-1)) ** 2, axis=0)
    f = np.abs(np.fft.fftfreq(n, 1 / SAMPLE_RATE))
    inband = psd[f <= 0.9 * SYMBOL_RATE / 2].mean()
    # a span-32 filter cannot cut sharper than about R_s / 32 past the band edge
    edge = 1.1 * SYMBOL_RATE / 2 + SYMBOL_RATE / 32
    assert 10 * np.log10(psd[f >= edge].max() / inband) <= -40


def test_matched_filter_loopback_evm():
    rrc = design_rrc()
    f = assemble_burst(SHORT_FRAME, 4)
    w = pulse_shape(f, rrc)
    mf = filter_same(w.stack(), rrc)
    sym = mf[:, rrc.center_index :: 2][:, : f.symbols.shape[1]]
    ref = f.symbols
    core = slice(40, -40)
    evm = np.mean(np.abs(sym[:, core] - ref[:, core]) ** 2) / np.mean(np.abs(ref[:, core]) ** 2)
    assert 10 * np.log10(evm) <= -40


def test_pulse_shape_rejects_empty():
    with pytest.raises(ParameterError):
        pulse_shape(np.zeros((2, 0)), design_rrc())
