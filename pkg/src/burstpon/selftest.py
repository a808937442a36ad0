"""Quick in-package property checks, run by ``burstpon selftest``.

Each check is small enough that the whole suite finishes in seconds. The full
statistical checks live in the test suite.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable

import numpy as np

from .channel import apply_cd, apply_jones, random_jones
from .core import SAMPLE_RATE, DualPolWaveform, design_rrc, filter_same
from .equalizer import _windows, lms_update
from .framer import CONSTELLATION, FrameConfig, demap_16qam, gen_zadoff_chu, map_16qam
from .harness import TrialConfig, default_channel, run_trial
from .acquisition import cdc_overlap_save


def check_rrc_nyquist() -> str:
    rrc = design_rrc()
    assert abs(np.sum(rrc.taps**2) - 1) < 1e-12
    rc = np.convolve(rrc.taps, rrc.taps)
    c = rc.size // 2
    isi = np.delete(rc[c % 2 :: 2], c // 2)
    worst = 10 * np.log10(np.max(np.abs(isi)) ** 2 / rc[c] ** 2)
    assert worst <= -40, f"ISI {worst:.1f} dB"
    return f"worst ISI {worst:.1f} dB"


def check_cazac() -> str:
    zc = gen_zadoff_chu(64).values
    ac = np.fft.ifft(np.abs(np.fft.fft(zc)) ** 2)
    side = np.max(np.abs(ac[1:])) / np.abs(ac[0])
    assert side <= 1e-12 and np.allclose(np.abs(zc), 1)
    return f"sidelobe {side:.1e}"


def check_map_roundtrip() -> str:
    bits = np.array([(v >> s) & 1 for v in range(16) for s in (3, 2, 1, 0)], dtype=np.int8)
    sym = map_16qam(bits)
    assert np.array_equal(demap_16qam(sym), bits)
    assert abs(np.mean(np.abs(CONSTELLATION) ** 2) - 1) < 1e-12
    return "16/16 points"


def check_cd_roundtrip() -> str:
    rng = np.random.default_rng(1)
    n = 8192
    w = DualPolWaveform(rng.normal(size=n) + 1j * rng.normal(size=n),
                        rng.normal(size=n) + 1j * rng.normal(size=n), SAMPLE_RATE)
    back = apply_cd(apply_cd(w, 340.0), -340.0)
    err = np.max(np.abs(back.stack() - w.stack()))
    assert err <= 1e-6
    return f"max error {err:.1e}"


def check_cdc_against_channel() -> str:
    rng = np.random.default_rng(2)
    n = 16384
    sym = (rng.choice([-1, 1], n) + 1j * rng.choice([-1, 1], n)) / np.sqrt(2)
    arr = filter_same(np.repeat(sym[None], 2, 0) * np.array([[1], [1j]]), design_rrc())
    w = DualPolWaveform.from_array(arr, SAMPLE_RATE)
    out = cdc_overlap_save(apply_cd(w, 340.0).stack(), SAMPLE_RATE, 340.0)
    mid = slice(2048, n - 2048)
    rel = np.sqrt(np.mean(np.abs(out[:, mid] - arr[:, mid]) ** 2) / np.mean(np.abs(arr[:, mid]) ** 2))
    assert rel <= 1e-3, f"relative error {rel:.1e}"
    return f"relative error {rel:.1e}"


def check_jones_unitary() -> str:
    rng = np.random.default_rng(3)
    worst = max(np.max(np.abs(J.m @ J.m.conj().T - np.eye(2)))
                for J in (random_jones(rng) for _ in range(50)))
    w = DualPolWaveform(rng.normal(size=64) + 0j, rng.normal(size=64) + 0j, SAMPLE_RATE)
    J = random_jones(rng)
    back = apply_jones(apply_jones(w, J), J.H)
    assert worst < 1e-12 and np.allclose(back.stack(), w.stack())
    return f"max |JJ^H - I| {worst:.1e}"


def check_lms_gradient() -> str:
    rng = np.random.default_rng(4)
    ntaps, n = 7, 200
    x = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    d = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    X = _windows(x, ntaps)
    w = 0.1 * (rng.normal(size=(2, 2, ntaps)) + 1j * rng.normal(size=(2, 2, ntaps)))
    _, _, _, grad = lms_update(w, X, decisions=d)

    def cost(wv):
        _, _, e, _ = lms_update(wv, X, decisions=d)
        return np.sum(np.abs(e) ** 2)

    h = 1e-6
    num = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        for unit in (1, 1j):
            dw = np.zeros_like(w)
            dw[idx] = h * unit
            slope = (cost(w + dw) - cost(w - dw)) / (2 * h)
            num[idx] += -0.5 * slope * unit
    rel = np.linalg.norm(num - grad) / np.linalg.norm(grad)
    assert rel <= 0.05, f"gradient mismatch {rel:.2e}"
    return f"relative mismatch {rel:.1e}"


def check_noiseless_loopback() -> str:
    cfg = TrialConfig(channel=default_channel(snr_db=np.inf, linewidth=0.0),
                      frame=FrameConfig(n_groups=120), tr_baseline=False)
    (m,) = run_trial(cfg, 0)
    assert m.ok and m.errors_total == 0, f"{m.status} {m.error} errors={m.errors_total}"
    return f"0 errors in {m.bits_total} bits"


def check_determinism() -> str:
    cfg = TrialConfig(frame=FrameConfig(n_groups=60), tr_baseline=False)
    a = run_trial(cfg, 3)
    b = run_trial(replace(cfg), 3)
    assert a == b
    return "identical records"


CHECKS: dict[str, Callable[[], str]] = {
    "rrc_nyquist": check_rrc_nyquist,
    "cazac_autocorrelation": check_cazac,
    "16qam_roundtrip": check_map_roundtrip,
    "cd_roundtrip": check_cd_roundtrip,
    "cdc_inverts_channel": check_cdc_against_channel,
    "jones_unitary": check_jones_unitary,
    "lms_gradient": check_lms_gradient,
    "noiseless_loopback": check_noiseless_loopback,
    "determinism": check_determinism,
}


def run(echo: Callable[[str], None] = print) -> bool:
    """Run every check, print one line each, return True if all passed."""
    ok = True
    for name, fn in CHECKS.items():
        try:
            detail = fn()
            echo(f"PASS {name}: {detail}")
        except Exception as exc:  # noqa: BLE001
            ok = False
            echo(f"FAIL {name}: {exc}")
    return ok
