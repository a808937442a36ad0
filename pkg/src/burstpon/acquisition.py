"""Preamble-A burst acquisition.

Order of operations follows the receiver chain: burst detection, coarse
frequency offset and one-tap SOP estimation on the raw 2 samples/symbol record,
then RRC matched filtering and CD compensation, then sampling-phase and fine
frequency offset estimation on the filtered tone block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.signal.windows import tukey

from .channel import WAVELENGTH_NM, JonesMatrix, cd_phase
from .core import SYMBOL_RATE, DualPolWaveform, FilterTaps, filter_same, interpolate

TONE_WINDOW_SYMBOLS = 112  # preamble A minus 8 symbols each side for RRC tails and CD memory


class DegenerateSOPError(RuntimeError):
    """The two preamble tones arrived on (nearly) the same polarization state."""


@dataclass(frozen=True)
class AcquisitionResult:
    burst_start: int
    coarse_foe_hz: float
    jones_estimate: JonesMatrix
    timing_phase: float
    fine_foe_hz: float
    flags: tuple[str, ...] = ()


def _as_array(w: DualPolWaveform | NDArray) -> NDArray:
    return w.stack() if isinstance(w, DualPolWaveform) else np.atleast_2d(np.asarray(w))


def _window_power(arr: NDArray, window: int) -> NDArray:
    p = np.sum(np.abs(arr) ** 2, axis=0)
    c = np.concatenate([[0.0], np.cumsum(p)])
    return (c[window:] - c[:-window]) / window


def detect_burst(w: DualPolWaveform, threshold_db: float = 6.0, window: int = 64,
                 start: int = 0) -> int | None:
    """First burst at or after ``start``; returns the sample where its energy begins, or None.

    A 64-sample moving power is compared with the noise floor (its minimum over
    the record). The first threshold crossing is then refined to the window
    position where the power passes halfway between floor and burst plateau.
    """
    wp = _window_power(w.stack(), window)
    floor = wp.min()
    thresh = max(floor * 10 ** (threshold_db / 10), floor + 1e-12 * max(wp.max(), 1e-300))
    above = np.flatnonzero(wp[start:] > thresh)
    if above.size == 0:
        return None
    first = start + above[0]
    plateau = np.median(wp[first + window : first + 16 * window]) if first + window < wp.size else wp[first]
    mid = floor + 0.5 * (plateau - floor)
    lo = max(start, first - window)
    cross = np.flatnonzero(wp[lo : first + 2 * window] >= mid)
    return int(lo + cross[0]) if cross.size else int(first)


def detect_bursts(w: DualPolWaveform, threshold_db: float = 6.0, window: int = 64,
                  min_gap: int = 256) -> list[int]:
    """All burst starts; a burst ends when the moving power drops back under threshold."""
    wp = _window_power(w.stack(), window)
    floor = wp.min()
    thresh = max(floor * 10 ** (threshold_db / 10), floor + 1e-12 * max(wp.max(), 1e-300))
    starts: list[int] = []
    pos = 0
    while pos < wp.size:
        s = detect_burst(w, threshold_db, window, start=pos)
        if s is None:
            break
        starts.append(s)
        below = np.flatnonzero(wp[s + window :] <= thresh)
        # require a sustained gap so modulation dips inside a burst are ignored
        end = None
        for b in below:
            j = s + window + b
            if np.all(wp[j : j + min_gap] <= thresh):
                end = j
                break
        if end is None:
            break
        pos = end + window
    return starts


def tone_window(burst_start: int, rrc: FilterTaps, sps: int = 2,
                n_symbols: int = TONE_WINDOW_SYMBOLS, preamble_a: int = 128) -> slice:
    """Sample slice covering the central ``n_symbols`` of preamble A."""
    skip = (preamble_a - n_symbols) // 2
    first = burst_start + rrc.center_index + sps * skip
    return slice(first, first + sps * n_symbols)


def coarse_foe(window: DualPolWaveform, symbol_rate: float = SYMBOL_RATE, oversample: int = 16,
               full_output: bool = False):
    """Offset of the R_s/2 tone line in the summed X+Y periodogram.

    Pull-in range is |offset| < R_s/8. With ``full_output`` also returns the
    peak-to-median ratio in dB (< 6 dB means low confidence).
    """
    arr = _as_array(window)
    fs = window.sample_rate
    n = arr.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(n * oversample)))
    spec = np.sum(np.abs(np.fft.fft(arr, nfft, axis=-1)) ** 2, axis=0)
    f = np.fft.fftfreq(nfft, 1 / fs)
    target = symbol_rate / 2
    region = np.flatnonzero(np.abs(f - target) < symbol_rate / 8)
    k = region[np.argmax(spec[region])]
    a, b, c = spec[(k - 1) % nfft], spec[k], spec[(k + 1) % nfft]
    denom = a - 2 * b + c
    frac = 0.5 * (a - c) / denom if denom != 0 else 0.0
    est = float(f[k] + frac * fs / nfft - target)
    if full_output:
        return est, float(10 * np.log10(b / np.median(spec)))
    return est


def tone_amplitudes(arr: NDArray, freq: float, sample_rate: float) -> NDArray:
    """Single-bin DFT (mean) of each row at ``freq``."""
    n = np.arange(arr.shape[-1])
    return arr @ np.exp(-2j * np.pi * freq * n / sample_rate) / arr.shape[-1]


def estimate_sop(window: DualPolWaveform, foe_hz: float = 0.0, symbol_rate: float = SYMBOL_RATE,
                 full_output: bool = False, max_condition: float = 100.0, method: str = "polar"):
    """One-tap SOP recovery matrix from the preamble-A tone pair.

    ``u`` is the received Jones vector of the R_s/2 tone (transmitted on X),
    ``v`` that of the R_s/4 tone (transmitted on Y). ``method="gram_schmidt"``
    normalizes both, orthogonalizes ``v`` against ``u`` and inverts ``[u v]``.
    ``method="polar"`` (default) takes the unitary factor of the unnormalized
    ``[u v]``, i.e. the nearest unitary in Frobenius norm. That weights each
    tone by its amplitude instead of trusting the band-edge R_s/2 tone (3 dB
    down after the transmit RRC) for the first row. With ``full_output`` also
    returns the weaker tone's power over the median DFT bin in dB.
    """
    arr = _as_array(window)
    fs = window.sample_rate
    u_raw = tone_amplitudes(arr, symbol_rate / 2 + foe_hz, fs)
    v_raw = tone_amplitudes(arr, symbol_rate / 4 + foe_hz, fs)
    u = u_raw / np.linalg.norm(u_raw)
    v = v_raw / np.linalg.norm(v_raw)
    cond = np.linalg.cond(np.column_stack([u, v]))
    if not np.isfinite(cond) or cond > max_condition:
        raise DegenerateSOPError(f"tone polarization states nearly collinear (condition {cond:.1f})")
    if method == "gram_schmidt":
        v = v - np.vdot(u, v) * u
        v /= np.linalg.norm(v)
        M = np.column_stack([u, v])
    elif method == "polar":
        W, _, Vh = np.linalg.svd(np.column_stack([u_raw, v_raw]))
        M = W @ Vh
    else:
        raise ValueError(f"unknown SOP method {method!r}")
    recovery = JonesMatrix(M.conj().T)
    if full_output:
        bins = np.sum(np.abs(np.fft.fft(arr, axis=-1)) ** 2, axis=0) / arr.shape[-1] ** 2
        tone_db = 10 * np.log10(min(np.sum(np.abs(u_raw) ** 2), np.sum(np.abs(v_raw) ** 2)) / np.median(bins))
        return recovery, float(tone_db)
    return recovery


def apply_sop_recovery(w: DualPolWaveform, recovery: JonesMatrix) -> DualPolWaveform:
    return w.with_samples(recovery.m @ w.stack())


def cross_pol_suppression_db(window: DualPolWaveform, symbol_rate: float = SYMBOL_RATE,
                             foe_hz: float = 0.0) -> float:
    """Worse of (R_s/2 tone power X/Y) and (R_s/4 tone power Y/X), in dB."""
    arr = _as_array(window)
    a = np.abs(tone_amplitudes(arr, symbol_rate / 2 + foe_hz, window.sample_rate)) ** 2
    b = np.abs(tone_amplitudes(arr, symbol_rate / 4 + foe_hz, window.sample_rate)) ** 2
    return float(10 * np.log10(min(a[0] / a[1], b[1] / b[0])))


def matched_filter_and_cdc(w: DualPolWaveform, rrc: FilterTaps, cd_ps_nm: float = 0.0,
                           wavelength_nm: float = WAVELENGTH_NM, nfft: int = 8192,
                           overlap: int | None = None) -> DualPolWaveform:
    """RRC matched filter (delay-compensated) followed by overlap-save CD compensation."""
    arr = filter_same(w.stack(), rrc)
    if cd_ps_nm == 0:
        return w.with_samples(arr)
    return w.with_samples(cdc_overlap_save(arr, w.sample_rate, cd_ps_nm, wavelength_nm, nfft, overlap))


def cdc_overlap_save(arr: NDArray, sample_rate: float, cd_ps_nm: float,
                     wavelength_nm: float = WAVELENGTH_NM, nfft: int = 8192,
                     overlap: int | None = None) -> NDArray:
    """Apply the inverse fibre response block-wise; output aligned with input.

    The sampled all-pass has a slowly decaying tail (from the phase jump at
    +-fs/2), so the default overlap is far longer than the dispersion spread.
    """
    if overlap is None:
        lam = wavelength_nm * 1e-9
        spread = lam**2 * abs(cd_ps_nm) * 1e-3 / 299_792_458.0 * sample_rate**2
        overlap = int(max(2048, 2 ** np.ceil(np.log2(8 * spread + 32))))
    overlap += overlap % 2
    if overlap >= nfft:
        raise ValueError("overlap must be shorter than the FFT block")
    H = np.conj(cd_phase(nfft, sample_rate, cd_ps_nm, wavelength_nm))
    half = overlap // 2
    step = nfft - overlap
    n = arr.shape[-1]
    nblocks = int(np.ceil(n / step))
    padded = np.zeros((arr.shape[0], nblocks * step + overlap), dtype=np.complex128)
    padded[:, half : half + n] = arr
    out = np.empty((arr.shape[0], nblocks * step), dtype=np.complex128)
    for b in range(nblocks):
        seg = padded[:, b * step : b * step + nfft]
        if seg.shape[-1] < nfft:
            seg = np.pad(seg, ((0, 0), (0, nfft - seg.shape[-1])))
        y = np.fft.ifft(np.fft.fft(seg, axis=-1) * H, axis=-1)
        out[:, b * step : (b + 1) * step] = y[:, half : half + step]
    return out[:, :n]


def godard_error(block: NDArray, sps: int = 2, taper: float = 0.25) -> tuple[float, float]:
    """Spectral timing estimate of a 2 samples/symbol block, in symbols.

    Returns ``(phase, |S|)`` with ``S = sum_f R(f) conj(R(f - R_s))`` summed over
    both polarizations (a polarization-rotation invariant quantity). The block
    is tapered by a symmetric Tukey window first; a plain rectangular cut
    biases short blocks by roughly 2.5/B symbols.
    """
    block = np.atleast_2d(block)
    n = block.shape[-1]
    if n % sps:
        block = block[:, : n - n % sps]
        n = block.shape[-1]
    R = np.fft.fft(block * tukey(n, taper, sym=True), axis=-1)
    half = n // sps
    # only f in [0, R_s): over the full circular grid the sum pairs each term
    # with its conjugate at 2 sps and S collapses to a real number
    S = np.sum(R[:, :half] * np.conj(np.roll(R, half, axis=-1)[:, :half]))
    tau = -np.angle(S) / (2 * np.pi)
    return float(wrap_phase(tau)), float(np.abs(S))


def wrap_phase(tau):
    """Wrap a symbol-fraction into [-0.5, 0.5)."""
    return (np.asarray(tau) + 0.5) % 1.0 - 0.5


def estimate_timing_phase(window: DualPolWaveform, sps: int = 2) -> float:
    """Sampling phase (symbols, [-0.5, 0.5)) of the tone block relative to its first sample."""
    return godard_error(_as_array(window), sps)[0]


def symbol_samples(arr: NDArray, timing_phase: float, sps: int = 2, margin: int = 8) -> NDArray:
    """Interpolate symbol-centre samples of a 2 sps block at the given phase."""
    n_sym = arr.shape[-1] // sps
    k = np.arange(margin, n_sym - margin)
    return interpolate(arr, sps * (k + timing_phase)), k


def fine_foe(window: DualPolWaveform, coarse_hz: float, timing_phase: float,
             symbol_rate: float = SYMBOL_RATE, lag: int | None = None, oversample: int = 64) -> float:
    """Refine ``coarse_hz`` from the phase progression of the tone block.

    ``window`` must already be derotated by ``coarse_hz``. Symbol-rate samples
    are taken at ``timing_phase`` and the nominal tone progression (pi per
    symbol on X, pi/2 on Y) is removed, leaving two constant phasors rotating
    at the residual offset. By default the residual is the peak of the summed
    per-polarization periodogram (the ML estimate for unknown per-pol phases).
    With ``lag`` it is read from the lag-``lag`` autocorrelation instead;
    ``lag=1`` is the adjacent-symbol estimator.
    """
    arr = _as_array(window)
    sps = int(round(window.sample_rate / symbol_rate))
    z, k = symbol_samples(arr, timing_phase, sps)
    z = z * np.stack([np.exp(-1j * np.pi * k), np.exp(-0.5j * np.pi * k)])
    if lag is not None:
        r = np.sum(z[:, lag:] * np.conj(z[:, :-lag]))
        return float(coarse_hz + symbol_rate * np.angle(r) / (2 * np.pi * lag))
    n = z.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(n * oversample)))
    spec = np.sum(np.abs(np.fft.fft(z, nfft, axis=-1)) ** 2, axis=0)
    m = int(np.argmax(spec))
    a, b, c = spec[m - 1], spec[m], spec[(m + 1) % nfft]
    denom = a - 2 * b + c
    frac = 0.5 * (a - c) / denom if denom != 0 else 0.0
    cycles = ((m + frac) / nfft + 0.5) % 1.0 - 0.5
    return float(coarse_hz + symbol_rate * cycles)
