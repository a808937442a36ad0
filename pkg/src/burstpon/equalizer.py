"""Preamble-B channel estimation, MIMO tap initialization, delayed DD-LMS, pilot CPR, BER."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray
from scipy.signal.windows import tukey

from .core import ParameterError
from .framer import PREAMBLE_B_SIGNS, CazacSequence, build_preamble_b, decide_16qam, demap_16qam

FEC_LIMIT = 2.4e-2
PILOT_AVERAGE = 4  # pilots each side in the phase average
EST_HALF_SPAN = 2  # LS channel-estimate taps each side of the centre


class IllPosedBinError(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, message: str, state: "EqualizerState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class ChannelEstimate:
    """Per-bin 2x2 response; ``hxy`` maps transmitted Y onto received X."""

    hxx: NDArray[np.complex128]
    hxy: NDArray[np.complex128]
    hyx: NDArray[np.complex128]
    hyy: NDArray[np.complex128]
    noise_var: float = 0.0

    def __post_init__(self):
        sizes = {np.size(h) for h in (self.hxx, self.hxy, self.hyx, self.hyy)}
        if len(sizes) != 1:
            raise ParameterError("all four responses need the same bin count")
        if not all(np.all(np.isfinite(h)) for h in (self.hxx, self.hxy, self.hyx, self.hyy)):
            raise ParameterError("non-finite channel response")

    @property
    def matrix(self) -> NDArray[np.complex128]:
        """(bins, 2, 2) array, rows received, columns transmitted polarization."""
        return np.stack([np.stack([self.hxx, self.hxy], -1), np.stack([self.hyx, self.hyy], -1)], -2)

    @property
    def n_bins(self) -> int:
        return np.size(self.hxx)


def _reference_spectrum(ref: CazacSequence) -> NDArray:
    base = ref.values / np.sqrt(np.mean(np.abs(ref.values) ** 2))
    B = np.fft.fft(base)
    if np.min(np.abs(B)) < 1e-6:
        raise IllPosedBinError("reference spectrum has a (near) zero bin")
    return B


def estimate_channel_zf(rx_preamble: NDArray, ref: CazacSequence, method: str = "lstsq",
                        half_span: int | None = None) -> ChannelEstimate:
    """Zero-forcing 2x2 channel estimate from the received preamble B.

    ``rx_preamble`` is the (2, 3L) received block aligned to preamble B.

    ``method="blocks"`` applies the per-bin two-block solution on B-blocks 1 and
    2, using that the sign vectors (+1, +1) on X and (-1, +1) on Y are
    orthogonal. It is exact only when the channel has no memory across block
    edges. ``method="lstsq"`` (default) solves for FIR taps spanning
    ``[-half_span, half_span]`` symbols by least squares over the interior of
    all three blocks and reports their L-point DFT; it is exact for any channel
    inside that span.
    """
    rx = np.asarray(rx_preamble)
    L = len(ref)
    if rx.shape != (2, 3 * L):
        raise ParameterError(f"expected a (2, {3 * L}) preamble block, got {rx.shape}")
    B = _reference_spectrum(ref)

    if method == "blocks":
        R1 = np.fft.fft(rx[:, :L], axis=-1)
        R2 = np.fft.fft(rx[:, L : 2 * L], axis=-1)
        return ChannelEstimate(
            hxx=(R1[0] + R2[0]) / (2 * B),
            hxy=(R2[0] - R1[0]) / (2 * B),
            hyx=(R1[1] + R2[1]) / (2 * B),
            hyy=(R2[1] - R1[1]) / (2 * B),
        )
    if method != "lstsq":
        raise ParameterError(f"unknown method {method!r}")

    K = min(EST_HALF_SPAN, L // 4) if half_span is None else half_span
    if 2 * K + 1 > L:
        raise ParameterError("tap span does not fit in one CAZAC block")
    tx = build_preamble_b(ref)
    lags = np.arange(-K, K + 1)
    rows = np.arange(K, 3 * L - K)
    A = np.concatenate([tx[q][rows[:, None] - lags[None, :]] for q in range(2)], axis=1)
    sol, *_ = np.linalg.lstsq(A, rx[:, rows].T, rcond=None)
    taps = sol.T.reshape(2, 2, 2 * K + 1)  # [rx, tx, lag]
    circ = np.zeros((2, 2, L), dtype=np.complex128)
    circ[..., lags % L] = taps
    H = np.fft.fft(circ, axis=-1)
    return ChannelEstimate(hxx=H[0, 0], hxy=H[0, 1], hyx=H[1, 0], hyy=H[1, 1])


def mmse_shrinkage(ref: CazacSequence, noise_var: float) -> NDArray:
    """Per-bin factor 2|B|^2 / (2|B|^2 + L noise_var); ``noise_var`` is per symbol."""
    B2 = np.abs(_reference_spectrum(ref)) ** 2
    return 2 * B2 / (2 * B2 + len(ref) * noise_var)


def estimate_channel_mmse(rx_preamble: NDArray, ref: CazacSequence, noise_var: float,
                          method: str = "lstsq", half_span: int | None = None) -> ChannelEstimate:
    """Tikhonov-regularized estimate.

    Per bin the regularized solve ``(R S^H)(S S^H + N0 I)^-1`` with the two
    orthogonal signed reference blocks has ``S S^H = 2|B|^2 I``, so it reduces
    to shrinking the zero-forcing estimate by :func:`mmse_shrinkage`.
    """
    if noise_var < 0:
        raise ParameterError("noise_var must be >= 0")
    zf = estimate_channel_zf(rx_preamble, ref, method, half_span)
    g = mmse_shrinkage(ref, noise_var)
    return ChannelEstimate(zf.hxx * g, zf.hxy * g, zf.hyx * g, zf.hyy * g, noise_var=float(noise_var))


@dataclass
class EqualizerState:
    """2x2 FIR taps ``w[p, q, j]`` (output pol p, input pol q, tap j, centre ntaps//2)."""

    w: NDArray[np.complex128]
    step_size: float = 1e-4
    beat_size: int = 100
    loop_delay_beats: int = 60
    plateau_beats: int = 40
    min_step_size: float | None = None
    mse_curve: list[float] = field(default_factory=list)
    tap_change_beats: list[int] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.complex128)
        if w.ndim != 3 or w.shape[:2] != (2, 2) or w.shape[2] % 2 == 0:
            raise ParameterError("taps must have shape (2, 2, odd)")
        if self.step_size <= 0:
            raise ParameterError("step_size must be positive")
        self.w = w
        if self.min_step_size is None:
            self.min_step_size = self.step_size / 16

    @property
    def ntaps(self) -> int:
        return self.w.shape[2]

    w_xx = property(lambda self: self.w[0, 0])
    w_xy = property(lambda self: self.w[0, 1])
    w_yx = property(lambda self: self.w[1, 0])
    w_yy = property(lambda self: self.w[1, 1])

    def copy(self) -> "EqualizerState":
        return replace(self, w=self.w.copy(), mse_curve=list(self.mse_curve),
                       tap_change_beats=list(self.tap_change_beats), step_history=list(self.step_history))


def init_taps(est: ChannelEstimate | None, ntaps: int = 15, mode: str = "mmse", **kwargs) -> EqualizerState:
    """Equalizer taps from a channel estimate.

    Each bin's 2x2 channel is inverted (``zf``: plain inverse, ``mmse``:
    ``H^H (H H^H + N0 I)^-1``), the four responses are brought back to the
    time domain, centred, truncated to ``ntaps`` and tapered. ``mode="zero"``
    returns all-zero taps (ablation).
    """
    if ntaps % 2 == 0:
        raise ParameterError("ntaps must be odd")
    if mode == "zero":
        return EqualizerState(np.zeros((2, 2, ntaps), dtype=np.complex128), **kwargs)
    if mode not in ("zf", "mmse"):
        raise ParameterError(f"unknown init mode {mode!r}")
    H = est.matrix
    L = est.n_bins
    flags = []
    eye = np.eye(2)
    if mode == "zf":
        det = np.abs(np.linalg.det(H))
        scale = np.max(np.abs(H).reshape(L, -1), axis=1) ** 2
        bad = det < 1e-9 * np.maximum(scale, 1e-300)
        W = np.empty_like(H)
        good = ~bad
        W[good] = np.linalg.inv(H[good])
        if bad.any():
            Hb = H[bad]
            Hh = np.conj(np.swapaxes(Hb, -1, -2))
            W[bad] = Hh @ np.linalg.inv(Hb @ Hh + 1e-4 * eye)
            flags.append("zf_singular_bin")
    else:
        Hh = np.conj(np.swapaxes(H, -1, -2))
        W = Hh @ np.linalg.inv(H @ Hh + est.noise_var * eye)

    h = np.fft.ifft(np.moveaxis(W, 0, -1), axis=-1)  # (2, 2, L) circular taps
    half = min(ntaps, L if L % 2 else L - 1) // 2
    taps = np.zeros((2, 2, ntaps), dtype=np.complex128)
    c = ntaps // 2
    lags = np.arange(-half, half + 1)
    taps[..., c + lags] = h[..., lags % L] * tukey(2 * half + 3, 0.5)[1:-1]
    return EqualizerState(taps, flags=tuple(flags), **kwargs)


def _windows(x: NDArray, ntaps: int) -> NDArray:
    """``X[q, k, j] = x[q, k + c - j]`` with zero padding (c = ntaps // 2)."""
    c = ntaps // 2
    xp = np.pad(x, ((0, 0), (ntaps - 1 - c, c)))
    return sliding_window_view(xp, ntaps, axis=-1)[..., ::-1]


def apply_taps(w: NDArray, X: NDArray) -> NDArray:
    return np.einsum("pqj,qkj->pk", w, X)


def pilot_phases(y: NDArray, pilot_positions: NDArray, pilot_values: NDArray,
                 average: int = PILOT_AVERAGE) -> tuple[NDArray, NDArray]:
    """Common-phase estimate at each pilot (both polarizations) and an erasure mask.

    The complex pilot correlations are summed over ``average`` neighbours on
    each side before taking the angle. A symmetric sum stays unbiased on a
    linear phase ramp (residual frequency offset) and cuts the noise.
    """
    r = y[:, pilot_positions]
    corr = np.sum(r * np.conj(pilot_values), axis=0)
    if average > 0 and corr.size > 1:
        corr = np.convolve(corr, np.ones(2 * average + 1))[average : average + corr.size]
    phase = np.angle(corr)
    erased = np.all(np.abs(r) < 0.1 * np.abs(pilot_values), axis=0)
    return phase, erased


def interpolate_phase(n: int, pilot_positions: NDArray, phase: NDArray, erased: NDArray | None = None) -> NDArray:
    keep = ~erased if erased is not None else np.ones(phase.size, bool)
    if not keep.any():
        return np.zeros(n)
    return np.interp(np.arange(n), pilot_positions[keep], np.unwrap(phase[keep]))


def lms_update(w: NDArray, X: NDArray, phase: NDArray | None = None, decisions: NDArray | None = None):
    """One beat's filter output, decisions, error and accumulated LMS gradient.

    ``grad[p, q, j] = sum_k e[p, k] conj(X[q, k, j])`` with ``e = d e^{j phase} - y``.
    Adding ``mu * grad`` to the taps descends the beat's squared error.
    """
    y = apply_taps(w, X)
    rot = np.exp(1j * phase) if phase is not None else np.ones(y.shape[-1])
    if decisions is None:
        decisions = decide_16qam(y * np.conj(rot))
    e = decisions * rot - y
    grad = np.einsum("pk,qkj->pqj", e, np.conj(X))
    return y, decisions, e, grad


def mimo_ddlms(symbols: NDArray, state: EqualizerState, start: int = 0, stop: int | None = None,
               pilot_positions: NDArray | None = None, pilot_values: NDArray | None = None,
               divergence_factor: float = 10.0, divergence_beats: int = 5,
               divergence_floor: float = 1e-2):
    """Run the 2x2 equalizer over ``symbols[:, start:stop]`` beat by beat.

    Taps are frozen within a beat. Each beat's gradient is applied
    ``loop_delay_beats`` beats later (at least one). When pilots are given
    (positions index ``symbols``), decisions are taken after a pilot-aided
    phase correction so carrier drift does not corrupt the error signal.
    Divergence is declared when the beat MSE exceeds ``divergence_factor``
    times the initial MSE (never less than ``divergence_floor``) for
    ``divergence_beats`` consecutive beats.
    Returns ``(y, state)`` with ``y`` covering ``[start, stop)``.
    """
    st = state
    x = np.asarray(symbols)
    stop = x.shape[-1] if stop is None else stop
    ntaps = st.ntaps
    X = _windows(x, ntaps)
    B = st.beat_size
    n_beats = int(np.ceil((stop - start) / B))
    delay = max(st.loop_delay_beats, 1)
    pending = [np.zeros_like(st.w) for _ in range(n_beats + delay + 1)]
    changed = [False] * (n_beats + delay + 1)
    y_out = np.empty((2, stop - start), dtype=np.complex128)
    pp = np.asarray(pilot_positions) if pilot_positions is not None else None
    span = (pp[1] - pp[0]) if pp is not None and pp.size > 1 else 0
    bad_run = 0
    plateau_ref = None
    for b in range(n_beats):
        if changed[b]:
            st.w = st.w + pending[b]
            st.tap_change_beats.append(b)
        k0 = start + b * B
        k1 = min(k0 + B, stop)
        phase = None
        if pp is not None:
            reach = (PILOT_AVERAGE + 1) * span
            lo, hi = max(0, k0 - reach), min(x.shape[-1], k1 + reach)
            sel = (pp >= lo) & (pp < hi)
            if sel.any():
                yp = apply_taps(st.w, X[:, pp[sel]])
                ph, er = pilot_phases(yp, np.arange(sel.sum()), pilot_values[:, sel])
                phase = interpolate_phase(k1 - k0, pp[sel] - k0, ph, er)
        y, d, e, grad = lms_update(st.w, X[:, k0:k1], phase)
        y_out[:, k0 - start : k1 - start] = y
        rot = np.exp(1j * phase) if phase is not None else 1.0
        mse = float(np.mean(np.abs(d - y * np.conj(rot)) ** 2))
        st.mse_curve.append(mse)
        st.step_history.append(st.step_size)
        pending[b + delay] = pending[b + delay] + st.step_size * grad
        changed[b + delay] = True

        limit = divergence_factor * max(st.mse_curve[0], divergence_floor)
        bad_run = bad_run + 1 if mse > limit else 0
        if bad_run >= divergence_beats:
            raise DivergenceError(f"beat MSE above {divergence_factor}x initial for {bad_run} beats", st.copy())

        # step-size schedule: halve when the MSE stops improving, once updates are live
        if b >= delay and (b - delay) % st.plateau_beats == st.plateau_beats - 1:
            recent = np.mean(st.mse_curve[-st.plateau_beats :])
            if plateau_ref is not None and recent > 0.95 * plateau_ref and st.step_size / 2 >= st.min_step_size:
                st.step_size /= 2
            plateau_ref = recent
    return y_out, st


def pilot_cpr(equalized: NDArray, pilot_positions: NDArray, pilot_values: NDArray,
              data_positions: NDArray | None = None, full_output: bool = False,
              average: int = PILOT_AVERAGE):
    """Pilot-aided carrier phase recovery; pilots are dropped from the output.

    Positions index ``equalized``. Without ``data_positions`` every non-pilot
    symbol is returned.
    """
    y = np.asarray(equalized)
    phase, erased = pilot_phases(y, pilot_positions, pilot_values, average)
    track = interpolate_phase(y.shape[-1], pilot_positions, phase, erased)
    corrected = y * np.exp(-1j * track)
    # undo the MMSE amplitude shrinkage so decision thresholds line up
    ref = corrected[:, pilot_positions]
    gain = np.abs(np.sum(ref * np.conj(pilot_values), axis=1)) / np.sum(np.abs(pilot_values) ** 2, axis=1)
    corrected = corrected / np.where(gain > 0, gain, 1.0)[:, None]
    if data_positions is None:
        keep = np.ones(y.shape[-1], bool)
        keep[pilot_positions] = False
        data_positions = np.flatnonzero(keep)
    out = corrected[:, data_positions]
    return (out, track) if full_output else out


def dump_taps_csv(w: NDArray, path) -> Path:
    """Write a tap snapshot as ``filter,index,re,im`` rows (index relative to the centre tap)."""
    w = np.asarray(w)
    c = w.shape[-1] // 2
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["filter", "index", "re", "im"])
        for p, q, name in ((0, 0, "xx"), (0, 1, "xy"), (1, 0, "yx"), (1, 1, "yy")):
            for j, t in enumerate(w[p, q]):
                out.writerow([name, j - c, repr(float(t.real)), repr(float(t.imag))])
    return path


@dataclass(frozen=True)
class BerReport:
    ber_total: float
    ber_early: float
    errors_total: int
    bits_total: int
    errors_early: int
    bits_early: int
    error_positions: tuple[NDArray, NDArray]  # (polarization, bit index)


def demap_and_count(payload: NDArray, source_bits: NDArray, early_bits: int = 20000) -> BerReport:
    """Hard-decision BER overall and over the first ``early_bits`` bits of each polarization."""
    payload = np.atleast_2d(payload)
    source_bits = np.atleast_2d(source_bits)
    if source_bits.shape != (payload.shape[0], 4 * payload.shape[1]):
        raise ParameterError(
            f"bit array {source_bits.shape} does not match {payload.shape[1]} symbols per polarization"
        )
    rx_bits = np.stack([demap_16qam(p) for p in payload])
    err = rx_bits != source_bits
    pol, idx = np.nonzero(err)
    n_early = min(early_bits, source_bits.shape[1])
    e_early = int(err[:, :n_early].sum())
    return BerReport(
        ber_total=float(err.mean()),
        ber_early=e_early / (n_early * err.shape[0]),
        errors_total=int(err.sum()),
        bits_total=int(err.size),
        errors_early=e_early,
        bits_early=n_early * err.shape[0],
        error_positions=(pol, idx),
    )


__all__ = [
    "FEC_LIMIT",
    "PREAMBLE_B_SIGNS",
    "ChannelEstimate",
    "EqualizerState",
    "BerReport",
    "IllPosedBinError",
    "DivergenceError",
    "estimate_channel_zf",
    "estimate_channel_mmse",
    "mmse_shrinkage",
    "init_taps",
    "lms_update",
    "mimo_ddlms",
    "pilot_cpr",
    "demap_and_count",
    "dump_taps_csv",
]
