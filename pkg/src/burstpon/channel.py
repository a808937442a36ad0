"""Upstream link impairments and two-ONU burst multiplexing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.stats import unitary_group

from .core import SPEED_OF_LIGHT, SYMBOL_RATE, DualPolWaveform, ParameterError, delay

SSMF_DISPERSION = 17.0  # ps/nm/km
DEFAULT_CD = SSMF_DISPERSION * 20  # ps/nm, 20 km SSMF
WAVELENGTH_NM = 1550.0


@dataclass(frozen=True)
class JonesMatrix:
    m: NDArray[np.complex128]

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.complex128)
        if m.shape != (2, 2):
            raise ParameterError("Jones matrix must be 2x2")
        object.__setattr__(self, "m", m)

    j11 = property(lambda self: self.m[0, 0])
    j12 = property(lambda self: self.m[0, 1])
    j21 = property(lambda self: self.m[1, 0])
    j22 = property(lambda self: self.m[1, 1])

    @property
    def H(self) -> "JonesMatrix":
        return JonesMatrix(self.m.conj().T)

    def __matmul__(self, other: "JonesMatrix") -> "JonesMatrix":
        return JonesMatrix(self.m @ other.m)

    @classmethod
    def identity(cls) -> "JonesMatrix":
        return cls(np.eye(2))


def _rot(a: float) -> NDArray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def jones_from_params(theta: float, phi: float, psi: float) -> JonesMatrix:
    """R(theta) . diag(e^{j phi/2}, e^{-j phi/2}) . R(psi); unitary by construction."""
    retarder = np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])
    return JonesMatrix(_rot(theta) @ retarder @ _rot(psi))


def random_jones(rng: np.random.Generator) -> JonesMatrix:
    """Haar-random 2x2 unitary."""
    return JonesMatrix(unitary_group.rvs(2, random_state=rng))


def apply_jones(w: DualPolWaveform, J: JonesMatrix) -> DualPolWaveform:
    return w.with_samples(J.m @ w.stack())


def cd_phase(n: int, sample_rate: float, cd_ps_nm: float, wavelength_nm: float = WAVELENGTH_NM) -> NDArray:
    """exp(+j pi lambda^2 D L f^2 / c) on the ``np.fft.fftfreq`` grid."""
    f = np.fft.fftfreq(n, 1 / sample_rate)
    dl = cd_ps_nm * 1e-12 / 1e-9  # s/m
    lam = wavelength_nm * 1e-9
    return np.exp(1j * np.pi * lam**2 * dl * f**2 / SPEED_OF_LIGHT)


def apply_cd(w: DualPolWaveform, cd_ps_nm: float = DEFAULT_CD,
             wavelength_nm: float = WAVELENGTH_NM) -> DualPolWaveform:
    """All-pass quadratic-phase fibre response over the whole record."""
    if cd_ps_nm == 0:
        return w
    H = cd_phase(len(w), w.sample_rate, cd_ps_nm, wavelength_nm)
    return w.with_samples(np.fft.ifft(np.fft.fft(w.stack(), axis=-1) * H, axis=-1))


def apply_cfo_and_phase_noise(w: DualPolWaveform, delta_f: float, linewidth: float,
                              seed: int | np.random.Generator | None = 0) -> DualPolWaveform:
    """Common carrier offset plus Wiener phase noise (combined Tx and LO linewidth)."""
    if delta_f == 0 and linewidth == 0:
        return w
    n = np.arange(len(w))
    phase = 2 * np.pi * delta_f * n / w.sample_rate
    if linewidth > 0:
        rng = np.random.default_rng(seed)
        steps = rng.normal(0.0, np.sqrt(2 * np.pi * linewidth / w.sample_rate), len(w))
        steps[0] = 0.0
        phase = phase + np.cumsum(steps)
    return w.with_samples(w.stack() * np.exp(1j * phase))


def add_awgn(w: DualPolWaveform, snr_db: float, seed: int | np.random.Generator | None = 0,
             signal_power: float | None = None, bandwidth: float = SYMBOL_RATE) -> DualPolWaveform:
    """Add circular white Gaussian noise to both polarizations.

    ``snr_db`` is per polarization and referred to ``bandwidth`` (default the
    symbol rate, the noise bandwidth of the matched RRC), so it equals Es/N0
    after matched filtering. The per-sample noise variance is therefore
    ``P_s * (fs / bandwidth) / snr``. ``signal_power`` overrides the measured
    mean sample power, e.g. to exclude guard intervals.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return w
    p = w.power() if signal_power is None else signal_power
    if not p > 0:
        raise ParameterError("cannot set an SNR relative to a zero-power signal")
    if bandwidth <= 0:
        raise ParameterError("bandwidth must be positive")
    sigma2 = p * (w.sample_rate / bandwidth) / 10 ** (snr_db / 10)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(sigma2 / 2), (2, len(w), 2)) @ np.array([1, 1j])
    return w.with_samples(w.stack() + noise)


@dataclass(frozen=True)
class ChannelConfig:
    """Per-burst impairments. Angles in rad, frequencies in Hz, CD in ps/nm."""

    theta: float = 0.0
    phi: float = 0.0
    psi: float = 0.0
    delta_f: float = 0.0
    linewidth: float = 0.0
    cd_ps_nm: float = 0.0
    wavelength_nm: float = WAVELENGTH_NM
    snr_db: float = float("inf")
    frac_delay: float = 0.0
    gain: float = 1.0
    guard_ns: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if np.isnan(self.snr_db) or self.snr_db == -np.inf:
            raise ParameterError("snr_db must be finite or +inf (noise disabled)")
        if self.guard_ns < 0:
            raise ParameterError("guard_ns must be >= 0")
        if self.linewidth < 0:
            raise ParameterError("linewidth must be >= 0")

    @property
    def jones(self) -> JonesMatrix:
        return jones_from_params(self.theta, self.phi, self.psi)


def impair_burst(w: DualPolWaveform, cfg: ChannelConfig,
                 rng: np.random.Generator | int | None = None) -> DualPolWaveform:
    """SOP, fibre CD, then carrier offset and phase noise (everything except delay/gain/noise)."""
    out = apply_jones(w, cfg.jones)
    out = apply_cd(out, cfg.cd_ps_nm, cfg.wavelength_nm)
    return apply_cfo_and_phase_noise(out, cfg.delta_f, cfg.linewidth, cfg.seed if rng is None else rng)


@dataclass(frozen=True)
class Capture:
    """Received record plus ground truth for scoring."""

    waveform: DualPolWaveform
    burst_starts: tuple[int, ...]
    burst_lengths: tuple[int, ...]
    delays: tuple[float, ...] = field(default=())
    gains: tuple[float, ...] = field(default=())


def multiplex_bursts(bursts: list[DualPolWaveform], guard_ns: float = 40.0,
                     delays: list[float] | None = None, gains: list[float] | None = None,
                     lead_ns: float = 0.0, tail_ns: float = 0.0) -> Capture:
    """Concatenate bursts separated by zero-filled guard gaps.

    Each burst is delayed (in samples, fractional allowed) and scaled before
    placement. ``lead_ns``/``tail_ns`` add silence before the first and after
    the last burst.
    """
    if not bursts:
        raise ParameterError("need at least one burst")
    if guard_ns < 0 or lead_ns < 0 or tail_ns < 0:
        raise ParameterError("guard, lead and tail must be >= 0")
    fs = bursts[0].sample_rate
    delays = list(delays) if delays is not None else [0.0] * len(bursts)
    gains = list(gains) if gains is not None else [1.0] * len(bursts)
    if len(delays) != len(bursts) or len(gains) != len(bursts):
        raise ParameterError("delays and gains must match the number of bursts")

    def gap(ns: float) -> NDArray:
        return np.zeros((2, int(round(ns * 1e-9 * fs))), dtype=np.complex128)

    parts, starts, lengths = [gap(lead_ns)], [], []
    pos = parts[0].shape[1]
    for i, (b, d, g) in enumerate(zip(bursts, delays, gains)):
        if i:
            parts.append(gap(guard_ns))
            pos += parts[-1].shape[1]
        shifted = delay(b, d) if d else b
        parts.append(g * shifted.stack())
        starts.append(pos)
        lengths.append(len(b))
        pos += len(b)
    parts.append(gap(tail_ns))
    wf = DualPolWaveform.from_array(np.concatenate(parts, axis=1), fs)
    return Capture(wf, tuple(starts), tuple(lengths), tuple(float(d) for d in delays), tuple(float(g) for g in gains))


def rop_to_snr(rop_dbm: float, slope: float = 1.0, intercept: float = 0.0) -> float:
    """Affine received-optical-power to SNR map (calibration constants are user supplied)."""
    return slope * rop_dbm + intercept
