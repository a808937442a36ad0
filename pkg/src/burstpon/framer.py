"""Burst construction: 16QAM mapping, preambles, pilots, frame assembly, pulse shaping.

Frame layout (symbols, both polarizations)::

    | preamble A (128) | preamble B (3 x 64) | (pilot + 32 payload) x n_groups | pad (10) |

With the default 1014 groups the burst is 320 + 1014 * 33 + 10 = 33792 symbols,
1.056 us at 32 GBaud; the 320-symbol preamble is 10 ns.

16QAM Gray table (per rail, first bit pair -> I, second pair -> Q)::

    bits  level
    00    +1
    01    +3
    10    -1
    11    -3

so ``0000 -> (+1+1j)/sqrt(10)`` and ``0111 -> (+1-3j)/sqrt(10)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import SPS, SYMBOL_RATE, DualPolWaveform, FilterTaps, ParameterError

QAM_SCALE = 1 / np.sqrt(10)
# index = 2-bit value (msb first) -> rail level
_RAIL_LEVELS = np.array([1.0, 3.0, -1.0, -3.0])
# level (-3, -1, 1, 3) -> 2-bit value
_RAIL_BITS = {-3: (1, 1), -1: (1, 0), 1: (0, 0), 3: (0, 1)}

CONSTELLATION = np.array(
    [(_RAIL_LEVELS[i >> 2] + 1j * _RAIL_LEVELS[i & 3]) * QAM_SCALE for i in range(16)]
)
PILOT_CORNERS = np.array([3 + 3j, -3 + 3j, -3 - 3j, 3 - 3j]) * QAM_SCALE

PREAMBLE_A_LENGTH = 128
PILOT_INTERVAL = 32
# fixed, not per-trial: the receiver knows pilot and pad symbols a priori
_KNOWN_SYMBOL_SEED = 0x5EED


def map_16qam(bits: ArrayLike) -> NDArray[np.complex128]:
    """Gray-map bits (length a multiple of 4) onto unit-energy square 16QAM."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 4:
        raise ParameterError(f"bit count must be a multiple of 4, got {bits.size}")
    q = bits.reshape(-1, 4)
    i_rail = _RAIL_LEVELS[2 * q[:, 0] + q[:, 1]]
    q_rail = _RAIL_LEVELS[2 * q[:, 2] + q[:, 3]]
    return (i_rail + 1j * q_rail) * QAM_SCALE


def _slice_rail(v: NDArray) -> NDArray:
    return np.clip(2 * np.floor(v / 2) + 1, -3, 3)


def decide_16qam(symbols: ArrayLike) -> NDArray[np.complex128]:
    """Nearest 16QAM point (hard decision)."""
    s = np.asarray(symbols) / QAM_SCALE
    return (_slice_rail(s.real) + 1j * _slice_rail(s.imag)) * QAM_SCALE


def demap_16qam(symbols: ArrayLike) -> NDArray[np.int8]:
    """Minimum-distance demapping back to bits, inverse of :func:`map_16qam`."""
    s = np.asarray(symbols).ravel() / QAM_SCALE
    lut = np.zeros((7, 2), dtype=np.int8)
    for level, pair in _RAIL_BITS.items():
        lut[level + 3] = pair
    i_bits = lut[_slice_rail(s.real).astype(int) + 3]
    q_bits = lut[_slice_rail(s.imag).astype(int) + 3]
    return np.concatenate([i_bits, q_bits], axis=1).ravel()


def gen_tone_preamble(length: int = PREAMBLE_A_LENGTH, amplitude: float = 1.0) -> NDArray[np.complex128]:
    """Dual tone block: X at R_s/2, Y at R_s/4. Returns a (2, length) array."""
    if length % 2 or length <= 0:
        raise ParameterError("tone preamble length must be positive and even")
    if amplitude <= 0:
        raise ParameterError("amplitude must be positive")
    n = np.arange(length)
    return amplitude * np.stack([np.exp(1j * np.pi * n), np.exp(0.5j * np.pi * n)])


@dataclass(frozen=True)
class CazacSequence:
    values: NDArray[np.complex128]
    root: int

    def __len__(self) -> int:
        return self.values.size


def gen_zadoff_chu(n: int = 64, root: int = 1) -> CazacSequence:
    if n < 1 or gcd(root, n) != 1:
        raise ParameterError(f"root {root} must be coprime with length {n}")
    k = np.arange(n)
    if n % 2 == 0:
        phase = -np.pi * root * k * k / n
    else:
        phase = -np.pi * root * k * (k + 1) / n
    return CazacSequence(np.exp(1j * phase), root)


# block signs (X, Y) of preamble B
PREAMBLE_B_SIGNS = np.array([[1, 1, -1], [-1, 1, 1]])


def build_preamble_b(zc: CazacSequence) -> NDArray[np.complex128]:
    """Three signed copies of the CAZAC base per polarization, shape (2, 3 * len(zc))."""
    base = zc.values / np.sqrt(np.mean(np.abs(zc.values) ** 2))
    return np.stack([np.concatenate([s * base for s in signs]) for signs in PREAMBLE_B_SIGNS])


@dataclass(frozen=True)
class FrameConfig:
    n_groups: int = 1014
    pad_symbols: int = 10
    b1_length: int = 64
    zc_root: int = 1
    pilot_interval: int = PILOT_INTERVAL
    preamble_a_length: int = PREAMBLE_A_LENGTH

    @property
    def preamble_length(self) -> int:
        return self.preamble_a_length + 3 * self.b1_length

    @property
    def total_symbols(self) -> int:
        return self.preamble_length + self.n_groups * (self.pilot_interval + 1) + self.pad_symbols


SHORT_FRAME = FrameConfig(n_groups=250)


@dataclass(frozen=True)
class BurstFrame:
    """Symbol-level burst. Positions are absolute indices into :attr:`symbols`."""

    config: FrameConfig
    zc: CazacSequence
    preamble_a: NDArray[np.complex128]
    preamble_b: NDArray[np.complex128]
    payload: NDArray[np.complex128]
    pilot_positions: NDArray[np.int64]
    pilot_values: NDArray[np.complex128]
    data_positions: NDArray[np.int64]
    source_bits: NDArray[np.int8]
    symbols: NDArray[np.complex128] = field(repr=False)

    @property
    def payload_start(self) -> int:
        return self.config.preamble_length

    @property
    def preamble_b_start(self) -> int:
        return self.config.preamble_a_length


def known_symbols(n: int) -> NDArray[np.complex128]:
    """Deterministic outer-corner sequence shared by both polarizations."""
    rng = np.random.default_rng(_KNOWN_SYMBOL_SEED)
    return PILOT_CORNERS[rng.integers(0, 4, n)]


def assemble_burst(config: FrameConfig = FrameConfig(), seed: int | np.random.Generator = 0) -> BurstFrame:
    """Build one burst with seeded random payload bits."""
    if config.n_groups < 1:
        raise ParameterError("need at least one pilot/payload group")
    rng = np.random.default_rng(seed)
    cfg = config
    zc = gen_zadoff_chu(cfg.b1_length, cfg.zc_root)
    pre_a = gen_tone_preamble(cfg.preamble_a_length)
    pre_b = build_preamble_b(zc)

    group = cfg.pilot_interval + 1
    n_data = cfg.n_groups * cfg.pilot_interval
    bits = rng.integers(0, 2, size=(2, 4 * n_data), dtype=np.int8)
    data = np.stack([map_16qam(b) for b in bits])

    pilots = known_symbols(cfg.n_groups)
    body = np.empty((2, cfg.n_groups, group), dtype=np.complex128)
    body[:, :, 0] = pilots
    body[:, :, 1:] = data.reshape(2, cfg.n_groups, cfg.pilot_interval)
    pad = np.tile(PILOT_CORNERS[np.arange(cfg.pad_symbols) % 4], (2, 1))
    payload = np.concatenate([body.reshape(2, -1), pad], axis=1)

    start = cfg.preamble_length
    pilot_pos = start + group * np.arange(cfg.n_groups)
    offs = np.arange(group * cfg.n_groups).reshape(cfg.n_groups, group)[:, 1:].ravel()
    data_pos = start + offs
    symbols = np.concatenate([pre_a, pre_b, payload], axis=1)
    for arr in (pre_a, pre_b, payload, symbols, bits):
        arr.flags.writeable = False
    return BurstFrame(
        config=cfg,
        zc=zc,
        preamble_a=pre_a,
        preamble_b=pre_b,
        payload=payload,
        pilot_positions=pilot_pos,
        pilot_values=np.tile(pilots, (2, 1)),
        data_positions=data_pos,
        source_bits=bits,
        symbols=symbols,
    )


def pulse_shape(frame: BurstFrame | NDArray, rrc: FilterTaps, sps: int = SPS,
                symbol_rate: float = SYMBOL_RATE) -> DualPolWaveform:
    """Upsample by ``sps`` and filter with ``rrc`` (full convolution).

    Symbol ``k`` peaks at output sample ``sps * k + rrc.center_index``.
    """
    symbols = frame.symbols if isinstance(frame, BurstFrame) else np.asarray(frame)
    if symbols.shape[-1] == 0:
        raise ParameterError("empty frame")
    up = np.zeros((2, symbols.shape[-1] * sps), dtype=np.complex128)
    up[:, ::sps] = symbols
    n = up.shape[-1] + len(rrc) - 1
    nfft = 1 << int(np.ceil(np.log2(n)))
    out = np.fft.ifft(np.fft.fft(up, nfft, axis=-1) * np.fft.fft(rrc.taps, nfft), axis=-1)[:, :n]
    return DualPolWaveform.from_array(out, symbol_rate * sps)


def dump_frame_csv(frame: BurstFrame, path: str | Path) -> Path:
    """Write every frame symbol as ``index,pol,re,im`` rows."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "pol", "re", "im"])
        for p, pol in enumerate("XY"):
            for i, s in enumerate(frame.symbols[p]):
                writer.writerow([i, pol, repr(float(s.real)), repr(float(s.imag))])
    return path
