"""Deterministic Monte-Carlo trials, parameter sweeps and plot-data emission.

Seeding rule: trial ``t`` of a run with base seed ``s`` draws everything from
``np.random.SeedSequence([s, t])`` (sweeps insert the point index:
``[s, point, t]``). That sequence is spawned once per burst plus once for the
receiver noise, so a trial's metrics do not depend on which other trials run
or in what order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .acquisition import cross_pol_suppression_db, detect_bursts, tone_window, wrap_phase
from .channel import (
    DEFAULT_CD,
    ChannelConfig,
    JonesMatrix,
    add_awgn,
    apply_cd,
    apply_cfo_and_phase_noise,
    apply_jones,
    multiplex_bursts,
    random_jones,
    rop_to_snr,
)
from .core import SPS, DualPolWaveform, design_rrc
from .equalizer import demap_and_count
from .framer import SHORT_FRAME, FrameConfig, assemble_burst, pulse_shape
from .receiver import ReceiverConfig, acquire_burst, receive_burst
from .timing import TimingLoopState, beats_to_converge, timing_recovery

SCHEMA_VERSION = 1
OPERATING_SNR_DB = 13.0  # Es/N0 where the default link sits just under the FEC limit
LINEWIDTH_HZ = 100e3


class ConfigError(ValueError):
    """Bad configuration: unknown key, wrong type or invalid value."""


@dataclass(frozen=True)
class RopMap:
    """Optional affine received-optical-power to SNR map."""

    slope: float = 1.0
    intercept: float = 0.0
    enabled: bool = False

    def snr_db(self, rop_dbm: float) -> float:
        return rop_to_snr(rop_dbm, self.slope, self.intercept)


def default_channel(**overrides) -> ChannelConfig:
    base = dict(cd_ps_nm=DEFAULT_CD, linewidth=LINEWIDTH_HZ, delta_f=500e6, snr_db=OPERATING_SNR_DB)
    base.update(overrides)
    return ChannelConfig(**base)


@dataclass(frozen=True)
class TrialConfig:
    """One Monte-Carlo trial.

    ``channel`` applies to every burst unless ``channel2`` is given for the
    second one. With ``random_sop`` each burst gets a Haar-random Jones matrix
    (the angle fields are ignored); with ``random_delay`` its fractional delay
    is uniform in [-0.5, 0.5) samples. The receiver always uses the channel's
    CD value (the fibre length is known at the OLT).
    """

    channel: ChannelConfig = field(default_factory=default_channel)
    channel2: ChannelConfig | None = None
    frame: FrameConfig = FrameConfig()
    rx: ReceiverConfig = ReceiverConfig()
    seed: int = 0
    n_bursts: int = 1
    random_sop: bool = True
    random_delay: bool = True
    lead_ns: float = 40.0
    tail_ns: float = 40.0
    rop_dbm: float | None = None
    rop_map: RopMap = RopMap()
    equalize: bool = True
    tr_baseline: bool = True

    def __post_init__(self):
        if self.n_bursts not in (1, 2):
            raise ConfigError("n_bursts must be 1 or 2")
        if self.lead_ns < 40.0:
            raise ConfigError("lead_ns must leave at least 40 ns of guard for noise estimation")
        if self.rx.init_mode not in ("mmse", "zf", "zero"):
            raise ConfigError(f"unknown rx.init_mode {self.rx.init_mode!r}")
        if self.rop_dbm is not None and not self.rop_map.enabled:
            raise ConfigError("rop_dbm needs an enabled rop_map")

    @property
    def snr_db(self) -> float:
        if self.rop_dbm is not None:
            return self.rop_map.snr_db(self.rop_dbm)
        return self.channel.snr_db

    def burst_channel(self, index: int) -> ChannelConfig:
        return self.channel2 if index == 1 and self.channel2 is not None else self.channel


@dataclass(frozen=True)
class TrialMetrics:
    """One record per received burst. ``wall_time`` is excluded from equality."""

    trial: int
    burst: int
    status: str = "ok"
    error: str = ""
    snr_db: float = math.nan
    delta_f_hz: float = math.nan
    burst_start: int = -1
    burst_start_error: int = 0
    coarse_foe_hz: float = math.nan
    fine_foe_hz: float = math.nan
    foe_error_hz: float = math.nan
    timing_phase: float = math.nan
    sop_offdiag_power_db: float = math.nan
    frame_start_error_symbols: int = 0
    pmnr_db: float = math.nan
    tr_beats_to_converge_with_init: int = -1
    tr_beats_to_converge_without_init: int = -1
    noise_var: float = math.nan
    mse_initial: float = math.nan
    mse_final: float = math.nan
    ber_total: float = math.nan
    ber_first20000: float = math.nan
    ber_first1000: float = math.nan
    errors_total: int = 0
    bits_total: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


METRIC_COLUMNS = [f.name for f in fields(TrialMetrics)]
DETERMINISTIC_COLUMNS = [c for c in METRIC_COLUMNS if c != "wall_time"]


def trial_seed(seed: int, trial: int, point: int | None = None) -> np.random.SeedSequence:
    key = [seed, trial] if point is None else [seed, point, trial]
    return np.random.SeedSequence(key)


def _offdiag_db(recovery: JonesMatrix, truth: JonesMatrix) -> float:
    p = np.abs((recovery @ truth).m) ** 2
    off, diag = p[0, 1] + p[1, 0], p[0, 0] + p[1, 1]
    return float(10 * np.log10(max(off, 1e-30) / diag))


def _first_bits_ber(report, n_bits: int) -> float:
    pol, idx = report.error_positions
    per_pol = report.bits_total // 2
    n = min(n_bits, per_pol)
    return float(np.count_nonzero(idx < n) / (2 * n)) if n else math.nan


def _tr_probe(result, rx: ReceiverConfig, init: float | None, sps: int = SPS) -> int:
    """Beats to convergence of a fresh timing loop over the burst (-1: never)."""
    st = TimingLoopState(kp=rx.tr_kp, ki=rx.tr_ki, beat_size=rx.tr_beat, loop_delay_beats=rx.tr_delay_beats)
    _, st = timing_recovery(result.timing_input, init, st, sps)
    b = beats_to_converge(st.error_history)
    return -1 if b is None else b


@dataclass
class TrialCapture:
    """Received record of one trial plus the ground truth needed for scoring."""

    waveform: Any  # DualPolWaveform
    burst_starts: tuple[int, ...]
    frames: list
    jones: list[JonesMatrix]
    delays: list[float]
    channels: list[ChannelConfig]
    snr_db: float
    detections: list[int]

    def detected_start(self, burst: int, tol: int = 64) -> int | None:
        near = [d for d in self.detections if abs(d - self.burst_starts[burst]) <= tol]
        return near[0] if near else None


def build_capture(cfg: TrialConfig, trial: int = 0, point: int | None = None) -> TrialCapture:
    """Transmitter, per-burst channel, multiplexing, noise and burst detection."""
    ss = trial_seed(cfg.seed, trial, point)
    burst_seeds = ss.spawn(cfg.n_bursts + 1)
    rrc = design_rrc(cfg.rx.rolloff, cfg.rx.rrc_span, SPS)
    frames, waves, jones, delays, gains, chans = [], [], [], [], [], []
    for b in range(cfg.n_bursts):
        ch = cfg.burst_channel(b)
        rng = np.random.default_rng(burst_seeds[b])
        frame = assemble_burst(cfg.frame, rng)
        w = pulse_shape(frame, rrc, SPS)
        J = random_jones(rng) if cfg.random_sop else ch.jones
        frac = float(rng.uniform(-0.5, 0.5)) if cfg.random_delay else ch.frac_delay
        w = apply_jones(w, J)
        w = apply_cd(w, ch.cd_ps_nm, ch.wavelength_nm)
        w = apply_cfo_and_phase_noise(w, ch.delta_f, ch.linewidth, rng)
        frames.append(frame)
        waves.append(w)
        jones.append(J)
        delays.append(frac)
        gains.append(ch.gain)
        chans.append(ch)
    cap = multiplex_bursts(waves, cfg.channel.guard_ns, delays, gains, cfg.lead_ns, cfg.tail_ns)
    p_sig = float(np.mean([w.power() * g**2 for w, g in zip(waves, gains)]))
    wf = add_awgn(cap.waveform, cfg.snr_db, np.random.default_rng(burst_seeds[-1]), signal_power=p_sig)
    detections = detect_bursts(wf, cfg.rx.threshold_db)
    return TrialCapture(wf, cap.burst_starts, frames, jones, delays, chans, cfg.snr_db, detections)


def burst_receiver_config(cfg: TrialConfig, channel: ChannelConfig) -> ReceiverConfig:
    return replace(cfg.rx, cd_ps_nm=channel.cd_ps_nm, wavelength_nm=channel.wavelength_nm)


def run_trial(cfg: TrialConfig, trial: int = 0, point: int | None = None) -> list[TrialMetrics]:
    """Transmit, impair, multiplex and receive; one metrics record per burst.

    Receiver-side failures (no detection, sync failure, divergence, ...) are
    recorded with ``status="failed"`` instead of raised.
    """
    tc = build_capture(cfg, trial, point)
    rrc = design_rrc(cfg.rx.rolloff, cfg.rx.rrc_span, SPS)
    out = []
    for b in range(cfg.n_bursts):
        t0 = time.perf_counter()
        ch, truth = tc.channels[b], tc.burst_starts[b]
        rx = burst_receiver_config(cfg, ch)
        base = dict(trial=trial, burst=b, snr_db=tc.snr_db, delta_f_hz=ch.delta_f)
        start = tc.detected_start(b)
        if start is None:
            out.append(TrialMetrics(**base, status="failed", error="burst not detected",
                                    wall_time=time.perf_counter() - t0))
            continue
        try:
            res = receive_burst(tc.waveform, start, cfg.frame, rx, equalize=cfg.equalize)
            acq = res.acquisition
            # symbol index of preamble B in the recovered stream, from ground truth
            centre = truth + rrc.center_index + tc.delays[b] - res.segment_start
            expect = int(round(centre / SPS - res.timing_phase_segment)) + cfg.frame.preamble_a_length
            rec = dict(
                base,
                burst_start=start,
                burst_start_error=start - truth,
                coarse_foe_hz=acq.coarse_foe_hz,
                fine_foe_hz=acq.fine_foe_hz,
                foe_error_hz=acq.fine_foe_hz - ch.delta_f,
                timing_phase=acq.timing_phase,
                sop_offdiag_power_db=_offdiag_db(acq.jones_estimate, tc.jones[b]),
                frame_start_error_symbols=res.sync.frame_start - expect,
                pmnr_db=res.sync.pmnr_db,
                noise_var=res.noise_var,
            )
            if cfg.tr_baseline:
                rec["tr_beats_to_converge_with_init"] = _tr_probe(res, rx, res.timing_phase_segment)
                rec["tr_beats_to_converge_without_init"] = _tr_probe(res, rx, None)
            if res.payload is not None:
                rep = demap_and_count(res.payload, tc.frames[b].source_bits, rx.early_bits)
                curve = res.equalizer.mse_curve
                rec.update(
                    mse_initial=curve[0],
                    mse_final=float(np.mean(curve[-10:])),
                    ber_total=rep.ber_total,
                    ber_first20000=_first_bits_ber(rep, 20000),
                    ber_first1000=_first_bits_ber(rep, 1000),
                    errors_total=rep.errors_total,
                    bits_total=rep.bits_total,
                )
            out.append(TrialMetrics(**rec, wall_time=time.perf_counter() - t0))
        except Exception as exc:  # noqa: BLE001 - any module error marks the trial failed
            out.append(TrialMetrics(**base, burst_start=start, burst_start_error=start - truth,
                                    status="failed", error=f"{type(exc).__name__}: {exc}",
                                    wall_time=time.perf_counter() - t0))
    return out


def true_timing_phase(tc: TrialCapture, burst: int, segment_start: int, rrc_center: int) -> float:
    """Symbol-centre phase (in symbols, wrapped) of ``burst`` inside a receiver segment."""
    centre = tc.burst_starts[burst] + rrc_center + tc.delays[burst] - segment_start
    return float(wrap_phase(centre / SPS))


@dataclass(frozen=True)
class TimingTraces:
    offset: float  # distance of the uninitialized start from the true phase
    init_phase: float  # Preamble-A estimate handed to the initialized loop
    error_with_init: np.ndarray  # |timing error| per beat, symbols
    error_without_init: np.ndarray


def timing_error_traces(cfg: TrialConfig, trial: int = 0, offset: float = 0.2) -> TimingTraces:
    """Per-beat timing error of the loop with and without Preamble-A init.

    An uninitialized loop starts from whatever phase its NCO holds; here that
    phase is placed ``offset`` symbols from the true symbol centres. The error
    is measured against ground truth, not the loop's own detector.
    """
    rrc = design_rrc(cfg.rx.rolloff, cfg.rx.rrc_span, SPS)
    run = replace(cfg, n_bursts=1, equalize=False, tr_baseline=False)
    tc = build_capture(run, trial)
    start = tc.detected_start(0)
    if start is None:
        raise RuntimeError("burst not detected")
    res = receive_burst(tc.waveform, start, run.frame, burst_receiver_config(run, tc.channels[0]),
                        equalize=False)
    tau = true_timing_phase(tc, 0, res.segment_start, rrc.center_index)
    cold = float(wrap_phase(tau - offset))
    traces = []
    for init in (res.timing_phase_segment, cold):
        st = TimingLoopState(kp=run.rx.tr_kp, ki=run.rx.tr_ki, beat_size=run.rx.tr_beat,
                             loop_delay_beats=run.rx.tr_delay_beats)
        _, st = timing_recovery(res.timing_input, init, st, SPS)
        traces.append(np.abs(wrap_phase(np.asarray(st.nco_trace) - tau)))
    return TimingTraces(offset, res.timing_phase_segment, traces[0], traces[1])


def sop_tone_suppression(cfg: TrialConfig, trial: int = 0) -> float:
    """Cross-polarization suppression (dB) of the Preamble-A tones after SOP recovery.

    Measured on the receiver's matched-filtered, derotated segment, so it
    reflects the Jones estimate actually applied to the burst.
    """
    run = replace(cfg, n_bursts=1)
    tc = build_capture(run, trial)
    start = tc.detected_start(0)
    if start is None:
        raise RuntimeError("burst not detected")
    rx = burst_receiver_config(run, tc.channels[0])
    front = acquire_burst(tc.waveform, start, run.frame, rx)
    rrc = design_rrc(rx.rolloff, rx.rrc_span, SPS)
    win = tone_window(start - front.segment_start, rrc, SPS, preamble_a=run.frame.preamble_a_length)
    return cross_pol_suppression_db(DualPolWaveform.from_array(front.segment[:, win], tc.waveform.sample_rate))


def initial_center_taps(cfg: TrialConfig, trial: int = 0) -> np.ndarray:
    """|W_pq| at the centre tap of the freshly initialized equalizer, shape (2, 2)."""
    run = replace(cfg, n_bursts=1, equalize=False, tr_baseline=False)
    tc = build_capture(run, trial)
    start = tc.detected_start(0)
    if start is None:
        raise RuntimeError("burst not detected")
    res = receive_burst(tc.waveform, start, run.frame, burst_receiver_config(run, tc.channels[0]),
                        equalize=False)
    w = res.initial_taps
    return np.abs(w[..., w.shape[-1] // 2])

def _run_job(job):
    cfg, trial, point = job
    return run_trial(cfg, trial, point)


def run_trials(cfg: TrialConfig, n_trials: int, jobs: int = 1, point: int | None = None,
               first_trial: int = 0) -> list[TrialMetrics]:
    """Trials ``first_trial .. first_trial + n_trials - 1``; results in trial order."""
    work = [(cfg, t, point) for t in range(first_trial, first_trial + n_trials)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        chunks = [_run_job(w) for w in work]
    return [m for chunk in chunks for m in chunk]


# ---------------------------------------------------------------- config paths

def get_path(cfg: TrialConfig, path: str) -> Any:
    obj: Any = cfg
    for part in path.split("."):
        if not hasattr(obj, part):
            raise ConfigError(f"unknown config path {path!r}")
        obj = getattr(obj, part)
    return obj


def set_path(cfg: Any, path: str, value: Any) -> Any:
    """Copy of ``cfg`` with the dotted field ``path`` replaced."""
    head, _, rest = path.partition(".")
    names = {f.name for f in fields(cfg)}
    if head not in names:
        raise ConfigError(f"unknown config path {path!r}")
    if rest:
        inner = getattr(cfg, head)
        if inner is None and head == "channel2":
            inner = cfg.channel
        if inner is None or not hasattr(inner, "__dataclass_fields__"):
            raise ConfigError(f"unknown config path {path!r}")
        value = set_path(inner, rest, value)
    try:
        return replace(cfg, **{head: value})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepTable:
    """Per-trial records of a sweep plus the axis it ran over."""

    axis: str
    values: list[float]
    trials_per_point: int
    records: list[tuple[int, float, TrialMetrics]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def point(self, index: int, burst: int | None = None, ok_only: bool = True) -> list[TrialMetrics]:
        return [m for i, _, m in self.records
                if i == index and (burst is None or m.burst == burst) and (m.ok or not ok_only)]

    def summary(self) -> list[dict]:
        """Mean/std of every numeric column per point, plus trial and failure counts."""
        numeric = [c for c in DETERMINISTIC_COLUMNS
                   if c not in ("trial", "burst", "status", "error") and c != "wall_time"]
        rows = []
        for i, v in enumerate(self.values):
            all_m = self.point(i, ok_only=False)
            ok = [m for m in all_m if m.ok]
            row = {"point": i, self.axis: v, "records": len(all_m), "failed": len(all_m) - len(ok)}
            for c in numeric:
                vals = np.array([getattr(m, c) for m in ok], dtype=float)
                vals = vals[np.isfinite(vals)]
                row[f"{c}_mean"] = float(vals.mean()) if vals.size else math.nan
                row[f"{c}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
            rows.append(row)
        return rows


def run_sweep(base: TrialConfig, axis: str, values: Sequence[float], trials_per_point: int,
              jobs: int = 1) -> SweepTable:
    """Grid of ``run_trial`` over one numeric config field."""
    current = get_path(base, axis)
    if isinstance(current, bool) or not isinstance(current, (int, float, type(None))):
        raise ConfigError(f"sweep axis {axis!r} is not numeric")
    if trials_per_point < 1:
        raise ConfigError("trials_per_point must be >= 1")
    table = SweepTable(axis, [float(v) for v in values], trials_per_point)
    for i, v in enumerate(values):
        val = int(v) if isinstance(current, int) and not isinstance(current, bool) else float(v)
        cfg = set_path(base, axis, val)
        for m in run_trials(cfg, trials_per_point, jobs, point=i):
            table.records.append((i, float(v), m))
    return table


def sweep_preamble_b1_length(lengths: Sequence[int], trials: int, snr_db: float = OPERATING_SNR_DB,
                             base: TrialConfig | None = None, jobs: int = 1) -> list[dict]:
    """Mean PMNR and first-1000-bit BER versus CAZAC block length.

    Sync failures are counted (``failed``) rather than aborting the sweep.
    """
    for n in lengths:
        if n < 8 or n & (n - 1):
            raise ConfigError("B1 lengths must be powers of two >= 8")
    base = base or TrialConfig(frame=SHORT_FRAME, tr_baseline=False)
    base = set_path(base, "channel.snr_db", float(snr_db))
    table = run_sweep(base, "frame.b1_length", lengths, trials, jobs)
    rows = []
    for i, n in enumerate(lengths):
        ok = table.point(i)
        pm = np.array([m.pmnr_db for m in ok])
        rows.append({
            "b1_length": int(n),
            "pmnr_db_mean": float(pm.mean()) if pm.size else math.nan,
            "pmnr_db_std": float(pm.std(ddof=1)) if pm.size > 1 else math.nan,
            "early_ber_mean": float(np.mean([m.ber_first1000 for m in ok])) if ok else math.nan,
            "failed": len(table.point(i, ok_only=False)) - len(ok),
        })
    return rows


def mse_curves(base: TrialConfig, trials: int, modes: Sequence[str] = ("zf", "mmse"),
               jobs: int = 1) -> dict[str, np.ndarray]:
    """Per-beat equalizer MSE, averaged over trials, for each init mode.

    Every mode sees the same seeds, hence the same noise realizations.
    """
    out = {}
    for mode in modes:
        cfg = replace(base, rx=replace(base.rx, init_mode=mode), tr_baseline=False)
        curves = [c for c in _mse_curve_trials(cfg, trials, jobs) if c is not None]
        n = min(len(c) for c in curves)
        out[mode] = np.mean([c[:n] for c in curves], axis=0)
    return out


def _mse_curve_job(job):
    cfg, trial = job
    return mse_curve_trial(cfg, trial)


def _mse_curve_trials(cfg, trials, jobs):
    work = [(cfg, t) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_mse_curve_job, work))
    return [_mse_curve_job(w) for w in work]


def mse_curve_trial(cfg: TrialConfig, trial: int) -> np.ndarray | None:
    """Equalizer MSE curve of burst 0 for one trial (None if the chain failed)."""
    tc = build_capture(cfg, trial)
    start = tc.detected_start(0)
    if start is None:
        return None
    try:
        res = receive_burst(tc.waveform, start, cfg.frame, burst_receiver_config(cfg, tc.channels[0]))
    except Exception:  # noqa: BLE001
        return None
    return np.asarray(res.equalizer.mse_curve)


# ---------------------------------------------------------------- figures

FIGURES = ("fig2d", "fig3a", "fig3c", "fig4c")


def figure_preset(name: str, base: TrialConfig | None = None, trials: int = 50,
                  jobs: int = 1) -> tuple[list[dict], SweepTable | None]:
    """Canned sweep reproducing one figure's data; returns (plot rows, raw table)."""
    base = base or TrialConfig(frame=SHORT_FRAME, tr_baseline=False)
    if name == "fig2d":
        dfs = [-1e9, -750e6, -500e6, -250e6, -100e6, 100e6, 250e6, 500e6, 750e6, 1e9]
        cfg = replace(base, equalize=False)
        table = run_sweep(cfg, "channel.delta_f", dfs, trials, jobs)
        rows = []
        for i, df in enumerate(dfs):
            err = np.abs([m.foe_error_hz for m in table.point(i)]) / 1e6
            rows.append({
                "delta_f_hz": df,
                "foe_abs_error_mhz_mean": float(err.mean()) if err.size else math.nan,
                "foe_abs_error_mhz_max": float(err.max()) if err.size else math.nan,
                "within_10mhz_fraction": float(np.mean(err <= 10)) if err.size else math.nan,
                "failed": trials - err.size,
            })
        return rows, table
    if name == "fig3a":
        return sweep_preamble_b1_length([8, 16, 32, 64, 128], trials, base.snr_db, base, jobs), None
    if name == "fig3c":
        curves = mse_curves(base, trials, jobs=jobs)
        n = min(len(c) for c in curves.values())
        rows = [{"beat": b, "mse_zf_mean": float(curves["zf"][b]), "mse_mmse_mean": float(curves["mmse"][b])}
                for b in range(n)]
        return rows, None
    if name == "fig4c":
        use_rop = base.rop_map.enabled
        axis = "rop_dbm" if use_rop else "channel.snr_db"
        if use_rop:
            grid = [(s - base.rop_map.intercept) / base.rop_map.slope for s in np.arange(11.0, 15.01, 0.5)]
        else:
            grid = list(np.arange(11.0, 15.01, 0.5))
        label = "rop_dbm" if use_rop else "snr_db"
        tables = {}
        for mode in ("zf", "mmse"):
            cfg = replace(base, rx=replace(base.rx, init_mode=mode))
            if use_rop:
                cfg = replace(cfg, rop_dbm=float(grid[0]))
            tables[mode] = run_sweep(cfg, axis, grid, trials, jobs)
        rows = []
        for i, v in enumerate(grid):
            row = {label: float(v)}
            for mode in ("zf", "mmse"):
                ok = tables[mode].point(i)
                row[f"ber_{mode}_mean"] = float(np.mean([m.ber_total for m in ok])) if ok else math.nan
            rows.append(row)
        return rows, tables["mmse"]
    raise ConfigError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")


# ---------------------------------------------------------------- output

def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def config_to_dict(cfg: TrialConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg), default=float))


def emit_outputs(table: SweepTable | list[TrialMetrics], out_dir: str | Path,
                 config: TrialConfig | None = None, figure: str | None = None,
                 figure_rows: list[dict] | None = None, extra: dict | None = None) -> list[Path]:
    """Write trials.csv, summary.csv, manifest.json and, for figures, the plot data.

    All files are deterministic functions of (config, seeds). Wall-clock
    times go to timing.csv so the other files stay byte-identical on rerun.
    Nothing is written for an empty table.
    """
    records = table.records if isinstance(table, SweepTable) else [(0, math.nan, m) for m in table]
    if not records and not figure_rows:
        raise ValueError("nothing to write: the table is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if records:
        axis = table.axis if isinstance(table, SweepTable) else None
        cols = (["point", axis] if axis else []) + DETERMINISTIC_COLUMNS
        rows = []
        for i, v, m in records:
            r = {c: getattr(m, c) for c in DETERMINISTIC_COLUMNS}
            if axis:
                r.update(point=i, **{axis: v})
            rows.append(r)
        _write_csv(out / "trials.csv", cols, rows)
        _write_csv(out / "timing.csv", ["trial", "burst", "wall_time"],
                   [{"trial": m.trial, "burst": m.burst, "wall_time": m.wall_time} for _, _, m in records])
        written += [out / "trials.csv", out / "timing.csv"]
        if isinstance(table, SweepTable):
            summ = table.summary()
            _write_csv(out / "summary.csv", list(summ[0].keys()), summ)
            written.append(out / "summary.csv")

    if figure:
        if figure not in FIGURES:
            raise ConfigError(f"unknown figure {figure!r}")
        if not figure_rows:
            raise ValueError(f"no plot data for {figure}")
        _write_csv(out / f"{figure}.csv", list(figure_rows[0].keys()), figure_rows)
        written.append(out / f"{figure}.csv")

    manifest = {
        "tool": "burstpon",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "seeding": "SeedSequence([seed, trial]) per trial; [seed, point, trial] inside sweeps",
        "config": config_to_dict(config) if config is not None else None,
        "figure": figure,
        "files": sorted(p.name for p in written),
    }
    if isinstance(table, SweepTable):
        manifest["sweep"] = {"axis": table.axis, "values": table.values, "trials_per_point": table.trials_per_point}
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    written.append(out / "manifest.json")
    return written
