import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from burstpon.framer import FrameConfig
from burstpon.harness import (
    DETERMINISTIC_COLUMNS,
    ConfigError,
    RopMap,
    SweepTable,
    TrialConfig,
    TrialMetrics,
    default_channel,
    emit_outputs,
    figure_preset,
    get_path,
    run_sweep,
    run_trial,
    run_trials,
    set_path,
    trial_seed,
)

TINY = TrialConfig(frame=FrameConfig(n_groups=80), tr_baseline=False)


def test_trial_is_deterministic_and_order_free():
    a = run_trials(TINY, 3)
    b = run_trials(TINY, 2, first_trial=1)
    assert a[1:] == b
    assert a == run_trials(TINY, 3)
    assert a[0] != a[1]


def test_seed_sequence_keys():
    assert trial_seed(3, 4).entropy == trial_seed(3, 4).entropy
    assert trial_seed(3, 4, 0).spawn_key == ()
    k1 = np.random.default_rng(trial_seed(1, 2)).integers(1 << 30)
    k2 = np.random.default_rng(trial_seed(1, 2, 0)).integers(1 << 30)
    assert k1 != k2


def test_metrics_equality_ignores_wall_time():
    assert TrialMetrics(0, 0, wall_time=1.0) == TrialMetrics(0, 0, wall_time=2.0)
    assert "wall_time" not in DETERMINISTIC_COLUMNS


def test_operating_point_record():
    m = run_trial(TINY, 0)[0]
    assert m.ok
    assert abs(m.burst_start_error) <= 32
    assert abs(m.foe_error_hz) <= 10e6
    assert m.frame_start_error_symbols == 0
    assert 0 <= m.ber_total < 0.1 and m.bits_total == 2 * 4 * 80 * 32


def test_undetectable_burst_is_recorded_as_failure():
    cfg = replace(TINY, channel=default_channel(snr_db=-20.0))
    m = run_trial(cfg, 0)[0]
    assert m.status == "failed" and m.error
    assert math.isnan(m.ber_total)


def test_two_bursts_give_two_records():
    cfg = replace(TINY, n_bursts=2, channel2=default_channel(delta_f=-2e8))
    recs = run_trial(cfg, 0)
    assert [m.burst for m in recs] == [0, 1]
    assert recs[1].delta_f_hz == -2e8
    assert all(m.ok for m in recs)


def test_trial_config_invariants():
    with pytest.raises(ConfigError):
        TrialConfig(n_bursts=3)
    with pytest.raises(ConfigError):
        TrialConfig(lead_ns=10.0)
    with pytest.raises(ConfigError):
        TrialConfig(rop_dbm=-30.0)
    cfg = TrialConfig(rop_dbm=-30.0, rop_map=RopMap(1.0, 43.0, True))
    assert cfg.snr_db == pytest.approx(13.0)


def test_get_and_set_path():
    cfg = set_path(TINY, "channel.delta_f", 1e8)
    assert get_path(cfg, "channel.delta_f") == 1e8
    assert get_path(TINY, "channel.delta_f") == 5e8
    cfg2 = set_path(TINY, "channel2.delta_f", -1e8)
    assert cfg2.channel2.delta_f == -1e8 and cfg2.channel2.snr_db == TINY.channel.snr_db
    with pytest.raises(ConfigError):
        set_path(TINY, "channel.nope", 1)
    with pytest.raises(ConfigError):
        get_path(TINY, "nope")
    with pytest.raises(ConfigError):
        set_path(TINY, "channel.snr_db", float("nan"))


def test_sweep_records_and_summary():
    table = run_sweep(TINY, "channel.delta_f", [-2e8, 2e8], 2)
    assert len(table) == 4
    assert [i for i, _, _ in table.records] == [0, 0, 1, 1]
    rows = table.summary()
    assert rows[1]["channel.delta_f"] == 2e8 and rows[1]["records"] == 2 and rows[1]["failed"] == 0
    assert abs(rows[1]["foe_error_hz_mean"]) < 10e6


def test_sweep_errors():
    with pytest.raises(ConfigError):
        run_sweep(TINY, "rx.init_mode", [1.0], 1)
    with pytest.raises(ConfigError):
        run_sweep(TINY, "channel.delta_f", [1.0], 0)
    with pytest.raises(ConfigError):
        run_sweep(TINY, "channel.bogus", [1.0], 1)


def test_emit_outputs_empty_table_writes_nothing(tmp_path):
    with pytest.raises(ValueError):
        emit_outputs([], tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_emit_outputs_byte_identical_reruns(tmp_path):
    for d in ("a", "b"):
        table = run_sweep(TINY, "channel.snr_db", [13.0], 2)
        emit_outputs(table, tmp_path / d, TINY)
    for name in ("trials.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with open(tmp_path / "a" / "trials.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["point", "channel.snr_db"] and "wall_time" not in rows[0]
    assert len(rows) == 3
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["sweep"]["axis"] == "channel.snr_db"
    assert manifest["config"]["channel"]["delta_f"] == 5e8


def test_figure_fig3a_columns(tmp_path):
    rows, table = figure_preset("fig3a", replace(TINY, equalize=False), trials=1)
    assert table is None
    assert [r["b1_length"] for r in rows] == [8, 16, 32, 64, 128]
    assert set(rows[0]) == {"b1_length", "pmnr_db_mean", "pmnr_db_std", "early_ber_mean", "failed"}
    paths = emit_outputs([], tmp_path, figure="fig3a", figure_rows=rows)
    assert {p.name for p in paths} == {"fig3a.csv", "manifest.json"}


def test_figure_unknown():
    with pytest.raises(ConfigError):
        figure_preset("fig9", TINY, 1)


def test_sweep_table_point_filter():
    t = SweepTable("x", [1.0], 1, [(0, 1.0, TrialMetrics(0, 0)), (0, 1.0, TrialMetrics(1, 0, status="failed"))])
    assert len(t.point(0)) == 1 and len(t.point(0, ok_only=False)) == 2
