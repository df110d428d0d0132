import math
from pathlib import Path

import pytest

import gridflow

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def test_water_fill_splits_evenly_and_respects_caps():
    assert gridflow.water_fill(12.0, [1, 1, 1]) == pytest.approx([4, 4, 4])
    # the capped claim's leftover goes to the other two
    assert gridflow.water_fill(12.0, [1, 1, 1], [2, math.inf, math.inf]) == pytest.approx([2, 5, 5])


def test_allocate_rates_bottleneck():
    # two flows share link 0 (10), one of them also crosses link 1 (2)
    rates = gridflow.allocate_rates([10.0, 2.0], [[0], [0, 1]])
    assert rates == pytest.approx([8.0, 2.0])


def test_hand_trace_engine_and_oracle_agree():
    trace = [{"capacity": 10.0, "claims": [{"id": "A", "work": 100}, {"id": "B", "start": 4, "work": 50}]}]
    assert gridflow.engine_resources(trace) == {"A": 15.0, "B": 14.0}
    orc = gridflow.oracle_resources(trace, 1e-3)
    assert orc["A"] == pytest.approx(15.0, rel=1e-3)
    assert orc["B"] == pytest.approx(14.0, rel=1e-3)


def test_scaled_t0t1_run():
    cfg = gridflow.load_config(str(SCENARIOS / "t0t1_scaled.cfg"), ["run.duration=3600"])
    assert not cfg.is_proof
    r = gridflow.run(cfg)
    assert r.audit_violations == []
    assert r.transfers, "no transfers in an hour"
    assert {t["class"] for t in r.transfers} <= {"RAW", "DST"}
    assert all(t["t_end_s"] >= t["t_start_s"] for t in r.transfers)
    assert "link_avg_bps:T0-US1" in r.stats
    assert "RAW" in r.summary()


def test_runs_repeat_exactly(tmp_path):
    a = gridflow.run_file(SCENARIOS / "proof_scaled.cfg")
    b = gridflow.run_file(SCENARIOS / "proof_scaled.cfg")
    assert a.trace_hash == b.trace_hash
    assert a.stats == b.stats
    cfg = gridflow.load_config(str(SCENARIOS / "proof_scaled.cfg"))
    a.write_outputs(str(tmp_path), cfg)
    assert (tmp_path / "transfers.csv").read_text().startswith("file_id,class,src,dst")


def test_bad_key_raises_config_error():
    with pytest.raises(gridflow.ConfigError, match="no_such_key"):
        gridflow.load_config(str(SCENARIOS / "t0t1_scaled.cfg"), ["t0t1.no_such_key=1"])
