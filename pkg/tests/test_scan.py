"""Scan execution: aggregation, determinism, resumability."""

import csv
import math
from pathlib import Path

import numpy as np
import pytest

from kitmon.protocol import MeasurementMix
from kitmon.scan import (
    PlanEntry,
    SweepPlan,
    boundary_scan,
    crossing_from_records,
    execute,
    radial_entries,
)
from kitmon.simplex import SimplexPoint, to_probabilities


def small_plan(trajectories=8, sizes=(4,), master_seed=77, **kw):
    entries = []
    for L in sizes:
        pt = SimplexPoint("square", r=0.0, theta=0.0)
        entries.append(PlanEntry(mix=to_probabilities(pt), L=L, trajectories=trajectories, point=pt))
    return SweepPlan(kind="square", entries=tuple(entries), master_seed=master_seed, t_max=40, **kw)


def test_execute_single_point_with_sem(tmp_path):
    records = execute(small_plan(), tmp_path, workers=1)
    assert len(records) == 1
    rec = records[0]
    assert rec.stats["i3_sem"] is not None
    assert len(rec.traj_rows) == 8
    rows = list(csv.DictReader((tmp_path / "records.csv").open()))
    assert len(rows) == 1
    assert rows[0]["schema_version"] == "1"
    assert float(rows[0]["i3_mean"]) == pytest.approx(rec.stats["i3_mean"])


def test_execute_sem_absent_for_single_trajectory(tmp_path):
    records = execute(small_plan(trajectories=1), tmp_path, workers=1)
    assert records[0].stats["i3_sem"] is None
    row = next(csv.DictReader((tmp_path / "records.csv").open()))
    assert row["i3_sem"] == ""


def test_execute_deterministic(tmp_path):
    execute(small_plan(), tmp_path / "a", workers=1)
    execute(small_plan(), tmp_path / "b", workers=2)
    a = (tmp_path / "a" / "records.csv").read_bytes()
    b = (tmp_path / "b" / "records.csv").read_bytes()
    assert a == b
    ta = (tmp_path / "a" / "trajectories.csv").read_bytes()
    tb = (tmp_path / "b" / "trajectories.csv").read_bytes()
    assert ta == tb


def test_execute_resumable(tmp_path):
    plan2 = small_plan(sizes=(4, 4))
    # run only the first entry, as if interrupted
    plan1 = SweepPlan(kind="square", entries=plan2.entries[:1], master_seed=plan2.master_seed, t_max=40)
    execute(plan1, tmp_path / "partial", workers=1)
    partial = (tmp_path / "partial" / "records.csv").read_text()
    done = execute(plan2, tmp_path / "partial", workers=1, resume=True)
    assert len(done) == 2
    full = execute(plan2, tmp_path / "full", workers=1)
    a = (tmp_path / "partial" / "records.csv").read_text()
    b = (tmp_path / "full" / "records.csv").read_text()
    assert a == b
    assert a.startswith(partial)  # no existing record changed
    ta = (tmp_path / "partial" / "trajectories.csv").read_text()
    tb = (tmp_path / "full" / "trajectories.csv").read_text()
    assert ta == tb


def test_orphan_trajectory_rows_pruned_on_resume(tmp_path):
    execute(small_plan(), tmp_path, workers=1)
    traj = tmp_path / "trajectories.csv"
    with traj.open("a") as fh:
        fh.write("1,99,0,40,-1,-1,0,0,0,0,0\n")
    records = execute(small_plan(), tmp_path, workers=1, resume=True)
    rows = list(csv.DictReader(traj.open()))
    assert all(r["record_id"] == "0" for r in rows)
    assert len(records) == 1


def test_radial_entries_probability_validity():
    entries = radial_entries("honeycomb", [0.0, 0.5, 1.0, 1.5], [4, 8], 3, theta=-math.pi / 2)
    assert len(entries) == 8
    for e in entries:
        e.mix.validate_for("honeycomb")  # raises if invalid
    with pytest.raises(ValueError, match="positivity"):
        radial_entries("honeycomb", [2.5], [4], 1, theta=-math.pi / 2)


def test_crossing_from_records_and_boundary_absent(tmp_path):
    # two sizes, flat separated curves: no crossing anywhere
    ratios = [0.2, 0.5, 0.8]
    entries = radial_entries("square", ratios, [4], 3, theta=0.9553, phi=-2.35)
    plan = SweepPlan(kind="square", entries=tuple(entries), master_seed=5, t_max=30)
    records = execute(plan, tmp_path, workers=1)
    # single size: crossing must fail cleanly
    with pytest.raises(ValueError):
        crossing_from_records(records, n_bootstrap=0)


def test_boundary_scan_rows(tmp_path):
    rows = boundary_scan(
        "square",
        "p_h",
        [0.0],
        theta=0.9553,
        phi=-2.35,
        sizes=[4, 8],
        trajectories=4,
        master_seed=3,
        out_dir=tmp_path,
        ratios=[0.3, 0.9, 1.5],
        workers=2,
        t_max=40,
        n_bootstrap=10,
    )
    assert len(rows) == 1
    assert (tmp_path / "boundary.csv").exists()
    sub = tmp_path / "p_h_0"
    assert (sub / "records.csv").exists()
