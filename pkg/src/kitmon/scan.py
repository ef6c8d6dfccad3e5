"""Sweep planning, parallel ensemble execution, aggregation, persistence.

A plan is a list of (point, size, trajectory-count) entries.  Execution
fans trajectories out to a process pool, aggregates per-point means and
standard errors, and appends one CSV record per completed point, so an
interrupted plan resumes without touching finished records.  Per-seed
determinism: trajectory streams are SeedSequence(master_seed,
spawn_key=(record_id, trajectory_index)), independent of worker count and
completion order.

File formats are frozen in docs/format.md (records.csv, trajectories.csv,
profiles.csv, boundary.csv, summary.json; every file carries
schema_version).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__ as ENGINE_VERSION
from .diagnostics import CrossingEstimate, I3Curve, find_crossing
from .lattice import LatticeKind
from .protocol import CircuitConfig, MeasurementMix, run_trajectory
from .simplex import (
    SQUARE_U_NORM,
    SimplexPoint,
    euclidean_radius,
    normalized_point_radius,
    r_edge,
    r_max,
    radius_for_normalized,
    to_probabilities,
)

SCHEMA_VERSION = 1

RECORD_COLUMNS = [
    "schema_version",
    "record_id",
    "lattice",
    "L",
    "initial",
    "p_x",
    "p_y",
    "p_z",
    "p_I",
    "p_h",
    "p_J",
    "r",
    "theta",
    "phi",
    "r_euclid",
    "r_norm",
    "trajectories",
    "t_max",
    "snapshot_cadence",
    "steady_window",
    "seed",
    "i3_mean",
    "i3_sem",
    "i2_ab_mean",
    "i2_ab_sem",
    "i2_ac_mean",
    "i2_ac_sem",
    "s_total_mean",
    "s_total_sem",
    "s_half_mean",
    "s_half_sem",
    "steps_mean",
    "steady_fraction",
    "flux_fraction",
    "flux_step_mean",
    "engine_version",
]

TRAJECTORY_COLUMNS = [
    "schema_version",
    "record_id",
    "traj",
    "steps",
    "steady_step",
    "flux_step",
    "i3",
    "i2_ab",
    "i2_ac",
    "s_total",
    "s_half",
]

PROFILE_COLUMNS = ["schema_version", "record_id", "width", "s_mean", "s_sem"]

BOUNDARY_COLUMNS = [
    "schema_version",
    "lattice",
    "knob",
    "knob_value",
    "theta",
    "phi",
    "found",
    "r_c",
    "r_c_err",
    "r_c_euclid",
    "r_c_norm",
    "r_c_norm_err",
    "nu",
    "nu_err",
    "n_sizes",
    "n_radii",
]


def fmt(value) -> str:
    """Deterministic scalar formatting for CSV cells ('' for missing)."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".12g")
    return str(value)


@dataclass(frozen=True)
class PlanEntry:
    """One scan point: a probability mix at one lattice size."""

    mix: MeasurementMix
    L: int
    trajectories: int
    point: SimplexPoint | None = None  # set when the mix came from simplex coords


@dataclass(frozen=True)
class SweepPlan:
    kind: LatticeKind
    entries: tuple[PlanEntry, ...]
    master_seed: int
    t_max: int = 1000
    snapshot_cadence: int = 5
    steady_window: int = 50
    min_steps: int = 100
    initial: str = "plaquette_projected_product"
    record_flux: bool = False
    record_profile: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind.coerce(self.kind))
        if not self.entries:
            raise ValueError("plan has no entries")

    def config_for(self, record_id: int, traj: int) -> CircuitConfig:
        e = self.entries[record_id]
        return CircuitConfig(
            kind=self.kind,
            L=e.L,
            mix=e.mix,
            t_max=self.t_max,
            seed=self.master_seed,
            stream=(record_id, traj),
            initial=self.initial,
            snapshot_cadence=self.snapshot_cadence,
            steady_window=self.steady_window,
            min_steps=self.min_steps,
            record_mutual_info=True,
            record_flux=self.record_flux,
            record_profile=self.record_profile,
        )


@dataclass
class ScanRecord:
    """Aggregated trajectory statistics at one plan point."""

    record_id: int
    plan: SweepPlan
    entry: PlanEntry
    stats: dict
    traj_rows: list[dict] = field(repr=False, default_factory=list)
    profile: list[tuple[int, float, float]] | None = None
    wall_seconds: float = 0.0

    def csv_row(self) -> dict:
        e = self.entry
        p = e.point
        row = {
            "schema_version": SCHEMA_VERSION,
            "record_id": self.record_id,
            "lattice": self.plan.kind.value,
            "L": e.L,
            "initial": self.plan.initial,
            "p_x": e.mix.p_x,
            "p_y": e.mix.p_y,
            "p_z": e.mix.p_z,
            "p_I": e.mix.p_I,
            "p_h": e.mix.p_h,
            "p_J": e.mix.p_J,
            "r": p.r if p else None,
            "theta": p.theta if p else None,
            "phi": p.phi if p else None,
            "r_euclid": euclidean_radius(p) if p else None,
            "r_norm": normalized_point_radius(p) if p else None,
            "trajectories": e.trajectories,
            "t_max": self.plan.t_max,
            "snapshot_cadence": self.plan.snapshot_cadence,
            "steady_window": self.plan.steady_window,
            "seed": self.plan.master_seed,
            "engine_version": ENGINE_VERSION,
        }
        row.update(self.stats)
        return row


def _mean_sem(values: Sequence[float | None]) -> tuple[float | None, float | None]:
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    if len(vals) == 0:
        return None, None
    mean = float(vals.mean())
    sem = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) >= 2 else None
    return mean, sem


_WORKER_PLAN: SweepPlan | None = None


def _worker_init(plan: SweepPlan):
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _run_chunk(args: tuple[int, int, int]) -> list[dict]:
    record_id, lo, hi = args
    assert _WORKER_PLAN is not None
    out = []
    for traj in range(lo, hi):
        res = run_trajectory(_WORKER_PLAN.config_for(record_id, traj))
        row = res.to_row()
        row["traj"] = traj
        if res.final_profile is not None:
            row["profile"] = res.final_profile.tolist()
        if _WORKER_PLAN.initial == "maximally_mixed":
            row["_series"] = (res.snapshot_steps.tolist(), res.s_total.tolist())
        out.append(row)
    return out


def _aggregate(plan: SweepPlan, record_id: int, rows: list[dict], wall: float) -> ScanRecord:
    entry = plan.entries[record_id]
    stats = {}
    for key, col in [
        ("i3", "i3"),
        ("i2_ab", "i2_ab"),
        ("i2_ac", "i2_ac"),
        ("s_total", "s_total"),
        ("s_half", "s_half"),
    ]:
        mean, sem = _mean_sem([r[key] for r in rows])
        stats[f"{col}_mean"] = mean
        stats[f"{col}_sem"] = sem
    stats["steps_mean"], _ = _mean_sem([r["steps"] for r in rows])
    steady = [1.0 if r["steady_step"] >= 0 else 0.0 for r in rows]
    stats["steady_fraction"] = float(np.mean(steady))
    if plan.record_flux:
        flux = [r["flux_step"] for r in rows]
        attained = [f for f in flux if f >= 0]
        stats["flux_fraction"] = len(attained) / len(flux)
        stats["flux_step_mean"] = float(np.mean(attained)) if attained else None
    else:
        stats["flux_fraction"] = None
        stats["flux_step_mean"] = None
    profile = None
    if plan.record_profile and rows and "profile" in rows[0]:
        widths = np.arange(1, entry.L)
        mat = np.asarray([r["profile"] for r in rows], dtype=float)
        means = mat.mean(axis=0)
        sems = mat.std(axis=0, ddof=1) / np.sqrt(mat.shape[0]) if mat.shape[0] >= 2 else np.full(mat.shape[1], np.nan)
        profile = [(int(w), float(m), float(s)) for w, m, s in zip(widths, means, sems)]
    traj_rows = []
    for r in rows:
        trow = {
            "schema_version": SCHEMA_VERSION,
            "record_id": record_id,
            "traj": r["traj"],
            "steps": r["steps"],
            "steady_step": r["steady_step"],
            "flux_step": r["flux_step"],
            "i3": r["i3"],
            "i2_ab": r["i2_ab"],
            "i2_ac": r["i2_ac"],
            "s_total": r["s_total"],
            "s_half": r["s_half"],
        }
        if "_series" in r:
            trow["_series"] = r["_series"]
        traj_rows.append(trow)
    return ScanRecord(record_id, plan, entry, stats, traj_rows, profile, wall)


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _append_rows(path: Path, columns: list[str], rows: Iterable[dict]):
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def _rewrite_rows(path: Path, columns: list[str], rows: list[dict]):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def default_workers() -> int:
    env = os.environ.get("KITMON_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def execute(
    plan: SweepPlan,
    out_dir: str | Path,
    workers: int | None = None,
    resume: bool = True,
    progress: bool = False,
) -> list[ScanRecord]:
    """Run every plan entry, writing records.csv/trajectories.csv as points
    complete.  With ``resume``, entries whose record_id already appears in
    records.csv are loaded instead of re-run and their rows are untouched.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.csv"
    traj_path = out / "trajectories.csv"
    prof_path = out / "profiles.csv"
    workers = workers or default_workers()

    done_rows = {int(r["record_id"]): r for r in _read_csv(records_path)} if resume else {}
    if not resume:
        for p in (records_path, traj_path, prof_path):
            if p.exists():
                p.unlink()
    else:
        # drop orphan rows from interrupted points so reruns cannot duplicate
        for p, cols in ((traj_path, TRAJECTORY_COLUMNS), (prof_path, PROFILE_COLUMNS)):
            rows = _read_csv(p)
            kept = [r for r in rows if int(r["record_id"]) in done_rows]
            if len(kept) != len(rows):
                _rewrite_rows(p, cols, kept)

    t_start = time.time()
    results: list[ScanRecord] = []
    pool = ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(plan,)) if workers > 1 else None
    try:
        if pool is None:
            _worker_init(plan)
        for record_id, entry in enumerate(plan.entries):
            if record_id in done_rows:
                results.append(_record_from_csv(plan, record_id, done_rows[record_id], traj_path))
                continue
            t0 = time.time()
            n = entry.trajectories
            chunk = max(1, math.ceil(n / (workers * 4)))
            tasks = [(record_id, lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
            rows: list[dict] = []
            if pool is None:
                for t in tasks:
                    rows.extend(_run_chunk(t))
            else:
                for part in pool.map(_run_chunk, tasks):
                    rows.extend(part)
            rows.sort(key=lambda r: r["traj"])
            rec = _aggregate(plan, record_id, rows, time.time() - t0)
            _append_rows(traj_path, TRAJECTORY_COLUMNS, rec.traj_rows)
            if rec.profile is not None:
                _append_rows(
                    prof_path,
                    PROFILE_COLUMNS,
                    (
                        {
                            "schema_version": SCHEMA_VERSION,
                            "record_id": record_id,
                            "width": w,
                            "s_mean": m,
                            "s_sem": s,
                        }
                        for w, m, s in rec.profile
                    ),
                )
            _append_rows(records_path, RECORD_COLUMNS, [rec.csv_row()])
            results.append(rec)
            if progress:
                print(f"[{record_id + 1}/{len(plan.entries)}] L={entry.L} done in {rec.wall_seconds:.1f}s", flush=True)
    finally:
        if pool is not None:
            pool.shutdown()
    summary = {
        "schema_version": SCHEMA_VERSION,
        "engine_version": ENGINE_VERSION,
        "lattice": plan.kind.value,
        "entries": len(plan.entries),
        "master_seed": plan.master_seed,
        "t_max": plan.t_max,
        "initial": plan.initial,
        "wall_seconds": time.time() - t_start,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return results


def _record_from_csv(plan: SweepPlan, record_id: int, row: dict, traj_path: Path) -> ScanRecord:
    def num(key):
        v = row.get(key, "")
        return float(v) if v not in ("", None) else None

    stats = {}
    for col in (
        "i3_mean",
        "i3_sem",
        "i2_ab_mean",
        "i2_ab_sem",
        "i2_ac_mean",
        "i2_ac_sem",
        "s_total_mean",
        "s_total_sem",
        "s_half_mean",
        "s_half_sem",
        "steps_mean",
        "steady_fraction",
        "flux_fraction",
        "flux_step_mean",
    ):
        stats[col] = num(col)
    traj_rows = [r for r in _read_csv(traj_path) if int(r["record_id"]) == record_id]
    for r in traj_rows:
        for key in ("i3", "i2_ab", "i2_ac", "s_total", "s_half"):
            r[key] = float(r[key]) if r[key] != "" else None
    return ScanRecord(record_id, plan, plan.entries[record_id], stats, traj_rows)


# -- plan builders ----------------------------------------------------------


def radial_entries(
    kind,
    ratios: Sequence[float],
    sizes: Sequence[int],
    trajectories: int,
    theta: float,
    phi: float = 0.0,
    p_h: float = 0.0,
    p_J: float = 0.0,
) -> list[PlanEntry]:
    """Entries scanning the normalized radius grid at every size.

    Radii above 0.98 of the direction's positivity bound are clamped out
    with a usage error, matching the probability-validity invariant.
    """
    kind = LatticeKind.coerce(kind)
    share = 1.0 - p_h - p_J
    rmax = r_max(kind, theta, phi, p_h, p_J)
    entries = []
    for L in sizes:
        for ratio in ratios:
            r = radius_for_normalized(kind, ratio, share)
            if r > rmax * (1 + 1e-12):
                raise ValueError(
                    f"normalized radius {ratio} exceeds the positivity bound along theta={theta}, phi={phi}"
                )
            pt = SimplexPoint(kind=kind, r=r, theta=theta, phi=phi, p_h=p_h, p_J=p_J)
            entries.append(PlanEntry(mix=to_probabilities(pt), L=L, trajectories=trajectories, point=pt))
    return entries


def default_radial_ratios(n: int = 12, lo: float = 0.0, hi_fraction: float = 0.95) -> list[float]:
    """Grid in r (fraction of r_max); converted per direction by callers."""
    return list(np.linspace(lo, hi_fraction, n))


@dataclass
class BoundaryRow:
    knob: str
    knob_value: float
    estimate: CrossingEstimate
    theta: float
    phi: float
    n_sizes: int
    n_radii: int

    def csv_row(self, kind: LatticeKind, share: float) -> dict:
        est = self.estimate
        row = {
            "schema_version": SCHEMA_VERSION,
            "lattice": kind.value,
            "knob": self.knob,
            "knob_value": self.knob_value,
            "theta": self.theta,
            "phi": self.phi,
            "found": est.found,
            "r_c": est.r_c,
            "r_c_err": est.r_c_err,
            "n_sizes": self.n_sizes,
            "n_radii": self.n_radii,
            "nu": est.nu,
            "nu_err": est.nu_err,
        }
        if est.found:
            pt_scale = SQUARE_U_NORM if kind is LatticeKind.SQUARE else 1.0
            eu = est.r_c * pt_scale
            row["r_c_euclid"] = eu
            row["r_c_norm"] = eu / r_edge(kind, share)
            row["r_c_norm_err"] = (est.r_c_err * pt_scale / r_edge(kind, share)) if est.r_c_err is not None else None
        else:
            row["r_c_euclid"] = None
            row["r_c_norm"] = None
            row["r_c_norm_err"] = None
        return row


def crossing_from_records(records: list[ScanRecord], nu_grid=None, n_bootstrap: int = 200) -> CrossingEstimate:
    """Build per-size I3 curves from radial-scan records and find r_c."""
    by_size: dict[int, list[ScanRecord]] = {}
    for rec in records:
        by_size.setdefault(rec.entry.L, []).append(rec)
    curves = {}
    for L, recs in by_size.items():
        recs = sorted(recs, key=lambda r: r.entry.point.r)
        r = np.array([rec.entry.point.r for rec in recs])
        mean = np.array([rec.stats["i3_mean"] for rec in recs], dtype=float)
        sem = np.array(
            [rec.stats["i3_sem"] if rec.stats["i3_sem"] is not None else np.nan for rec in recs], dtype=float
        )
        samples = None
        if all(rec.traj_rows for rec in recs):
            n_traj = min(len(rec.traj_rows) for rec in recs)
            samples = np.array(
                [[rec.traj_rows[t]["i3"] for rec in recs] for t in range(n_traj)], dtype=float
            )
        curves[L] = I3Curve(r=r, mean=mean, sem=sem, samples=samples)
    return find_crossing(curves, nu_grid=nu_grid, n_bootstrap=n_bootstrap)


def boundary_scan(
    kind,
    knob: str,
    knob_values: Sequence[float],
    theta: float,
    phi: float,
    sizes: Sequence[int],
    trajectories: int,
    master_seed: int,
    out_dir: str | Path,
    ratios: Sequence[float] | None = None,
    workers: int | None = None,
    resume: bool = True,
    t_max: int = 1000,
    progress: bool = False,
    n_bootstrap: int = 200,
) -> list[BoundaryRow]:
    """Phase-boundary table: r_c(knob) from radial I3 crossings.

    Each knob value gets its own sub-plan directory; a knob value with no
    crossing in range is recorded as boundary-absent.
    """
    if knob not in ("p_h", "p_J"):
        raise ValueError("knob must be p_h or p_J")
    kind = LatticeKind.coerce(kind)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for iv, v in enumerate(knob_values):
        p_h = v if knob == "p_h" else 0.0
        p_J = v if knob == "p_J" else 0.0
        share = 1.0 - p_h - p_J
        if ratios is None:
            rmax = r_max(kind, theta, phi, p_h, p_J)
            scale = SQUARE_U_NORM if kind is LatticeKind.SQUARE else 1.0
            hi = 0.95 * rmax * scale / r_edge(kind, share)
            use_ratios = list(np.linspace(0.0, hi, 12))
        else:
            use_ratios = list(ratios)
        entries = radial_entries(kind, use_ratios, sizes, trajectories, theta, phi, p_h, p_J)
        plan = SweepPlan(kind=kind, entries=tuple(entries), master_seed=master_seed + iv, t_max=t_max)
        records = execute(plan, out / f"{knob}_{fmt(float(v))}", workers=workers, resume=resume, progress=progress)
        est = crossing_from_records(records, n_bootstrap=n_bootstrap)
        rows.append(
            BoundaryRow(
                knob=knob,
                knob_value=float(v),
                estimate=est,
                theta=theta,
                phi=phi,
                n_sizes=len(sizes),
                n_radii=len(use_ratios),
            )
        )
    csv_rows = []
    for row in rows:
        share = 1.0 - (row.knob_value if knob == "p_h" else 0.0) - (row.knob_value if knob == "p_J" else 0.0)
        csv_rows.append(row.csv_row(kind, share))
    _rewrite_rows(out / "boundary.csv", BOUNDARY_COLUMNS, csv_rows)
    return rows
