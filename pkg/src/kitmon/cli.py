"""Command-line entry point.

Subcommands: run (steady-state ensemble at one point), purify
(maximally-mixed purification ensemble), sweep (grid of simplex points),
boundary (r_c versus a knob), analyze (fits/crossings over stored CSVs).

Runs are described by a YAML config file (flat keys, documented in
docs/format.md); the config is copied into the output directory so every
artifact is reproducible from its own folder.  Exit codes: 0 success,
1 runtime failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__ as ENGINE_VERSION
from .diagnostics import (
    EntropyProfile,
    I3Curve,
    find_crossing,
    fit_critical_collapse,
    fit_topological_entropy,
)
from .lattice import LatticeKind
from .protocol import MeasurementMix
from .scan import (
    SCHEMA_VERSION,
    PlanEntry,
    SweepPlan,
    _append_rows,
    _read_csv,
    boundary_scan,
    crossing_from_records,
    default_workers,
    execute,
    radial_entries,
)
from .simplex import SimplexPoint, radius_for_normalized, to_probabilities


class ConfigError(ValueError):
    """Invalid or missing configuration value (exit code 2)."""


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _mix_from_config(cfg: dict, kind: LatticeKind) -> tuple[MeasurementMix, SimplexPoint | None]:
    if ("probabilities" in cfg) == ("simplex" in cfg):
        raise ConfigError("config needs exactly one of 'probabilities' or 'simplex'")
    if "probabilities" in cfg:
        p = cfg["probabilities"]
        if not isinstance(p, dict):
            raise ConfigError("'probabilities' must be a mapping of x/y/z/I/h/J")
        unknown = set(p) - {"x", "y", "z", "I", "h", "J"}
        if unknown:
            raise ConfigError(f"unknown probability keys: {sorted(unknown)}")
        try:
            mix = MeasurementMix(
                p_x=float(p.get("x", 0.0)),
                p_y=float(p.get("y", 0.0)),
                p_z=float(p.get("z", 0.0)),
                p_I=float(p.get("I", 0.0)),
                p_h=float(p.get("h", 0.0)),
                p_J=float(p.get("J", 0.0)),
            ).validate_for(kind)
        except ValueError as exc:
            raise ConfigError(f"probabilities: {exc}") from exc
        return mix, None
    s = cfg["simplex"]
    if not isinstance(s, dict):
        raise ConfigError("'simplex' must be a mapping")
    p_h = float(s.get("p_h", 0.0))
    p_J = float(s.get("p_J", 0.0))
    theta = float(s.get("theta", 0.0))
    phi = float(s.get("phi", 0.0))
    if ("r" in s) == ("r_norm" in s):
        raise ConfigError("simplex needs exactly one of 'r' or 'r_norm'")
    share = 1.0 - p_h - p_J
    r = float(s["r"]) if "r" in s else radius_for_normalized(kind, float(s["r_norm"]), share)
    try:
        pt = SimplexPoint(kind=kind, r=r, theta=theta, phi=phi, p_h=p_h, p_J=p_J)
        mix = to_probabilities(pt)
    except ValueError as exc:
        raise ConfigError(f"simplex: {exc}") from exc
    return mix, pt


def _plan_common(cfg: dict, args) -> dict:
    return {
        "t_max": int(cfg.get("t_max", 1000)),
        "snapshot_cadence": int(cfg.get("snapshot_cadence", 5)),
        "steady_window": int(cfg.get("steady_window", 50)),
        "min_steps": int(cfg.get("min_steps", 100)),
        "record_flux": bool(cfg.get("record_flux", False)),
        "record_profile": bool(cfg.get("record_profile", False)),
    }


def _seed(cfg: dict, args) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def _single_point_plan(cfg: dict, args, initial: str) -> SweepPlan:
    kind = LatticeKind.coerce(_require(cfg, "lattice"))
    L = int(_require(cfg, "size"))
    mix, pt = _mix_from_config(cfg, kind)
    entry = PlanEntry(mix=mix, L=L, trajectories=int(cfg.get("trajectories", 100)), point=pt)
    return SweepPlan(
        kind=kind,
        entries=(entry,),
        master_seed=_seed(cfg, args),
        initial=initial,
        **_plan_common(cfg, args),
    )


def cmd_run(cfg: dict, args) -> int:
    plan = _single_point_plan(cfg, args, initial=str(cfg.get("initial", "plaquette_projected_product")))
    execute(plan, args.out, workers=args.workers, resume=args.resume, progress=args.progress)
    return 0


def cmd_purify(cfg: dict, args) -> int:
    plan = _single_point_plan(cfg, args, initial="maximally_mixed")
    out = Path(args.out)
    records = execute(plan, out, workers=args.workers, resume=args.resume, progress=args.progress)
    series_path = out / "purify_series.csv"
    mean_path = out / "purify_mean.csv"
    all_series = [row.get("_series") for row in records[0].traj_rows]
    if any(s is None for s in all_series):
        # resumed from CSV: series files were written by the original run
        if series_path.exists() and mean_path.exists():
            return 0
        raise RuntimeError("per-trajectory series unavailable; rerun without --resume")
    for p in (series_path, mean_path):
        if p.exists():
            p.unlink()
    for traj, (steps, s) in enumerate(all_series):
        _append_rows(
            series_path,
            ["schema_version", "traj", "t", "s_total"],
            (
                {"schema_version": SCHEMA_VERSION, "traj": traj, "t": int(t), "s_total": int(v)}
                for t, v in zip(steps, s)
            ),
        )
    tmax = max(int(steps[-1]) for steps, _ in all_series)
    rows = []
    for t in range(0, tmax + 1, plan.snapshot_cadence):
        vals = []
        for steps, s in all_series:
            idx = np.searchsorted(steps, t, side="right") - 1
            vals.append(float(s[idx]))  # plateau persists after early stop
        vals = np.asarray(vals)
        sem = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) >= 2 else None
        rows.append(
            {
                "schema_version": SCHEMA_VERSION,
                "t": t,
                "s_total_mean": float(vals.mean()),
                "s_total_sem": sem,
            }
        )
    _append_rows(mean_path, ["schema_version", "t", "s_total_mean", "s_total_sem"], rows)
    return 0


def cmd_sweep(cfg: dict, args) -> int:
    kind = LatticeKind.coerce(_require(cfg, "lattice"))
    sizes = [int(v) for v in _require(cfg, "sizes")]
    grid = _require(cfg, "grid")
    ratios = [float(v) for v in _require(grid, "ratios")]
    try:
        entries = radial_entries(
            kind,
            ratios,
            sizes,
            int(cfg.get("trajectories", 100)),
            theta=float(grid.get("theta", 0.0)),
            phi=float(grid.get("phi", 0.0)),
            p_h=float(grid.get("p_h", 0.0)),
            p_J=float(grid.get("p_J", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    plan = SweepPlan(
        kind=kind, entries=tuple(entries), master_seed=_seed(cfg, args), **_plan_common(cfg, args)
    )
    records = execute(plan, args.out, workers=args.workers, resume=args.resume, progress=args.progress)
    payload = {"schema_version": SCHEMA_VERSION, "found": False, "r_c": None, "r_c_err": None,
               "nu": None, "nu_err": None, "pairwise": {}}
    if len(sizes) >= 2:
        est = crossing_from_records(records)
        payload.update(
            found=est.found,
            r_c=est.r_c,
            r_c_err=est.r_c_err,
            nu=est.nu,
            nu_err=est.nu_err,
            pairwise={f"{a}-{b}": v for (a, b), v in est.pairwise.items()},
        )
    (Path(args.out) / "crossing.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_boundary(cfg: dict, args) -> int:
    kind = LatticeKind.coerce(_require(cfg, "lattice"))
    b = _require(cfg, "boundary")
    knob = _require(b, "knob")
    if knob not in ("p_h", "p_J"):
        raise ConfigError("boundary.knob must be p_h or p_J")
    boundary_scan(
        kind,
        knob,
        [float(v) for v in _require(b, "values")],
        theta=float(b.get("theta", 0.0)),
        phi=float(b.get("phi", 0.0)),
        sizes=[int(v) for v in _require(b, "sizes")],
        trajectories=int(cfg.get("trajectories", 100)),
        master_seed=_seed(cfg, args),
        out_dir=args.out,
        ratios=[float(v) for v in b["ratios"]] if "ratios" in b else None,
        workers=args.workers,
        resume=args.resume,
        t_max=int(cfg.get("t_max", 1000)),
        progress=args.progress,
    )
    return 0


def _load_records(paths: list[str]) -> list[dict]:
    rows = []
    for p in paths:
        path = Path(p)
        rec = path / "records.csv" if path.is_dir() else path
        if not rec.exists():
            raise ConfigError(f"no records.csv found at {p}")
        for row in _read_csv(rec):
            if int(row["schema_version"]) != SCHEMA_VERSION:
                raise ConfigError(f"unsupported schema_version {row['schema_version']} in {rec}")
            row["_dir"] = str(rec.parent)
            rows.append(row)
    return rows


def cmd_analyze(cfg: dict, args) -> int:
    a = _require(cfg, "analyze")
    task = _require(a, "task")
    inputs = _require(a, "inputs")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result: dict = {"schema_version": SCHEMA_VERSION, "task": task, "engine_version": ENGINE_VERSION}
    if task == "crossing":
        rows = _load_records(inputs)
        from .diagnostics import I3Curve, find_crossing

        by_size: dict[int, list[dict]] = {}
        for row in rows:
            if row["r"] == "":
                raise ConfigError("crossing analysis needs simplex-scan records (missing r)")
            by_size.setdefault(int(row["L"]), []).append(row)
        curves = {}
        for L, rws in by_size.items():
            rws = sorted(rws, key=lambda r: float(r["r"]))
            r = np.array([float(w["r"]) for w in rws])
            mean = np.array([float(w["i3_mean"]) for w in rws])
            sem = np.array([float(w["i3_sem"]) if w["i3_sem"] else np.nan for w in rws])
            samples = _traj_samples(rws)
            curves[L] = I3Curve(r=r, mean=mean, sem=sem, samples=samples)
        est = find_crossing(curves)
        result.update(
            found=est.found,
            r_c=est.r_c,
            r_c_err=est.r_c_err,
            nu=est.nu,
            nu_err=est.nu_err,
            pairwise={f"{a_}-{b_}": v for (a_, b_), v in est.pairwise.items()},
        )
    elif task == "topo":
        rows = _load_records(inputs)
        sizes = [int(r["L"]) for r in rows]
        values = [float(r["s_half_mean"]) for r in rows]
        fit = fit_topological_entropy(sizes, values)
        result.update(
            alpha=fit.alpha,
            s_topo=fit.s_topo,
            residual=fit.residual,
            area_law_consistent=fit.area_law_consistent,
        )
    elif task == "collapse":
        profiles = []
        recs = _load_records(inputs)
        by_dir: dict[str, dict[int, int]] = {}
        for row in recs:
            by_dir.setdefault(row["_dir"], {})[int(row["record_id"])] = int(row["L"])
        for d, id_to_L in by_dir.items():
            prof_rows = _read_csv(Path(d) / "profiles.csv")
            if not prof_rows:
                raise ConfigError(f"no profiles.csv found in {d} (run with record_profile)")
            by_rec: dict[int, list[dict]] = {}
            for row in prof_rows:
                by_rec.setdefault(int(row["record_id"]), []).append(row)
            for rid, rws in by_rec.items():
                L = id_to_L[rid]
                widths = np.array([int(w["width"]) for w in rws])
                s = np.array([float(w["s_mean"]) for w in rws])
                order = np.argsort(widths)
                profiles.append(
                    EntropyProfile(L=L, widths=widths[order], s=s[order], s_half=float(s[order][L // 2 - 1]))
                )
        fit = fit_critical_collapse(profiles)
        result.update(
            a={str(k): v for k, v in fit.a.items()},
            b={str(k): v for k, v in fit.b.items()},
            joint_a=fit.joint_a,
            joint_b=fit.joint_b,
            collapse_residual=fit.collapse_residual,
        )
    else:
        raise ConfigError(f"unknown analyze task {task!r}")
    (out / "analysis.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


def _traj_samples(rows: list[dict]):
    dirs = {r["_dir"] for r in rows}
    if len(dirs) != 1:
        return None
    traj_rows = _read_csv(Path(dirs.pop()) / "trajectories.csv")
    if not traj_rows:
        return None
    by_rec: dict[int, list[float]] = {}
    for t in traj_rows:
        if t["i3"] == "":
            return None
        by_rec.setdefault(int(t["record_id"]), []).append(float(t["i3"]))
    cols = []
    for r in rows:
        rid = int(r["record_id"])
        if rid not in by_rec:
            return None
        cols.append(by_rec[rid])
    n = min(len(c) for c in cols)
    return np.array([[c[t] for c in cols] for t in range(n)])


COMMANDS = {
    "run": cmd_run,
    "purify": cmd_purify,
    "sweep": cmd_sweep,
    "boundary": cmd_boundary,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kitmon", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML config file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--workers", type=int, default=None, help=f"worker processes (default {default_workers()})")
    ap.add_argument("--resume", action="store_true", help="skip plan points already in records.csv")
    ap.add_argument("--progress", action="store_true", help="print per-point progress")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError(f"config file not found: {cfg_path}")
        try:
            cfg = yaml.safe_load(cfg_path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a YAML mapping")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        copied = out / "config.yaml"
        if not (copied.exists() and copied.samefile(cfg_path)):
            shutil.copyfile(cfg_path, copied)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
