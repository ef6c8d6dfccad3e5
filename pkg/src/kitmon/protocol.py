"""Stochastic measurement scheduler and trajectory engine.

A time step applies n_sites projective measurements.  Each measurement
first draws a category (x/y/z/I bond, single-site, interaction) from the
configured probabilities, then an (instance, flavor) pair uniformly from
that category's ensemble; drawing the pair jointly is identical in
distribution to drawing the instance and flavor separately.

Trajectories are deterministic functions of (config, seed): randomness
comes from a Philox counter-based generator whose per-trajectory stream is
derived as SeedSequence(master_seed, spawn_key=stream).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import _bitops
from .diagnostics import MutualInfoResult, entropy_profile, mutual_info
from .lattice import (
    LatticeGeometry,
    LatticeKind,
    Partition,
    build_geometry,
    check_ensemble,
    partition_cylinders,
)
from .pauli import PauliString, StabilizerGroup

CATEGORIES = ("x", "y", "z", "I", "single_site", "interaction")

INITIAL_STATES = ("plaquette_projected_product", "maximally_mixed")


@dataclass(frozen=True)
class MeasurementMix:
    """Measurement category probabilities; must sum to one."""

    p_x: float
    p_y: float
    p_z: float
    p_I: float = 0.0
    p_h: float = 0.0
    p_J: float = 0.0

    def __post_init__(self):
        vec = self.as_vector()
        if np.any(vec < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(vec.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {vec.sum()!r}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.p_x, self.p_y, self.p_z, self.p_I, self.p_h, self.p_J], dtype=float)

    def validate_for(self, kind) -> "MeasurementMix":
        if LatticeKind.coerce(kind) is LatticeKind.HONEYCOMB and self.p_I != 0.0:
            raise ValueError("the honeycomb lattice has no I bonds; p_I must be 0")
        return self

    @classmethod
    def isotropic(cls, kind, p_h: float = 0.0, p_J: float = 0.0) -> "MeasurementMix":
        """Equal bond probabilities sharing 1 - p_h - p_J."""
        kind = LatticeKind.coerce(kind)
        share = 1.0 - p_h - p_J
        if share < 0:
            raise ValueError("p_h + p_J exceeds 1")
        if kind is LatticeKind.HONEYCOMB:
            b = share / 3.0
            return cls(b, b, b, 0.0, p_h, p_J)
        b = share / 4.0
        return cls(b, b, b, b, p_h, p_J)


@dataclass(frozen=True)
class CircuitConfig:
    """Everything needed to reproduce one trajectory ensemble member."""

    kind: LatticeKind
    L: int
    mix: MeasurementMix
    t_max: int = 1000
    seed: int = 0
    stream: tuple[int, ...] = ()
    initial: str = "plaquette_projected_product"
    snapshot_cadence: int = 5
    steady_window: int = 50
    min_steps: int = 100
    record_mutual_info: bool = True
    record_flux: bool = False
    record_profile: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind.coerce(self.kind))
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if self.initial not in INITIAL_STATES:
            raise ValueError(f"unknown initial state {self.initial!r}")
        if self.snapshot_cadence < 1:
            raise ValueError("snapshot_cadence must be positive")
        self.mix.validate_for(self.kind)

    def with_stream(self, *stream: int) -> "CircuitConfig":
        return replace(self, stream=tuple(stream))


@dataclass
class TrajectoryResult:
    """Snapshots and final diagnostics of one stochastic trajectory."""

    config: CircuitConfig
    snapshot_steps: np.ndarray
    s_total: np.ndarray
    i3: np.ndarray | None
    i2_ab: np.ndarray | None
    i2_ac: np.ndarray | None
    steps_run: int
    steady_step: int | None
    flux_step: int | None
    final_mi: MutualInfoResult | None
    final_s_half: int
    final_profile: np.ndarray | None
    category_counts: np.ndarray
    seed_key: tuple[int, ...]

    def tail_mean(self, series_name: str) -> float:
        """Mean of a snapshot series over the final steady window."""
        series = getattr(self, series_name)
        if series is None:
            raise ValueError(f"{series_name} was not recorded")
        w = max(2, self.config.steady_window // self.config.snapshot_cadence)
        return float(np.mean(series[-w:]))

    def to_row(self) -> dict:
        """Flat record consumed by the scan module."""
        return {
            "steps": self.steps_run,
            "steady_step": -1 if self.steady_step is None else self.steady_step,
            "flux_step": -1 if self.flux_step is None else self.flux_step,
            "i3": self.tail_mean("i3") if self.i3 is not None else None,
            "i2_ab": self.tail_mean("i2_ab") if self.i2_ab is not None else None,
            "i2_ac": self.tail_mean("i2_ac") if self.i2_ac is not None else None,
            "s_total": int(self.s_total[-1]),
            "s_half": int(self.final_s_half),
        }


@dataclass(frozen=True)
class OperatorTable:
    """Pre-packed measurement operators for one geometry (internal)."""

    geom: LatticeGeometry
    partition: Partition
    op_rows: np.ndarray
    op_swaps: np.ndarray
    cat_base: np.ndarray
    cat_count: np.ndarray
    plaq_rows: np.ndarray


@lru_cache(maxsize=8)
def operator_table(kind: LatticeKind, L: int) -> OperatorTable:
    geom = build_geometry(kind, L)
    scratch = StabilizerGroup(geom.n_qubits)
    ops: list[PauliString] = []
    base = np.zeros(6, dtype=np.int64)
    count = np.zeros(6, dtype=np.int64)
    hc = geom.kind is LatticeKind.HONEYCOMB
    for ci, cat in enumerate(CATEGORIES):
        base[ci] = len(ops)
        if cat == "I" and hc:
            continue
        if cat in ("x", "y", "z", "I"):
            ens = check_ensemble(geom, "bond", cat)
        else:
            ens = check_ensemble(geom, cat)
        cat_ops = ens.operators()
        ops.extend(cat_ops)
        count[ci] = len(cat_ops)
    W = scratch._W
    op_rows = np.empty((len(ops), W), dtype=np.uint64)
    for i, op in enumerate(ops):
        op_rows[i] = scratch._pack(op)
    op_swaps = _bitops.swap_xz(op_rows)
    plaq_rows = np.empty((len(geom.plaquettes), W), dtype=np.uint64)
    for i, p in enumerate(geom.plaquettes):
        plaq_rows[i] = scratch._pack(p)
    return OperatorTable(
        geom=geom,
        partition=partition_cylinders(geom),
        op_rows=op_rows,
        op_swaps=op_swaps,
        cat_base=base,
        cat_count=count,
        plaq_rows=plaq_rows,
    )


def _cumulative(mix: MeasurementMix) -> np.ndarray:
    vec = mix.as_vector()
    cum = np.empty(6, dtype=float)
    acc = 0.0
    for i in range(6):
        acc += vec[i]
        cum[i] = acc
    return cum


def _pick_index(cum: np.ndarray, count: np.ndarray, base: np.ndarray, u_cat: float, u_op: float):
    """Reference implementation of the kernel's category/operator pick."""
    c = 0
    while c < 5 and u_cat >= cum[c]:
        c += 1
    while count[c] == 0:
        c -= 1
    j = min(int(u_op * count[c]), count[c] - 1)
    return c, int(base[c] + j)


def sample_operator(mix: MeasurementMix, geom: LatticeGeometry, rng: np.random.Generator) -> PauliString:
    """Draw one measurement operator; same mapping as the trajectory loop."""
    mix.validate_for(geom.kind)
    table = operator_table(geom.kind, geom.L)
    cum = _cumulative(mix)
    c, oi = _pick_index(cum, table.cat_count, table.cat_base, rng.random(), rng.random())
    group = StabilizerGroup(geom.n_qubits)
    return group._unpack(table.op_rows[oi])


def init_state(config: CircuitConfig, geom: LatticeGeometry) -> StabilizerGroup:
    """Initial stabilizer group for a trajectory.

    ``plaquette_projected_product``: the on-site qudit basis product (spin
    qubits stabilized by Y, orbital qubits by Z) with every plaquette then
    measured; stays pure.  The spin qubits must not start in the Z basis:
    straight runs of sigma-z are conserved parities of the check ensemble,
    and seeding them would pin one unit of long-range mutual information
    for the whole run.  ``maximally_mixed``: the empty group.
    """
    if config.initial == "maximally_mixed":
        return StabilizerGroup(geom.n_qubits)
    letters = ["Y", "Z"] * geom.n_sites  # (sigma, tau) per site
    group = StabilizerGroup.product_state(geom.n_qubits, letters)
    for p in geom.plaquettes:
        group.measure(p)
    return group


def run_step(
    group: StabilizerGroup,
    geom: LatticeGeometry,
    mix: MeasurementMix,
    rng: np.random.Generator,
) -> StabilizerGroup:
    """Apply one time step: n_sites sampled projective measurements."""
    mix.validate_for(geom.kind)
    table = operator_table(geom.kind, geom.L)
    _run_steps(group, table, _cumulative(mix), rng, 1, np.zeros(6, dtype=np.int64))
    return group


def _run_steps(group, table, cum, rng, n_steps, cat_hits):
    n = table.geom.n_sites
    for _ in range(n_steps):
        u_cat = rng.random(n)
        u_op = rng.random(n)
        group._k = _bitops.run_measure_batch(
            group._rows,
            group._piv,
            group._pivmap,
            group._k,
            table.op_rows,
            table.op_swaps,
            cum,
            table.cat_base,
            table.cat_count,
            u_cat,
            u_op,
            cat_hits,
            group._idxbuf,
            group._redbuf,
        )


def _steady(series: list, w: int) -> bool:
    """Two consecutive windows agree within one standard error of the mean.

    An exactly flat pair of windows (zero spread, zero drift) also counts,
    so integer-valued plateaus terminate.
    """
    if len(series) < 2 * w:
        return False
    tail = np.asarray(series[-w:], dtype=float)
    prev = np.asarray(series[-2 * w : -w], dtype=float)
    se = float(np.std(tail, ddof=1)) / np.sqrt(w)
    d = abs(float(tail.mean()) - float(prev.mean()))
    return d < se or (se == 0.0 and d == 0.0)


def run_trajectory(config: CircuitConfig) -> TrajectoryResult:
    """Evolve one trajectory until steady state or t_max.

    Snapshots are taken every ``snapshot_cadence`` steps (plus step 0).
    The steady-state criterion compares the last two 50-step windows of
    the tracked diagnostic: total entropy for purification runs, the
    tripartite mutual information otherwise.
    """
    table = operator_table(config.kind, config.L)
    geom = table.geom
    group = init_state(config, geom)
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=config.seed, spawn_key=config.stream))
    )
    cum = _cumulative(config.mix)
    cat_hits = np.zeros(6, dtype=np.int64)

    purifying = config.initial == "maximally_mixed"
    track_mi = config.record_mutual_info
    regions = _mi_regions(table.partition)

    snap_steps: list[int] = []
    s_series: list[int] = []
    i3_series: list[float] = []
    i2ab_series: list[int] = []
    i2ac_series: list[int] = []
    flux_step = None
    flux_pending = config.record_flux

    def snapshot(t: int):
        nonlocal flux_step, flux_pending
        snap_steps.append(t)
        s_series.append(group.entropy_total())
        if track_mi:
            mi = mutual_info(group, table.partition, _regions=regions)
            i3_series.append(mi.i3)
            i2ab_series.append(mi.i2_ab)
            i2ac_series.append(mi.i2_ac)
        if flux_pending:
            if _bitops.all_rows_contained(group._rows, group._pivmap, table.plaq_rows, group._redbuf):
                flux_step = t
                flux_pending = False

    snapshot(0)
    w = max(2, config.steady_window // config.snapshot_cadence)
    steady_step = None
    t = 0
    while t < config.t_max:
        _run_steps(group, table, cum, rng, 1, cat_hits)
        t += 1
        if t % config.snapshot_cadence == 0 or t == config.t_max:
            snapshot(t)
            detect = s_series if (purifying or not track_mi) else i3_series
            can_stop = t >= max(config.min_steps, 2 * config.steady_window)
            # purification runs with mutual info off still detect on entropy;
            # pure-state runs without mutual info have nothing to detect on.
            if not purifying and not track_mi:
                can_stop = False
            if can_stop and _steady(detect, w):
                steady_step = t
                break

    final_mi = mutual_info(group, table.partition, _regions=regions) if track_mi else None
    s_half = group.entropy_region(geom.cylinder_mask(geom.L // 2))
    profile = None
    if config.record_profile:
        profile = entropy_profile(group, geom).s
    return TrajectoryResult(
        config=config,
        snapshot_steps=np.asarray(snap_steps, dtype=np.int64),
        s_total=np.asarray(s_series, dtype=np.int64),
        i3=np.asarray(i3_series, dtype=float) if track_mi else None,
        i2_ab=np.asarray(i2ab_series, dtype=np.int64) if track_mi else None,
        i2_ac=np.asarray(i2ac_series, dtype=np.int64) if track_mi else None,
        steps_run=t,
        steady_step=steady_step,
        flux_step=flux_step,
        final_mi=final_mi,
        final_s_half=int(s_half),
        final_profile=profile,
        category_counts=cat_hits,
        seed_key=(config.seed, *config.stream),
    )


def _mi_regions(partition: Partition):
    a, b, c, _ = partition.regions
    return (a, b, c, a.union(b), a.union(c), b.union(c), a.union(b).union(c))


def flux_purification_time(result: TrajectoryResult) -> int | None:
    """First snapshot step at which every plaquette sat in the group.

    Requires a trajectory run with ``record_flux=True``; returns None when
    the flux sector never completed within the run (e.g. ensembles that
    cannot build some plaquettes).
    """
    if not result.config.record_flux:
        raise ValueError("trajectory was run without flux recording")
    return result.flux_step
