"""Entanglement diagnostics and statistical analysis.

All state-level quantities are exact integers in bits (stabilizer states
have flat entanglement spectra); the fits and the crossing finder operate
on trajectory-ensemble averages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .lattice import LatticeGeometry, Partition
from .pauli import RegionMask, StabilizerGroup


class FitError(RuntimeError):
    """A fit could not be performed (degenerate design matrix)."""


@dataclass(frozen=True)
class MutualInfoResult:
    """Bipartite and tripartite mutual information over cylinders A, B, C."""

    s_a: int
    s_b: int
    s_c: int
    s_ab: int
    s_ac: int
    s_bc: int
    s_abc: int

    @property
    def i2_ab(self) -> int:
        return self.s_a + self.s_b - self.s_ab

    @property
    def i2_ac(self) -> int:
        return self.s_a + self.s_c - self.s_ac

    @property
    def i2_a_bc(self) -> int:
        return self.s_a + self.s_bc - self.s_abc

    @property
    def i3(self) -> int:
        # inclusion-exclusion; identical to i2_ab + i2_ac - i2_a_bc
        return self.s_a + self.s_b + self.s_c - self.s_ab - self.s_ac - self.s_bc + self.s_abc


def mutual_info(
    group: StabilizerGroup,
    partition: Partition,
    _regions: tuple[RegionMask, ...] | None = None,
) -> MutualInfoResult:
    """Mutual information over the four-cylinder partition.

    All seven entropies come from ``entropy_region``; the optional
    ``_regions`` carries the precomputed A, B, C, AB, AC, BC, ABC masks
    for hot loops.
    """
    if _regions is None:
        a, b, c, _ = partition.regions
        _regions = (a, b, c, a.union(b), a.union(c), b.union(c), a.union(b).union(c))
    s = [group.entropy_region(r) for r in _regions]
    return MutualInfoResult(*s)


@dataclass(frozen=True)
class EntropyProfile:
    """Cylinder entropy S(l) for widths l on an L-torus."""

    L: int
    widths: np.ndarray
    s: np.ndarray
    s_half: float

    def normalized(self) -> np.ndarray:
        if self.s_half == 0:
            return np.zeros_like(np.asarray(self.s, dtype=float))
        return np.asarray(self.s, dtype=float) / float(self.s_half)


def entropy_profile(
    group: StabilizerGroup,
    geom: LatticeGeometry,
    widths: Sequence[int] | None = None,
    anchor_average: bool = True,
) -> EntropyProfile:
    """Cylinder-entropy profile of one state.

    By default each width is averaged over all cylinder anchors around the
    torus, which makes S(l) = S(L - l) exact on pure states (a width-l
    cylinder's complement is a width-(L-l) cylinder at a shifted anchor).
    ``anchor_average=False`` keeps only the anchor-0 cylinder.
    """
    if widths is None:
        widths = range(1, geom.L)
    widths = np.asarray(sorted(widths), dtype=np.int64)
    if len(widths) == 0 or widths[0] < 1 or widths[-1] > geom.L - 1:
        raise ValueError("widths must lie in 1..L-1")
    anchors = range(geom.n_columns) if anchor_average else (0,)
    s = np.array(
        [
            np.mean([group.entropy_region(geom.column_range_mask(a, int(w))) for a in anchors])
            for w in widths
        ],
        dtype=float,
    )
    s_half = float(np.mean([group.entropy_region(geom.column_range_mask(a, geom.L // 2)) for a in anchors]))
    return EntropyProfile(L=geom.L, widths=widths, s=s, s_half=s_half)


def purification_trace(result) -> np.ndarray:
    """(t, S_total) series of a purification trajectory, shape (n, 2)."""
    if result.config.initial != "maximally_mixed":
        raise ValueError("purification trace requires a maximally_mixed initial state")
    return np.column_stack([result.snapshot_steps, result.s_total])


def purification_plateau(result) -> int:
    """Entropy plateau (logical qubit count) at the end of a purification run."""
    if result.config.initial != "maximally_mixed":
        raise ValueError("purification plateau requires a maximally_mixed initial state")
    return int(result.s_total[-1])


@dataclass(frozen=True)
class TopoFit:
    """Linear area-law fit S(L) = alpha * L - S_topo."""

    alpha: float
    s_topo: float
    residual: float
    s_topo_err: float | None
    area_law_consistent: bool


def fit_topological_entropy(
    sizes: Sequence[int],
    s_values: Sequence[float],
    per_trajectory: Mapping[int, np.ndarray] | None = None,
    n_bootstrap: int = 200,
    seed: int = 0,
) -> TopoFit:
    """Fit the area-law line and report the topological intercept.

    ``per_trajectory`` (size -> per-trajectory values) enables bootstrap
    errors on S_topo.  A quadratic term that beats the line flags the
    input as not area-law.
    """
    sizes = np.asarray(sizes, dtype=float)
    vals = np.asarray(s_values, dtype=float)
    if len(sizes) < 3:
        raise ValueError("need at least 3 sizes")
    coef = np.polyfit(sizes, vals, 1)
    resid_lin = float(np.sqrt(np.mean((np.polyval(coef, sizes) - vals) ** 2)))
    quad = np.polyfit(sizes, vals, 2)
    resid_quad = float(np.sqrt(np.mean((np.polyval(quad, sizes) - vals) ** 2)))
    # a genuine area law gains nothing from the quadratic term
    consistent = resid_lin <= 2.0 * resid_quad + 0.05 * max(1.0, float(np.mean(np.abs(vals))))
    err = None
    if per_trajectory is not None:
        rng = np.random.default_rng(seed)
        boots = []
        for _ in range(n_bootstrap):
            means = []
            for Lv in sizes:
                arr = np.asarray(per_trajectory[int(Lv)], dtype=float)
                means.append(float(rng.choice(arr, size=len(arr), replace=True).mean()))
            boots.append(-np.polyfit(sizes, means, 1)[1])
        err = float(np.std(boots))
    return TopoFit(
        alpha=float(coef[0]),
        s_topo=float(-coef[1]),
        residual=resid_lin,
        s_topo_err=err,
        area_law_consistent=bool(consistent),
    )


@dataclass(frozen=True)
class CriticalFit:
    """Per-size fits of S/L = a(L) + b(L) * L * ln(sin(pi*l/L))."""

    a: dict[int, float]
    b: dict[int, float]
    joint_a: float
    joint_b: float
    collapse_residual: float


def fit_critical_collapse(profiles: Sequence[EntropyProfile]) -> CriticalFit:
    """Least-squares fit of the logarithmic entropy-collapse form.

    Returns per-size coefficients plus a single joint fit whose RMS
    residual serves as the collapse-quality score (lower = better
    collapse onto the common form).
    """
    if len(profiles) < 2:
        raise ValueError("need profiles for at least 2 sizes")
    a: dict[int, float] = {}
    b: dict[int, float] = {}
    xs_all, ys_all = [], []
    for prof in profiles:
        if len(prof.widths) < 4:
            raise ValueError("need at least 4 widths per size")
        L = prof.L
        ell = np.asarray(prof.widths, dtype=float)
        x = L * np.log(np.sin(np.pi * ell / L))
        y = np.asarray(prof.s, dtype=float) / L
        design = np.column_stack([np.ones_like(x), x])
        if np.linalg.matrix_rank(design) < 2:
            raise FitError("degenerate design matrix for the collapse fit")
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        a[L], b[L] = float(coef[0]), float(coef[1])
        xs_all.append(x)
        ys_all.append(y)
    x = np.concatenate(xs_all)
    y = np.concatenate(ys_all)
    design = np.column_stack([np.ones_like(x), x])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate design matrix for the joint collapse fit")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return CriticalFit(a=a, b=b, joint_a=float(coef[0]), joint_b=float(coef[1]), collapse_residual=resid)


@dataclass(frozen=True)
class I3Curve:
    """Trajectory-averaged diagnostic versus radius at one system size."""

    r: np.ndarray
    mean: np.ndarray
    sem: np.ndarray | None = None
    samples: np.ndarray | None = None  # (n_trajectories, n_r)


@dataclass(frozen=True)
class CrossingEstimate:
    """Finite-size crossing point and collapse exponent."""

    found: bool
    r_c: float | None
    r_c_err: float | None
    nu: float | None
    nu_err: float | None
    pairwise: dict[tuple[int, int], float]


def _pair_crossing(r: np.ndarray, d: np.ndarray) -> float | None:
    """Most significant sign change of d(r), linearly interpolated."""
    best = None
    best_mag = -1.0
    for i in range(len(r) - 1):
        a, b = d[i], d[i + 1]
        if a == 0.0 and b == 0.0:
            continue
        if a == 0.0:
            cand, mag = float(r[i]), abs(b)
        elif a * b < 0.0:
            cand = float(r[i] + a * (r[i + 1] - r[i]) / (a - b))
            mag = abs(a) + abs(b)
        else:
            continue
        if mag > best_mag:
            best, best_mag = cand, mag
    return best


def _collapse_residual(points: list[tuple[float, float]]) -> float:
    """Deviation of pooled, sorted (x, y) points from local linearity."""
    pts = sorted(points)
    if len(pts) < 3:
        return float("inf")
    res = 0.0
    for i in range(1, len(pts) - 1):
        x0, y0 = pts[i - 1]
        x1, y1 = pts[i]
        x2, y2 = pts[i + 1]
        if x2 == x0:
            continue
        yhat = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0)
        res += (y1 - yhat) ** 2
    return res / (len(pts) - 2)


def _estimate(curves: Mapping[int, tuple[np.ndarray, np.ndarray]], nu_grid: np.ndarray):
    sizes = sorted(curves)
    pairwise: dict[tuple[int, int], float] = {}
    for i, L1 in enumerate(sizes):
        for L2 in sizes[i + 1 :]:
            r1, m1 = curves[L1]
            r2, m2 = curves[L2]
            if len(r1) != len(r2) or not np.allclose(r1, r2):
                raise ValueError("crossing curves must share a common r grid")
            rc = _pair_crossing(r1, m1 - m2)
            if rc is not None:
                pairwise[(L1, L2)] = rc
    if not pairwise:
        return None, None, pairwise
    r_c = float(np.median(list(pairwise.values())))
    best_nu, best_res = None, float("inf")
    for nu in nu_grid:
        pts = []
        for L in sizes:
            r, m = curves[L]
            x = (r - r_c) * L ** (1.0 / nu)
            pts.extend(zip(x.tolist(), m.tolist()))
        res = _collapse_residual(pts)
        if res < best_res:
            best_nu, best_res = float(nu), res
    return r_c, best_nu, pairwise


def find_crossing(
    curves: Mapping[int, I3Curve],
    nu_grid: np.ndarray | None = None,
    n_bootstrap: int = 200,
    seed: int = 0,
) -> CrossingEstimate:
    """Locate the size-independent crossing of diagnostic-vs-radius curves.

    The crossing radius is the median of pairwise linear-interpolated sign
    changes of the curve differences; the exponent comes from a grid
    search minimizing the residual of the collapse onto
    F[(r - r_c) * L^(1/nu)].  Bootstrap errors resample trajectories when
    per-trajectory samples are available.
    """
    if len(curves) < 2:
        raise ValueError("need curves for at least 2 sizes")
    if nu_grid is None:
        nu_grid = np.arange(0.5, 3.0 + 1e-9, 0.05)
    base = {L: (np.asarray(c.r, dtype=float), np.asarray(c.mean, dtype=float)) for L, c in curves.items()}
    r_c, nu, pairwise = _estimate(base, nu_grid)
    if r_c is None:
        return CrossingEstimate(found=False, r_c=None, r_c_err=None, nu=None, nu_err=None, pairwise={})
    r_c_err = nu_err = None
    if all(c.samples is not None for c in curves.values()) and n_bootstrap > 0:
        rng = np.random.default_rng(seed)
        rcs, nus = [], []
        for _ in range(n_bootstrap):
            resampled = {}
            for L, c in curves.items():
                smp = np.asarray(c.samples, dtype=float)
                idx = rng.integers(0, smp.shape[0], size=smp.shape[0])
                resampled[L] = (np.asarray(c.r, dtype=float), smp[idx].mean(axis=0))
            rc_b, nu_b, _ = _estimate(resampled, nu_grid)
            if rc_b is not None:
                rcs.append(rc_b)
                nus.append(nu_b)
        if rcs:
            r_c_err = float(np.std(rcs))
            nu_err = float(np.std(nus))
    return CrossingEstimate(found=True, r_c=r_c, r_c_err=r_c_err, nu=nu, nu_err=nu_err, pairwise=pairwise)
