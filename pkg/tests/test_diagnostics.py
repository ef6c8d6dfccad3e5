"""Entanglement measures and statistical analysis."""

import numpy as np
import pytest

from kitmon.diagnostics import (
    EntropyProfile,
    FitError,
    I3Curve,
    entropy_profile,
    find_crossing,
    fit_critical_collapse,
    fit_topological_entropy,
    mutual_info,
    purification_plateau,
    purification_trace,
)
from kitmon.lattice import build_geometry, partition_cylinders
from kitmon.pauli import PauliString, RegionMask, StabilizerGroup
from kitmon.protocol import CircuitConfig, MeasurementMix, init_state, run_step, run_trajectory

from dense_oracle import random_pauli_label


def test_mutual_info_pure_product_zero():
    geom = build_geometry("square", 4)
    part = partition_cylinders(geom)
    g = StabilizerGroup.product_state(geom.n_qubits, "Z")
    mi = mutual_info(g, part)
    assert (mi.i2_ab, mi.i2_ac, mi.i2_a_bc, mi.i3) == (0, 0, 0, 0)


def test_mutual_info_identity_between_definitions():
    geom = build_geometry("square", 4)
    part = partition_cylinders(geom)
    rng = np.random.default_rng(41)
    mix = MeasurementMix.isotropic("square", p_J=0.2)
    g = init_state(CircuitConfig("square", 4, mix, initial="maximally_mixed"), geom)
    for step in range(40):
        run_step(g, geom, mix, rng)
        if step % 10:
            continue
        mi = mutual_info(g, part)
        via_i2 = mi.i2_ab + mi.i2_ac - mi.i2_a_bc
        via_s = mi.s_a + mi.s_b + mi.s_c - mi.s_ab - mi.s_ac - mi.s_bc + mi.s_abc
        assert mi.i3 == via_i2 == via_s
        assert mi.i2_ac >= 0 and isinstance(mi.i2_ac, int)


def test_mutual_info_matches_direct_region_entropies():
    """The partition fast path must agree with direct region computation."""
    geom = build_geometry("honeycomb", 4)
    part = partition_cylinders(geom)
    rng = np.random.default_rng(43)
    g = StabilizerGroup(geom.n_qubits)
    for _ in range(200):
        g.measure(PauliString.from_label(random_pauli_label(rng, geom.n_qubits)))
    mi = mutual_info(g, part)
    a, b, c, _ = part.regions
    assert mi.s_a == g.entropy_region(a)
    assert mi.s_ab == g.entropy_region(a.union(b))
    assert mi.s_abc == g.entropy_region(a.union(b).union(c))


def test_entropy_profile_pure_state_symmetry():
    geom = build_geometry("square", 8)
    mix = MeasurementMix.isotropic("square")
    res_group = init_state(CircuitConfig("square", 8, mix), geom)
    rng = np.random.default_rng(47)
    for _ in range(30):
        run_step(res_group, geom, mix, rng)
    prof = entropy_profile(res_group, geom)
    assert list(prof.widths) == list(range(1, 8))
    for w in range(1, 8):
        assert prof.s[w - 1] == pytest.approx(prof.s[8 - w - 1], abs=1e-12)
    assert prof.s_half == pytest.approx(prof.s[3], abs=1e-12)
    # anchor-0-only profile satisfies the complement identity instead
    single = entropy_profile(res_group, geom, anchor_average=False)
    for w in range(1, 8):
        comp = geom.column_range_mask(w, 8 - w)
        assert single.s[w - 1] == res_group.entropy_region(comp)


def test_entropy_profile_width_validation():
    geom = build_geometry("square", 4)
    g = StabilizerGroup.product_state(geom.n_qubits, "Z")
    with pytest.raises(ValueError):
        entropy_profile(g, geom, widths=[0, 1])
    with pytest.raises(ValueError):
        entropy_profile(g, geom, widths=[4])


def test_purification_trace_and_plateau():
    cfg = CircuitConfig(
        "square", 4, MeasurementMix.isotropic("square"), t_max=400, seed=51, initial="maximally_mixed"
    )
    res = run_trajectory(cfg)
    trace = purification_trace(res)
    assert trace.shape[1] == 2
    assert np.all(np.diff(trace[:, 1]) <= 0)
    assert purification_plateau(res) == int(res.s_total[-1])
    pure_cfg = CircuitConfig("square", 4, cfg.mix, t_max=5, seed=51)
    pure = run_trajectory(pure_cfg)
    with pytest.raises(ValueError):
        purification_trace(pure)


def test_fit_topological_entropy_synthetic_exact():
    sizes = [8, 12, 16]
    values = [0.7 * L - 1.0 for L in sizes]
    fit = fit_topological_entropy(sizes, values)
    assert fit.alpha == pytest.approx(0.7, abs=1e-9)
    assert fit.s_topo == pytest.approx(1.0, abs=1e-9)
    assert fit.residual == pytest.approx(0.0, abs=1e-9)
    assert fit.area_law_consistent


def test_fit_topological_entropy_flags_volume_law():
    sizes = [8, 12, 16, 20]
    values = [0.05 * L * L for L in sizes]
    fit = fit_topological_entropy(sizes, values)
    assert not fit.area_law_consistent


def test_fit_topological_entropy_bootstrap_errors():
    rng = np.random.default_rng(53)
    sizes = [8, 12, 16]
    per_traj = {L: 0.7 * L - 1.0 + rng.normal(0, 0.3, size=50) for L in sizes}
    values = [float(np.mean(per_traj[L])) for L in sizes]
    fit = fit_topological_entropy(sizes, values, per_trajectory=per_traj, seed=1)
    assert fit.s_topo == pytest.approx(1.0, abs=0.5)
    assert 0 < fit.s_topo_err < 1.0


def test_fit_topological_entropy_needs_three_sizes():
    with pytest.raises(ValueError):
        fit_topological_entropy([8, 12], [5.0, 7.0])


def test_fit_critical_collapse_recovers_synthetic_coefficients():
    profiles = []
    a_true, b_true = 0.8, 0.05
    for L in (8, 12, 16):
        widths = np.arange(1, L)
        x = L * np.log(np.sin(np.pi * widths / L))
        s = (a_true + b_true * x) * L
        profiles.append(EntropyProfile(L=L, widths=widths, s=s, s_half=float(s[L // 2 - 1])))
    fit = fit_critical_collapse(profiles)
    for L in (8, 12, 16):
        assert fit.a[L] == pytest.approx(a_true, abs=1e-6)
        assert fit.b[L] == pytest.approx(b_true, abs=1e-6)
    assert fit.collapse_residual == pytest.approx(0.0, abs=1e-9)


def test_fit_critical_collapse_validation():
    widths = np.arange(1, 8)
    prof = EntropyProfile(L=8, widths=widths, s=np.ones(7), s_half=1.0)
    with pytest.raises(ValueError):
        fit_critical_collapse([prof])
    short = EntropyProfile(L=8, widths=np.array([1, 2]), s=np.array([1.0, 1.0]), s_half=1.0)
    with pytest.raises(ValueError):
        fit_critical_collapse([prof, short])
    degenerate = EntropyProfile(L=8, widths=np.array([4, 4, 4, 4]), s=np.ones(4), s_half=1.0)
    with pytest.raises(FitError):
        fit_critical_collapse([degenerate, degenerate])


def _synthetic_curves(r_c=0.3, nu=1.3, sizes=(8, 12, 16), noise=0.0, seed=0, n_traj=40):
    rng = np.random.default_rng(seed)
    r = np.linspace(0.1, 0.5, 11)
    curves = {}
    for L in sizes:
        x = (r - r_c) * L ** (1.0 / nu)
        mean = np.tanh(1.5 * x)
        samples = mean[None, :] + noise * rng.standard_normal((n_traj, len(r)))
        curves[L] = I3Curve(r=r, mean=samples.mean(axis=0), sem=None, samples=samples)
    return curves


def test_find_crossing_synthetic():
    est = find_crossing(_synthetic_curves(noise=0.0), n_bootstrap=0)
    assert est.found
    assert est.r_c == pytest.approx(0.3, abs=0.02)
    assert est.nu == pytest.approx(1.3, abs=0.3)


def test_find_crossing_with_noise_and_bootstrap():
    est = find_crossing(_synthetic_curves(noise=0.4, seed=3), n_bootstrap=100)
    assert est.found
    assert est.r_c == pytest.approx(0.3, abs=0.05)
    assert est.r_c_err is not None and 0 < est.r_c_err < 0.1


def test_find_crossing_equivariance():
    base = _synthetic_curves(noise=0.0)
    est1 = find_crossing(base, n_bootstrap=0)
    scaled = {
        L: I3Curve(r=c.r, mean=8.0 * c.mean, sem=None, samples=8.0 * c.samples)
        for L, c in base.items()
    }
    est2 = find_crossing(scaled, n_bootstrap=0)
    assert est1.r_c == pytest.approx(est2.r_c, abs=1e-12)


def test_find_crossing_absent():
    r = np.linspace(0.1, 0.5, 9)
    curves = {
        8: I3Curve(r=r, mean=np.full(9, 2.0)),
        12: I3Curve(r=r, mean=np.full(9, 2.0) + 0.1),
    }
    est = find_crossing(curves, n_bootstrap=0)
    assert not est.found and est.r_c is None


def test_find_crossing_needs_common_grid():
    curves = {
        8: I3Curve(r=np.linspace(0, 1, 5), mean=np.linspace(-1, 1, 5)),
        12: I3Curve(r=np.linspace(0, 2, 5), mean=np.linspace(1, -1, 5)),
    }
    with pytest.raises(ValueError):
        find_crossing(curves, n_bootstrap=0)
