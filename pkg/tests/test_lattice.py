"""Geometry invariants: bonds, plaquettes, ensembles, partitions."""

from collections import Counter

import pytest

from kitmon.lattice import (
    BOND_LABELS,
    LatticeKind,
    build_geometry,
    check_ensemble,
    partition_cylinders,
    plaquette_operators,
)
from kitmon.pauli import commutes, gf2_rank


def all_check_operators(geom):
    ops = []
    labels = "xyz" if geom.kind is LatticeKind.HONEYCOMB else "xyzI"
    for lab in labels:
        ops += check_ensemble(geom, "bond", lab).operators()
    ops += check_ensemble(geom, "single_site").operators()
    ops += check_ensemble(geom, "interaction").operators()
    return ops


def plaquette_rank(geom):
    n = geom.n_qubits
    return gf2_rank([(p.x << n) | p.z for p in geom.plaquettes])


def test_bad_sizes_rejected():
    with pytest.raises(ValueError, match="at least 4"):
        build_geometry("square", 2)
    with pytest.raises(ValueError, match="divisible by 4"):
        build_geometry("honeycomb", 6)
    with pytest.raises(ValueError, match="kind"):
        build_geometry("triangular", 8)


def test_counts_honeycomb_l4():
    geom = build_geometry("honeycomb", 4)
    assert geom.n_sites == 32
    assert geom.n_qubits == 64
    assert len(geom.plaquettes) == 16
    assert len(geom.bonds) == 48


def test_counts_square_l4():
    geom = build_geometry("square", 4)
    assert geom.n_sites == 16
    assert geom.n_qubits == 32
    assert len(geom.bonds) == 32
    deg = Counter()
    for b in geom.bonds:
        deg[(b.site_i, b.label)] += 1
        deg[(b.site_j, b.label)] += 1
    for s in range(geom.n_sites):
        for lab in BOND_LABELS:
            assert deg[(s, lab)] == 1


def test_bond_label_degree_honeycomb():
    geom = build_geometry("honeycomb", 4)
    deg = Counter()
    for b in geom.bonds:
        deg[(b.site_i, b.label)] += 1
        deg[(b.site_j, b.label)] += 1
    for s in range(geom.n_sites):
        for lab in "xyz":
            assert deg[(s, lab)] == 1
        assert (s, "I") not in deg


@pytest.mark.parametrize("kind", ["honeycomb", "square"])
def test_plaquette_rank_l4(kind):
    geom = build_geometry(kind, 4)
    assert plaquette_rank(geom) == geom.L**2 - 1


@pytest.mark.parametrize("kind", ["honeycomb", "square"])
def test_plaquettes_commute_with_all_checks_l4(kind):
    geom = build_geometry(kind, 4)
    checks = all_check_operators(geom)
    for w in geom.plaquettes:
        for c in checks:
            assert commutes(w, c)
        for w2 in geom.plaquettes:
            assert commutes(w, w2)


def test_honeycomb_plaquettes_trivial_on_sigma():
    geom = build_geometry("honeycomb", 4)
    sigma_mask = 0
    for s in range(geom.n_sites):
        sigma_mask |= 1 << geom.sigma_qubit(s)
    for w in geom.plaquettes:
        assert (w.x & sigma_mask) == 0 and (w.z & sigma_mask) == 0


def test_honeycomb_plaquette_xor_zero():
    geom = build_geometry("honeycomb", 4)
    x = z = 0
    for w in geom.plaquettes:
        x ^= w.x
        z ^= w.z
    assert x == 0 and z == 0


def test_square_plaquette_structure():
    geom = build_geometry("square", 4)
    for w in geom.plaquettes:
        # two sigma-z factors and four tau factors
        sigma_sites = [s for s in range(geom.n_sites) if (w.z >> geom.sigma_qubit(s)) & 1]
        assert len(sigma_sites) == 2
        assert all(not (w.x >> geom.sigma_qubit(s)) & 1 for s in range(geom.n_sites))
        tau_sites = [
            s
            for s in range(geom.n_sites)
            if ((w.x | w.z) >> geom.tau_qubit(s)) & 1
        ]
        assert len(tau_sites) == 4


def test_check_ensemble_contents():
    sq = build_geometry("square", 4)
    zb = check_ensemble(sq, "bond", "z")
    assert zb.n_flavors == 2 and set(zb.flavors) == {"X", "Y"}
    op = zb.operator(0, 0)
    i, j, _ = zb.instances[0]
    # sigma flavor on both sites, tau-z on both sites
    assert ((op.x >> sq.sigma_qubit(i)) & 1) == 1
    assert ((op.z >> sq.tau_qubit(i)) & 1) == 1 and ((op.z >> sq.tau_qubit(j)) & 1) == 1

    ib = check_ensemble(sq, "bond", "I")
    for k in range(ib.n_instances):
        for f in range(ib.n_flavors):
            op = ib.operator(k, f)
            for s in range(sq.n_sites):
                tq = sq.tau_qubit(s)
                assert not ((op.x | op.z) >> tq) & 1

    ss = check_ensemble(sq, "single_site")
    assert ss.flavors == ("Z",) and ss.n_instances == sq.n_sites

    hc = build_geometry("honeycomb", 4)
    assert check_ensemble(hc, "single_site").n_flavors == 3
    assert check_ensemble(hc, "bond", "z").n_flavors == 3
    assert check_ensemble(hc, "interaction").n_flavors == 3
    inter = check_ensemble(sq, "interaction")
    assert inter.flavors == ("Z",)
    assert inter.n_instances == len(sq.bonds)


def test_check_ensemble_rejects_bad_category():
    hc = build_geometry("honeycomb", 4)
    with pytest.raises(ValueError):
        check_ensemble(hc, "bond", "I")
    with pytest.raises(ValueError):
        check_ensemble(hc, "plaquette")
    with pytest.raises(ValueError):
        check_ensemble(hc, "single_site", "z")


@pytest.mark.parametrize("kind,L", [("square", 8), ("honeycomb", 8)])
def test_partition_cylinders(kind, L):
    geom = build_geometry(kind, L)
    part = partition_cylinders(geom)
    total = 0
    for region in part.regions:
        assert region.size == geom.n_qubits // 4
        total ^= region.member
    assert total == (1 << geom.n_qubits) - 1
    # sigma and tau of each site stay together
    for region in part.regions:
        for s in range(geom.n_sites):
            in_sigma = (region.member >> geom.sigma_qubit(s)) & 1
            in_tau = (region.member >> geom.tau_qubit(s)) & 1
            assert in_sigma == in_tau


@pytest.mark.parametrize("kind", ["square", "honeycomb"])
def test_partition_a_c_nonadjacent(kind):
    geom = build_geometry(kind, 8)
    part = partition_cylinders(geom)
    a, c = part.a, part.c
    for b in geom.bonds:
        qa = 1 << geom.sigma_qubit(b.site_i)
        qb = 1 << geom.sigma_qubit(b.site_j)
        touches_a = bool(a.member & (qa | qb))
        touches_c = bool(c.member & (qa | qb))
        assert not (touches_a and touches_c)


def test_plaquette_operators_accessor():
    geom = build_geometry("square", 4)
    assert plaquette_operators(geom) == geom.plaquettes
    dump = geom.dump()
    assert dump["n_qubits"] == 32 and len(dump["plaquettes"]) == 16
