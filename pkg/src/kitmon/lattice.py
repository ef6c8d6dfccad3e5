"""Torus geometries for the honeycomb and square qudit lattices.

Every site hosts a d=4 qudit encoded as two qubits: a spin qubit (sigma,
index 2*site) and an orbital qubit (tau, index 2*site + 1).  Sites are
indexed column-major along the first lattice axis so that cylinder regions
used by the entanglement diagnostics are contiguous qubit ranges.

Conventions fixed here (validated by the commutation property tests):

* honeycomb: cell (m, n) holds sublattice sites A and B; the z bond joins
  A(m,n)-B(m,n), the x bond A(m,n)-B(m-1,n), the y bond A(m,n)-B(m,n-1).
  The hexagon at (m, n) carries, at each of its six sites, the tau Pauli
  named by that site's bond pointing out of the hexagon.
* square: the horizontal bond (i,j)-(i+1,j) is x for even i+j else z; the
  vertical bond (i,j)-(i,j+1) is y for even i+j else I.  Each face then
  has one edge of each label in the cyclic order x, y, z, I, and the face
  operator is the product of one check per edge, giving two alternating
  plaquette types with sigma-z factors on the endpoints of the face's I
  edge and tau factors alternating z, x around the face.  Pairing x with
  z (and y with I) across the face is essential: it is what denies the
  dynamics any conserved straight loop that a flavor-pair product of
  single checks could assemble, which would otherwise split one unit off
  the mutual information between opposite cylinders.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .pauli import PauliString, RegionMask

BOND_LABELS = ("x", "y", "z", "I")

_TAU_LETTER = {"x": "X", "y": "Y", "z": "Z"}


class LatticeKind(str, enum.Enum):
    HONEYCOMB = "honeycomb"
    SQUARE = "square"

    @classmethod
    def coerce(cls, value) -> "LatticeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown lattice kind {value!r}") from None


class Bond(NamedTuple):
    site_i: int
    site_j: int
    label: str


@dataclass(frozen=True)
class Partition:
    """Four equal cylinders A, B, C, D wrapping the torus in cyclic order."""

    regions: tuple[RegionMask, RegionMask, RegionMask, RegionMask]

    @property
    def a(self) -> RegionMask:
        return self.regions[0]

    @property
    def b(self) -> RegionMask:
        return self.regions[1]

    @property
    def c(self) -> RegionMask:
        return self.regions[2]

    @property
    def d(self) -> RegionMask:
        return self.regions[3]


class LatticeGeometry:
    """Immutable torus geometry; build with :func:`build_geometry`."""

    def __init__(self, kind: LatticeKind, L: int):
        kind = LatticeKind.coerce(kind)
        if L < 4:
            raise ValueError(f"L must be at least 4, got {L}")
        if L % 4 != 0:
            raise ValueError(f"L must be divisible by 4 for the cylinder partition, got {L}")
        self.kind = kind
        self.L = L
        if kind is LatticeKind.HONEYCOMB:
            self.n_sites = 2 * L * L
            self.sites_per_column = 2 * L
        else:
            self.n_sites = L * L
            self.sites_per_column = L
        self.n_qubits = 2 * self.n_sites
        self.n_columns = L
        self.bonds: list[Bond] = []
        self.plaquettes: list[PauliString] = []
        if kind is LatticeKind.HONEYCOMB:
            self._build_honeycomb()
        else:
            self._build_square()
        self.bonds_by_label: dict[str, list[Bond]] = {lab: [] for lab in BOND_LABELS}
        for b in self.bonds:
            self.bonds_by_label[b.label].append(b)

    # -- site indexing -----------------------------------------------------

    def sigma_qubit(self, site: int) -> int:
        return 2 * site

    def tau_qubit(self, site: int) -> int:
        return 2 * site + 1

    def column_of_site(self, site: int) -> int:
        return site // self.sites_per_column

    def _hc_site(self, m: int, n: int, s: int) -> int:
        return ((m % self.L) * self.L + (n % self.L)) * 2 + s

    def _sq_site(self, i: int, j: int) -> int:
        return (i % self.L) * self.L + (j % self.L)

    # -- construction ------------------------------------------------------

    def _build_honeycomb(self):
        L = self.L
        for m in range(L):
            for n in range(L):
                a = self._hc_site(m, n, 0)
                self.bonds.append(Bond(a, self._hc_site(m, n, 1), "z"))
                self.bonds.append(Bond(a, self._hc_site(m - 1, n, 1), "x"))
                self.bonds.append(Bond(a, self._hc_site(m, n - 1, 1), "y"))
        for m in range(L):
            for n in range(L):
                hexagon = [
                    (self._hc_site(m, n, 0), "x"),
                    (self._hc_site(m, n, 1), "y"),
                    (self._hc_site(m + 1, n, 0), "z"),
                    (self._hc_site(m + 1, n - 1, 1), "x"),
                    (self._hc_site(m + 1, n - 1, 0), "y"),
                    (self._hc_site(m, n - 1, 1), "z"),
                ]
                ops = [(self.tau_qubit(s), _TAU_LETTER[lab]) for s, lab in hexagon]
                self.plaquettes.append(PauliString.from_ops(self.n_qubits, ops))

    def _sq_hlabel(self, i: int, j: int) -> str:
        return "x" if (i + j) % 2 == 0 else "z"

    def _sq_vlabel(self, i: int, j: int) -> str:
        return "y" if (i + j) % 2 == 0 else "I"

    def _build_square(self):
        L = self.L
        for i in range(L):
            for j in range(L):
                s = self._sq_site(i, j)
                self.bonds.append(Bond(s, self._sq_site(i + 1, j), self._sq_hlabel(i, j)))
                self.bonds.append(Bond(s, self._sq_site(i, j + 1), self._sq_vlabel(i, j)))
        # face operator = product of one check per edge; corner tau factor is
        # the product of its two edge labels, sigma-z pair on the I edge
        pair_tau = {
            frozenset("xy"): "Z",
            frozenset("xz"): "Y",
            frozenset("yz"): "X",
            frozenset("x"): "X",
            frozenset("y"): "Y",
            frozenset("z"): "Z",
        }
        for i in range(L):
            for j in range(L):
                corners = [
                    self._sq_site(i, j),
                    self._sq_site(i + 1, j),
                    self._sq_site(i + 1, j + 1),
                    self._sq_site(i, j + 1),
                ]
                edge = {
                    "b": self._sq_hlabel(i, j),
                    "r": self._sq_vlabel(i + 1, j),
                    "t": self._sq_hlabel(i, j + 1),
                    "l": self._sq_vlabel(i, j),
                }
                corner_edges = [("b", "l"), ("b", "r"), ("t", "r"), ("t", "l")]
                ops = []
                for c, (e1, e2) in zip(corners, corner_edges):
                    labs = frozenset(lab for lab in (edge[e1], edge[e2]) if lab != "I")
                    if labs:
                        ops.append((self.tau_qubit(c), pair_tau[labs]))
                edge_sites = {"b": (0, 1), "r": (1, 2), "t": (3, 2), "l": (0, 3)}
                for e, (u, v) in edge_sites.items():
                    if edge[e] == "I":
                        ops += [(self.sigma_qubit(corners[u]), "Z"), (self.sigma_qubit(corners[v]), "Z")]
                self.plaquettes.append(PauliString.from_ops(self.n_qubits, ops))

    # -- regions -----------------------------------------------------------

    def column_range_mask(self, col_start: int, width: int) -> RegionMask:
        """Qubits of ``width`` consecutive columns starting at ``col_start``."""
        if not 0 < width <= self.n_columns:
            raise ValueError("width out of range")
        qpc = 2 * self.sites_per_column
        member = 0
        for c in range(col_start, col_start + width):
            base = (c % self.n_columns) * qpc
            member |= ((1 << qpc) - 1) << base
        return RegionMask(self.n_qubits, member)

    def cylinder_mask(self, width: int) -> RegionMask:
        """Cylinder of ``width`` columns anchored at column 0."""
        return self.column_range_mask(0, width)

    def dump(self) -> dict:
        """Structured description of the geometry for debugging/plotting."""
        return {
            "kind": self.kind.value,
            "L": self.L,
            "n_sites": self.n_sites,
            "n_qubits": self.n_qubits,
            "bonds": [[b.site_i, b.site_j, b.label] for b in self.bonds],
            "plaquettes": [p.to_label() for p in self.plaquettes],
        }


def build_geometry(kind, L: int) -> LatticeGeometry:
    """Build a periodic L-by-L geometry of the requested kind."""
    return LatticeGeometry(LatticeKind.coerce(kind), L)


def plaquette_operators(geom: LatticeGeometry) -> list[PauliString]:
    return list(geom.plaquettes)


@dataclass(frozen=True)
class CheckEnsemble:
    """Uniform measurement ensemble: an instance set times a flavor set."""

    category: str
    label: str | None
    instances: tuple
    flavors: tuple[str, ...]
    n_qubits: int

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_flavors(self) -> int:
        return len(self.flavors)

    def operator(self, instance_index: int, flavor_index: int) -> PauliString:
        inst = self.instances[instance_index]
        flavor = self.flavors[flavor_index]
        if self.category == "single_site":
            return PauliString.from_ops(self.n_qubits, [(2 * inst, flavor)])
        i, j, lab = inst
        ops = [(2 * i, flavor), (2 * j, flavor)]
        if self.category == "bond" and lab != "I":
            tau = _TAU_LETTER[lab]
            ops += [(2 * i + 1, tau), (2 * j + 1, tau)]
        return PauliString.from_ops(self.n_qubits, ops)

    def operators(self) -> list[PauliString]:
        """All operators, instance-major then flavor."""
        return [
            self.operator(ii, fi)
            for ii in range(self.n_instances)
            for fi in range(self.n_flavors)
        ]


def check_ensemble(geom: LatticeGeometry, category: str, label: str | None = None) -> CheckEnsemble:
    """Describe the uniform operator ensemble for one measurement category.

    ``bond`` draws two-site checks P_i P_j on sigma paired with the bond's
    tau Paulis (identity on tau for the square lattice's I bonds); flavors
    are X/Y/Z on the honeycomb and X/Y on the square.  ``single_site``
    draws sigma Paulis (X/Y/Z honeycomb, Z only on the square).
    ``interaction`` draws sigma-sector bond parities on every bond
    (Heisenberg-style uniform X/Y/Z flavor on the honeycomb, Ising Z on
    the square).
    """
    hc = geom.kind is LatticeKind.HONEYCOMB
    if category == "bond":
        if label not in BOND_LABELS:
            raise ValueError(f"invalid bond label {label!r}")
        if hc and label == "I":
            raise ValueError("the honeycomb lattice has no I bonds")
        inst = tuple((b.site_i, b.site_j, b.label) for b in geom.bonds_by_label[label])
        flavors = ("X", "Y", "Z") if hc else ("X", "Y")
    elif category == "single_site":
        if label is not None:
            raise ValueError("single_site takes no bond label")
        inst = tuple(range(geom.n_sites))
        flavors = ("X", "Y", "Z") if hc else ("Z",)
    elif category == "interaction":
        if label is not None:
            raise ValueError("interaction takes no bond label")
        inst = tuple((b.site_i, b.site_j, b.label) for b in geom.bonds)
        flavors = ("X", "Y", "Z") if hc else ("Z",)
    else:
        raise ValueError(f"unknown category {category!r}")
    return CheckEnsemble(category, label, inst, flavors, geom.n_qubits)


def partition_cylinders(geom: LatticeGeometry) -> Partition:
    """Split the torus into four equal cylinders A, B, C, D along columns."""
    w = geom.n_columns // 4
    regions = tuple(geom.column_range_mask(q * w, w) for q in range(4))
    return Partition(regions)
