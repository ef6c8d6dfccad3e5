"""Phase-free Pauli strings and a mixed-state stabilizer tableau.

Operators are tracked modulo their overall sign: every diagnostic served by
this package (entropies, mutual information, purification traces) is
independent of measurement outcomes, so signs are deliberately not stored.
Do not use this module to collect outcome statistics.

Entropies are exact integers in bits: a group with k independent
generators on n qubits leaves n - k bits, and a region A retains
|A| - s_A bits where s_A counts the independent group elements supported
entirely inside A.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _bitops

_PAULI_FROM_BITS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS_FROM_PAULI = {v: k for k, v in _PAULI_FROM_BITS.items()}


@dataclass(frozen=True)
class PauliString:
    """Pauli operator on ``n_qubits`` qubits, sign discarded.

    ``x`` and ``z`` are arbitrary-precision bit masks; qubit q carries X
    iff bit q of ``x`` is set, Z iff bit q of ``z`` is set, Y iff both.
    """

    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n_qubits <= 0:
            raise ValueError("n_qubits must be positive")
        lim = 1 << self.n_qubits
        if not (0 <= self.x < lim and 0 <= self.z < lim):
            raise ValueError("mask exceeds n_qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a string over I/X/Y/Z, qubit 0 first."""
        x = z = 0
        for q, ch in enumerate(label):
            try:
                xb, zb = _BITS_FROM_PAULI[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z)

    @classmethod
    def from_ops(cls, n_qubits: int, ops: Iterable[tuple[int, str]]) -> "PauliString":
        """Build from (qubit, letter) pairs; repeated qubits multiply."""
        x = z = 0
        for q, ch in ops:
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range")
            xb, zb = _BITS_FROM_PAULI[ch]
            x ^= xb << q
            z ^= zb << q
        return cls(n_qubits, x, z)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def commutes(self, other: "PauliString") -> bool:
        return commutes(self, other)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def to_label(self) -> str:
        return "".join(
            _PAULI_FROM_BITS[((self.x >> q) & 1, (self.z >> q) & 1)]
            for q in range(self.n_qubits)
        )

    def __str__(self) -> str:
        return self.to_label()


def commutes(p: PauliString, q: PauliString) -> bool:
    """Symplectic commutation test: even number of single-qubit clashes."""
    if p.n_qubits != q.n_qubits:
        raise ValueError("operator lengths differ")
    return ((p.x & q.z).bit_count() + (p.z & q.x).bit_count()) % 2 == 0


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Product of two Pauli strings with the overall phase discarded."""
    if p.n_qubits != q.n_qubits:
        raise ValueError("operator lengths differ")
    return PauliString(p.n_qubits, p.x ^ q.x, p.z ^ q.z)


@dataclass(frozen=True)
class RegionMask:
    """Subset of qubits, as a bit mask over ``n_qubits``."""

    n_qubits: int
    member: int

    def __post_init__(self):
        if not 0 <= self.member < (1 << self.n_qubits):
            raise ValueError("member mask exceeds n_qubits")

    @classmethod
    def from_qubits(cls, n_qubits: int, qubits: Iterable[int]) -> "RegionMask":
        m = 0
        for q in qubits:
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range")
            m |= 1 << q
        return cls(n_qubits, m)

    @property
    def size(self) -> int:
        return self.member.bit_count()

    def complement(self) -> "RegionMask":
        return RegionMask(self.n_qubits, ((1 << self.n_qubits) - 1) ^ self.member)

    def qubits(self) -> list[int]:
        m = self.member
        out = []
        while m:
            low = m & -m
            out.append(low.bit_length() - 1)
            m ^= low
        return out

    def union(self, other: "RegionMask") -> "RegionMask":
        if self.n_qubits != other.n_qubits:
            raise ValueError("region sizes differ")
        return RegionMask(self.n_qubits, self.member | other.member)


@lru_cache(maxsize=1024)
def _internal_positions(n_qubits: int, member: int) -> np.ndarray:
    """Sorted internal positions (n-1-q) of a qubit mask's members."""
    qs = []
    m = member
    while m:
        low = m & -m
        qs.append(low.bit_length() - 1)
        m ^= low
    pos = np.sort(n_qubits - 1 - np.asarray(qs, dtype=np.int64)) if qs else np.empty(0, np.int64)
    pos.setflags(write=False)
    return pos


def gf2_rank(rows: Sequence[int] | np.ndarray) -> int:
    """Rank over GF(2) of a collection of bit vectors.

    Accepts integers (bit masks) or an array-like of 0/1 entries.  The
    input is not modified.
    """
    if isinstance(rows, np.ndarray):
        arr = np.asarray(rows)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d bit array")
        vals = [int("".join("1" if b else "0" for b in row[::-1]), 2) if row.any() else 0 for row in arr]
    else:
        vals = []
        for row in rows:
            if isinstance(row, (int, np.integer)):
                vals.append(int(row))
            else:
                bits = list(row)
                v = 0
                for i, b in enumerate(bits):
                    if b:
                        v |= 1 << i
                vals.append(v)
    pivots: dict[int, int] = {}
    rank = 0
    for v in vals:
        while v:
            low = v & -v
            other = pivots.get(low)
            if other is None:
                pivots[low] = v
                rank += 1
                break
            v ^= other
    return rank


class StabilizerGroup:
    """Mutually commuting, independent set of phase-free Pauli generators.

    The state it describes is rho = prod_i (1 + g_i)/2 up to the ignored
    signs.  Mutable, single-owner; ``measure`` updates it in place.
    """

    def __init__(self, n_qubits: int, generators: Iterable[PauliString] = ()):
        if n_qubits <= 0:
            raise ValueError("n_qubits must be positive")
        self.n_qubits = n_qubits
        self._W = (2 * n_qubits + 63) // 64
        self._rows = np.zeros((n_qubits, self._W), dtype=np.uint64)
        self._piv = np.full(n_qubits, -1, dtype=np.int64)
        self._pivmap = np.full(2 * n_qubits, -1, dtype=np.int64)
        self._k = 0
        self._idxbuf = np.empty(n_qubits, dtype=np.int64)
        self._redbuf = np.empty(self._W, dtype=np.uint64)
        for g in generators:
            self._ingest(g)

    # -- packing ---------------------------------------------------------

    def _pack(self, p: PauliString) -> np.ndarray:
        """Pack a PauliString into the internal reversed/interleaved layout."""
        if p.n_qubits != self.n_qubits:
            raise ValueError("operator length differs from group")
        n = self.n_qubits
        row = np.zeros(self._W, dtype=np.uint64)
        m = p.x
        while m:
            low = m & -m
            q = low.bit_length() - 1
            b = 2 * (n - 1 - q)
            row[b >> 6] |= np.uint64(1) << np.uint64(b & 63)
            m ^= low
        m = p.z
        while m:
            low = m & -m
            q = low.bit_length() - 1
            b = 2 * (n - 1 - q) + 1
            row[b >> 6] |= np.uint64(1) << np.uint64(b & 63)
            m ^= low
        return row

    def _unpack(self, row: np.ndarray) -> PauliString:
        n = self.n_qubits
        x = z = 0
        for w in range(self._W):
            word = int(row[w])
            while word:
                low = word & -word
                b = 64 * w + low.bit_length() - 1
                t, xz = divmod(b, 2)
                q = n - 1 - t
                if xz == 0:
                    x |= 1 << q
                else:
                    z |= 1 << q
                word ^= low
        return PauliString(n, x, z)

    def _ingest(self, g: PauliString):
        """Constructor path: insist the generator commutes and is new."""
        if g.is_identity:
            raise ValueError("identity is not a valid generator")
        row = self._pack(g)
        sw = _bitops.swap_xz(row)
        if self._k:
            acc = np.bitwise_xor.reduce(self._rows[: self._k] & sw[None, :], axis=1)
            if np.any(np.bitwise_count(acc) & np.uint64(1)):
                raise ValueError("generators must mutually commute")
        np.copyto(self._redbuf, row)
        k2 = _bitops.insert_reduced(self._rows, self._piv, self._pivmap, self._k, self._redbuf, 0)
        if k2 == self._k:
            raise ValueError("generators must be independent")
        self._k = k2

    @classmethod
    def product_state(cls, n_qubits: int, letters: Sequence[str] | str = "Z") -> "StabilizerGroup":
        """Pure product state with qubit q stabilized by its given Pauli.

        ``letters`` is one letter for all qubits or one per qubit.
        """
        if isinstance(letters, str) and len(letters) == 1:
            letters = letters * n_qubits
        if len(letters) != n_qubits:
            raise ValueError("need one stabilizer letter per qubit")
        g = cls(n_qubits)
        one = np.uint64(1)
        for q, letter in enumerate(letters):
            if letter not in ("X", "Y", "Z"):
                raise ValueError(f"invalid Pauli letter {letter!r}")
            t = n_qubits - 1 - q
            if letter in ("X", "Y"):
                b = 2 * t
                g._rows[q, b >> 6] |= one << np.uint64(b & 63)
            if letter in ("Z", "Y"):
                b = 2 * t + 1
                g._rows[q, b >> 6] |= one << np.uint64(b & 63)
            piv = 2 * t if letter in ("X", "Y") else 2 * t + 1
            g._piv[q] = piv
            g._pivmap[piv] = q
        g._k = n_qubits
        return g

    # -- basic views ------------------------------------------------------

    @property
    def k(self) -> int:
        return self._k

    @property
    def generators(self) -> list[PauliString]:
        return [self._unpack(self._rows[r]) for r in range(self._k)]

    def copy(self) -> "StabilizerGroup":
        g = StabilizerGroup(self.n_qubits)
        g._rows = self._rows.copy()
        g._piv = self._piv.copy()
        g._pivmap = self._pivmap.copy()
        g._k = self._k
        return g

    def to_strings(self) -> list[str]:
        """Debug dump: one generator per line over {I, X, Y, Z}."""
        return [g.to_label() for g in self.generators]

    def row_space_key(self) -> frozenset[int]:
        """Canonical fingerprint of the generated group (for tests)."""
        vals = [(g.x << self.n_qubits) | g.z for g in self.generators]
        basis: dict[int, int] = {}
        for v in vals:
            while v:
                low = v & -v
                if low in basis:
                    v ^= basis[low]
                else:
                    basis[low] = v
                    break
        # back-substitute, largest pivot first, for the unique reduced form
        for p in sorted(basis, reverse=True):
            for p2 in basis:
                if p2 != p and basis[p2] & p:
                    basis[p2] ^= basis[p]
        return frozenset(basis.values())

    # -- updates ----------------------------------------------------------

    def measure(self, m: PauliString) -> "StabilizerGroup":
        """Projectively measure a Pauli operator; outcome is not tracked.

        If m anticommutes with part of the group, one anticommuting
        generator is replaced by m and the rest absorb it; a commuting,
        independent m is appended; a contained m leaves the group alone.
        """
        if m.is_identity:
            raise ValueError("cannot measure the identity")
        row = self._pack(m)
        sw = _bitops.swap_xz(row)
        self._k, _ = _bitops.measure_packed(
            self._rows, self._piv, self._pivmap, self._k, row, sw, self._idxbuf, self._redbuf
        )
        return self

    def contains(self, m: PauliString) -> bool:
        """GF(2) membership of m in the generated group (signs ignored)."""
        np.copyto(self._redbuf, self._pack(m))
        return bool(_bitops.reduces_to_zero(self._rows, self._pivmap, self._redbuf))

    # -- entropies ---------------------------------------------------------

    def entropy_total(self) -> int:
        """Total entropy in bits: n_qubits - k."""
        return self.n_qubits - self._k

    def _prefix_rank(self, bitcut: int) -> int:
        """Rank of rows restricted to internal bits [0, bitcut)."""
        return int(np.count_nonzero(self._piv[: self._k] < bitcut))

    def _rank_on_positions(self, positions: np.ndarray) -> int:
        """Rank of rows restricted to the given internal qubit positions.

        Exploits the maintained pivot index: a leading run of positions
        forms a bit prefix whose rank is a pivot count; only the remainder
        needs elimination, and only over rows whose pivot lies past the
        prefix (all earlier rows vanish there).
        """
        npos = len(positions)
        if npos == 0:
            return 0
        run = 0
        while run < npos and positions[run] == run:
            run += 1
        bitcut = 2 * run
        a1 = self._prefix_rank(bitcut)
        if run == npos:
            return a1
        sel = np.nonzero(self._piv[: self._k] >= bitcut)[0]
        if len(sel) == 0:
            return a1
        sub = self._rows[sel].copy()
        rest = positions[run:]
        bits = np.empty(2 * len(rest), dtype=np.int64)
        bits[0::2] = 2 * rest
        bits[1::2] = 2 * rest + 1
        cuts = np.array([len(bits)], dtype=np.int64)
        out = np.empty(1, dtype=np.int64)
        _bitops.elim_ranks(sub, len(sel), bits, cuts, out, bitcut >> 6)
        return a1 + int(out[0])

    def _region_positions(self, region: RegionMask) -> np.ndarray:
        return _internal_positions(self.n_qubits, region.member)

    def entropy_region(self, region: RegionMask) -> int:
        """Entropy of a qubit subset in bits: |A| - s_A.

        s_A = k - rank(rows restricted outside A) counts the independent
        group elements supported entirely on A.
        """
        if region.n_qubits != self.n_qubits:
            raise ValueError("region size differs from group")
        comp = self._region_positions(region.complement())
        rank_outside = self._rank_on_positions(comp)
        s_a = self._k - rank_outside
        return region.size - s_a

    def region_entropies(self, regions: Sequence[RegionMask]) -> list[int]:
        return [self.entropy_region(r) for r in regions]

    # -- consistency (test support) ----------------------------------------

    def validate(self):
        """Check the type invariants; O(k^2), intended for tests."""
        gens = self.generators
        assert 0 <= self._k <= self.n_qubits
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                assert commutes(gens[i], gens[j]), "generators must commute"
        masks = [(g.x << self.n_qubits) | g.z for g in gens]
        assert gf2_rank(masks) == self._k, "generators must be independent"
        pivs = self._piv[: self._k]
        assert len(set(pivs.tolist())) == self._k, "pivots must be unique"
