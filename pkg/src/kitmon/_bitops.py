"""Bit-packed GF(2) kernels for the stabilizer tableau.

Rows are uint64 word vectors holding 2*n_qubits bits.  Qubit q occupies the
bit pair (2t, 2t+1) = (x, z) at internal position t = n_qubits - 1 - q; the
reversal makes low-index cylinder regions land at the *end* of the bit
order, so ranks restricted to their complements fall out of the maintained
pivot index for free (see StabilizerGroup.entropy_region).

The tableau invariant maintained by every kernel here: the lowest set bit
("pivot") of each active row is unique across rows.  That alone gives
linear independence, O(rows*words) membership reduction, and prefix-rank
counting without ever running a full Gaussian elimination in the
measurement loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_U0 = uint64(0)
_U1 = uint64(1)

# Even bit positions (the x half of each (x, z) pair).
EVEN_BITS = np.uint64(0x5555555555555555)


def swap_xz(row: np.ndarray) -> np.ndarray:
    """Swap the x/z bit of every qubit pair (vectorised, returns a copy)."""
    return ((row & EVEN_BITS) << np.uint64(1)) | ((row >> np.uint64(1)) & EVEN_BITS)


@njit(cache=True, inline="always")
def _ctz(x):
    """Index of the lowest set bit of a nonzero uint64."""
    n = 0
    if x & uint64(0xFFFFFFFF) == _U0:
        n += 32
        x >>= uint64(32)
    if x & uint64(0xFFFF) == _U0:
        n += 16
        x >>= uint64(16)
    if x & uint64(0xFF) == _U0:
        n += 8
        x >>= uint64(8)
    if x & uint64(0xF) == _U0:
        n += 4
        x >>= uint64(4)
    if x & uint64(0x3) == _U0:
        n += 2
        x >>= uint64(2)
    if x & uint64(0x1) == _U0:
        n += 1
    return n


@njit(cache=True, inline="always")
def _parity(x):
    x ^= x >> uint64(32)
    x ^= x >> uint64(16)
    x ^= x >> uint64(8)
    x ^= x >> uint64(4)
    x ^= x >> uint64(2)
    x ^= x >> uint64(1)
    return x & _U1


@njit(cache=True)
def insert_reduced(rows, piv, pivmap, k, red, wstart):
    """Reduce ``red`` against the pivot index and append the remainder.

    ``red`` is consumed (modified in place).  Returns the new row count:
    unchanged if ``red`` reduced to zero (already in the row space),
    k + 1 if the remainder was appended as a new row.
    """
    W = rows.shape[1]
    w0 = wstart
    while True:
        p = -1
        for w in range(w0, W):
            if red[w] != _U0:
                w0 = w
                p = (w << 6) + _ctz(red[w])
                break
        if p < 0:
            return k
        j = pivmap[p]
        if j < 0:
            for w in range(w0, W):
                rows[k, w] = red[w]
            for w in range(wstart, w0):
                rows[k, w] = _U0
            piv[k] = p
            pivmap[p] = k
            return k + 1
        for w in range(w0, W):
            red[w] ^= rows[j, w]


@njit(cache=True)
def reduces_to_zero(rows, pivmap, red):
    """True iff ``red`` lies in the row space.  ``red`` is consumed."""
    W = rows.shape[1]
    w0 = 0
    while True:
        p = -1
        for w in range(w0, W):
            if red[w] != _U0:
                w0 = w
                p = (w << 6) + _ctz(red[w])
                break
        if p < 0:
            return True
        j = pivmap[p]
        if j < 0:
            return False
        for w in range(w0, W):
            red[w] ^= rows[j, w]


@njit(cache=True)
def measure_packed(rows, piv, pivmap, k, mrow, mswap, idxbuf, redbuf):
    """Project the state onto an eigenspace of the Pauli row ``mrow``.

    Returns (new_k, branch) with branch 0 = anticommuting replacement,
    1 = independent commuting operator appended, 2 = already contained.
    """
    W = rows.shape[1]
    # words where the measured operator has support
    wlo = W
    whi = 0
    for w in range(W):
        if mswap[w] != _U0:
            if w < wlo:
                wlo = w
            whi = w + 1
    na = 0
    for r in range(k):
        acc = _U0
        for w in range(wlo, whi):
            acc ^= rows[r, w] & mswap[w]
        if _parity(acc):
            idxbuf[na] = r
            na += 1
    if na > 0:
        # Replace the anticommuting row with the largest pivot: XORing it
        # into the others leaves their (smaller) pivots untouched, so the
        # pivot index stays valid without any re-echelonisation.
        hs = 0
        for t in range(1, na):
            if piv[idxbuf[t]] > piv[idxbuf[hs]]:
                hs = t
        h = idxbuf[hs]
        for t in range(na):
            r = idxbuf[t]
            if r != h:
                for w in range(W):
                    rows[r, w] ^= rows[h, w]
        pivmap[piv[h]] = -1
        last = k - 1
        if h != last:
            for w in range(W):
                rows[h, w] = rows[last, w]
            piv[h] = piv[last]
            pivmap[piv[h]] = h
        for w in range(W):
            redbuf[w] = mrow[w]
        k2 = insert_reduced(rows, piv, pivmap, last, redbuf, 0)
        return k2, 0
    for w in range(W):
        redbuf[w] = mrow[w]
    k2 = insert_reduced(rows, piv, pivmap, k, redbuf, 0)
    if k2 == k:
        return k, 2
    return k2, 1


@njit(cache=True)
def run_measure_batch(
    rows,
    piv,
    pivmap,
    k,
    op_rows,
    op_swaps,
    cat_cum,
    cat_base,
    cat_count,
    u_cat,
    u_op,
    cat_hits,
    idxbuf,
    redbuf,
):
    """Apply a batch of sampled projective measurements.

    For each draw: pick the category from the cumulative probabilities,
    then a (instance, flavor) pair uniformly inside the category's slice
    of the operator table.  Returns the new generator count.
    """
    M = u_cat.shape[0]
    ncat = cat_cum.shape[0]
    for i in range(M):
        u = u_cat[i]
        c = 0
        while c < ncat - 1 and u >= cat_cum[c]:
            c += 1
        cat_hits[c] += 1
        cnt = cat_count[c]
        j = int(u_op[i] * cnt)
        if j >= cnt:
            j = cnt - 1
        oi = cat_base[c] + j
        k, _ = measure_packed(rows, piv, pivmap, k, op_rows[oi], op_swaps[oi], idxbuf, redbuf)
    return k


@njit(cache=True)
def all_rows_contained(rows, pivmap, queries, redbuf):
    """True iff every query row lies in the row space (early exit)."""
    W = queries.shape[1]
    for qi in range(queries.shape[0]):
        for w in range(W):
            redbuf[w] = queries[qi, w]
        if not reduces_to_zero(rows, pivmap, redbuf):
            return False
    return True


@njit(cache=True)
def elim_ranks(mat, nrows, bits, cuts, out, wstart):
    """GF(2) ranks of ``mat`` restricted to growing prefixes of ``bits``.

    Eliminates columns in the order given by ``bits`` (absolute bit
    positions); ``out[i]`` receives the rank after the first ``cuts[i]``
    columns (cuts must be non-decreasing).  ``mat`` is destroyed.
    ``wstart`` lets callers skip words known to be zero in every row.
    """
    W = mat.shape[1]
    nb = bits.shape[0]
    ncuts = cuts.shape[0]
    rank = 0
    ci = 0
    while ci < ncuts and cuts[ci] == 0:
        out[ci] = 0
        ci += 1
    for bi in range(nb):
        b = bits[bi]
        w = b >> 6
        msk = _U1 << uint64(b & 63)
        sel = -1
        for r in range(rank, nrows):
            if mat[r, w] & msk:
                sel = r
                break
        if sel >= 0:
            if sel != rank:
                for ww in range(wstart, W):
                    tmp = mat[rank, ww]
                    mat[rank, ww] = mat[sel, ww]
                    mat[sel, ww] = tmp
            for r in range(rank + 1, nrows):
                if mat[r, w] & msk:
                    for ww in range(wstart, W):
                        mat[r, ww] ^= mat[rank, ww]
            rank += 1
        while ci < ncuts and cuts[ci] == bi + 1:
            out[ci] = rank
            ci += 1
    while ci < ncuts:
        out[ci] = rank
        ci += 1
