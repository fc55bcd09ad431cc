"""Dense GF(2) elimination on bit-packed rows."""
from __future__ import annotations

import numpy as np


def pack_rows(A: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into uint64 words, column c -> word c // 64."""
    A = np.asarray(A, dtype=np.uint8) & 1
    rows, cols = A.shape
    width = -(-cols // 64) * 64
    padded = np.zeros((rows, width), dtype=np.uint8)
    padded[:, :cols] = A
    # little bit order: column c sits at bit c % 64 of its word
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def unpack_rows(P: np.ndarray, cols: int) -> np.ndarray:
    bits = np.unpackbits(P.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :cols]


def rref(A: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (R, pivot columns).

    ``R`` keeps only the ``rank`` nonzero rows.
    """
    A = np.asarray(A)
    rows, cols = A.shape
    P = pack_rows(A)
    pivots: list[int] = []
    r = 0
    one = np.uint64(1)
    for c in range(cols):
        if r >= rows:
            break
        word, bit = divmod(c, 64)
        colbits = (P[:, word] >> np.uint64(bit)) & one
        cand = np.flatnonzero(colbits[r:])
        if cand.size == 0:
            continue
        p = r + int(cand[0])
        if p != r:
            P[[r, p]] = P[[p, r]]
            colbits[[r, p]] = colbits[[p, r]]
        hits = np.flatnonzero(colbits)
        hits = hits[hits != r]
        if hits.size:
            P[hits] ^= P[r]
        pivots.append(c)
        r += 1
    return unpack_rows(P[:r], cols), pivots


def rank(A: np.ndarray) -> int:
    return len(rref(A)[1])


def nullspace_basis(H: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Basis of {x : H x = 0} as rows, systematic on the free columns.

    Returns ``(G, free)`` where ``G[:, free]`` is the identity.
    """
    H = np.asarray(H, dtype=np.uint8)
    n = H.shape[1]
    R, pivots = rref(H)
    piv = set(pivots)
    free = [c for c in range(n) if c not in piv]
    G = np.zeros((len(free), n), dtype=np.uint8)
    G[np.arange(len(free)), free] = 1
    if pivots:
        # pivot bit t equals the XOR of the free bits in row t of R
        G[:, pivots] = R[:, free].T
    return G, free
