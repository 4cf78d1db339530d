"""Block-tridiagonal solver for the interleaved method-of-lines Jacobian.

Each cell contributes a dense 5x5 diagonal block; neighbouring cells couple
only through the diffusing compartments (``B``, ``O``), so off-diagonal
blocks are diagonal with two non-zeros. Block elimination without pivoting
across cells is stable here because the diffusion coupling of ``I - cJ`` is
diagonally dominant; pivoting happens inside each 5x5 block, whose inverse
is stored so the solve reduces to small mat-vecs.
"""
from __future__ import annotations

import numpy as np
from numba import njit

NB = 5  # compartments per cell
NC = 2  # diffusing compartments (first two)


@njit(cache=True)
def _invert_block(a, j, out):
    """Gauss-Jordan inverse of ``a[j]`` with partial pivoting into ``out[j]``."""
    w = np.empty((NB, 2 * NB))
    for r in range(NB):
        for c in range(NB):
            w[r, c] = a[j, r, c]
            w[r, NB + c] = 1.0 if r == c else 0.0
    for k in range(NB):
        p = k
        best = abs(w[k, k])
        for r in range(k + 1, NB):
            if abs(w[r, k]) > best:
                best = abs(w[r, k])
                p = r
        if best == 0.0:
            return False
        if p != k:
            for c in range(2 * NB):
                tmp = w[k, c]
                w[k, c] = w[p, c]
                w[p, c] = tmp
        d = w[k, k]
        for c in range(2 * NB):
            w[k, c] /= d
        for r in range(NB):
            if r != k:
                f = w[r, k]
                if f != 0.0:
                    for c in range(2 * NB):
                        w[r, c] -= f * w[k, c]
    for r in range(NB):
        for c in range(NB):
            out[j, r, c] = w[r, NB + c]
    return True


@njit(cache=True)
def block_factor(diag, lower, upper):
    """Inverses of the eliminated diagonal blocks.

    ``diag`` is ``(n, 5, 5)`` and is modified in place; ``lower[j]`` and
    ``upper[j]`` hold the two non-zeros coupling cell ``j + 1`` to ``j`` and
    ``j`` to ``j + 1``. Returns ``(inverses, ok)``.
    """
    n = diag.shape[0]
    inv = np.empty_like(diag)
    for j in range(n):
        if j > 0:
            for a in range(NC):
                for c in range(NC):
                    diag[j, a, c] -= lower[j - 1, a] * inv[j - 1, a, c] * upper[j - 1, c]
        if not _invert_block(diag, j, inv):
            return inv, False
    return inv, True


@njit(cache=True)
def block_solve(inv, lower, upper, rhs):
    n = inv.shape[0]
    y = rhs.copy()
    for j in range(1, n):
        p = NB * (j - 1)
        for a in range(NC):
            z = 0.0
            for c in range(NB):
                z += inv[j - 1, a, c] * y[p + c]
            y[NB * j + a] -= lower[j - 1, a] * z
    x = np.empty_like(y)
    tmp = np.empty(NB)
    for j in range(n - 1, -1, -1):
        p = NB * j
        for c in range(NB):
            tmp[c] = y[p + c]
        if j < n - 1:
            for a in range(NC):
                tmp[a] -= upper[j, a] * x[p + NB + a]
        for r in range(NB):
            s = 0.0
            for c in range(NB):
                s += inv[j, r, c] * tmp[c]
            x[p + r] = s
    return x


class BlockLU:
    """Factorisation of a sparse matrix with the interleaved block structure."""

    def __init__(self, matrix):
        coo = matrix.tocoo()
        coo.sum_duplicates()
        n = matrix.shape[0] // NB
        rb, cb = coo.row // NB, coo.col // NB
        ra, ca = coo.row % NB, coo.col % NB
        on = rb == cb
        below = rb == cb + 1
        above = cb == rb + 1
        off = below | above
        if np.any(~(on | off)) or np.any(ra[off] >= NC) or np.any(ra[off] != ca[off]):
            raise ValueError("matrix does not have the interleaved block-tridiagonal structure")
        diag = np.zeros((n, NB, NB))
        lower = np.zeros((n - 1, NC))
        upper = np.zeros((n - 1, NC))
        diag[rb[on], ra[on], ca[on]] = coo.data[on]
        lower[cb[below], ra[below]] = coo.data[below]
        upper[rb[above], ra[above]] = coo.data[above]
        self.lower, self.upper = lower, upper
        self.inv, ok = block_factor(diag, lower, upper)
        if not ok:
            raise np.linalg.LinAlgError("singular diagonal block")

    def solve(self, b):
        return block_solve(self.inv, self.lower, self.upper, np.ascontiguousarray(b, dtype=float))
