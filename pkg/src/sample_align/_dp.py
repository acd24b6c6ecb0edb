"""Compiled dynamic-programming kernels."""

from __future__ import annotations

import numpy as np
from numba import njit

MATCH, INS_A, INS_B = 0, 1, 2


@njit(cache=True, nogil=True)
def _best3(a, b, c):
    # ties resolve to the earlier argument: MATCH, then INS_A, then INS_B
    if a >= b and a >= c:
        return a, 0
    if b >= c:
        return b, 1
    return c, 2


@njit(cache=True, nogil=True)
def global_affine(S, scale_a, scale_b, gap_open, gap_extend):
    """Three-state global alignment over a precomputed score matrix.

    S[i, j] scores pairing column i of A with column j of B.  Consuming
    column i of A against a gap costs (gap_open + gap_extend) * scale_a[i]
    when the gap opens and gap_extend * scale_a[i] when it extends; the same
    for B with scale_b.  Returns (ops, score) with ops in forward order.
    """
    n, m = S.shape
    neg = -np.inf
    M = np.full((n + 1, m + 1), neg)
    X = np.full((n + 1, m + 1), neg)
    Y = np.full((n + 1, m + 1), neg)
    tM = np.zeros((n + 1, m + 1), dtype=np.int8)
    tX = np.zeros((n + 1, m + 1), dtype=np.int8)
    tY = np.zeros((n + 1, m + 1), dtype=np.int8)
    M[0, 0] = 0.0
    for i in range(n + 1):
        for j in range(m + 1):
            if i > 0 and j > 0:
                v, t = _best3(M[i - 1, j - 1], X[i - 1, j - 1], Y[i - 1, j - 1])
                M[i, j] = v + S[i - 1, j - 1]
                tM[i, j] = t
            if i > 0:
                op = (gap_open + gap_extend) * scale_a[i - 1]
                ex = gap_extend * scale_a[i - 1]
                v, t = _best3(M[i - 1, j] + op, X[i - 1, j] + ex, Y[i - 1, j] + op)
                X[i, j] = v
                tX[i, j] = t
            if j > 0:
                op = (gap_open + gap_extend) * scale_b[j - 1]
                ex = gap_extend * scale_b[j - 1]
                v, t = _best3(M[i, j - 1] + op, X[i, j - 1] + op, Y[i, j - 1] + ex)
                Y[i, j] = v
                tY[i, j] = t

    score, state = _best3(M[n, m], X[n, m], Y[n, m])
    ops = np.empty(n + m, dtype=np.int8)
    k = 0
    i, j = n, m
    while i > 0 or j > 0:
        ops[k] = state
        k += 1
        if state == MATCH:
            state = tM[i, j]
            i -= 1
            j -= 1
        elif state == INS_A:
            state = tX[i, j]
            i -= 1
        else:
            state = tY[i, j]
            j -= 1
    return ops[:k][::-1].copy(), score


@njit(cache=True, nogil=True)
def pair_projection_score(A, B, gap_code, S, gap_open, gap_extend, terminal):
    """Score of the pairwise alignment induced by two aligned code rows."""
    total = 0.0
    prev = -1  # 0 match, 1 gap in B (A residue), 2 gap in A (B residue)
    n = A.shape[0]
    first = -1
    last = -1
    for c in range(n):
        if A[c] != gap_code or B[c] != gap_code:
            if first < 0:
                first = c
            last = c
    if first < 0:
        return 0.0
    for c in range(first, last + 1):
        a = A[c]
        b = B[c]
        if a == gap_code and b == gap_code:
            continue
        if a != gap_code and b != gap_code:
            total += S[a, b]
            prev = 0
            continue
        state = 1 if b == gap_code else 2
        if state != prev:
            total += gap_open
        total += gap_extend
        prev = state
    if not terminal:
        total -= _terminal_gap_cost(A, B, gap_code, first, last, gap_open, gap_extend)
    return total


@njit(cache=True, nogil=True)
def _terminal_gap_cost(A, B, gap_code, first, last, gap_open, gap_extend):
    cost = 0.0
    # leading run
    c = first
    state = -1
    length = 0
    while c <= last:
        a = A[c]
        b = B[c]
        if a == gap_code and b == gap_code:
            c += 1
            continue
        if a != gap_code and b != gap_code:
            break
        s = 1 if b == gap_code else 2
        if state == -1:
            state = s
        elif s != state:
            break
        length += 1
        c += 1
    if length > 0:
        cost += gap_open + length * gap_extend
        lead_end = c
    else:
        lead_end = first
    # trailing run
    c = last
    state = -1
    length = 0
    while c >= lead_end:
        a = A[c]
        b = B[c]
        if a == gap_code and b == gap_code:
            c -= 1
            continue
        if a != gap_code and b != gap_code:
            break
        s = 1 if b == gap_code else 2
        if state == -1:
            state = s
        elif s != state:
            break
        length += 1
        c -= 1
    if length > 0:
        cost += gap_open + length * gap_extend
    return cost
