"""Compiled branch and bound for maximum-weight cliques.

Vertex sets are bitsets stored as ``uint64`` words.  Callers index vertices by
decreasing weight; the bound at every node comes from a weight-splitting
greedy colouring of the candidate set.
"""
from __future__ import annotations

import numpy as np
from numba import njit

ONE = np.uint64(1)


def pack_rows(adj: np.ndarray) -> np.ndarray:
    """Boolean adjacency rows as ``(n, words)`` uint64 bitsets (bit ``j`` = column ``j``)."""
    rows, n = adj.shape
    words = max(1, (n + 63) // 64)
    padded = np.zeros((rows, words * 64), dtype=bool)
    padded[:, :n] = adj
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").astype(np.uint64).reshape(rows, words)


def pack_set(vertices, n: int) -> np.ndarray:
    row = np.zeros((1, n), dtype=bool)
    row[0, list(vertices)] = True
    return pack_rows(row)[0]


@njit(cache=True)
def _lowbit(x):
    t = x & (~x + ONE)
    return int(np.log2(np.float64(t)))


@njit(cache=True)
def _colour(nb, w, P, verts, bnds, cls, cw):
    """Weight-splitting greedy colouring of the candidate set ``P``.

    Classes are independent sets with weights ``cw``; every vertex is covered
    by classes of total weight >= its own.  A class heavier than the residual
    of a joining vertex is split in two.  Vertices come back sorted by the
    last class covering them, ``bnds`` holding the cumulative class weight up
    to that class: a clique inside such a prefix weighs at most that bound.
    """
    W = P.shape[0]
    nc = 0
    cnt = 0
    n = w.shape[0]
    last = np.empty(n, np.int64)
    for i in range(W):
        x = P[i]
        while x != 0:
            b = _lowbit(x)
            x &= ~(ONE << np.uint64(b))
            v = i * 64 + b
            r = w[v]
            k = 0
            while k < nc and r > 0.0:
                free = True
                for j in range(W):
                    if cls[k, j] & nb[v, j]:
                        free = False
                        break
                if free:
                    if cw[k] > r:
                        # class k keeps weight r and gains v; a copy without v follows it
                        for q in range(nc, k + 1, -1):
                            cw[q] = cw[q - 1]
                            for j in range(W):
                                cls[q, j] = cls[q - 1, j]
                        for j in range(W):
                            cls[k + 1, j] = cls[k, j]
                        cw[k + 1] = cw[k] - r
                        cw[k] = r
                        nc += 1
                        for q in range(cnt):
                            if last[verts[q]] >= k:
                                last[verts[q]] += 1
                    cls[k, v >> 6] |= ONE << np.uint64(v & 63)
                    r -= cw[k]
                    last[v] = k
                k += 1
            if r > 0.0:
                for j in range(W):
                    cls[nc, j] = 0
                cls[nc, v >> 6] = ONE << np.uint64(v & 63)
                cw[nc] = r
                last[v] = nc
                nc += 1
            verts[cnt] = v
            cnt += 1
    # stable counting sort by last covering class
    counts = np.zeros(nc + 1, np.int64)
    for q in range(cnt):
        counts[last[verts[q]] + 1] += 1
    for k in range(nc):
        counts[k + 1] += counts[k]
    tmp = verts[:cnt].copy()
    for q in range(cnt):
        v = tmp[q]
        verts[counts[last[v]]] = v
        counts[last[v]] += 1
    acc = 0.0
    cum = np.empty(nc)
    for k in range(nc):
        acc += cw[k]
        cum[k] = acc
    for q in range(cnt):
        bnds[q] = cum[last[verts[q]]]
    return cnt


@njit(cache=True)
def search(nb, w, P0, cw0, floor, stop_first, eps):
    """Heaviest clique extending a fixed partial clique of weight ``cw0``.

    Candidates are ``P0``.  Only cliques heavier than ``floor + eps`` count;
    with ``stop_first`` the first such clique is returned.  Returns
    ``(weight, vertices, found)``; ``vertices`` excludes the fixed part.
    """
    n = w.shape[0]
    W = nb.shape[1]
    depth = n + 1
    Ps = np.zeros((depth, W), np.uint64)
    verts = np.empty((depth, n), np.int64)
    bnds = np.empty((depth, n))
    pos = np.zeros(depth, np.int64)
    cws = np.zeros(depth)
    cur = np.empty(depth, np.int64)
    cls = np.empty((2 * n + 1, W), np.uint64)
    ccw = np.empty(2 * n + 1)
    best = floor
    best_clique = np.empty(n, np.int64)
    best_len = -1
    for k in range(W):
        Ps[0, k] = P0[k]
    cws[0] = cw0
    if cw0 > best + eps:
        best = cw0
        best_len = 0
        if stop_first:
            return best, best_clique[:0], True
    pos[0] = _colour(nb, w, Ps[0], verts[0], bnds[0], cls, ccw) - 1
    d = 0
    while d >= 0:
        j = pos[d]
        if j < 0 or cws[d] + bnds[d, j] <= best + eps:
            d -= 1
            continue
        v = verts[d, j]
        pos[d] = j - 1
        Ps[d, v >> 6] &= ~(ONE << np.uint64(v & 63))
        cur[d] = v
        nw = cws[d] + w[v]
        if nw > best + eps:
            best = nw
            for k in range(d + 1):
                best_clique[k] = cur[k]
            best_len = d + 1
            if stop_first:
                return best, best_clique[:best_len], True
        nonempty = False
        for k in range(W):
            x = Ps[d, k] & nb[v, k]
            Ps[d + 1, k] = x
            if x != 0:
                nonempty = True
        if nonempty:
            cws[d + 1] = nw
            pos[d + 1] = _colour(nb, w, Ps[d + 1], verts[d + 1], bnds[d + 1], cls, ccw) - 1
            d += 1
    if best_len < 0:
        return best, best_clique[:0], False
    return best, best_clique[:best_len], True


# -- OR squares ------------------------------------------------------------
#
# A clique of G*G is a family of cliques K_i of G, one per row i, such that
# rows i != i' that are not adjacent in G carry disjoint cliques whose union
# is again a clique.  The search picks K_i row by row.  For a group of
# pairwise non-adjacent rows, sorted by weight, Abel summation gives
# sum_i w_i w(K_i) <= sum_k w_k (T[U_k] - T[U_{k-1}]) with U_k the union of
# the first k candidate sets and T the clique-weight table of G.  Columns
# obey the same rule, so the bound is the smaller of the two.

@njit(cache=True)
def clique_table(adjmask, w):
    """``T[S]`` = max clique weight inside vertex subset ``S`` (bitmask)."""
    m = w.shape[0]
    T = np.zeros(1 << m)
    hb = 0
    for S in range(1, 1 << m):
        if S >= (1 << (hb + 1)):
            hb += 1
        rest = S & ~(1 << hb)
        a = T[rest]
        b = w[hb] + T[S & adjmask[hb]]
        T[S] = a if a > b else b
    return T


@njit(cache=True)
def _group_bound(R, order, adjmask, w, T):
    m = R.shape[0]
    grows = np.zeros(m, np.int64)
    gunion = np.zeros(m, np.int64)
    ng = 0
    total = 0.0
    for q in range(m):
        r = order[q]
        if R[r] == 0:
            continue
        g = 0
        while g < ng and (grows[g] & adjmask[r]) != 0:
            g += 1
        if g == ng:
            grows[g] = 0
            gunion[g] = 0
            ng += 1
        u = gunion[g] | R[r]
        total += w[r] * (T[u] - T[gunion[g]])
        gunion[g] = u
        grows[g] |= np.int64(1) << r
    return total


@njit(cache=True)
def _square_bound(R, order, adjmask, w, T):
    m = R.shape[0]
    C = np.zeros(m, np.int64)
    for i in range(m):
        x = R[i]
        for j in range(m):
            if (x >> j) & 1:
                C[j] |= np.int64(1) << i
    a = _group_bound(R, order, adjmask, w, T)
    b = _group_bound(C, order, adjmask, w, T)
    return a if a < b else b


@njit(cache=True)
def square_search(adjmask, w, T, cl_mask, cl_w, cl_cn, floor, stop_first, eps):
    """Heaviest clique of the OR square with product weights ``w (x) w``.

    ``cl_*`` list the nonempty cliques of G (mask, weight, common
    neighbourhood), heaviest first.  Returns ``(weight, choice, found)`` where
    ``choice[i]`` indexes the clique picked for row ``i`` (-1 for none).
    """
    m = w.shape[0]
    ncl = cl_mask.shape[0]
    order = np.argsort(-w, kind="mergesort")
    full = (np.int64(1) << m) - 1
    Rs = np.zeros((m + 1, m), np.int64)
    cws = np.zeros(m + 1)
    ci = np.zeros(m + 1, np.int64)
    chosen = np.full(m, -1, np.int64)
    best = floor
    best_choice = np.full(m, -1, np.int64)
    found = False
    for i in range(m):
        Rs[0, i] = full
    lvl = 0
    ci[0] = 0
    if cws[0] + _square_bound(Rs[0], order, adjmask, w, T) <= best + eps:
        return best, best_choice, found
    while lvl >= 0:
        if lvl == m:
            lvl -= 1
            continue
        r = order[lvl]
        Rr = Rs[lvl, r]
        k = ci[lvl]
        # next admissible clique for row r (index ncl stands for the empty choice)
        while k < ncl and (cl_mask[k] & ~Rr) != 0:
            k += 1
        if k > ncl:
            chosen[r] = -1
            lvl -= 1
            continue
        ci[lvl] = k + 1
        for i in range(m):
            Rs[lvl + 1, i] = Rs[lvl, i]
        Rs[lvl + 1, r] = 0
        if k < ncl:
            cn = cl_cn[k]
            for i in range(m):
                if i != r and ((adjmask[r] >> i) & 1) == 0:
                    Rs[lvl + 1, i] &= cn
            nw = cws[lvl] + w[r] * cl_w[k]
            chosen[r] = k
        else:
            nw = cws[lvl]
            chosen[r] = -1
        if nw > best + eps:
            best = nw
            found = True
            for i in range(m):
                best_choice[i] = -1
            for q in range(lvl + 1):
                best_choice[order[q]] = chosen[order[q]]
            if stop_first:
                return best, best_choice, found
        if lvl + 1 < m and nw + _square_bound(Rs[lvl + 1], order, adjmask, w, T) > best + eps:
            cws[lvl + 1] = nw
            ci[lvl + 1] = 0
            lvl += 1
        elif k == ncl:
            chosen[r] = -1
            lvl -= 1
    return best, best_choice, found
