"""Exact maximum-weight matching on dense graphs.

Array-based primal-dual blossom algorithm (Galil's O(n^3) formulation),
written against flat numpy state so it can be compiled with numba. The
public entry points are :func:`max_weight_matching` and
:func:`min_weight_perfect_matching`; both release the solution as a
``mate`` array with ``mate[v]`` the partner of ``v`` or ``-1``.

The implementation follows the standard stage/substage structure: each
stage grows alternating trees from unmatched vertices, forming and
expanding blossoms as needed, and ends with an augmentation; dual
variables are adjusted between substages. Dual variables are stored
pre-multiplied by two so edge slacks are ``u[v] + u[w] - 2*w(v,w)``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_FREE = 0
_S = 1
_T = 2


@njit(cache=True)
def _solve(wmat, adj):
    """Maximum-weight matching of the graph given by a dense weight matrix.

    wmat must be symmetric with non-negative finite entries; adj masks
    which off-diagonal pairs are edges. Returns the mate array.
    """
    n = wmat.shape[0]
    mate = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return mate
    nb = 2 * n  # ids 0..n-1 are vertices, n..2n-1 are blossom slots
    maxc = n + 1

    maxweight = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j] != 0 and wmat[i, j] > maxweight:
                maxweight = wmat[i, j]

    # label[x]: FREE/S/T for top-level blossoms; also per-vertex marks for
    # T-blossom interiors. Bit 4 is a temporary breadcrumb.
    label = np.zeros(nb, dtype=np.int64)
    # labeledge_*[x] = edge (v, w) through which x got its label, w inside x.
    labeledge_v = np.full(nb, -1, dtype=np.int64)
    labeledge_w = np.full(nb, -1, dtype=np.int64)
    inblossom = np.arange(n).astype(np.int64)
    parent = np.full(nb, -1, dtype=np.int64)
    # bbase[x] = base vertex; -1 marks an unallocated blossom slot.
    bbase = np.full(nb, -1, dtype=np.int64)
    for v in range(n):
        bbase[v] = v
    bestedge_v = np.full(nb, -1, dtype=np.int64)
    bestedge_w = np.full(nb, -1, dtype=np.int64)
    dualvar = np.full(n, maxweight, dtype=np.float64)
    blossomdual = np.zeros(nb, dtype=np.float64)
    allowed = np.zeros((n, n), dtype=np.uint8)

    # Non-trivial blossom b uses row b - n: ordered children around the odd
    # cycle starting at the base, and the connecting edge (cedge_v, cedge_w)
    # from childs[k] to childs[k+1].
    childs = np.full((n, maxc), -1, dtype=np.int64)
    nchilds = np.zeros(n, dtype=np.int64)
    cedge_v = np.full((n, maxc), -1, dtype=np.int64)
    cedge_w = np.full((n, maxc), -1, dtype=np.int64)

    free_slots = np.empty(n, dtype=np.int64)
    for k in range(n):
        free_slots[k] = nb - 1 - k
    # state[0] = queue length, state[1] = number of free blossom slots
    state = np.zeros(2, dtype=np.int64)
    state[1] = n

    queue = np.empty(8 * n + 16, dtype=np.int64)
    # leafbuf holds the most recent collect_leaves result; callers must
    # finish with it before anything below triggers another collection.
    leafbuf = np.empty(n, dtype=np.int64)
    stackbuf = np.empty(nb, dtype=np.int64)
    pathbuf = np.empty(nb, dtype=np.int64)
    rot_c = np.empty(maxc, dtype=np.int64)
    rot_v = np.empty(maxc, dtype=np.int64)
    rot_w = np.empty(maxc, dtype=np.int64)
    asm_c = np.empty(maxc, dtype=np.int64)
    asm_v = np.empty(maxc, dtype=np.int64)
    asm_w = np.empty(maxc, dtype=np.int64)
    bet_v = np.full(nb, -1, dtype=np.int64)
    bet_w = np.full(nb, -1, dtype=np.int64)
    aug_b = np.empty(n + 1, dtype=np.int64)
    aug_v = np.empty(n + 1, dtype=np.int64)
    exp_stack = np.empty(n + 1, dtype=np.int64)

    def slack(v, w):
        return dualvar[v] + dualvar[w] - 2.0 * wmat[v, w]

    def collect_leaves(b):
        if b < n:
            leafbuf[0] = b
            return 1
        cnt = 0
        sp = 0
        stackbuf[sp] = b
        sp += 1
        while sp > 0:
            sp -= 1
            t = stackbuf[sp]
            if t < n:
                leafbuf[cnt] = t
                cnt += 1
            else:
                s = t - n
                for k in range(nchilds[s]):
                    stackbuf[sp] = childs[s, k]
                    sp += 1
        return cnt

    def queue_push(v):
        if state[0] >= queue.shape[0]:
            raise RuntimeError("matching queue overflow")
        queue[state[0]] = v
        state[0] += 1

    def assign_label(w, t, v):
        # Label the top-level blossom of w; an S label queues its leaves,
        # a T label immediately S-labels the mate of its base.
        b = inblossom[w]
        label[w] = t
        label[b] = t
        if v >= 0:
            labeledge_v[w] = v
            labeledge_w[w] = w
            labeledge_v[b] = v
            labeledge_w[b] = w
        else:
            labeledge_v[w] = -1
            labeledge_w[w] = -1
            labeledge_v[b] = -1
            labeledge_w[b] = -1
        bestedge_v[w] = -1
        bestedge_v[b] = -1
        if t == _S:
            cnt = collect_leaves(b)
            for k in range(cnt):
                queue_push(leafbuf[k])
        elif t == _T:
            bs = bbase[b]
            m = mate[bs]
            b2 = inblossom[m]
            label[m] = _S
            label[b2] = _S
            labeledge_v[m] = bs
            labeledge_w[m] = m
            labeledge_v[b2] = bs
            labeledge_w[b2] = m
            bestedge_v[m] = -1
            bestedge_v[b2] = -1
            cnt = collect_leaves(b2)
            for k in range(cnt):
                queue_push(leafbuf[k])

    def scan_blossom(v, w):
        # Trace back from both endpoints of an S-S edge; meeting point is
        # the base of a new blossom, no meeting means an augmenting path.
        plen = 0
        bse = -1
        while v != -1:
            b = inblossom[v]
            if label[b] & 4:
                bse = bbase[b]
                break
            pathbuf[plen] = b
            plen += 1
            label[b] = 5
            if labeledge_v[b] == -1:
                v = -1
            else:
                v2 = labeledge_v[b]
                b2 = inblossom[v2]
                v = labeledge_v[b2]
            if w != -1:
                tmp = v
                v = w
                w = tmp
        for k in range(plen):
            label[pathbuf[k]] = _S
        return bse

    def add_blossom(bse, v, w):
        # Merge the blossoms along the alternating cycle through edge (v, w)
        # with base vertex bse into a fresh S-blossom.
        bb = inblossom[bse]
        bv = inblossom[v]
        bw = inblossom[w]
        state[1] -= 1
        b = free_slots[state[1]]
        s = b - n
        bbase[b] = bse
        parent[b] = -1
        parent[bb] = b

        pc = 0
        ec = 0
        asm_v[ec] = v
        asm_w[ec] = w
        ec += 1
        while bv != bb:
            parent[bv] = b
            asm_c[pc] = bv
            pc += 1
            asm_v[ec] = labeledge_v[bv]
            asm_w[ec] = labeledge_w[bv]
            ec += 1
            v2 = labeledge_v[bv]
            bv = inblossom[v2]
        asm_c[pc] = bb
        pc += 1
        for k in range(pc // 2):
            tmp = asm_c[k]
            asm_c[k] = asm_c[pc - 1 - k]
            asm_c[pc - 1 - k] = tmp
        for k in range(ec // 2):
            tmp = asm_v[k]
            asm_v[k] = asm_v[ec - 1 - k]
            asm_v[ec - 1 - k] = tmp
            tmp = asm_w[k]
            asm_w[k] = asm_w[ec - 1 - k]
            asm_w[ec - 1 - k] = tmp
        while bw != bb:
            parent[bw] = b
            asm_c[pc] = bw
            pc += 1
            asm_v[ec] = labeledge_w[bw]
            asm_w[ec] = labeledge_v[bw]
            ec += 1
            w2 = labeledge_v[bw]
            bw = inblossom[w2]

        nchilds[s] = pc
        for k in range(pc):
            childs[s, k] = asm_c[k]
            cedge_v[s, k] = asm_v[k]
            cedge_w[s, k] = asm_w[k]

        label[b] = _S
        labeledge_v[b] = labeledge_v[bb]
        labeledge_w[b] = labeledge_w[bb]
        blossomdual[b] = 0.0

        cnt = collect_leaves(b)
        for k in range(cnt):
            lv = leafbuf[k]
            if label[inblossom[lv]] == _T:
                queue_push(lv)
            inblossom[lv] = b

        # Recompute least-slack edges from this blossom to other S-blossoms.
        for k in range(nb):
            bet_v[k] = -1
        for k in range(cnt):
            i = leafbuf[k]
            for j in range(n):
                if j == i or adj[i, j] == 0:
                    continue
                bj = inblossom[j]
                if bj != b and label[bj] == _S:
                    if bet_v[bj] == -1 or slack(i, j) < slack(bet_v[bj], bet_w[bj]):
                        bet_v[bj] = i
                        bet_w[bj] = j
        for k in range(pc):
            bestedge_v[childs[s, k]] = -1
        be_v = -1
        be_w = -1
        be_s = 0.0
        for k in range(nb):
            if bet_v[k] != -1:
                d = slack(bet_v[k], bet_w[k])
                if be_v == -1 or d < be_s:
                    be_v = bet_v[k]
                    be_w = bet_w[k]
                    be_s = d
        bestedge_v[b] = be_v
        bestedge_w[b] = be_w

    def release_slot(b):
        s = b - n
        label[b] = _FREE
        labeledge_v[b] = -1
        labeledge_w[b] = -1
        bestedge_v[b] = -1
        parent[b] = -1
        bbase[b] = -1
        blossomdual[b] = 0.0
        nchilds[s] = 0
        free_slots[state[1]] = b
        state[1] += 1

    def expand_endstage(b0):
        # Dismantle b0 and, recursively, any zero-dual non-trivial children.
        sp = 0
        exp_stack[sp] = b0
        sp += 1
        while sp > 0:
            sp -= 1
            b = exp_stack[sp]
            s = b - n
            for k in range(nchilds[s]):
                c = childs[s, k]
                parent[c] = -1
                if c < n:
                    inblossom[c] = c
                elif blossomdual[c] == 0.0:
                    exp_stack[sp] = c
                    sp += 1
                else:
                    cnt = collect_leaves(c)
                    for q in range(cnt):
                        inblossom[leafbuf[q]] = c
            release_slot(b)

    def expand_instage(b):
        # Expand a T-blossom whose dual reached zero, relabeling the chain
        # of sub-blossoms between the entry edge and the base.
        s = b - n
        m = nchilds[s]
        for k in range(m):
            c = childs[s, k]
            parent[c] = -1
            if c < n:
                inblossom[c] = c
            else:
                cnt = collect_leaves(c)
                for q in range(cnt):
                    inblossom[leafbuf[q]] = c
        if label[b] == _T:
            entrychild = inblossom[labeledge_w[b]]
            j = 0
            for k in range(m):
                if childs[s, k] == entrychild:
                    j = k
                    break
            if j & 1:
                j -= m
                jstep = 1
            else:
                jstep = -1
            v = labeledge_v[b]
            w = labeledge_w[b]
            while j != 0:
                if jstep == 1:
                    p = cedge_v[s, j % m]
                    q = cedge_w[s, j % m]
                else:
                    q = cedge_v[s, (j - 1) % m]
                    p = cedge_w[s, (j - 1) % m]
                label[w] = _FREE
                label[q] = _FREE
                assign_label(w, _T, v)
                allowed[p, q] = 1
                allowed[q, p] = 1
                j += jstep
                if jstep == 1:
                    v = cedge_v[s, j % m]
                    w = cedge_w[s, j % m]
                else:
                    w = cedge_v[s, (j - 1) % m]
                    v = cedge_w[s, (j - 1) % m]
                allowed[v, w] = 1
                allowed[w, v] = 1
                j += jstep
            bw = childs[s, 0]
            label[w] = _T
            label[bw] = _T
            labeledge_v[w] = v
            labeledge_w[w] = w
            labeledge_v[bw] = v
            labeledge_w[bw] = w
            bestedge_v[bw] = -1
            j += jstep
            while childs[s, j % m] != entrychild:
                bv = childs[s, j % m]
                if label[bv] == _S:
                    j += jstep
                    continue
                vv = -1
                if bv < n:
                    if label[bv] != _FREE:
                        vv = bv
                else:
                    cnt = collect_leaves(bv)
                    for q2 in range(cnt):
                        if label[leafbuf[q2]] != _FREE:
                            vv = leafbuf[q2]
                            break
                if vv != -1:
                    label[vv] = _FREE
                    label[mate[bbase[bv]]] = _FREE
                    assign_label(vv, _T, labeledge_v[vv])
                j += jstep
        release_slot(b)

    def augment_blossom(b0, v0):
        # Flip matched/unmatched edges inside b0 so that v0 becomes its base.
        # Recursive calls write disjoint state, so worklist order is free.
        asp = 0
        aug_b[asp] = b0
        aug_v[asp] = v0
        asp += 1
        while asp > 0:
            asp -= 1
            b = aug_b[asp]
            v = aug_v[asp]
            s = b - n
            m = nchilds[s]
            t = v
            while parent[t] != b:
                t = parent[t]
            if t >= n:
                aug_b[asp] = t
                aug_v[asp] = v
                asp += 1
            i = 0
            for k in range(m):
                if childs[s, k] == t:
                    i = k
                    break
            j = i
            if i & 1:
                j -= m
                jstep = 1
            else:
                jstep = -1
            while j != 0:
                j += jstep
                t2 = childs[s, j % m]
                if jstep == 1:
                    w2 = cedge_v[s, j % m]
                    x2 = cedge_w[s, j % m]
                else:
                    x2 = cedge_v[s, (j - 1) % m]
                    w2 = cedge_w[s, (j - 1) % m]
                if t2 >= n:
                    aug_b[asp] = t2
                    aug_v[asp] = w2
                    asp += 1
                j += jstep
                t2 = childs[s, j % m]
                if t2 >= n:
                    aug_b[asp] = t2
                    aug_v[asp] = x2
                    asp += 1
                mate[w2] = x2
                mate[x2] = w2
            if i > 0:
                for k in range(m):
                    rot_c[k] = childs[s, (i + k) % m]
                    rot_v[k] = cedge_v[s, (i + k) % m]
                    rot_w[k] = cedge_w[s, (i + k) % m]
                for k in range(m):
                    childs[s, k] = rot_c[k]
                    cedge_v[s, k] = rot_v[k]
                    cedge_w[s, k] = rot_w[k]
            # The entry vertex becomes the new base. Setting it directly
            # (rather than reading the rotated child's base) keeps worklist
            # entries independent of processing order.
            bbase[b] = v

    def augment_matching(v, w):
        # Apply the augmenting path through S-vertices v and w.
        for it in range(2):
            if it == 0:
                s1 = v
                j1 = w
            else:
                s1 = w
                j1 = v
            while True:
                bs = inblossom[s1]
                if bs >= n:
                    augment_blossom(bs, s1)
                mate[s1] = j1
                if labeledge_v[bs] == -1:
                    break
                t = labeledge_v[bs]
                bt = inblossom[t]
                s1 = labeledge_v[bt]
                j1 = labeledge_w[bt]
                if bt >= n:
                    augment_blossom(bt, j1)
                mate[j1] = s1

    while True:
        # One stage per augmentation.
        for k in range(nb):
            label[k] = _FREE
            labeledge_v[k] = -1
            labeledge_w[k] = -1
            bestedge_v[k] = -1
            bestedge_w[k] = -1
        for i in range(n):
            for j in range(n):
                allowed[i, j] = 0
        state[0] = 0
        for v in range(n):
            if mate[v] == -1 and label[inblossom[v]] == _FREE:
                assign_label(v, _S, -1)
        augmented = False
        while True:
            # One substage per dual adjustment.
            while state[0] > 0 and not augmented:
                state[0] -= 1
                v = queue[state[0]]
                for w in range(n):
                    if w == v or adj[v, w] == 0:
                        continue
                    bv = inblossom[v]
                    bw = inblossom[w]
                    if bv == bw:
                        continue
                    kslack = 0.0
                    al = allowed[v, w] != 0
                    if not al:
                        kslack = slack(v, w)
                        if kslack <= 0.0:
                            allowed[v, w] = 1
                            allowed[w, v] = 1
                            al = True
                    if al:
                        lbw = label[bw]
                        if lbw == _FREE:
                            assign_label(w, _T, v)
                        elif lbw == _S:
                            bse = scan_blossom(v, w)
                            if bse != -1:
                                add_blossom(bse, v, w)
                            else:
                                augment_matching(v, w)
                                augmented = True
                                break
                        elif label[w] == _FREE:
                            label[w] = _T
                            labeledge_v[w] = v
                            labeledge_w[w] = w
                    elif label[bw] == _S:
                        if bestedge_v[bv] == -1 or kslack < slack(
                            bestedge_v[bv], bestedge_w[bv]
                        ):
                            bestedge_v[bv] = v
                            bestedge_w[bv] = w
                    elif label[w] == _FREE:
                        if bestedge_v[w] == -1 or kslack < slack(
                            bestedge_v[w], bestedge_w[w]
                        ):
                            bestedge_v[w] = v
                            bestedge_w[w] = w
            if augmented:
                break

            # No augmenting path with the current duals: adjust them by the
            # tightest of the classic four bounds.
            deltatype = 1
            delta = dualvar[0]
            for v2 in range(1, n):
                if dualvar[v2] < delta:
                    delta = dualvar[v2]
            de_v = -1
            de_w = -1
            db = -1
            for v2 in range(n):
                if label[inblossom[v2]] == _FREE and bestedge_v[v2] != -1:
                    d = slack(bestedge_v[v2], bestedge_w[v2])
                    if d < delta:
                        delta = d
                        deltatype = 2
                        de_v = bestedge_v[v2]
                        de_w = bestedge_w[v2]
            for b2 in range(nb):
                if (
                    bbase[b2] != -1
                    and parent[b2] == -1
                    and label[b2] == _S
                    and bestedge_v[b2] != -1
                ):
                    d = 0.5 * slack(bestedge_v[b2], bestedge_w[b2])
                    if d < delta:
                        delta = d
                        deltatype = 3
                        de_v = bestedge_v[b2]
                        de_w = bestedge_w[b2]
            for b2 in range(n, nb):
                if (
                    bbase[b2] != -1
                    and parent[b2] == -1
                    and label[b2] == _T
                    and blossomdual[b2] < delta
                ):
                    delta = blossomdual[b2]
                    deltatype = 4
                    db = b2

            for v2 in range(n):
                lb = label[inblossom[v2]]
                if lb == _S:
                    dualvar[v2] -= delta
                elif lb == _T:
                    dualvar[v2] += delta
            for b2 in range(n, nb):
                if bbase[b2] != -1 and parent[b2] == -1:
                    if label[b2] == _S:
                        blossomdual[b2] += delta
                    elif label[b2] == _T:
                        blossomdual[b2] -= delta

            if deltatype == 1:
                break
            elif deltatype == 2 or deltatype == 3:
                allowed[de_v, de_w] = 1
                allowed[de_w, de_v] = 1
                queue_push(de_v)
            else:
                expand_instage(db)

        if not augmented:
            break
        for b2 in range(n, nb):
            if (
                bbase[b2] != -1
                and parent[b2] == -1
                and label[b2] == _S
                and blossomdual[b2] == 0.0
            ):
                expand_endstage(b2)

    return mate


def _check_weights(weights):
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        raise ValueError("weight matrix must be square")
    if not np.isfinite(weights).all():
        raise ValueError("weights must be finite")
    if not np.allclose(weights, weights.T):
        raise ValueError("weight matrix must be symmetric")
    return weights


def max_weight_matching(weights, adjacency=None):
    """Maximum-weight matching; not necessarily perfect.

    Parameters
    ----------
    weights : (n, n) array_like
        Symmetric non-negative edge weights.
    adjacency : (n, n) array_like of bool, optional
        Edge mask; default is the complete graph.

    Returns
    -------
    mate : (n,) ndarray of int64
        mate[v] is the partner of v, or -1 if v is unmatched.
    """
    weights = _check_weights(weights)
    n = weights.shape[0]
    if (weights < 0).any():
        raise ValueError("weights must be non-negative")
    if adjacency is None:
        adj = np.ones((n, n), dtype=np.uint8)
        np.fill_diagonal(adj, 0)
    else:
        adj = np.asarray(adjacency).astype(np.uint8)
        if adj.shape != (n, n):
            raise ValueError("adjacency shape mismatch")
        np.fill_diagonal(adj, 0)
    return _solve(weights, adj)


def min_weight_perfect_matching(weights):
    """Minimum-weight perfect matching on the complete graph K_n, n even.

    Weights may be negative. Implemented by flipping the sign of all
    weights and shifting them up far enough that every maximum-weight
    matching has maximum cardinality.

    Returns the mate array; raises ValueError if n is odd.
    """
    weights = _check_weights(weights)
    n = weights.shape[0]
    if n % 2 != 0:
        raise ValueError("perfect matching needs an even number of vertices")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    off = ~np.eye(n, dtype=bool)
    wmax = weights[off].max()
    wmin = weights[off].min()
    # Any shift > wmax + (n/2)(wmax - wmin) makes all maximum-weight
    # matchings perfect after negation.
    shift = wmax + 1.0 + 0.5 * n * (wmax - wmin)
    shifted = shift - weights
    np.fill_diagonal(shifted, 0.0)
    adj = np.ones((n, n), dtype=np.uint8)
    np.fill_diagonal(adj, 0)
    mate = _solve(shifted, adj)
    if (mate < 0).any():
        raise RuntimeError("solver returned a non-perfect matching")
    return mate


def matching_pairs(mate):
    """Convert a mate array to a sorted list of (i, j) pairs with i < j."""
    out = []
    for v, w in enumerate(mate):
        if w > v:
            out.append((v, int(w)))
    return out


def matching_weight(weights, mate):
    """Total weight of a matching given as a mate array."""
    weights = np.asarray(weights, dtype=np.float64)
    total = 0.0
    for v, w in enumerate(mate):
        if w > v:
            total += weights[v, w]
    return total
