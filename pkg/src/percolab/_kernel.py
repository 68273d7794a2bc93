"""Compiled slab explorer.

One exploration is a BFS over open edges from a base site, confined to a
height window relative to the base.  State lives in flat arrays that are
reused across explorations; open-addressing tables are invalidated by bumping
an epoch stamp instead of being cleared.  If an exploration outgrows the
workspace the driver doubles it and reruns (the result is deterministic, so a
rerun is exact).

Mirrors ``sampler.explore_slab`` step for step: same neighbour
order, visited check before the edge hash, same budget rule.
"""
import numpy as np
from numba import njit, prange

from . import hashing as hs

U = np.uint64
M1 = U(hs.MIX_M1)
M2 = U(hs.MIX_M2)
S11 = U(11)
S27 = U(27)
S30 = U(30)
S31 = U(31)
GOLD_A = U(hs.GOLD_A)
GOLD_B = U(hs.GOLD_B)
ANC_A = U(hs.ANC_A)
ANC_B = U(hs.ANC_B)
FOLD_A = U(hs.FOLD_A)
FOLD_B = U(hs.FOLD_B)
FOLD_B2 = U(hs.FOLD_B2)
ZOB_A = U(hs.ZOB_A)
ZOB_B = U(hs.ZOB_B)
FIB_X = U(hs.FIB_X)
FIB_Y = U(hs.FIB_Y)
FIB_XB = U(hs.FIB_XB)
FIB_YB = U(hs.FIB_YB)
EDGE_A = U(hs.EDGE_A)
EDGE_B = U(hs.EDGE_B)
REP_K = U(hs.REP_K)
INV_2_53 = hs.INV_2_53

FAM_TREE = 0
FAM_TXZ = 1
FAM_LL = 2

ST_OK = 0
ST_CENSORED = 1
ST_GROW = -1

# stats columns
N_VISITED = 0
EDGES = 1
CENSORED = 2


@njit(inline="always")
def mix64(z):
    z = (z ^ (z >> S30)) * M1
    z = (z ^ (z >> S27)) * M2
    return z ^ (z >> S31)


@njit(inline="always")
def anc_fp(up):
    return mix64(U(up) * GOLD_A + ANC_A), mix64(U(up) * GOLD_B + ANC_B)


@njit(inline="always")
def fold_fp(fa, fb, digit):
    dd = U(digit + 1)
    return mix64(fa + dd * FOLD_A), mix64((fb ^ (dd * FOLD_B)) + FOLD_B2)


@njit(inline="always")
def zobrist(fa, fb):
    return mix64(fa ^ ZOB_A), mix64(fb ^ ZOB_B)


@njit(inline="always")
def fiber_key(fam, a, b):
    if fam == FAM_TXZ:
        ux = U(a)
        uy = U(b)
        return mix64(mix64(ux + FIB_X) + uy * FIB_Y), mix64(mix64(uy + FIB_YB) + ux * FIB_XB)
    if fam == FAM_LL:
        return U(a), U(b)
    return U(0), U(0)


@njit(inline="always")
def edge_uniform(kind, fa, fb, ka, kb, skey, rkey):
    sa = mix64(fa ^ ka)
    sb = mix64(fb + kb)
    kk = U(kind)
    ea = mix64(sa + kk * EDGE_A)
    eb = mix64(sb ^ (kk * EDGE_B))
    x = mix64(ea ^ skey)
    x = mix64(x + eb)
    x = mix64(x ^ rkey)
    return float(x >> S11) * INV_2_53


@njit(inline="always")
def replica_key(replica):
    return mix64(U(replica) * GOLD_A + REP_K)


@njit(inline="always")
def _site_slot(ti, a, b, mask):
    h = mix64(U(ti) * GOLD_A ^ U(a))
    h = mix64(h + U(b) * GOLD_B)
    return np.int64(h & U(mask))


@njit(inline="always")
def _site_find(sh_t, sh_a, sh_b, sh_stamp, epoch, ti, a, b):
    mask = sh_t.shape[0] - 1
    s = _site_slot(ti, a, b, mask)
    while sh_stamp[s] == epoch:
        if sh_t[s] == ti and sh_a[s] == a and sh_b[s] == b:
            return s
        s = (s + 1) & mask
    return -1 - s


@njit(inline="always")
def _child_find(cm_key, cm_val, cm_stamp, epoch, key):
    mask = cm_key.shape[0] - 1
    s = np.int64(mix64(U(key) * GOLD_B) & U(mask))
    while cm_stamp[s] == epoch:
        if cm_key[s] == key:
            return cm_val[s]
        s = (s + 1) & mask
    cm_key[s] = key
    return -1 - s


@njit(inline="always")
def _target_of(tfa_sorted, tfb_sorted, torder, fa, fb):
    n = tfa_sorted.shape[0]
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if tfa_sorted[mid] < fa:
            lo = mid + 1
        else:
            hi = mid
    while lo < n and tfa_sorted[lo] == fa:
        if tfb_sorted[lo] == fb:
            return torder[lo]
        lo += 1
    return -1


@njit(cache=True)
def _alloc(cap, tcap, sh, ch):
    return (
        np.zeros(sh, np.int64), np.zeros(sh, np.int64), np.zeros(sh, np.int64), np.zeros(sh, np.int64),
        np.zeros(cap, np.int64), np.zeros(cap, np.int64), np.zeros(cap, np.int64),
        np.zeros(tcap, np.uint64), np.zeros(tcap, np.uint64),
        np.zeros(tcap, np.int64), np.zeros(tcap, np.int64), np.zeros(tcap, np.int64),
        np.zeros(tcap, np.int64), np.zeros(tcap, np.int64), np.zeros(tcap, np.int8),
        np.zeros(ch, np.int64), np.zeros(ch, np.int64), np.zeros(ch, np.int64),
    )


@njit(cache=True)
def explore(fam, k, d, p, skey, rkey, base_up, base_word, base_a, base_b,
            lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder,
            ws, anc_idx, anc_stamp, epoch,
            out_levels, out_tree_levels, out_hits, out_exact, out_stats):
    """Run one exploration; returns ST_OK, ST_CENSORED or ST_GROW.

    On ST_OK / ST_CENSORED the ``out_*`` rows are filled (they must be zeroed
    by the caller).  The visited sites are left in the queue arrays
    ``ws[4:7]`` and the tree table in ``ws[7:14]``.
    """
    (sh_t, sh_a, sh_b, sh_stamp, q_t, q_a, q_b,
     t_fa, t_fb, t_up, t_depth, t_parent, t_digit, t_target, t_seen,
     cm_key, cm_val, cm_stamp) = ws
    cap = q_t.shape[0]
    tcap = t_fa.shape[0]
    km1 = k - 1

    # base chain: the ancestor a_up, then each prefix of the word
    nt = 0
    fa, fb = anc_fp(base_up)
    t_fa[0] = fa
    t_fb[0] = fb
    t_up[0] = base_up
    t_depth[0] = 0
    t_parent[0] = -1
    t_digit[0] = k - 2
    t_target[0] = _target_of(tfa_sorted, tfb_sorted, torder, fa, fb)
    t_seen[0] = 0
    anc_idx[base_up] = 0
    anc_stamp[base_up] = epoch
    nt = 1
    for j in range(base_word.shape[0]):
        dgt = base_word[j]
        fa, fb = fold_fp(fa, fb, dgt)
        r = _child_find(cm_key, cm_val, cm_stamp, epoch, (nt - 1) * km1 + dgt)
        s = -1 - r
        cm_stamp[s] = epoch
        cm_val[s] = nt
        t_fa[nt] = fa
        t_fb[nt] = fb
        t_up[nt] = base_up
        t_depth[nt] = j + 1
        t_parent[nt] = nt - 1
        t_digit[nt] = dgt
        t_target[nt] = _target_of(tfa_sorted, tfb_sorted, torder, fa, fb)
        t_seen[nt] = 0
        nt += 1
    base_t = nt - 1
    bh = base_up - base_word.shape[0]

    edges = 0
    nq = 0
    # insert base
    s = _site_find(sh_t, sh_a, sh_b, sh_stamp, epoch, base_t, base_a, base_b)
    s = -1 - s
    sh_t[s] = base_t
    sh_a[s] = base_a
    sh_b[s] = base_b
    sh_stamp[s] = epoch
    q_t[0] = base_t
    q_a[0] = base_a
    q_b[0] = base_b
    nq = 1
    out_levels[-lo] += 1
    out_tree_levels[-lo] += 1
    t_seen[base_t] = 1
    tg = t_target[base_t]
    if tg >= 0:
        out_hits[tg] += 1
        out_exact[tg] = 1

    head = 0
    status = ST_OK
    while head < nq:
        ti = q_t[head]
        a = q_a[head]
        b = q_b[head]
        head += 1
        rel = t_up[ti] - t_depth[ti] - bh
        if first_visit and rel == lo:
            continue
        ka, kb = fiber_key(fam, a, b)
        cfa = t_fa[ti]
        cfb = t_fb[ti]

        for move in range(k + 2 * d + (1 if fam == FAM_LL else 0)):
            # resolve the neighbour (nti = -1 if its tree vertex is not interned yet)
            nti = -1
            na = a
            nb = b
            kind = 1
            nfa = U(0)
            nfb = U(0)
            cslot = -1
            if move == 0:
                if rel + 1 > hi:
                    continue
                if t_depth[ti] > 0:
                    nti = t_parent[ti]
                else:
                    u1 = t_up[ti] + 1
                    if anc_stamp[u1] == epoch:
                        nti = anc_idx[u1]
                # tree edge is keyed by its lower endpoint: the current site
                efa = cfa
                efb = cfb
                eka = ka
                ekb = kb
            elif move < k:
                if rel - 1 < lo:
                    continue
                dgt = move - 1
                if t_depth[ti] == 0 and t_up[ti] >= 1 and dgt == k - 2:
                    u0 = t_up[ti] - 1
                    if anc_stamp[u0] == epoch:
                        nti = anc_idx[u0]
                    nfa, nfb = anc_fp(u0)
                    cslot = -1
                else:
                    r = _child_find(cm_key, cm_val, cm_stamp, epoch, ti * km1 + dgt)
                    if r >= 0:
                        nti = r
                        nfa = t_fa[r]
                        nfb = t_fb[r]
                        cslot = -1
                    else:
                        nfa, nfb = fold_fp(cfa, cfb, dgt)
                        cslot = -1 - r
                efa = nfa
                efb = nfb
                eka = ka
                ekb = kb
            elif fam == FAM_TXZ:
                lm = move - k
                axis = lm // 2
                step = 1 if lm % 2 == 0 else -1
                nti = ti
                if axis == 0:
                    na = a + step
                    if fwin >= 0 and (na > fwin or na < -fwin):
                        continue
                    lowa = a if step > 0 else na
                    eka, ekb = fiber_key(fam, lowa, b)
                else:
                    nb = b + step
                    if fwin >= 0 and (nb > fwin or nb < -fwin):
                        continue
                    lowb = b if step > 0 else nb
                    eka, ekb = fiber_key(fam, a, lowb)
                kind = 2 + axis
                efa = cfa
                efb = cfb
            else:
                nti = ti
                za, zb = zobrist(cfa, cfb)
                na = np.int64(U(a) ^ za)
                nb = np.int64(U(b) ^ zb)
                ua = U(a)
                una = U(na)
                if ua < una or (ua == una and U(b) <= U(nb)):
                    eka = ua
                    ekb = U(b)
                else:
                    eka = una
                    ekb = U(nb)
                kind = 4
                efa = cfa
                efb = cfb

            if nti >= 0:
                if _site_find(sh_t, sh_a, sh_b, sh_stamp, epoch, nti, na, nb) >= 0:
                    continue
            edges += 1
            if edge_uniform(kind, efa, efb, eka, ekb, skey, rkey) >= p:
                continue

            # open edge to an unvisited site
            if nq >= budget:
                status = ST_CENSORED
                break
            if nq >= cap or nt >= tcap:
                return ST_GROW
            if nti < 0:
                nti = nt
                if move == 0:
                    u1 = t_up[ti] + 1
                    t_fa[nt], t_fb[nt] = anc_fp(u1)
                    t_up[nt] = u1
                    t_depth[nt] = 0
                    t_parent[nt] = -1
                    t_digit[nt] = k - 2
                    anc_idx[u1] = nt
                    anc_stamp[u1] = epoch
                elif cslot < 0:
                    u0 = t_up[ti] - 1
                    t_fa[nt] = nfa
                    t_fb[nt] = nfb
                    t_up[nt] = u0
                    t_depth[nt] = 0
                    t_parent[nt] = ti
                    t_digit[nt] = k - 2
                    anc_idx[u0] = nt
                    anc_stamp[u0] = epoch
                else:
                    t_fa[nt] = nfa
                    t_fb[nt] = nfb
                    t_up[nt] = t_up[ti]
                    t_depth[nt] = t_depth[ti] + 1
                    t_parent[nt] = ti
                    t_digit[nt] = move - 1
                    cm_stamp[cslot] = epoch
                    cm_val[cslot] = nt
                t_target[nt] = _target_of(tfa_sorted, tfb_sorted, torder, t_fa[nt], t_fb[nt])
                t_seen[nt] = 0
                nt += 1
            s = -1 - _site_find(sh_t, sh_a, sh_b, sh_stamp, epoch, nti, na, nb)
            sh_t[s] = nti
            sh_a[s] = na
            sh_b[s] = nb
            sh_stamp[s] = epoch
            q_t[nq] = nti
            q_a[nq] = na
            q_b[nq] = nb
            nq += 1
            nrel = t_up[nti] - t_depth[nti] - bh
            out_levels[nrel - lo] += 1
            if t_seen[nti] == 0:
                t_seen[nti] = 1
                out_tree_levels[nrel - lo] += 1
            tg = t_target[nti]
            if tg >= 0:
                out_hits[tg] += 1
                if na == base_a and nb == base_b:
                    out_exact[tg] = 1
        if status == ST_CENSORED:
            break

    out_stats[N_VISITED] = nq
    out_stats[EDGES] = edges
    out_stats[CENSORED] = 1 if status == ST_CENSORED else 0
    return status


@njit(cache=True)
def _grow(ws, extra):
    cap = ws[4].shape[0] * 2
    tcap = cap + extra
    sh = 1
    while sh < 2 * cap:
        sh *= 2
    ch = 1
    while ch < 2 * tcap:
        ch *= 2
    return _alloc(cap, tcap, sh, ch)


@njit(cache=True)
def run_range(fam, k, d, p, skey, rep0, r_start, r_stop, base_up, base_word, base_a, base_b,
              lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder, init_cap,
              out_levels, out_tree_levels, out_hits, out_exact, out_stats):
    """Explore replicas ``rep0 + r`` for ``r`` in ``[r_start, r_stop)``, writing row ``r`` of each output."""
    extra = base_word.shape[0] + hi + 8
    ws = _grow_to(init_cap, extra)
    anc_n = base_up + hi + 3
    anc_idx = np.zeros(anc_n, np.int64)
    anc_stamp = np.zeros(anc_n, np.int64)
    epoch = 0
    for r in range(r_start, r_stop):
        rkey = replica_key(rep0 + r)
        while True:
            epoch += 1
            out_levels[r, :] = 0
            out_tree_levels[r, :] = 0
            out_hits[r, :] = 0
            out_exact[r, :] = 0
            st = explore(fam, k, d, p, skey, rkey, base_up, base_word, base_a, base_b,
                         lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder,
                         ws, anc_idx, anc_stamp, epoch,
                         out_levels[r], out_tree_levels[r], out_hits[r], out_exact[r], out_stats[r])
            if st != ST_GROW:
                break
            ws = _grow(ws, extra)
            epoch = 0
            anc_stamp[:] = 0


@njit(cache=True)
def _grow_to(cap, extra):
    tcap = cap + extra
    sh = 1
    while sh < 2 * cap:
        sh *= 2
    ch = 1
    while ch < 2 * tcap:
        ch *= 2
    return _alloc(cap, tcap, sh, ch)


@njit(cache=True, parallel=True)
def run_chunks(fam, k, d, p, skey, rep0, bounds, base_up, base_word, base_a, base_b,
               lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder, init_cap,
               out_levels, out_tree_levels, out_hits, out_exact, out_stats):
    for c in prange(bounds.shape[0] - 1):
        run_range(fam, k, d, p, skey, rep0, bounds[c], bounds[c + 1], base_up, base_word, base_a, base_b,
                  lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder, init_cap,
                  out_levels, out_tree_levels, out_hits, out_exact, out_stats)


@njit(cache=True)
def run_single(fam, k, d, p, skey, replica, base_up, base_word, base_a, base_b,
               lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder, init_cap,
               out_levels, out_tree_levels, out_hits, out_exact, out_stats):
    """One exploration; returns the workspace so callers can read the visited sites."""
    extra = base_word.shape[0] + hi + 8
    ws = _grow_to(init_cap, extra)
    anc_n = base_up + hi + 3
    anc_idx = np.zeros(anc_n, np.int64)
    anc_stamp = np.zeros(anc_n, np.int64)
    rkey = replica_key(replica)
    epoch = 0
    while True:
        epoch += 1
        out_levels[:] = 0
        out_tree_levels[:] = 0
        out_hits[:] = 0
        out_exact[:] = 0
        st = explore(fam, k, d, p, skey, rkey, base_up, base_word, base_a, base_b,
                     lo, hi, budget, first_visit, fwin, tfa_sorted, tfb_sorted, torder,
                     ws, anc_idx, anc_stamp, epoch,
                     out_levels, out_tree_levels, out_hits, out_exact, out_stats)
        if st != ST_GROW:
            return ws
        ws = _grow(ws, extra)
        epoch = 0
        anc_stamp[:] = 0
