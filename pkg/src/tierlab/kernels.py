"""Array kernels shared by the event engine and the per-module APIs.

Everything here operates on plain numpy arrays and integer picoseconds so the
functions compile under numba and run unchanged as Python (see ``_accel``).
Row layouts are described by the column constants below; the Python wrappers
in ``vmem``, ``tiering`` and ``engine`` own the arrays.
"""

import numpy as np

from ._accel import jit

PS_PER_NS = 1000

# heap rows: (time, seq, kind, a, b, c, d)
E_TIME, E_SEQ, E_KIND, E_A, E_B, E_C, E_D = 0, 1, 2, 3, 4, 5, 6
E_COLS = 7

EV_ISSUE = 0
EV_COMPLETE = 1
EV_SCAN = 2
EV_ADJUST = 3
EV_DEMOTE = 4
EV_MIGRATED = 5

# page columns
PG_NODE, PG_OBJ, PG_MIGRATABLE, PG_PROTECTED = 0, 1, 2, 3
PG_LAST_FAULT, PG_PREV_FAULT, PG_FAULTS, PG_LRU, PG_LAST_TOUCH, PG_MIGRATING = 4, 5, 6, 7, 8, 9
PG_COLS = 10
LRU_INACTIVE = 0
LRU_ACTIVE = 1

# node columns
ND_CAPACITY, ND_USED, ND_INBOUND, ND_OUTBOUND, ND_PROMOTE_WM, ND_DEMOTE_WM = 0, 1, 2, 3, 4, 5
ND_COLS = 6

# object columns
OB_FIRST_PAGE, OB_NPAGES, OB_PATTERN, OB_ABYTES, OB_GAP, OB_ZOFF, OB_DEP = 0, 1, 2, 3, 4, 5, 6
OB_COLS = 7

PAT_SEQ, PAT_RAND, PAT_CHASE, PAT_ZIPF, PAT_GUPS = 0, 1, 2, 3, 4
CLS_SEQ, CLS_RAND = 0, 1

# thread columns
(TH_AGENT, TH_WINDOW, TH_DELAY, TH_OUT, TH_NEXT, TH_ISSUED, TH_DONE, TH_LIMIT, TH_WAIT,
 TH_PEND_OBJ, TH_PEND_OFF, TH_DEP_GAP, TH_FIRST, TH_LAST_DONE, TH_ACTIVE, TH_BYTES, TH_LAT_SUM,
 TH_START) = range(18)
TH_COLS = 18
WAIT_NONE, WAIT_SLOT, WAIT_DEP = 0, 1, 2

# cursor triples per (thread, object)
CU_START, CU_LEN, CU_POS = 0, 1, 2

# tiering policy kinds
POL_NONE, POL_AUTONUMA, POL_T08, POL_TPP = 0, 1, 2, 3
# fault decisions
ACT_NONE, ACT_MIGRATE, ACT_PROMOTE, ACT_BLOCKED = 0, 1, 2, 3
# migration flavours carried on EV_MIGRATED
MIG_PLAIN, MIG_PROMOTE, MIG_DEMOTE = 0, 1, 2

# counters
(C_FAULTS, C_FAULTS_LOCAL, C_PROMOTE, C_DEMOTE, C_MIGRATE, C_BLOCKED, C_ISSUED, C_COMPLETED,
 C_MIG_FAIL, C_MIG_BYTES, C_CAND_BYTES, C_PROMO_BYTES, C_PROTECTED) = range(13)
N_COUNTERS = 13

# meta slots
(M_HEAP_N, M_SEQ, M_NOW, M_CURSOR, M_ACTIVE, M_THRESH, M_WIN_CAND, M_WIN_PROMO, M_INFLIGHT,
 M_END, M_ADJ_N, M_LAST_ADJ) = range(12)
N_META = 12

# run parameters
(PR_POLICY, PR_PAGE, PR_FAULT_DELAY, PR_LRU_WIN, PR_SCAN_ON, PR_SCAN_PERIOD, PR_PER_SCAN,
 PR_ADJ_INTERVAL, PR_BUDGET_BPS, PR_TH_MIN, PR_TH_MAX, PR_DEMOTE_ON, PR_HEADROOM, PR_BATCH,
 PR_DEMOTE_PERIOD, PR_DURATION, PR_BUCKET, PR_BUDGET_WIN) = range(18)
N_PARAMS = 18

HIST_BUCKETS = 31  # log2 buckets, 1 ns .. 1 s
FINE_SUB = 16

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------- rng


@jit
def rng_next(state, i):
    """splitmix64 step on ``state[i]``."""
    z = state[i] + _GOLDEN
    state[i] = z
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@jit
def rng_uniform(state, i):
    return float(rng_next(state, i) >> _S11) * _INV53


@jit
def rng_below(state, i, n):
    k = np.int64(rng_uniform(state, i) * n)
    if k >= n:
        k = n - 1
    return k


# ---------------------------------------------------------------- servers


@jit
def service_ps(nbytes, ps_per_byte):
    return np.int64(np.floor(nbytes * ps_per_byte + 0.5))


@jit
def serve_route(busy, busy_acc, ps_per_byte, route, rlen, t, nbytes):
    """Push ``nbytes`` through the FIFO servers in ``route[:rlen]`` starting at ``t``.

    Cut-through: every server may start as soon as the head arrives, but no
    server finishes before its upstream neighbour.  Returns the time the tail
    leaves the last server (propagation latency is added by the caller).
    """
    head = t
    fin_prev = t
    for k in range(rlen):
        s = route[k]
        start = head
        if busy[s] > start:
            start = busy[s]
        svc = service_ps(nbytes, ps_per_byte[s])
        fin = start + svc
        if fin < fin_prev:
            fin = fin_prev
        busy[s] = fin
        busy_acc[s] += svc
        head = start
        fin_prev = fin
    return fin_prev


# ---------------------------------------------------------------- heap


@jit
def heap_push(heap, meta, t, kind, a, b, c, d):
    n = meta[M_HEAP_N]
    if n >= heap.shape[0]:
        raise RuntimeError("event heap overflow")
    seq = meta[M_SEQ]
    meta[M_SEQ] = seq + 1
    i = n
    while i > 0:
        p = (i - 1) >> 1
        if heap[p, E_TIME] < t or (heap[p, E_TIME] == t and heap[p, E_SEQ] < seq):
            break
        for col in range(E_COLS):
            heap[i, col] = heap[p, col]
        i = p
    heap[i, E_TIME] = t
    heap[i, E_SEQ] = seq
    heap[i, E_KIND] = kind
    heap[i, E_A] = a
    heap[i, E_B] = b
    heap[i, E_C] = c
    heap[i, E_D] = d
    meta[M_HEAP_N] = n + 1


@jit
def heap_pop(heap, meta, out):
    n = meta[M_HEAP_N] - 1
    for col in range(E_COLS):
        out[col] = heap[0, col]
    meta[M_HEAP_N] = n
    if n == 0:
        return
    lt = heap[n, E_TIME]
    ls = heap[n, E_SEQ]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        r = c + 1
        if r < n and (heap[r, E_TIME] < heap[c, E_TIME]
                      or (heap[r, E_TIME] == heap[c, E_TIME] and heap[r, E_SEQ] < heap[c, E_SEQ])):
            c = r
        if lt < heap[c, E_TIME] or (lt == heap[c, E_TIME] and ls < heap[c, E_SEQ]):
            break
        for col in range(E_COLS):
            heap[i, col] = heap[c, col]
        i = c
    for col in range(E_COLS):
        heap[i, col] = heap[n, col]


# ---------------------------------------------------------------- pages


@jit
def page_touch(pages, pid, now, lru_window):
    """Record an access; returns 1 when the access hits an armed page (hint fault)."""
    last = pages[pid, PG_LAST_TOUCH]
    if pages[pid, PG_LRU] == LRU_ACTIVE:
        if last >= 0 and now - last > lru_window:
            pages[pid, PG_LRU] = LRU_INACTIVE
    elif last >= 0 and now - last <= lru_window:
        pages[pid, PG_LRU] = LRU_ACTIVE
    pages[pid, PG_LAST_TOUCH] = now
    if pages[pid, PG_PROTECTED] == 0:
        return 0
    pages[pid, PG_PROTECTED] = 0
    pages[pid, PG_PREV_FAULT] = pages[pid, PG_LAST_FAULT]
    pages[pid, PG_LAST_FAULT] = now
    pages[pid, PG_FAULTS] += 1
    return 1


@jit
def node_free(nodes, n):
    return nodes[n, ND_CAPACITY] - nodes[n, ND_USED] - nodes[n, ND_INBOUND]


@jit
def scan_protect(pages, cursor, budget):
    """Arm up to ``budget`` migratable pages, walking round-robin from ``cursor``.

    Returns ``(armed, new_cursor)``.  At most one full lap is made, so an
    address space with no migratable page arms nothing.
    """
    n = pages.shape[0]
    armed = 0
    pos = cursor
    visited = 0
    while visited < n and armed < budget:
        if pages[pos, PG_MIGRATABLE] == 1 and pages[pos, PG_MIGRATING] < 0:
            pages[pos, PG_PROTECTED] = 1
            armed += 1
        pos += 1
        if pos >= n:
            pos = 0
        visited += 1
    return armed, pos


@jit
def coldest_pages(pages, node, k):
    """Ids of the ``k`` least-recently-touched movable pages on ``node`` (ties by id)."""
    n = pages.shape[0]
    cnt = 0
    for p in range(n):
        if pages[p, PG_NODE] == node and pages[p, PG_MIGRATABLE] == 1 and pages[p, PG_MIGRATING] < 0:
            cnt += 1
    ids = np.empty(cnt, dtype=np.int64)
    keys = np.empty(cnt, dtype=np.int64)
    j = 0
    for p in range(n):
        if pages[p, PG_NODE] == node and pages[p, PG_MIGRATABLE] == 1 and pages[p, PG_MIGRATING] < 0:
            ids[j] = p
            keys[j] = pages[p, PG_LAST_TOUCH]
            j += 1
    order = np.argsort(keys, kind="mergesort")
    if k > cnt:
        k = cnt
    out = np.empty(k, dtype=np.int64)
    for j in range(k):
        out[j] = ids[order[j]]
    return out


# ---------------------------------------------------------------- tiering decisions


@jit
def fault_decision(kind, node, top, slow, prev_fault, lru, now, thresh,
                   top_free, top_wm, win_promo, budget_win, page_size):
    """Policy reaction to a hint fault.  Returns ``(action, is_candidate)``."""
    if kind == POL_AUTONUMA:
        if node == top:
            return ACT_NONE, 0
        if top_free > top_wm:
            return ACT_MIGRATE, 0
        return ACT_BLOCKED, 0
    if kind == POL_T08:
        if slow == 0 or prev_fault < 0 or now - prev_fault >= thresh:
            return ACT_NONE, 0
        if top_free > top_wm and win_promo + page_size <= budget_win:
            return ACT_PROMOTE, 1
        return ACT_BLOCKED, 1
    if kind == POL_TPP:
        if slow == 0 or lru != LRU_ACTIVE:
            return ACT_NONE, 0
        if top_free > top_wm:
            return ACT_PROMOTE, 0
        return ACT_BLOCKED, 0
    return ACT_NONE, 0


@jit
def adjust_threshold(thresh, window_bytes, interval_ps, budget_bps, th_min, th_max):
    """Halve the hot threshold when candidate traffic exceeds the budget, double it below half."""
    rate = window_bytes / (interval_ps * 1e-12)
    if rate > budget_bps:
        thresh = thresh // 2
        if thresh < th_min:
            thresh = th_min
    elif rate < budget_bps * 0.5:
        thresh = thresh * 2
        if thresh > th_max:
            thresh = th_max
    return thresh


# ---------------------------------------------------------------- generators


@jit
def next_access(thr_wcdf, cursors, objs, perm, zipf_cdf, rng, i, page_size):
    """Draw the next ``(object, byte_offset)`` for thread ``i``."""
    nobj = thr_wcdf.shape[1]
    o = 0
    if nobj > 1:
        u = rng_uniform(rng, i)
        while o < nobj - 1 and u >= thr_wcdf[i, o]:
            o += 1
    pat = objs[o, OB_PATTERN]
    ab = objs[o, OB_ABYTES]
    size = objs[o, OB_NPAGES] * page_size
    if pat == PAT_SEQ:
        off = cursors[i, o, CU_START] + cursors[i, o, CU_POS]
        pos = cursors[i, o, CU_POS] + ab
        if pos + ab > cursors[i, o, CU_LEN]:
            pos = 0
        cursors[i, o, CU_POS] = pos
        return o, off
    if pat == PAT_ZIPF:
        u = rng_uniform(rng, i)
        z0 = objs[o, OB_ZOFF]
        npg = objs[o, OB_NPAGES]
        rank = np.searchsorted(zipf_cdf[z0:z0 + npg], u, side="right")
        if rank >= npg:
            rank = npg - 1
        local = perm[objs[o, OB_FIRST_PAGE] + rank]
        lines = page_size // ab
        if lines < 1:
            lines = 1
        return o, local * page_size + rng_below(rng, i, lines) * ab
    slots = size // ab
    if slots < 1:
        slots = 1
    return o, rng_below(rng, i, slots) * ab


# ---------------------------------------------------------------- engine


@jit
def _start_migration(pid, dst, t, flavour, meta, heap, pages, nodes, busy, busy_acc, ps_per_byte,
                     mig_srv, mig_len, mig_lat, counters, page_size):
    src = pages[pid, PG_NODE]
    if src == dst or pages[pid, PG_MIGRATABLE] == 0 or pages[pid, PG_MIGRATING] >= 0:
        return 0
    if node_free(nodes, dst) < 1:
        counters[C_MIG_FAIL] += 1
        return 0
    nodes[dst, ND_INBOUND] += 1
    nodes[src, ND_OUTBOUND] += 1
    pages[pid, PG_MIGRATING] = dst
    fin = serve_route(busy, busy_acc, ps_per_byte, mig_srv[src, dst], mig_len[src, dst], t, page_size)
    heap_push(heap, meta, fin + mig_lat[src, dst], EV_MIGRATED, pid, dst, flavour, src)
    meta[M_INFLIGHT] += 1
    return 1


@jit
def _credit(srv_bytes, timeline, bucket, route, rlen, t, nbytes):
    for k in range(rlen):
        s = route[k]
        srv_bytes[s] += nbytes
        if bucket > 0:
            b = t // bucket
            if b >= timeline.shape[1]:
                b = timeline.shape[1] - 1
            timeline[s, b] += nbytes


@jit
def _record_latency(hist, fine_hist, i, lat_ps):
    ns = lat_ps // PS_PER_NS
    k = 0
    v = ns
    while v > 1:
        v >>= 1
        k += 1
    if k >= HIST_BUCKETS:
        k = HIST_BUCKETS - 1
    hist[i, k] += 1
    lo = (np.int64(1) << k) * PS_PER_NS
    sub = 0
    if lat_ps >= lo:
        sub = ((lat_ps - lo) * FINE_SUB) // lo
        if sub >= FINE_SUB:
            sub = FINE_SUB - 1
    fine_hist[k * FINE_SUB + sub] += 1


@jit
def run_events(until, meta, params, heap, busy, busy_acc, srv_bytes, ps_per_byte,
               route_srv, route_len, route_lat, node_cap, mig_srv, mig_len, mig_lat,
               pages, nodes, objs, obj_stats, perm, zipf_cdf,
               thr, thr_wcdf, cursors, rng, top_node, tier_rank, demote_target,
               counters, hist, fine_hist, timeline, adj_log):
    """Process every queued event with time <= ``until`` (picoseconds)."""
    ev = np.empty(E_COLS, dtype=np.int64)
    page_size = params[PR_PAGE]
    policy = params[PR_POLICY]
    bucket = params[PR_BUCKET]
    duration = params[PR_DURATION]
    processed = 0
    while meta[M_HEAP_N] > 0 and heap[0, E_TIME] <= until:
        heap_pop(heap, meta, ev)
        t = ev[E_TIME]
        kind = ev[E_KIND]
        meta[M_NOW] = t
        processed += 1

        if kind == EV_ISSUE:
            i = ev[E_A]
            if thr[i, TH_ACTIVE] == 0:
                continue
            if thr[i, TH_ISSUED] >= thr[i, TH_LIMIT] or (duration > 0 and t >= duration):
                thr[i, TH_ACTIVE] = 0
                meta[M_ACTIVE] -= 1
                continue
            if thr[i, TH_PEND_OBJ] >= 0:
                o = thr[i, TH_PEND_OBJ]
                off = thr[i, TH_PEND_OFF]
            else:
                o, off = next_access(thr_wcdf, cursors, objs, perm, zipf_cdf, rng, i, page_size)
            dep = objs[o, OB_DEP]
            if thr[i, TH_OUT] >= thr[i, TH_WINDOW] or (dep == 1 and thr[i, TH_OUT] > 0):
                thr[i, TH_PEND_OBJ] = o
                thr[i, TH_PEND_OFF] = off
                thr[i, TH_WAIT] = WAIT_SLOT
                continue
            thr[i, TH_PEND_OBJ] = -1
            pid = objs[o, OB_FIRST_PAGE] + off // page_size
            agent = thr[i, TH_AGENT]
            issue_t = t
            if page_touch(pages, pid, t, params[PR_LRU_WIN]) == 1:
                node = pages[pid, PG_NODE]
                top = top_node[agent]
                counters[C_FAULTS] += 1
                if node == top:
                    counters[C_FAULTS_LOCAL] += 1
                issue_t = t + params[PR_FAULT_DELAY]
                slow = 1 if tier_rank[agent, node] > tier_rank[agent, top] else 0
                act, cand = fault_decision(policy, node, top, slow, pages[pid, PG_PREV_FAULT],
                                           pages[pid, PG_LRU], t, meta[M_THRESH],
                                           node_free(nodes, top), nodes[top, ND_DEMOTE_WM],
                                           meta[M_WIN_PROMO], params[PR_BUDGET_WIN],
                                           page_size)
                if cand == 1:
                    meta[M_WIN_CAND] += page_size
                    counters[C_CAND_BYTES] += page_size
                if act == ACT_BLOCKED:
                    counters[C_BLOCKED] += 1
                elif act == ACT_MIGRATE or act == ACT_PROMOTE:
                    flav = MIG_PROMOTE if act == ACT_PROMOTE else MIG_PLAIN
                    ok = _start_migration(pid, top, t, flav, meta, heap, pages, nodes, busy, busy_acc,
                                          ps_per_byte, mig_srv, mig_len, mig_lat, counters, page_size)
                    if ok == 1 and act == ACT_PROMOTE:
                        meta[M_WIN_PROMO] += page_size
                    elif ok == 0:
                        counters[C_BLOCKED] += 1
            node = pages[pid, PG_NODE]
            pat = objs[o, OB_PATTERN]
            cls = CLS_SEQ if pat == PAT_SEQ else CLS_RAND
            nbytes = objs[o, OB_ABYTES]
            if pat == PAT_GUPS:
                nbytes = 2 * nbytes
            fin = serve_route(busy, busy_acc, ps_per_byte, route_srv[agent, node], route_len[agent, node],
                              issue_t, nbytes)
            heap_push(heap, meta, fin + route_lat[agent, node, cls], EV_COMPLETE, i, node, o, issue_t)
            if thr[i, TH_ISSUED] == 0:
                thr[i, TH_FIRST] = issue_t
            thr[i, TH_OUT] += 1
            thr[i, TH_ISSUED] += 1
            counters[C_ISSUED] += 1
            pace = service_ps(nbytes, node_cap[agent, node, cls])
            gap = thr[i, TH_DELAY]
            if pace > gap:
                gap = pace
            if dep == 1:
                thr[i, TH_NEXT] = issue_t + gap
                thr[i, TH_DEP_GAP] = objs[o, OB_GAP]
                thr[i, TH_WAIT] = WAIT_DEP
            else:
                nxt = issue_t + gap + objs[o, OB_GAP]
                thr[i, TH_NEXT] = nxt
                if thr[i, TH_OUT] < thr[i, TH_WINDOW]:
                    heap_push(heap, meta, nxt, EV_ISSUE, i, 0, 0, 0)
                else:
                    thr[i, TH_WAIT] = WAIT_SLOT

        elif kind == EV_COMPLETE:
            i = ev[E_A]
            node = ev[E_B]
            o = ev[E_C]
            lat = t - ev[E_D]
            agent = thr[i, TH_AGENT]
            nbytes = objs[o, OB_ABYTES]
            if objs[o, OB_PATTERN] == PAT_GUPS:
                nbytes = 2 * nbytes
            _credit(srv_bytes, timeline, bucket, route_srv[agent, node], route_len[agent, node], t, nbytes)
            obj_stats[o, 0] += 1
            obj_stats[o, 1] += nbytes
            _record_latency(hist, fine_hist, i, lat)
            thr[i, TH_LAT_SUM] += lat
            thr[i, TH_BYTES] += nbytes
            thr[i, TH_OUT] -= 1
            thr[i, TH_DONE] += 1
            thr[i, TH_LAST_DONE] = t
            counters[C_COMPLETED] += 1
            if t > meta[M_END]:
                meta[M_END] = t
            w = thr[i, TH_WAIT]
            if w == WAIT_DEP:
                nxt = t + thr[i, TH_DEP_GAP]
                if thr[i, TH_NEXT] > nxt:
                    nxt = thr[i, TH_NEXT]
                thr[i, TH_WAIT] = WAIT_NONE
                heap_push(heap, meta, nxt, EV_ISSUE, i, 0, 0, 0)
            elif w == WAIT_SLOT:
                po = thr[i, TH_PEND_OBJ]
                if po < 0 or objs[po, OB_DEP] == 0 or thr[i, TH_OUT] == 0:
                    nxt = thr[i, TH_NEXT]
                    if nxt < t:
                        nxt = t
                    thr[i, TH_WAIT] = WAIT_NONE
                    heap_push(heap, meta, nxt, EV_ISSUE, i, 0, 0, 0)

        elif kind == EV_MIGRATED:
            pid = ev[E_A]
            dst = ev[E_B]
            flav = ev[E_C]
            src = ev[E_D]
            nodes[src, ND_USED] -= 1
            nodes[src, ND_OUTBOUND] -= 1
            nodes[dst, ND_INBOUND] -= 1
            nodes[dst, ND_USED] += 1
            pages[pid, PG_NODE] = dst
            pages[pid, PG_MIGRATING] = -1
            meta[M_INFLIGHT] -= 1
            _credit(srv_bytes, timeline, bucket, mig_srv[src, dst], mig_len[src, dst], t, page_size)
            counters[C_MIG_BYTES] += 2 * page_size
            counters[C_MIGRATE] += 1
            if flav == MIG_PROMOTE:
                counters[C_PROMOTE] += 1
                counters[C_PROMO_BYTES] += page_size
            elif flav == MIG_DEMOTE:
                counters[C_DEMOTE] += 1

        elif kind == EV_SCAN:
            if meta[M_ACTIVE] <= 0:
                continue
            armed, cur = scan_protect(pages, meta[M_CURSOR], params[PR_PER_SCAN])
            meta[M_CURSOR] = cur
            counters[C_PROTECTED] += armed
            heap_push(heap, meta, t + params[PR_SCAN_PERIOD], EV_SCAN, 0, 0, 0, 0)

        elif kind == EV_ADJUST:
            if meta[M_ACTIVE] <= 0:
                continue
            n = meta[M_ADJ_N]
            if n < adj_log.shape[0]:
                adj_log[n, 0] = t
                adj_log[n, 1] = meta[M_WIN_PROMO]
                adj_log[n, 2] = meta[M_WIN_CAND]
                adj_log[n, 3] = meta[M_THRESH]
                meta[M_ADJ_N] = n + 1
            meta[M_THRESH] = adjust_threshold(meta[M_THRESH], meta[M_WIN_CAND], params[PR_ADJ_INTERVAL],
                                              params[PR_BUDGET_BPS], params[PR_TH_MIN], params[PR_TH_MAX])
            meta[M_WIN_CAND] = 0
            meta[M_WIN_PROMO] = 0
            meta[M_LAST_ADJ] = t
            heap_push(heap, meta, t + params[PR_ADJ_INTERVAL], EV_ADJUST, 0, 0, 0, 0)

        elif kind == EV_DEMOTE:
            if meta[M_ACTIVE] <= 0:
                continue
            for n in range(nodes.shape[0]):
                dst = demote_target[n]
                if dst < 0:
                    continue
                free = node_free(nodes, n) + nodes[n, ND_OUTBOUND]
                want = nodes[n, ND_PROMOTE_WM] - free
                if want <= 0:
                    continue
                if want > params[PR_BATCH]:
                    want = params[PR_BATCH]
                victims = coldest_pages(pages, n, want)
                for j in range(victims.shape[0]):
                    if _start_migration(victims[j], dst, t, MIG_DEMOTE, meta, heap, pages, nodes, busy,
                                        busy_acc, ps_per_byte, mig_srv, mig_len, mig_lat, counters,
                                        page_size) == 0:
                        break
            heap_push(heap, meta, t + params[PR_DEMOTE_PERIOD], EV_DEMOTE, 0, 0, 0, 0)
    return processed
