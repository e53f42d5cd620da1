"""Compiled round kernels.

Each kernel advances a process from round ``t0`` to ``t_end`` (or until a
stop condition fires) drawing uniforms from the numpy ``Generator`` objects
it is handed.  ``_kernels_numpy`` mirrors every signature and consumes the
generators in the same order, so both backends produce identical results.

Return value of the stepping kernels is ``(t, status)`` with status 0 when
``t_end`` was reached and 2 when a stop condition fired.
"""

import numpy as np
from numba import njit

FIFO, LIFO, RANDOM = 0, 1, 2


@njit(cache=True, nogil=True)
def _build_queues(pos, stamp, n, cap):
    # circular per-bin queues (capacity a power of two) in ascending stamp order
    qb = np.empty((n, cap), np.int32)
    qh = np.zeros(n, np.int64)
    qc = np.zeros(n, np.int64)
    for b in np.argsort(stamp):
        v = pos[b]
        qb[v, qc[v]] = b
        qc[v] += 1
    return qb, qh, qc


@njit(cache=True, nogil=True)
def _grow_queues(qb, qh, qc):
    n, cap = qb.shape
    new = np.empty((n, 2 * cap), np.int32)
    mask = cap - 1
    for u in range(n):
        h = qh[u]
        for i in range(qc[u]):
            new[u, i] = qb[u, (h + i) & mask]
        qh[u] = 0
    return new


@njit(cache=True, nogil=True)
def _rounds(loads, nbrs, strategy, track, pos, stamp, progress, enq_round, enq_load,
            visited, visit_count, cover_round, counters, dgen, sgen, t0, t_end,
            out_max, out_empty, out_over, stop_max_le, stop_on_cover,
            qb, qh, qc, src, dst, sel, pending):
    # returns (t, status, k); status 3 = queue buffer too small, round t's
    # appends are pending and resume with pending=k once it has grown
    n = loads.size
    m = pos.size
    complete = nbrs.shape[0] == 0
    deg = n if complete else nbrs.shape[1]
    cover = visited.shape[0] > 0
    mask = qb.shape[1] - 1
    t = t0
    k = pending
    while t < t_end or k >= 0:
        if k < 0:
            t += 1
            k = 0
            for u in range(n):
                src[k] = u
                k += np.int64(loads[u] > 0)
            for j in range(k):
                r = int(dgen.random() * deg)
                if r >= deg:
                    r = deg - 1
                if complete:
                    dst[j] = r
                else:
                    dst[j] = nbrs[src[j], r]
            if track:
                for j in range(k):
                    u = src[j]
                    h = qh[u]
                    c = qc[u]
                    if strategy == FIFO:
                        sel[j] = qb[u, h]
                        qh[u] = (h + 1) & mask
                    elif strategy == LIFO:
                        sel[j] = qb[u, (h + c - 1) & mask]
                    else:
                        r = int(sgen.random() * c)
                        if r >= c:
                            r = c - 1
                        sel[j] = qb[u, (h + r) & mask]
                        for i in range(r, c - 1):
                            qb[u, (h + i) & mask] = qb[u, (h + i + 1) & mask]
                    qc[u] = c - 1
            for j in range(k):
                loads[src[j]] -= 1
            for j in range(k):
                loads[dst[j]] += 1
            mx = 0
            e = 0
            o = 0
            for u in range(n):
                L = loads[u]
                e += np.int64(L == 0)
                o += np.int64(L > 1)
                mx = max(mx, L)
            out_max[t] = mx
            out_empty[t] = e
            out_over[t] = o
            if o > e + m - n:
                counters[3] += 1
            if track and mx > mask:
                return t, 3, k
        if track:
            base = t * n
            for j in range(k):
                b = sel[j]
                v = dst[j]
                c = qc[v]
                qb[v, (qh[v] + c) & mask] = b
                qc[v] = c + 1
                w = t - enq_round[b]
                counters[0] = max(counters[0], w)
                counters[1] += np.int64(w > enq_load[b])
                pos[b] = v
                stamp[b] = base + src[j]
                progress[b] += 1
                enq_round[b] = t
                enq_load[b] = loads[v]
                if cover and not visited[b, v]:
                    visited[b, v] = True
                    visit_count[b] += 1
                    if visit_count[b] == n:
                        cover_round[b] = t
                        counters[2] += 1
        k = -1
        if stop_max_le >= 0 and out_max[t] <= stop_max_le:
            return t, 2, k
        if stop_on_cover and counters[2] == m:
            return t, 2, k
    return t, 0, k


@njit(cache=True, nogil=True)
def run_rounds(loads, nbrs, strategy, track, pos, stamp, progress, enq_round, enq_load,
               visited, visit_count, cover_round, counters, dgen, sgen,
               t0, t_end, out_max, out_empty, out_over, stop_max_le, stop_on_cover):
    # counters: [max_wait, wait_violations, covered_balls, overload_violations]
    n = loads.size
    src = np.empty(n, np.int64)
    dst = np.empty(n, np.int64)
    sel = np.empty(n, np.int64)
    cap = 16
    while cap < 2 * loads.max():
        cap *= 2
    qb, qh, qc = _build_queues(pos, stamp, n, cap if track else 1)
    t = t0
    k = -1
    while True:
        t, status, k = _rounds(loads, nbrs, strategy, track, pos, stamp, progress, enq_round,
                               enq_load, visited, visit_count, cover_round, counters, dgen,
                               sgen, t, t_end, out_max, out_empty, out_over, stop_max_le,
                               stop_on_cover, qb, qh, qc, src, dst, sel, k)
        if status != 3:
            return t, status
        qb = _grow_queues(qb, qh, qc)


@njit(cache=True, nogil=True)
def tetris_rounds(loads, a, gen, t0, t_end, last_empty, first_empty,
                  rec, rec_col, out_max, out_empty, stop_all_empty):
    n = loads.size
    recording = rec.shape[0] > 0
    unseen = 0
    for u in range(n):
        if first_empty[u] < 0:
            unseen += 1
    t = t0
    while t < t_end:
        t += 1
        for u in range(n):
            loads[u] -= np.int64(loads[u] > 0)
        for i in range(a):
            v = int(gen.random() * n)
            if v >= n:
                v = n - 1
            loads[v] += 1
            if recording and rec_col[v] >= 0:
                rec[t, rec_col[v]] += 1
        mx = 0
        e = 0
        for u in range(n):
            L = loads[u]
            if L == 0:
                e += 1
                last_empty[u] = t
                if first_empty[u] < 0:
                    first_empty[u] = t
                    unseen -= 1
            mx = max(mx, L)
        out_max[t] = mx
        out_empty[t] = e
        if stop_all_empty and unseen == 0:
            return t, 2
    return t, 0


@njit(cache=True, nogil=True)
def coupled_rounds(q, h, a, dgen, fgen, t0, t_end, out_qmax, out_qempty,
                   out_qover, out_hmax, out_coupled, out_dom, out_event, counters):
    # counters: [case_ii_rounds, non_dominated_rounds, induction_violations, dominated_now]
    n = q.size
    src = np.empty(n, np.int64)
    dst = np.empty(n, np.int64)
    free = np.empty(a, np.int64)
    t = t0
    while t < t_end:
        t += 1
        k = 0
        for u in range(n):
            src[k] = u
            k += np.int64(q[u] > 0)
        for j in range(k):
            r = int(dgen.random() * n)
            if r >= n:
                r = n - 1
            dst[j] = r
        for i in range(a):
            r = int(fgen.random() * n)
            if r >= n:
                r = n - 1
            free[i] = r
        case_i = k <= a
        for j in range(k):
            q[src[j]] -= 1
        for j in range(k):
            q[dst[j]] += 1
        for u in range(n):
            h[u] -= np.int64(h[u] > 0)
        first_free = 0
        if case_i:
            for j in range(k):
                h[dst[j]] += 1
            first_free = k
        for i in range(first_free, a):
            h[free[i]] += 1
        dom = True
        qm = 0
        hm = 0
        e = 0
        o = 0
        for u in range(n):
            if h[u] < q[u]:
                dom = False
            qm = max(qm, q[u])
            hm = max(hm, h[u])
            e += np.int64(q[u] == 0)
            o += np.int64(q[u] > 1)
        out_qmax[t] = qm
        out_qempty[t] = e
        out_qover[t] = o
        out_hmax[t] = hm
        out_coupled[t] = case_i
        out_dom[t] = dom
        out_event[t] = 4 * e >= n
        if not case_i:
            counters[0] += 1
        if not dom:
            counters[1] += 1
            if counters[3] == 1 and case_i:
                counters[2] += 1
        counters[3] = 1 if dom else 0
    return t, 0


@njit(cache=True, nogil=True)
def batch_loads(q0, buf, configs, arrivals):
    # buf: (trials, rounds, n); the j-th non-empty bin of trial i in round r
    # reads buf[i, r, j]
    trials, rounds, n = buf.shape
    q = np.empty(n, np.int64)
    src = np.empty(n, np.int64)
    for i in range(trials):
        for u in range(n):
            q[u] = q0[u]
            configs[i, 0, u] = q0[u]
        for r in range(rounds):
            k = 0
            for u in range(n):
                if q[u] > 0:
                    src[k] = u
                    k += 1
            for j in range(k):
                q[src[j]] -= 1
            for j in range(k):
                v = int(buf[i, r, j] * n)
                if v >= n:
                    v = n - 1
                q[v] += 1
                arrivals[i, r, v] += 1
            for u in range(n):
                configs[i, r + 1, u] = q[u]


@njit(cache=True, nogil=True)
def batch_single_cover(n, start, buf, out):
    # one ball on the complete graph; trial i moves to floor(buf[i, r] * n) in round r + 1
    trials, horizon = buf.shape
    seen = np.zeros(n, np.bool_)
    for i in range(trials):
        seen[:] = False
        seen[start] = True
        count = 1
        out[i] = -1
        for r in range(horizon):
            v = int(buf[i, r] * n)
            if v >= n:
                v = n - 1
            if not seen[v]:
                seen[v] = True
                count += 1
                if count == n:
                    out[i] = r + 1
                    break
