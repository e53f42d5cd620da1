"""Vectorised numpy versions of the round kernels (one python step per round).

Same signatures, same stream consumption and same outputs as
``_kernels_numba``; used when numba is unavailable or disabled.
"""

import numpy as np

FIFO, LIFO, RANDOM = 0, 1, 2


def _idx(u, k):
    r = (u * k).astype(np.int64)
    return np.minimum(r, np.asarray(k, dtype=np.int64) - 1)


def _select(loads, src, strategy, pos, stamp, sgen):
    # balls sorted by (bin, stamp): each bin's queue is a contiguous run
    order = np.lexsort((stamp, pos))
    starts = np.cumsum(loads) - loads
    L = loads[src]
    if strategy == FIFO:
        return order[starts[src]]
    if strategy == LIFO:
        return order[starts[src] + L - 1]
    r = _idx(sgen.random(src.size), L)
    return order[starts[src] + r]


def run_rounds(loads, nbrs, strategy, track, pos, stamp, progress, enq_round, enq_load,
               visited, visit_count, cover_round, counters, dgen, sgen,
               t0, t_end, out_max, out_empty, out_over, stop_max_le, stop_on_cover):
    n = loads.size
    m = pos.size
    complete = nbrs.shape[0] == 0
    deg = n if complete else nbrs.shape[1]
    cover = visited.shape[0] > 0
    t = t0
    while t < t_end:
        t += 1
        src = np.flatnonzero(loads)
        k = src.size
        r = _idx(dgen.random(k), deg)
        dst = r if complete else nbrs[src, r]
        if track:
            sel = _select(loads, src, strategy, pos, stamp, sgen)
        loads[src] -= 1
        loads += np.bincount(dst, minlength=n)
        if track and k:
            w = t - enq_round[sel]
            counters[0] = max(counters[0], int(w.max()))
            counters[1] += int(np.count_nonzero(w > enq_load[sel]))
            pos[sel] = dst
            stamp[sel] = t * n + src
            progress[sel] += 1
            enq_round[sel] = t
            enq_load[sel] = loads[dst]
            if cover:
                new = ~visited[sel, dst]
                visited[sel, dst] = True
                visit_count[sel] += new
                done = sel[new & (visit_count[sel] == n)]
                cover_round[done] = t
                counters[2] += done.size
        mx = int(loads.max())
        e = int(np.count_nonzero(loads == 0))
        o = int(np.count_nonzero(loads > 1))
        out_max[t] = mx
        out_empty[t] = e
        out_over[t] = o
        if o > e + m - n:
            counters[3] += 1
        if stop_max_le >= 0 and mx <= stop_max_le:
            return t, 2
        if stop_on_cover and counters[2] == m:
            return t, 2
    return t, 0


def tetris_rounds(loads, a, gen, t0, t_end, last_empty, first_empty,
                  rec, rec_col, out_max, out_empty, stop_all_empty):
    n = loads.size
    recording = rec.shape[0] > 0
    t = t0
    while t < t_end:
        t += 1
        np.subtract(loads, 1, out=loads, where=loads > 0)
        arr = np.bincount(_idx(gen.random(a), n), minlength=n)
        loads += arr
        if recording:
            cols = rec_col >= 0
            rec[t, rec_col[cols]] += arr[cols]
        zero = loads == 0
        last_empty[zero] = t
        first_empty[zero & (first_empty < 0)] = t
        out_max[t] = loads.max()
        out_empty[t] = np.count_nonzero(zero)
        if stop_all_empty and not (first_empty < 0).any():
            return t, 2
    return t, 0


def coupled_rounds(q, h, a, dgen, fgen, t0, t_end, out_qmax, out_qempty,
                   out_qover, out_hmax, out_coupled, out_dom, out_event, counters):
    n = q.size
    t = t0
    while t < t_end:
        t += 1
        src = np.flatnonzero(q)
        k = src.size
        dst = _idx(dgen.random(k), n)
        free = _idx(fgen.random(a), n)
        case_i = k <= a
        q[src] -= 1
        q += np.bincount(dst, minlength=n)
        np.subtract(h, 1, out=h, where=h > 0)
        if case_i:
            h += np.bincount(dst, minlength=n)
            h += np.bincount(free[k:], minlength=n)
        else:
            h += np.bincount(free, minlength=n)
        dom = bool((h >= q).all())
        e = int(np.count_nonzero(q == 0))
        out_qmax[t] = q.max()
        out_qempty[t] = e
        out_qover[t] = np.count_nonzero(q > 1)
        out_hmax[t] = h.max()
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


def batch_loads(q0, buf, configs, arrivals):
    trials, rounds, n = buf.shape
    q = np.tile(np.asarray(q0, dtype=np.int64), (trials, 1))
    configs[:, 0, :] = q
    # j-th non-empty bin of a trial reads column j of that round's draws
    for r in range(rounds):
        nonempty = q > 0
        rank = np.cumsum(nonempty, axis=1) - 1
        dest = _idx(buf[:, r, :], n)
        dest = np.take_along_axis(dest, np.maximum(rank, 0), axis=1)
        q -= nonempty
        rows = np.broadcast_to(np.arange(trials)[:, None], (trials, n))[nonempty]
        np.add.at(arrivals[:, r, :], (rows, dest[nonempty]), 1)
        q += arrivals[:, r, :]
        configs[:, r + 1, :] = q


def batch_single_cover(n, start, buf, out):
    trials, horizon = buf.shape
    seen = np.zeros((trials, n), dtype=bool)
    seen[:, start] = True
    count = np.ones(trials, dtype=np.int64)
    out[:] = -1
    if n == 1:
        out[:] = 0
        return
    rows = np.arange(trials)
    for r in range(horizon):
        active = out < 0
        if not active.any():
            break
        v = _idx(buf[:, r], n)
        new = active & ~seen[rows, v]
        seen[rows[new], v[new]] = True
        count += new
        out[new & (count == n)] = r + 1
