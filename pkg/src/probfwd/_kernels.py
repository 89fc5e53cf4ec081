"""Numba kernels for packet propagation and cluster labeling.

Private module. Every kernel releases the GIL so thread pools get real
parallelism, and caches its compilation on disk. The BFS convention is
shared by all propagation kernels: the source always forwards; any other
vertex forwards at most once, decided on first reception; receivers are
exactly the vertices adjacent to at least one forwarder.
"""
import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(**_JIT)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(**_JIT)
def label_grid(open_flat, m, labels):
    """Union-find labeling of open sites on an m x m grid, 4-adjacency.

    labels (int32, m*m) receives -1 for closed sites and a compact cluster
    id (0..n_clusters-1, order of first appearance) for open sites.
    Returns the number of clusters.
    """
    n = m * m
    parent = np.empty(n, np.int32)
    size = np.empty(n, np.int32)
    for i in range(n):
        parent[i] = i
        size[i] = 1
    for r in range(m):
        base = r * m
        for c in range(m):
            i = base + c
            if not open_flat[i]:
                continue
            if c > 0 and open_flat[i - 1]:
                _union(parent, size, i, i - 1)
            if r > 0 and open_flat[i - m]:
                _union(parent, size, i, i - m)
    idmap = np.full(n, -1, np.int32)
    next_id = 0
    for i in range(n):
        if open_flat[i]:
            root = _find(parent, i)
            if idmap[root] < 0:
                idmap[root] = next_id
                next_id += 1
            labels[i] = idmap[root]
        else:
            labels[i] = -1
    return next_id


@njit(**_JIT)
def single_packet(indptr, indices, source, fire, fwd, recv):
    """One packet: fill forwarder and receiver masks given fire indicators.

    fire[v] is the precomputed decision 'v would forward on first
    reception' (indicator fired and v is not muted); fire[source] is
    ignored because the source always transmits.
    """
    n_vertices = indptr.size - 1
    for i in range(n_vertices):
        fwd[i] = False
        recv[i] = False
    queue = np.empty(n_vertices, np.int64)
    fwd[source] = True
    queue[0] = source
    qh, qt = 0, 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if w != source and not recv[w]:
                recv[w] = True
                if fire[w]:
                    fwd[w] = True
                    queue[qt] = w
                    qt += 1
    for e in range(indptr[source], indptr[source + 1]):
        if fwd[indices[e]]:
            recv[source] = True
            break
    return


@njit(**_JIT)
def trial_counts(indptr, indices, source, mute, u, p, counts):
    """One trial of n packets; adds per-vertex receptions into counts.

    u is the (vertex_count - 1, n) threshold matrix; vertex v maps to row
    v - 1 for v > source, row v otherwise. Vertex v forwards packet j iff
    u[row, j] <= p and v is not muted. The source's receptions are not
    tallied (its count is fixed at n by convention). Returns total
    transmissions.
    """
    n_vertices = indptr.size - 1
    n_packets = u.shape[1]
    state = np.empty(n_vertices, np.uint8)
    queue = np.empty(n_vertices, np.int64)
    total = 0
    for j in range(n_packets):
        for i in range(n_vertices):
            state[i] = 0
        state[source] = 2
        queue[0] = source
        qh, qt = 0, 1
        while qh < qt:
            v = queue[qh]
            qh += 1
            total += 1
            for e in range(indptr[v], indptr[v + 1]):
                w = indices[e]
                if state[w] == 0:
                    state[w] = 1
                    counts[w] += 1
                    if not mute[w]:
                        row = w - 1 if w > source else w
                        if u[row, j] <= p:
                            state[w] = 2
                            queue[qt] = w
                            qt += 1
    return total


@njit(**_JIT)
def batch_trial_stats(indptr, indices, source, mute, u3, p, k, r_out, t_out):
    """Batch of trials: successful-receiver and transmission totals.

    u3 is (batch, vertex_count - 1, n). For each trial, r_out gets the
    number of vertices holding >= k distinct packets (source included via
    the n >= k convention) and t_out the summed forwarder count.
    """
    batch = u3.shape[0]
    n_vertices = indptr.size - 1
    n_packets = u3.shape[2]
    counts = np.empty(n_vertices, np.int32)
    state = np.empty(n_vertices, np.uint8)
    queue = np.empty(n_vertices, np.int64)
    for b in range(batch):
        for i in range(n_vertices):
            counts[i] = 0
        total = 0
        for j in range(n_packets):
            for i in range(n_vertices):
                state[i] = 0
            state[source] = 2
            queue[0] = source
            qh, qt = 0, 1
            while qh < qt:
                v = queue[qh]
                qh += 1
                total += 1
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    if state[w] == 0:
                        state[w] = 1
                        counts[w] += 1
                        if not mute[w]:
                            row = w - 1 if w > source else w
                            if u3[b, row, j] <= p:
                                state[w] = 2
                                queue[qt] = w
                                qt += 1
        received = 1 if n_packets >= k else 0
        for i in range(n_vertices):
            if i != source and counts[i] >= k:
                received += 1
        r_out[b] = received
        t_out[b] = total
    return


@njit(**_JIT)
def coupled_prefix_curves(indptr, indices, source, mute, u3, p, k, r_out, t_out):
    """Batch of trials evaluated at one p, resolved by packet prefix.

    r_out/t_out are (batch, n) int64: r_out[b, j] is the successful count
    of trial b when only packets 0..j are sent, t_out[b, j] the matching
    transmission total. Along j both are nondecreasing by construction,
    and raising p can only grow them pathwise (same u3).
    """
    batch = u3.shape[0]
    n_vertices = indptr.size - 1
    n_packets = u3.shape[2]
    counts = np.empty(n_vertices, np.int32)
    state = np.empty(n_vertices, np.uint8)
    queue = np.empty(n_vertices, np.int64)
    for b in range(batch):
        for i in range(n_vertices):
            counts[i] = 0
        succ = 0
        total = 0
        for j in range(n_packets):
            for i in range(n_vertices):
                state[i] = 0
            state[source] = 2
            queue[0] = source
            qh, qt = 0, 1
            while qh < qt:
                v = queue[qh]
                qh += 1
                total += 1
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    if state[w] == 0:
                        state[w] = 1
                        counts[w] += 1
                        if counts[w] == k:
                            succ += 1
                        if not mute[w]:
                            row = w - 1 if w > source else w
                            if u3[b, row, j] <= p:
                                state[w] = 2
                                queue[qt] = w
                                qt += 1
            src_ok = 1 if j + 1 >= k else 0
            r_out[b, j] = succ + src_ok
            t_out[b, j] = total
    return


@njit(**_JIT)
def enumerate_reception(indptr, indices, source, free_idx, weights, recv_prob):
    """Exact per-packet law by enumerating all indicator patterns.

    free_idx lists the vertices whose forwarding indicator actually
    matters (non-source, non-muted); weights[b] is the probability of a
    pattern with b indicators set. Accumulates into recv_prob[v] the
    probability that v receives a given packet, and returns the expected
    forwarder count per packet.
    """
    n_vertices = indptr.size - 1
    n_free = free_idx.size
    fire = np.zeros(n_vertices, np.uint8)
    fwd = np.empty(n_vertices, np.uint8)
    recv = np.empty(n_vertices, np.uint8)
    queue = np.empty(n_vertices, np.int64)
    expected_fwd = 0.0
    for mask in range(1 << n_free):
        bits = 0
        for i in range(n_free):
            on = (mask >> i) & 1
            fire[free_idx[i]] = on
            bits += on
        w = weights[bits]
        for i in range(n_vertices):
            fwd[i] = 0
            recv[i] = 0
        fwd[source] = 1
        queue[0] = source
        qh, qt = 0, 1
        n_fwd = 0
        while qh < qt:
            v = queue[qh]
            qh += 1
            n_fwd += 1
            for e in range(indptr[v], indptr[v + 1]):
                x = indices[e]
                if x != source and recv[x] == 0:
                    recv[x] = 1
                    if fire[x] == 1 and fwd[x] == 0:
                        fwd[x] = 1
                        queue[qt] = x
                        qt += 1
        for e in range(indptr[source], indptr[source + 1]):
            if fwd[indices[e]] == 1:
                recv[source] = 1
                break
        expected_fwd += w * n_fwd
        for i in range(n_vertices):
            if recv[i] == 1:
                recv_prob[i] += w
    return expected_fwd


def warm():
    """Trigger compilation of every kernel on toy inputs."""
    indptr = np.array([0, 1, 2], np.int64)
    indices = np.array([1, 0], np.int64)
    mute = np.zeros(2, np.bool_)
    labels = np.empty(4, np.int32)
    label_grid(np.ones(4, np.bool_), 2, labels)
    fwd = np.empty(2, np.bool_)
    recv = np.empty(2, np.bool_)
    single_packet(indptr, indices, 0, np.ones(2, np.bool_), fwd, recv)
    counts = np.zeros(2, np.int32)
    u = np.zeros((1, 1))
    trial_counts(indptr, indices, 0, mute, u, 0.5, counts)
    u3 = np.zeros((1, 1, 1))
    r1 = np.empty(1, np.int64)
    t1 = np.empty(1, np.int64)
    batch_trial_stats(indptr, indices, 0, mute, u3, 0.5, 1, r1, t1)
    r2 = np.empty((1, 1), np.int64)
    t2 = np.empty((1, 1), np.int64)
    coupled_prefix_curves(indptr, indices, 0, mute, u3, 0.5, 1, r2, t2)
    rp = np.zeros(2)
    enumerate_reception(indptr, indices, 0, np.array([1], np.int64),
                        np.array([0.5, 0.5]), rp)
