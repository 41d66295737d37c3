# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.

Mirror of _sim_py.run_extinction: same uniform-draw order from the same
PCG64 stream, same compensated time accumulator, same sum-tree layout and
zero-rate landing guard.  Records are bit-identical to the fallback; only
the speed differs.  The event loop runs without the interpreter lock so
batches can use thread pools.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p
from numpy.random cimport bitgen_t

cnp.import_array()

# full recount of neighbor counts and rates after this many events
REFRESH_INTERVAL = 1_000_000

cdef long long _REFRESH = REFRESH_INTERVAL


cdef inline void _set_leaf(double[::1] tree, long long base, long long v,
                           double rate) noexcept nogil:
    cdef long long node = base + v
    tree[node] = rate
    node >>= 1
    while node:
        tree[node] = tree[2 * node] + tree[2 * node + 1]
        node >>= 1


cdef int _refresh_state(const cnp.int64_t[::1] indptr,
                        const cnp.int32_t[::1] indices,
                        double lam,
                        const cnp.uint8_t[::1] infected,
                        cnp.int64_t[::1] cnt,
                        cnp.int64_t[::1] scratch,
                        double[::1] tree,
                        long long base,
                        long long n) noexcept nogil:
    cdef long long v, e, node
    cdef double old_root, tol
    for v in range(n):
        scratch[v] = 0
    for v in range(n):
        if infected[v]:
            for e in range(indptr[v], indptr[v + 1]):
                scratch[indices[e]] += 1
    for v in range(n):
        if scratch[v] != cnt[v]:
            return 1
    old_root = tree[1]
    for v in range(n):
        if infected[v]:
            tree[base + v] = 1.0
        else:
            tree[base + v] = lam * cnt[v]
    for node in range(base - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]
    tol = 1e-9 * (1.0 if tree[1] < 1.0 else tree[1])
    if tree[1] - old_root > tol or old_root - tree[1] > tol:
        return 2
    return 0


def run_extinction(indptr_arr, indices_arr, double lam, init_infected,
                   double t_max, seed):
    """Run one trajectory to extinction or t_max.

    Same contract as _sim_py.run_extinction: raw CSR arrays plus a boolean
    infected mask (copied); returns (tau, censored, events, peak_infected).
    """
    cdef const cnp.int64_t[::1] indptr = np.ascontiguousarray(indptr_arr, dtype=np.int64)
    cdef const cnp.int32_t[::1] indices = np.ascontiguousarray(indices_arr, dtype=np.int32)
    cdef long long n = init_infected.shape[0]

    bit_generator = np.random.PCG64(seed)
    capsule = bit_generator.capsule
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    inf_np = np.ascontiguousarray(init_infected).astype(np.uint8)
    cdef cnp.uint8_t[::1] infected = inf_np
    cdef long long n_inf = int(inf_np.sum())
    if n_inf == 0:
        return 0.0, False, 0, 0

    cnt_np = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cnt = cnt_np
    cdef cnp.int64_t[::1] scratch = np.zeros(n, dtype=np.int64)

    cdef long long base = 1
    while base < n:
        base *= 2
    tree_np = np.zeros(2 * base)
    cdef double[::1] tree = tree_np

    cdef long long v, w, e, node
    cdef double total, dt, y, t_new, r, left
    cdef double t_sum = 0.0
    cdef double comp = 0.0
    cdef long long events = 0
    cdef long long peak = n_inf
    cdef long long until_refresh = _REFRESH
    cdef double tau = 0.0
    cdef int censored = 0
    cdef int drift = 0

    with nogil:
        for v in range(n):
            if infected[v]:
                for e in range(indptr[v], indptr[v + 1]):
                    cnt[indices[e]] += 1
        for v in range(n):
            if infected[v]:
                tree[base + v] = 1.0
            else:
                tree[base + v] = lam * cnt[v]
        for node in range(base - 1, 0, -1):
            tree[node] = tree[2 * node] + tree[2 * node + 1]

        while n_inf > 0:
            total = tree[1]
            dt = -log1p(-rng.next_double(rng.state)) / total
            y = dt - comp
            t_new = t_sum + y
            comp = (t_new - t_sum) - y
            if t_new > t_max:
                tau = t_max
                censored = 1
                break
            t_sum = t_new

            r = rng.next_double(rng.state) * total
            node = 1
            while node < base:
                node *= 2
                left = tree[node]
                if r < left:
                    continue
                r -= left
                node += 1
            v = node - base
            if v >= n or tree[base + v] <= 0.0:
                v = n - 1
                while tree[base + v] <= 0.0:
                    v -= 1

            if infected[v]:
                infected[v] = 0
                n_inf -= 1
                _set_leaf(tree, base, v, lam * cnt[v])
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    cnt[w] -= 1
                    if not infected[w]:
                        _set_leaf(tree, base, w, lam * cnt[w])
            else:
                infected[v] = 1
                n_inf += 1
                if n_inf > peak:
                    peak = n_inf
                _set_leaf(tree, base, v, 1.0)
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    cnt[w] += 1
                    if not infected[w]:
                        _set_leaf(tree, base, w, lam * cnt[w])

            events += 1
            until_refresh -= 1
            if until_refresh == 0:
                until_refresh = _REFRESH
                drift = _refresh_state(indptr, indices, lam, infected, cnt,
                                       scratch, tree, base, n)
                if drift:
                    break

        if n_inf == 0:
            tau = t_sum

    if drift == 1:
        raise AssertionError("incremental neighbor counts drifted")
    if drift == 2:
        raise AssertionError("rate sum drifted beyond tolerance")
    return tau, bool(censored), int(events), int(peak)
