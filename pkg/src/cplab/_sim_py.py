"""Pure-Python simulation kernel.

Reference implementation of the event loop; the compiled kernel in
_sim_core must replicate it draw for draw.  Both consume uniforms from a
PCG64 stream in the same order (one for the holding time, then, if the run
survives censoring, one for event selection), use the same compensated
time accumulator, the same sum-tree layout, and the same zero-rate landing
guard, so the two backends produce bit-identical records for a given seed.
"""

from __future__ import annotations

import math

import numpy as np

# full recount of neighbor counts and rates after this many events
REFRESH_INTERVAL = 1_000_000


def run_extinction(indptr, indices, lam, init_infected, t_max, seed):
    """Run one trajectory to extinction or t_max.

    Parameters are raw CSR arrays plus a boolean infected mask (copied).
    Returns (tau, censored, events, peak_infected).
    """
    n = init_infected.shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random

    infected = init_infected.copy()
    n_inf = int(infected.sum())
    if n_inf == 0:
        return 0.0, False, 0, 0

    # infected-neighbor counts for every vertex
    cnt = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if infected[v]:
            for w in indices[indptr[v] : indptr[v + 1]]:
                cnt[w] += 1

    # sum-tree: leaves at [base, base + n), parents recomputed bottom-up
    base = 1
    while base < n:
        base *= 2
    tree = np.zeros(2 * base)
    for v in range(n):
        tree[base + v] = 1.0 if infected[v] else lam * cnt[v]
    for node in range(base - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]

    def set_leaf(v, rate):
        node = base + v
        tree[node] = rate
        node >>= 1
        while node:
            tree[node] = tree[2 * node] + tree[2 * node + 1]
            node >>= 1

    t_sum = 0.0
    comp = 0.0
    events = 0
    peak = n_inf
    until_refresh = REFRESH_INTERVAL

    while n_inf > 0:
        total = tree[1]
        dt = -math.log1p(-u()) / total
        # compensated accumulation keeps long runs exact to ~1e-16 relative
        y = dt - comp
        t_new = t_sum + y
        comp = (t_new - t_sum) - y
        if t_new > t_max:
            return t_max, True, events, peak
        t_sum = t_new

        r = u() * total
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
            # float roundoff pushed the walk past the live leaves; take the
            # highest-index vertex with positive rate (deterministic rule)
            v = n - 1
            while tree[base + v] <= 0.0:
                v -= 1

        if infected[v]:
            infected[v] = False
            n_inf -= 1
            set_leaf(v, lam * cnt[v])
            for w in indices[indptr[v] : indptr[v + 1]]:
                cnt[w] -= 1
                if not infected[w]:
                    set_leaf(w, lam * cnt[w])
        else:
            infected[v] = True
            n_inf += 1
            if n_inf > peak:
                peak = n_inf
            set_leaf(v, 1.0)
            for w in indices[indptr[v] : indptr[v + 1]]:
                cnt[w] += 1
                if not infected[w]:
                    set_leaf(w, lam * cnt[w])

        events += 1
        until_refresh -= 1
        if until_refresh == 0:
            until_refresh = REFRESH_INTERVAL
            _refresh(indptr, indices, lam, infected, cnt, tree, base, n)

    return t_sum, False, events, peak


def _refresh(indptr, indices, lam, infected, cnt, tree, base, n):
    """Recount neighbor counts, verify invariants, rebuild the tree."""
    fresh = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if infected[v]:
            for w in indices[indptr[v] : indptr[v + 1]]:
                fresh[w] += 1
    if not np.array_equal(fresh, cnt):
        raise AssertionError("incremental neighbor counts drifted")
    old_root = tree[1]
    for v in range(n):
        tree[base + v] = 1.0 if infected[v] else lam * fresh[v]
    for node in range(base - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]
    if abs(tree[1] - old_root) > 1e-9 * max(1.0, abs(tree[1])):
        raise AssertionError("rate sum drifted beyond tolerance")
