"""Random graph sampling, deterministic test graphs, and traversal utilities.

Two random models are provided.  The rank-one weighted model connects
vertices i and j with probability 1 - exp(-w_i w_j / ell) where ell is the
total weight; the classical sparse model connects each pair with probability
p/n and carries unit weights so it flows through weight-aware code unchanged.
Both samplers are exact in distribution and deterministic given a seed.

Graphs are immutable CSR: a single sorted neighbor array plus offsets.  The
text serialization is canonical (fixed line order, shortest float repr), so
identical graphs produce byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "GraphFormatError",
    "HeavyCore",
    "sample_irg",
    "sample_irg_fixed",
    "sample_er",
    "glue_star_path",
    "extract_heavy_core",
    "bfs_layers",
    "bfs_distances",
    "components_and_diameter",
    "write_graph",
    "read_graph",
]

# above this many vertices the pairwise sampler switches from dense blocks
# to weight-bucket skip sampling
_DENSE_LIMIT = 20_000


class GraphFormatError(ValueError):
    """Malformed graph file; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form with per-vertex positive weights.

    Attributes
    ----------
    n : int
        Vertex count; vertices are 0..n-1.
    indptr : int64 array of length n+1
        Neighbor-range offsets into `indices`.
    indices : int32 array
        Concatenated neighbor lists, each sorted ascending.
    weights : float64 array of length n
        Per-vertex weights, all >= 1 for sampled graphs.
    ell : float
        Total weight, equal to weights.sum().
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    ell: float = field(default=0.0)

    def __post_init__(self):
        for a in (self.indptr, self.indices, self.weights):
            a.setflags(write=False)

    @classmethod
    def from_edges(cls, n, edges, weights=None):
        """Build from an (m, 2) edge array; order-insensitive, rejects loops."""
        if weights is None:
            weights = np.ones(n)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,):
            raise ValueError("need one weight per vertex")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = lo * n + hi
        if key.size != np.unique(key).size:
            raise ValueError("parallel edges not allowed")
        # both directions, then CSR via lexsort
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, dst.astype(np.int32), weights, float(weights.sum()))

    @property
    def n_edges(self):
        return int(self.indices.size // 2)

    def neighbors(self, v):
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degrees(self):
        return np.diff(self.indptr)

    def degree(self, v):
        return int(self.indptr[v + 1] - self.indptr[v])

    def edge_array(self):
        """All edges as an (m, 2) array with i < j, lexicographically sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.column_stack([src[keep], dst[keep]])

    def validate(self):
        """Check structural invariants; raises AssertionError on violation."""
        assert self.indptr.shape == (self.n + 1,) and self.indptr[0] == 0
        assert self.indptr[-1] == self.indices.size
        assert abs(self.ell - float(self.weights.sum())) <= 1e-9 * max(1.0, self.ell)
        deg = np.diff(self.indptr)
        assert np.all(deg >= 0)
        src = np.repeat(np.arange(self.n, dtype=np.int64), deg)
        dst = self.indices.astype(np.int64)
        assert np.all(src != dst), "self-loop"
        # sortedness within each row, no duplicates
        inner = np.ones(self.indices.size, dtype=bool)
        row_starts = self.indptr[1:-1]
        inner[row_starts[row_starts < self.indices.size]] = False  # row starts exempt
        diffs = np.diff(dst)
        assert np.all(diffs[inner[1:]] > 0), "rows must be strictly ascending"
        # symmetry: the set of (src, dst) equals the set of (dst, src)
        fwd = np.sort(src * self.n + dst)
        bwd = np.sort(dst * self.n + src)
        assert np.array_equal(fwd, bwd), "adjacency not symmetric"


# -- exact skip-sampling helpers ---------------------------------------


def _skip_positions(rng, total, p):
    """Positions of successes among `total` Bernoulli(p) slots, via geometric gaps."""
    if total <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0 - 1e-12:
        return np.arange(total, dtype=np.int64)
    log_q = math.log1p(-p)
    chunks = []
    pos = -1
    while True:
        remaining = total - 1 - pos
        if remaining <= 0:
            break
        expect = remaining * p
        batch = int(expect + 6.0 * math.sqrt(expect) + 16.0)
        u = rng.random(batch)
        gaps = 1 + np.floor(np.log1p(-u) / log_q).astype(np.int64)
        cand = pos + np.cumsum(gaps)
        inside = cand[cand < total]
        chunks.append(inside)
        if inside.size < cand.size:
            break
        pos = int(cand[-1])
    return np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def _unrank_pairs(pos, s):
    """Map lexicographic rank to (i, j), 0 <= i < j < s."""
    i_all = np.arange(s, dtype=np.int64)
    before = i_all * (s - 1) - (i_all * (i_all - 1)) // 2
    row = np.searchsorted(before, pos, side="right") - 1
    col = pos - before[row] + row + 1
    return row, col


def _sample_edges_dense(weights, ell, rng):
    """All-pairs sampler; exact, O(n^2), used for modest n."""
    n = weights.size
    rows_per_block = max(1, (1 << 22) // max(n, 1))
    out = []
    for r0 in range(0, n, rows_per_block):
        r1 = min(r0 + rows_per_block, n)
        j0 = r0 + 1
        if j0 >= n:
            break
        block_w = weights[r0:r1, None] * weights[None, j0:n] / ell
        p = -np.expm1(-block_w)
        u = rng.random(p.shape)
        rows = np.arange(r0, r1, dtype=np.int64)[:, None]
        cols = np.arange(j0, n, dtype=np.int64)[None, :]
        hit = (u < p) & (cols > rows)
        ri, ci = np.nonzero(hit)
        out.append(np.column_stack([ri + r0, ci + j0]))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(out)


def _sample_edges_bucketed(weights, ell, rng):
    """Weight-bucket skip sampler; exact, near edge-linear runtime.

    Vertices are sorted by descending weight and grouped into factor-2
    buckets.  Within each bucket pair a single upper-bound probability
    dominates every pairwise probability, so candidate pairs arrive via
    geometric skipping and thin to the exact law by rejection.
    """
    n = weights.size
    order = np.argsort(-weights, kind="stable")
    ws = weights[order]
    wmax = ws[0]
    ids = np.floor(np.log2(wmax / ws)).astype(np.int64)
    np.maximum(ids, 0, out=ids)
    # bucket boundaries in the sorted array
    n_buckets = int(ids[-1]) + 1
    starts = np.searchsorted(ids, np.arange(n_buckets + 1))
    out = []
    for a in range(n_buckets):
        a0, a1 = starts[a], starts[a + 1]
        if a1 == a0:
            continue
        for b in range(a, n_buckets):
            b0, b1 = starts[b], starts[b + 1]
            if b1 == b0:
                continue
            cap = -math.expm1(-float(ws[a0]) * float(ws[b0]) / ell)
            if a == b:
                s = int(a1 - a0)
                total = s * (s - 1) // 2
                pos = _skip_positions(rng, total, cap)
                li, lj = _unrank_pairs(pos, s)
                gi, gj = a0 + li, a0 + lj
            else:
                total = int(a1 - a0) * int(b1 - b0)
                pos = _skip_positions(rng, total, cap)
                span = int(b1 - b0)
                gi = a0 + pos // span
                gj = b0 + pos % span
            if gi.size == 0:
                continue
            p_exact = -np.expm1(-ws[gi] * ws[gj] / ell)
            keep = rng.random(gi.size) < p_exact / cap
            if np.any(keep):
                out.append(np.column_stack([order[gi[keep]], order[gj[keep]]]))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(out)


# -- public samplers ---------------------------------------------------


def sample_irg_fixed(weights, seed):
    """Sample edges of the rank-one model for a caller-supplied weight vector."""
    weights = np.asarray(weights, dtype=float)
    n = weights.size
    if n < 1:
        raise ValueError("need at least one vertex")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    ell = float(weights.sum())
    rng = np.random.default_rng(seed)
    if n <= _DENSE_LIMIT:
        edges = _sample_edges_dense(weights, ell, rng)
    else:
        edges = _sample_edges_bucketed(weights, ell, rng)
    return Graph.from_edges(n, edges, weights)


def sample_irg(n, model, seed):
    """Draw n i.i.d. weights from `model`, then sample the rank-one graph.

    Weight draws consume the RNG first, then edges; the whole graph is a
    deterministic function of (n, model, seed).
    """
    if n < 1:
        raise ValueError("need at least one vertex")
    rng = np.random.default_rng(seed)
    weights = np.asarray(model.sample(rng, size=n), dtype=float)
    ell = float(weights.sum())
    if n <= _DENSE_LIMIT:
        edges = _sample_edges_dense(weights, ell, rng)
    else:
        edges = _sample_edges_bucketed(weights, ell, rng)
    return Graph.from_edges(n, edges, weights)


def sample_er(n, p, seed):
    """Sparse binomial graph: every pair independently an edge with probability p/n.

    Weights are set to 1.  Runtime is proportional to the edge count via
    geometric skipping over the C(n, 2) pair ranks.
    """
    if n < 1:
        raise ValueError("need at least one vertex")
    q = p / n
    if q < 0.0 or q > 1.0:
        raise ValueError("edge probability p/n must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    total = n * (n - 1) // 2
    pos = _skip_positions(rng, total, q)
    i, j = _unrank_pairs(pos, n)
    return Graph.from_edges(n, np.column_stack([i, j]))


def glue_star_path(ell, M):
    """Deterministic path of `ell` star centers, each with M-1 private leaves.

    Spine vertices come first (0..ell-1, consecutive ones joined), then the
    leaves of spine vertex i occupy the block ell + i*(M-1) onward.  A star
    of size M counts its center, so total vertex count is ell*M.
    """
    if ell < 1 or M < 1:
        raise ValueError("need ell >= 1 and M >= 1")
    edges = []
    for i in range(ell - 1):
        edges.append((i, i + 1))
    for i in range(ell):
        base = ell + i * (M - 1)
        for t in range(M - 1):
            edges.append((i, base + t))
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(ell * M, edges)


# -- analysis helpers --------------------------------------------------


@dataclass(frozen=True)
class HeavyCore:
    vertices: np.ndarray
    fraction: float
    threshold: float


def extract_heavy_core(g, p):
    """Vertices whose weight clears sqrt(4 p mean-weight).

    Pairs inside this set connect with probability at least p/n, so the
    induced subgraph dominates a sparse binomial graph.  The empirical mean
    ell/n stands in for the weight expectation.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    thr = math.sqrt(4.0 * p * g.ell / g.n)
    vs = np.flatnonzero(g.weights >= thr)
    return HeavyCore(vs, vs.size / g.n, thr)


def bfs_distances(g, src, allowed=None):
    """Hop distances from src (-1 where unreachable), optionally restricted.

    `allowed` is a boolean mask; vertices outside it are never entered.
    src itself is always entered.
    """
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[src] = 0
    frontier = np.array([src], dtype=np.int64)
    d = 0
    while frontier.size:
        starts = g.indptr[frontier]
        counts = g.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        flat = np.repeat(starts - offsets, counts) + np.arange(total)
        cand = g.indices[flat].astype(np.int64)
        fresh = dist[cand] < 0
        if allowed is not None:
            fresh &= allowed[cand]
        frontier = np.unique(cand[fresh])
        d += 1
        dist[frontier] = d
    return dist


def bfs_layers(g, v, restrict, radius):
    """Sizes of the distance-k layers around v inside restrict, 0 <= k <= radius.

    `restrict` is an iterable of vertex ids or None for the whole graph; v
    itself always counts as layer 0, whether or not it is in restrict.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    allowed = None
    if restrict is not None:
        allowed = np.zeros(g.n, dtype=bool)
        allowed[np.asarray(list(restrict), dtype=np.int64)] = True
        allowed[v] = True
    dist = bfs_distances(g, v, allowed)
    sizes = np.zeros(radius + 1, dtype=np.int64)
    reached = dist[(dist >= 0) & (dist <= radius)]
    np.add.at(sizes, reached, 1)
    return sizes


def _eccentricity(g, src, allowed=None):
    dist = bfs_distances(g, src, allowed)
    return int(dist.max()), dist


def _exact_diameter(g, members):
    """Exact diameter of one connected component by pruned repeated search.

    Runs a full traversal from a max-degree root, then sweeps the BFS levels
    top-down keeping a lower bound from observed eccentricities; any path
    through shallower vertices is at most twice their depth, which bounds
    the remaining search and lets most levels be skipped.
    """
    allowed = np.zeros(g.n, dtype=bool)
    allowed[members] = True
    degs = g.degrees()[members]
    root = int(members[int(np.argmax(degs))])
    ecc_root, dist = _eccentricity(g, root, allowed)
    lb = ecc_root
    for level in range(ecc_root, 0, -1):
        if lb >= 2 * level:
            break
        for v in np.flatnonzero(dist == level):
            ecc, _ = _eccentricity(g, int(v), allowed)
            lb = max(lb, ecc)
    return lb


# exact diameter above this component size is replaced by a two-sweep bound
_EXACT_DIAMETER_LIMIT = 50_000


def components_and_diameter(g):
    """Connected component sizes (descending) and the largest one's diameter.

    Returns (sizes, diameter, exact_flag).  The diameter is exact for
    components up to 50k vertices, otherwise a two-sweep lower bound with
    exact_flag False.
    """
    visited = np.zeros(g.n, dtype=bool)
    comps = []
    largest_members = None
    deg = g.degrees()
    isolated = int(np.count_nonzero(deg == 0))
    visited[deg == 0] = True
    comps.extend([1] * isolated)
    for v in range(g.n):
        if visited[v]:
            continue
        dist = bfs_distances(g, v)
        members = np.flatnonzero(dist >= 0)
        visited[members] = True
        comps.append(members.size)
        if largest_members is None or members.size > largest_members.size:
            largest_members = members
    comps.sort(reverse=True)
    if largest_members is None or largest_members.size == 1:
        return comps, 0, True
    if largest_members.size <= _EXACT_DIAMETER_LIMIT:
        return comps, _exact_diameter(g, largest_members), True
    allowed = np.zeros(g.n, dtype=bool)
    allowed[largest_members] = True
    _, dist = _eccentricity(g, int(largest_members[0]), allowed)
    far = int(np.argmax(dist))
    ecc2, _ = _eccentricity(g, far, allowed)
    return comps, ecc2, False


# -- serialization -----------------------------------------------------


def write_graph(g, path, comments=()):
    """Write the canonical text form; `comments` go first as '#' lines."""
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"n {g.n}\n")
        for i in range(g.n):
            fh.write(f"w {i} {float(g.weights[i])!r}\n")
        for i, j in g.edge_array():
            fh.write(f"e {i} {j}\n")


def read_graph(path):
    """Parse a graph file; tolerant of edge order, strict about content."""
    n = None
    weights = None
    w_seen = None
    edges = []
    seen = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "n":
                if n is not None:
                    raise GraphFormatError("duplicate header", lineno)
                if len(parts) != 2:
                    raise GraphFormatError("header needs exactly one count", lineno)
                try:
                    n = int(parts[1])
                except ValueError:
                    raise GraphFormatError("vertex count must be an integer", lineno)
                if n < 1:
                    raise GraphFormatError("vertex count must be positive", lineno)
                weights = np.ones(n)
                w_seen = np.zeros(n, dtype=bool)
            elif tag == "w":
                if n is None:
                    raise GraphFormatError("weight line before header", lineno)
                if len(parts) != 3:
                    raise GraphFormatError("weight line needs index and value", lineno)
                try:
                    i = int(parts[1])
                    val = float(parts[2])
                except ValueError:
                    raise GraphFormatError("malformed weight line", lineno)
                if not 0 <= i < n:
                    raise GraphFormatError(f"vertex {i} out of range", lineno)
                if w_seen[i]:
                    raise GraphFormatError(f"duplicate weight for vertex {i}", lineno)
                if not val > 0:
                    raise GraphFormatError("weights must be positive", lineno)
                weights[i] = val
                w_seen[i] = True
            elif tag == "e":
                if n is None:
                    raise GraphFormatError("edge line before header", lineno)
                if len(parts) != 3:
                    raise GraphFormatError("edge line needs two endpoints", lineno)
                try:
                    i, j = int(parts[1]), int(parts[2])
                except ValueError:
                    raise GraphFormatError("malformed edge line", lineno)
                if not (0 <= i < n and 0 <= j < n):
                    raise GraphFormatError("edge endpoint out of range", lineno)
                if i == j:
                    raise GraphFormatError("self-loop not allowed", lineno)
                key = (min(i, j), max(i, j))
                if key in seen:
                    raise GraphFormatError(f"duplicate edge {key}", lineno)
                seen.add(key)
                edges.append(key)
            else:
                raise GraphFormatError(f"unknown record type {tag!r}", lineno)
    if n is None:
        raise GraphFormatError("missing header line")
    arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, arr, weights)
