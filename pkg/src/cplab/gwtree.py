"""Marked random trees that mirror neighborhood growth in the weighted graph.

A vertex v and a disjoint vertex set U induce a mixed-Poisson branching
tree: the root carries mark v and every other node an i.i.d. mark drawn
from U with probability proportional to weight; a node with mark m has
Poisson(w_m * ell_U / ell_n) children.  Thinning removes repeat marks, and
what remains matches the breadth-first exploration of v's neighborhood
inside U, conditionally on the weights.  This module samples such trees,
applies the thinning rule, and runs the statistical comparison harness
against freshly resampled graphs.

Two deduplication notions appear.  `thin` marks a node when its mark
repeats on its own root path (the rule used by downstream consumers of the
thinned tree).  The comparison harness instead replays the tree as a
breadth-first exploration: a node counts as a discovery only when its
parent was a discovery and its mark has not been seen before in
exploration order.  A mark surfacing in two sibling subtrees still refers
to one graph vertex at one distance, and the graph search never expands a
duplicate, so layer-size laws agree with the graph exactly only under
this stronger global rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import bfs_layers, sample_irg_fixed
from .stats import pooled_count_comparison
from .weights import ScaleFunction, search_budgets

__all__ = [
    "MarkedTree",
    "CouplingReport",
    "sample_marked_tree",
    "thin",
    "layer_counts",
    "discovery_layer_counts",
    "coupling_compare",
    "subtree_high_degree_probe",
    "write_coupling_report",
]

# hard cap on sampled nodes per tree; beyond it the tree is flagged truncated
NODE_BUDGET = 1_000_000


@dataclass(frozen=True)
class MarkedTree:
    """Tree in breadth-first node order.

    `marks[i]` is the graph vertex behind node i (`marks[0]` is the seed),
    `parents[0]` is -1, `n_children` are drawn offspring counts, and
    `thinned` is None until `thin` has run.  `truncated` reports whether
    the node budget cut growth short.
    """

    marks: np.ndarray
    parents: np.ndarray
    heights: np.ndarray
    n_children: np.ndarray
    thinned: np.ndarray | None
    truncated: bool

    @property
    def size(self):
        return self.marks.size

    def depth(self):
        return int(self.heights[-1]) if self.size else 0

    def children_of(self, i):
        return np.flatnonzero(self.parents == i)


def sample_marked_tree(g, v, members, depth, rng):
    """Grow the marked tree for seed v over the mark set `members` to `depth`.

    Nodes are generated breadth-first; each node's offspring count is drawn
    first, then its children's marks in one batch, so the construction is a
    deterministic function of the RNG stream.
    """
    members = np.unique(np.asarray(list(members), dtype=np.int64))
    if members.size == 0:
        raise ValueError("mark set must be nonempty")
    if np.any((members < 0) | (members >= g.n)):
        raise ValueError("mark set out of range")
    if np.any(members == v):
        raise ValueError("seed vertex must not belong to the mark set")
    w_u = g.weights[members]
    ell_u = float(w_u.sum())
    cum = np.cumsum(w_u)
    ratio = ell_u / g.ell

    marks = [int(v)]
    parents = [-1]
    heights = [0]
    n_children = []
    truncated = False

    frontier = [0]
    for h in range(depth):
        nxt = []
        for node in frontier:
            k = int(rng.poisson(g.weights[marks[node]] * ratio))
            if len(marks) + k > NODE_BUDGET:
                k = NODE_BUDGET - len(marks)
                truncated = True
            n_children.append(k)
            if k:
                child_marks = members[np.searchsorted(cum, rng.random(k) * ell_u)]
                for m in child_marks:
                    nxt.append(len(marks))
                    marks.append(int(m))
                    parents.append(node)
                    heights.append(h + 1)
            if truncated:
                break
        if truncated:
            break
        frontier = nxt
    # nodes that never drew offspring (depth cut or budget cut) report 0
    n_children.extend([0] * (len(marks) - len(n_children)))

    return MarkedTree(
        np.array(marks, dtype=np.int64),
        np.array(parents, dtype=np.int64),
        np.array(heights, dtype=np.int64),
        np.array(n_children, dtype=np.int64),
        None,
        truncated,
    )


def thin(tree):
    """Apply the root-path repeat-mark rule; returns a flagged copy.

    A non-root node is thinned when any node on its root path is thinned
    or its mark already appears on that path.  Parents precede children in
    storage order, so one forward sweep with an ancestor climb settles
    every flag.
    """
    flags = np.zeros(tree.size, dtype=bool)
    for i in range(1, tree.size):
        p = tree.parents[i]
        if flags[p]:
            flags[i] = True
            continue
        m = tree.marks[i]
        a = p
        while a != -1:
            if tree.marks[a] == m:
                flags[i] = True
                break
            a = tree.parents[a]
    return MarkedTree(
        tree.marks, tree.parents, tree.heights, tree.n_children, flags, tree.truncated
    )


def layer_counts(tree, depth, unthinned_only=False):
    """Node count per height 0..depth, optionally only unthinned nodes."""
    sel = np.ones(tree.size, dtype=bool)
    if unthinned_only:
        if tree.thinned is None:
            raise ValueError("tree has no thinning flags yet")
        sel = ~tree.thinned
    out = np.zeros(depth + 1, dtype=np.int64)
    hs = tree.heights[sel]
    hs = hs[hs <= depth]
    np.add.at(out, hs, 1)
    return out


def discovery_layer_counts(tree, depth):
    """Vertices newly discovered per height when the tree replays a search.

    A node is a discovery when its parent is one and its mark is unseen so
    far in storage (breadth-first) order; descendants of non-discoveries
    are skipped entirely, mirroring a graph search that never expands an
    already-visited vertex.  Matches the law of breadth-first layer sizes
    around the seed.
    """
    out = np.zeros(depth + 1, dtype=np.int64)
    alive = np.zeros(tree.size, dtype=bool)
    alive[0] = True
    out[0] = 1
    seen = {int(tree.marks[0])}
    for i in range(1, tree.size):
        h = int(tree.heights[i])
        if h > depth:
            break
        if not alive[tree.parents[i]]:
            continue
        m = int(tree.marks[i])
        if m not in seen:
            seen.add(m)
            alive[i] = True
            out[h] += 1
    return out


@dataclass(frozen=True)
class CouplingReport:
    """Per-height layer-size distributions from both probability spaces.

    `tree_counts[h]` and `graph_counts[h]` are histograms over layer size
    at height h (aligned lengths); `tests[h-1]` holds (stat, p, dof) for
    heights 1..depth.  `min_pvalue` is the overall agreement verdict.
    """

    depth: int
    samples: int
    tree_counts: tuple
    graph_counts: tuple
    tests: tuple
    min_pvalue: float


def coupling_compare(g, v, members, depth, samples, rng):
    """Compare tree layer laws against resampled-graph neighborhoods.

    Tree side: `samples` marked trees, counting breadth-first discoveries
    per height.  Graph side: `samples` fresh edge sets over the same weights
    (the weights stay quenched; only edges resample), counting
    breadth-first layer sizes of v inside the mark set.  Returns pooled
    chi-square comparisons per height.
    """
    members_arr = np.unique(np.asarray(list(members), dtype=np.int64))
    tree_samples = np.zeros((samples, depth + 1), dtype=np.int64)
    for s in range(samples):
        t = sample_marked_tree(g, v, members_arr, depth, rng)
        tree_samples[s] = discovery_layer_counts(t, depth)

    graph_samples = np.zeros((samples, depth + 1), dtype=np.int64)
    seed_seq = rng.integers(0, 2**63 - 1, size=samples)
    for s in range(samples):
        h = sample_irg_fixed(g.weights, int(seed_seq[s]))
        graph_samples[s] = bfs_layers(h, v, members_arr, depth)

    tree_counts, graph_counts, tests = [], [], []
    for h in range(depth + 1):
        hi = int(max(tree_samples[:, h].max(), graph_samples[:, h].max()))
        a = np.bincount(tree_samples[:, h], minlength=hi + 1)
        b = np.bincount(graph_samples[:, h], minlength=hi + 1)
        tree_counts.append(a)
        graph_counts.append(b)
        if h >= 1:
            tests.append(pooled_count_comparison(a, b))
    min_p = min(t[1] for t in tests) if tests else 1.0
    return CouplingReport(
        depth, samples, tuple(tree_counts), tuple(graph_counts), tuple(tests), min_p
    )


def subtree_high_degree_probe(g, v, members, K, phi, samples, rng):
    """Estimate how often a shallow thinned tree holds a high-degree node.

    Probes for an unthinned node at height up to the depth budget for K
    with at least 3K+1 unthinned children; returns the hit frequency.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not isinstance(phi, ScaleFunction):
        raise TypeError("phi must be a ScaleFunction")
    probe_depth = search_budgets(K, phi).depth
    need = 3 * K + 1
    hits = 0
    for _ in range(samples):
        t = thin(sample_marked_tree(g, v, members, probe_depth + 1, rng))
        live = ~t.thinned
        kid_counts = np.zeros(t.size, dtype=np.int64)
        child_sel = live.copy()
        child_sel[0] = False
        np.add.at(kid_counts, t.parents[child_sel], 1)
        probed = live & (t.heights <= probe_depth)
        if np.any(kid_counts[probed] >= need):
            hits += 1
    return hits / samples


def write_coupling_report(report, path, comments=()):
    """Emit the comparison table: height, side, layer size, count."""
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("height,side,value,count\n")
        for h in range(report.depth + 1):
            for val, cnt in enumerate(report.tree_counts[h]):
                fh.write(f"{h},tree,{val},{cnt}\n")
            for val, cnt in enumerate(report.graph_counts[h]):
                fh.write(f"{h},graph,{val},{cnt}\n")
        fh.write(f"# samples per side: {report.samples}\n")
        for h, (stat, pval, dof) in enumerate(report.tests, start=1):
            fh.write(f"# height {h}: chi2 {stat:.4f} dof {dof} p {pval:.5f}\n")
        fh.write(f"# minimum p-value: {report.min_pvalue:.5f}\n")
