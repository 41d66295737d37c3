"""Search procedures that certify a graph contains many disjoint stars.

The inhomogeneous-graph pipeline runs in stages.  An exploration walks
outward from a start vertex through a shrinking source set, looking for a
vertex with at least 3K source neighbors; on success it reserves three
disjoint seed sets of size K.  A trial chains explorations level by level
to build a short run of such centers.  The seed-chain stage repeats trials
on the leftover source until one succeeds, and the collection stage then
spends seed sets as experiment fodder, each success minting a new center
with two fresh seed sets, until enough sets are banked.  The certificate
assembled from the collected centers is re-checked from scratch by an
independent validator that reads only the graph.

For homogeneous graphs a simpler greedy scan claims star leaves from the
upper half of the vertex range and threads a path through the selected
centers.

Bookkeeping rule used throughout: a vertex leaves the source at most once
(the masks only ever flip True to False), so centers and seed sets from
different stages never overlap.  Every "arbitrary" choice in the
procedures is resolved lowest-index-first, which makes the whole pipeline
deterministic for a fixed graph.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .weights import ScaleFunction, search_budgets

__all__ = [
    "SearchConfig",
    "ExplorationResult",
    "TrialResult",
    "SeedChain",
    "CollectedCenter",
    "CollectionResult",
    "Star",
    "StarCertificate",
    "CertificateCheck",
    "GreedyStars",
    "StructureSearchError",
    "CertificateFormatError",
    "explore",
    "trial",
    "build_seed_chain",
    "experiment",
    "grow_collection",
    "collection_limits",
    "certify_irg",
    "validate_certificate",
    "er_greedy_stars",
    "long_path",
    "certify_er",
    "write_certificate",
    "read_certificate",
]


class StructureSearchError(Exception):
    """A pipeline stage failed; `stage` names it, `details` says why."""

    def __init__(self, stage, details):
        super().__init__(f"{stage}: {details}")
        self.stage = stage
        self.details = details


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the star-search pipeline.

    seed_size is the per-set reservation size K; scale sets the depth
    budget; levels is the chain length a trial must reach; max_trials
    bounds the retries of the chain stage (None picks ceil(ln n) at run
    time); growth_fraction is the fraction of n budgeting the collection
    stage.  The seed is recorded for provenance; the search itself is
    deterministic.
    """

    seed_size: int
    scale: ScaleFunction
    levels: int = 1
    max_trials: int | None = None
    growth_fraction: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.seed_size < 1:
            raise ValueError("seed_size must be >= 1")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.max_trials is not None and self.max_trials < 0:
            raise ValueError("max_trials must be >= 0")
        if not 0.0 < self.growth_fraction < 1.0:
            raise ValueError("growth_fraction must be in (0, 1)")


@dataclass(frozen=True)
class ExplorationResult:
    success: bool
    center: int | None
    seeds: tuple | None
    remaining_source: np.ndarray
    discovered_tree: tuple
    vertices_consumed: int


@dataclass(frozen=True)
class TrialResult:
    success: bool
    centers: tuple
    seed_triples: tuple
    remaining_source: np.ndarray
    vertices_consumed: int
    explorations: int


@dataclass(frozen=True)
class SeedChain:
    success: bool
    centers: tuple
    seed_triples: tuple
    source_mask: np.ndarray
    vertices_consumed: int
    trials: int


@dataclass(frozen=True)
class CollectedCenter:
    center: int
    seed_sets: tuple
    parent: int | None
    origin: str


@dataclass(frozen=True)
class CollectionResult:
    success: bool
    centers: tuple
    active_count: int
    experiments: int
    vertices_consumed: int
    active_history: tuple
    reason: str


@dataclass(frozen=True)
class Star:
    center: int
    leaves: np.ndarray


@dataclass(frozen=True)
class StarCertificate:
    star_size: int
    spacing_bound: int
    mode: str
    stars: tuple


@dataclass(frozen=True)
class CertificateCheck:
    valid: bool
    violations: tuple


@dataclass(frozen=True)
class GreedyStars:
    selected: np.ndarray
    leaf_sets: tuple
    boundary: int


class CertificateFormatError(Exception):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class _CoreExploration:
    success: bool
    center: int | None
    seeds: tuple | None
    consumed: list
    tree_edges: list


def _neighbors_in(g, x, avail):
    nb = g.neighbors(x)
    return nb[avail[nb]]


def _explore_masked(g, v, avail, K, scale):
    """Step rule on the live source mask; flips consumed entries False.

    The waiting queue is first-in-first-out; a waiting vertex at tree
    depth equal to the depth budget does not enqueue its children.
    """
    budgets = search_budgets(K, scale)
    need = 3 * K
    waiting = deque([(v, 0)])
    consumed = []
    tree_edges = []
    while waiting:
        x, depth = waiting.popleft()
        nbrs = _neighbors_in(g, x, avail)
        if nbrs.size == 0:
            continue
        if nbrs.size >= need:
            chosen = nbrs[:need]
            avail[chosen] = False
            consumed.extend(int(u) for u in chosen)
            seeds = (
                chosen[:K].copy(),
                chosen[K : 2 * K].copy(),
                chosen[2 * K :].copy(),
            )
            assert len(consumed) <= budgets.explore_cap
            return _CoreExploration(True, int(x), seeds, consumed, tree_edges)
        avail[nbrs] = False
        consumed.extend(int(u) for u in nbrs)
        tree_edges.extend((int(x), int(u)) for u in nbrs)
        if depth + 1 <= budgets.depth:
            waiting.extend((int(u), depth + 1) for u in nbrs)
    assert len(consumed) <= budgets.explore_cap
    return _CoreExploration(False, None, None, consumed, tree_edges)


def explore(g, v, source, K, scale):
    """Search from v through `source` for a vertex with 3K source neighbors.

    Returns the outcome with the shrunken source; failure is a normal
    result, not an error.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    source = np.unique(np.asarray(list(source), dtype=np.int64))
    if np.any((source < 0) | (source >= g.n)):
        raise ValueError("source out of range")
    if np.any(source == v):
        raise ValueError("start vertex must not belong to the source")
    avail = np.zeros(g.n, dtype=bool)
    avail[source] = True
    core = _explore_masked(g, v, avail, K, scale)
    remaining = np.flatnonzero(avail)
    assert len(core.consumed) == source.size - remaining.size
    return ExplorationResult(
        core.success,
        core.center,
        core.seeds,
        remaining,
        tuple(core.tree_edges),
        len(core.consumed),
    )


def _trial_masked(g, avail, levels, K, scale):
    """One trial on the live mask: start at the lowest available vertex.

    Level 1 explores the start vertex; each later level explores the
    previous level's third seed sets (the level center's set first) and
    keeps the first success as that level's center.  The final level
    stops at its first success.
    """
    start_candidates = np.flatnonzero(avail)
    if start_candidates.size == 0:
        raise ValueError("trial needs a nonempty source")
    v = int(start_candidates[0])
    avail[v] = False
    consumed = 1
    explorations = 0
    centers = []
    triples = []
    waiting_roots = [v]
    for level in range(1, levels + 1):
        successes = []
        collected = None
        for root in waiting_roots:
            core = _explore_masked(g, root, avail, K, scale)
            explorations += 1
            consumed += len(core.consumed)
            if core.success:
                successes.append(core)
                if collected is None:
                    collected = core
                if level == levels:
                    break
        if collected is None:
            return False, centers, triples, consumed, explorations
        centers.append(collected.center)
        triples.append(collected.seeds)
        # the collected center's third set leads the next level so the
        # chain tends to extend from it
        nxt = [int(u) for u in collected.seeds[2]]
        for core in successes:
            if core is not collected:
                nxt.extend(int(u) for u in core.seeds[2])
        waiting_roots = nxt
    if K >= 2:
        assert consumed <= K ** (levels + 1) * search_budgets(K, scale).explore_cap
    return True, centers, triples, consumed, explorations


def trial(g, source, levels, K, scale):
    """Run one chain-building trial over an explicit source set."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    source = np.unique(np.asarray(list(source), dtype=np.int64))
    if source.size == 0:
        raise ValueError("trial needs a nonempty source")
    if np.any((source < 0) | (source >= g.n)):
        raise ValueError("source out of range")
    avail = np.zeros(g.n, dtype=bool)
    avail[source] = True
    ok, centers, triples, consumed, explorations = _trial_masked(
        g, avail, levels, K, scale
    )
    remaining = np.flatnonzero(avail)
    assert consumed == source.size - remaining.size
    return TrialResult(
        ok, tuple(centers), tuple(triples), remaining, consumed, explorations
    )


def build_seed_chain(g, cfg):
    """Repeat trials on the shrinking source until one yields a full chain.

    Failed trials permanently consume their vertices; the next trial
    starts from what is left.  Returns the chain with the final source
    mask for the collection stage.
    """
    max_trials = cfg.max_trials
    if max_trials is None:
        max_trials = max(cfg.levels, math.ceil(math.log(max(g.n, 2))))
    avail = np.ones(g.n, dtype=bool)
    consumed_total = 0
    for t in range(1, max_trials + 1):
        if not avail.any():
            break
        ok, centers, triples, consumed, _ = _trial_masked(
            g, avail, cfg.levels, cfg.seed_size, cfg.scale
        )
        consumed_total += consumed
        if ok:
            return SeedChain(
                True, tuple(centers), tuple(triples), avail, consumed_total, t
            )
    return SeedChain(False, (), (), avail, consumed_total, max_trials)


def _experiment_masked(g, roots, avail, K, scale):
    """Explore each root in turn over the shared mask; stop at a success."""
    budgets = search_budgets(K, scale)
    consumed = 0
    explorations = 0
    for z in roots:
        core = _explore_masked(g, int(z), avail, K, scale)
        explorations += 1
        consumed += len(core.consumed)
        if core.success:
            assert consumed <= budgets.experiment_cap
            return core, consumed, explorations
    assert consumed <= budgets.experiment_cap
    return None, consumed, explorations


def experiment(g, fodder, source, K, scale):
    """Spend a seed set as exploration roots over an explicit source.

    Each root of `fodder` is explored in index order until one finds a
    new center; the center comes back with its three seed sets.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    fodder = np.unique(np.asarray(list(fodder), dtype=np.int64))
    if fodder.size != K:
        raise ValueError("fodder set must have exactly K vertices")
    source = np.unique(np.asarray(list(source), dtype=np.int64))
    if np.intersect1d(fodder, source).size:
        raise ValueError("fodder must be disjoint from the source")
    avail = np.zeros(g.n, dtype=bool)
    avail[source] = True
    core, consumed, explorations = _experiment_masked(g, fodder, avail, K, scale)
    remaining = np.flatnonzero(avail)
    assert consumed == source.size - remaining.size
    if core is None:
        return ExplorationResult(False, None, None, remaining, (), consumed)
    return ExplorationResult(
        True, core.center, core.seeds, remaining, tuple(core.tree_edges), consumed
    )


def collection_limits(growth_fraction, n):
    """Experiment budget and the bank level that declares success."""
    return math.floor(growth_fraction * n), math.floor(growth_fraction * n / 4)


def grow_collection(g, chain, cfg):
    """Bank seed sets by spending them on experiments, newest first.

    The chain's seed pairs open the bank.  Each experiment withdraws the
    newest set; a success deposits the new center's first two sets.  The
    run ends when the bank tops the success level, empties, or the
    experiment budget runs out.
    """
    if not chain.success:
        raise ValueError("collection stage needs a successful seed chain")
    K = cfg.seed_size
    budget, success_level = collection_limits(cfg.growth_fraction, g.n)
    avail = chain.source_mask.copy()
    collected = []
    stack = []
    for i, (center, triple) in enumerate(zip(chain.centers, chain.seed_triples)):
        parent = i - 1 if i > 0 else None
        collected.append(CollectedCenter(int(center), triple, parent, "chain"))
        stack.append((i, triple[0]))
        stack.append((i, triple[1]))
    experiments = 0
    consumed = 0
    history = [len(stack)]
    while True:
        if len(stack) > success_level:
            return CollectionResult(
                True,
                tuple(collected),
                len(stack),
                experiments,
                consumed,
                tuple(history),
                "bank over the success level",
            )
        if not stack:
            return CollectionResult(
                False,
                tuple(collected),
                0,
                experiments,
                consumed,
                tuple(history),
                "no seed sets left",
            )
        if experiments >= budget:
            return CollectionResult(
                False,
                tuple(collected),
                len(stack),
                experiments,
                consumed,
                tuple(history),
                "experiment budget exhausted",
            )
        owner, fodder = stack.pop()
        core, used, _ = _experiment_masked(g, fodder, avail, K, cfg.scale)
        experiments += 1
        consumed += used
        if core is not None:
            idx = len(collected)
            collected.append(
                CollectedCenter(core.center, core.seeds, owner, "experiment")
            )
            stack.append((idx, core.seeds[0]))
            stack.append((idx, core.seeds[1]))
        history.append(len(stack))


def _assemble_stars(collected, K):
    """Stars from collected centers: leaf pools minus any center vertex.

    A seed-set member can itself become a center (an experiment that
    succeeds at its own root), so the pools exclude all centers; the
    third set tops the count back up toward 2K.
    """
    center_set = {c.center for c in collected}
    stars = []
    for c in collected:
        first_two = np.union1d(c.seed_sets[0], c.seed_sets[1])
        pool = [int(u) for u in first_two if int(u) not in center_set]
        for u in sorted(int(x) for x in c.seed_sets[2]):
            if len(pool) >= 2 * K:
                break
            if u not in center_set:
                pool.append(u)
        stars.append(Star(c.center, np.array(sorted(pool), dtype=np.int64)))
    return tuple(stars)


def certify_irg(g, cfg):
    """Full pipeline: chain, collection, star assembly, validation."""
    chain = build_seed_chain(g, cfg)
    if not chain.success:
        raise StructureSearchError(
            "seed chain", f"no successful trial in {chain.trials} attempts"
        )
    coll = grow_collection(g, chain, cfg)
    if not coll.success:
        raise StructureSearchError("collection", coll.reason)
    K = cfg.seed_size
    cert = StarCertificate(
        star_size=2 * K,
        spacing_bound=search_budgets(K, cfg.scale).depth + 1,
        mode="connected",
        stars=_assemble_stars(coll.centers, K),
    )
    check = validate_certificate(g, cert)
    if not check.valid:
        raise StructureSearchError("validation", "; ".join(check.violations))
    return cert


def _ball(g, v, radius):
    seen = {int(v)}
    frontier = [int(v)]
    for _ in range(radius):
        nxt = []
        for x in frontier:
            for u in g.neighbors(x):
                u = int(u)
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return seen


def validate_certificate(g, cert):
    """Re-check every certificate claim against the graph alone.

    Star sizes are checked as at-least-star_size (extra leaves never
    hurt).  The verdict lists every violated clause rather than stopping
    at the first.
    """
    bad = []
    if cert.star_size < 1:
        bad.append("star size must be at least 1")
    if cert.spacing_bound < 0:
        bad.append("spacing bound must be nonnegative")
    if cert.mode not in ("chain", "connected"):
        bad.append(f"unknown mode {cert.mode!r}")
    if not cert.stars:
        bad.append("certificate has no stars")
        return CertificateCheck(False, tuple(bad))

    centers = [s.center for s in cert.stars]
    all_vertices = list(centers)
    for s in cert.stars:
        all_vertices.extend(int(u) for u in s.leaves)
    if any(v < 0 or v >= g.n for v in all_vertices):
        bad.append("vertex id out of range")
        return CertificateCheck(False, tuple(bad))

    if len(set(centers)) != len(centers):
        bad.append("duplicate centers")
    seen = set(centers)
    overlap = False
    for s in cert.stars:
        for u in s.leaves:
            u = int(u)
            if u in seen:
                overlap = True
            seen.add(u)
    if overlap:
        bad.append("stars are not vertex-disjoint")

    for i, s in enumerate(cert.stars):
        leaves = {int(u) for u in s.leaves}
        if len(leaves) != len(s.leaves) or s.center in leaves:
            continue  # covered by the disjointness clause
        if 1 + len(leaves) < cert.star_size:
            bad.append(f"star {i} smaller than {cert.star_size}")
        nbrs = set(int(u) for u in g.neighbors(s.center))
        if not leaves <= nbrs:
            bad.append(f"star {i} has a leaf not adjacent to its center")

    if cert.mode == "chain":
        for i in range(len(centers) - 1):
            if centers[i + 1] not in _ball(g, centers[i], cert.spacing_bound):
                bad.append(f"centers {i} and {i + 1} too far apart")
    elif cert.mode == "connected" and len(centers) > 1:
        center_set = set(centers)
        adj = {c: set() for c in centers}
        for c in centers:
            near = _ball(g, c, cert.spacing_bound) & center_set
            near.discard(c)
            adj[c] |= near
            for d in near:
                adj[d].add(c)
        reached = {centers[0]}
        queue = deque([centers[0]])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in reached:
                    reached.add(y)
                    queue.append(y)
        if len(reached) != len(centers):
            bad.append("center graph is not connected at the spacing bound")

    return CertificateCheck(not bad, tuple(bad))


def er_greedy_stars(g, star_size):
    """Greedy leaf claiming for homogeneous graphs.

    Candidates are the lowest ⌊n/(4·star_size)⌋ vertex indices; leaves
    come from the upper half of the index range, scanned in order, never
    reused.  A candidate missing a full complement claims nothing.
    """
    if star_size < 1:
        raise ValueError("star_size must be >= 1")
    n = g.n
    boundary = n // 2 - 1  # first index of the leaf pool
    n_candidates = n // (4 * star_size)
    used = np.zeros(n, dtype=bool)
    selected = []
    leaf_sets = []
    for i in range(min(n_candidates, max(boundary, 0))):
        nbrs = g.neighbors(i)
        pool = nbrs[(nbrs >= boundary) & ~used[nbrs]]
        if pool.size >= star_size:
            claim = pool[:star_size]
            used[claim] = True
            selected.append(i)
            leaf_sets.append(claim.copy())
    return GreedyStars(
        np.array(selected, dtype=np.int64), tuple(leaf_sets), boundary
    )


def _dfs_longest(g, allowed, start, budget):
    on_path = np.zeros(g.n, dtype=bool)
    on_path[start] = True
    stack = [(start, 0)]
    best = [start]
    steps = 0
    while stack and steps < budget:
        v, ptr = stack[-1]
        nbrs = g.neighbors(v)
        advanced = False
        while ptr < nbrs.size:
            u = int(nbrs[ptr])
            ptr += 1
            if allowed[u] and not on_path[u]:
                stack[-1] = (v, ptr)
                stack.append((u, 0))
                on_path[u] = True
                steps += 1
                if len(stack) > len(best):
                    best = [x for x, _ in stack]
                advanced = True
                break
        if not advanced:
            stack.pop()
            on_path[v] = False
            steps += 1
    return best


def long_path(g, within=None, budget=None):
    """Longest simple path found by depth-first search with backtracking.

    Backtracking unmarks vertices so later branches may reuse them; the
    budget caps total steps (pushes plus pops) to keep the search from
    going exponential.  The returned path is re-verified edge by edge.
    """
    if within is None:
        allowed = np.ones(g.n, dtype=bool)
    else:
        allowed = np.zeros(g.n, dtype=bool)
        idx = np.asarray(list(within), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= g.n):
            raise ValueError("within out of range")
        allowed[idx] = True
    members = np.flatnonzero(allowed)
    if members.size == 0:
        return np.array([], dtype=np.int64)
    if budget is None:
        budget = 50 * members.size
    degs = np.array([_neighbors_in(g, v, allowed).size for v in members])
    start = int(members[int(np.argmax(degs))])

    # second sweep restarts from the far end of the first result, which
    # turns an interior start into an endpoint start
    best = _dfs_longest(g, allowed, start, budget // 2)
    again = _dfs_longest(g, allowed, best[-1], budget - budget // 2)
    if len(again) > len(best):
        best = again

    path = np.array(best, dtype=np.int64)
    assert len(set(int(x) for x in path)) == path.size
    for a, b in zip(path[:-1], path[1:]):
        assert int(b) in g.neighbors(int(a))
    return path


def certify_er(g, star_size, path_budget=None):
    """Greedy stars plus a path through their centers, as a certificate."""
    greedy = er_greedy_stars(g, star_size)
    if greedy.selected.size == 0:
        raise StructureSearchError("greedy stars", "no candidate claimed a full star")
    path = long_path(g, within=greedy.selected, budget=path_budget)
    if path.size < 2:
        raise StructureSearchError(
            "path search", "no edge between any two selected centers"
        )
    by_center = {int(c): lv for c, lv in zip(greedy.selected, greedy.leaf_sets)}
    stars = tuple(Star(int(c), by_center[int(c)]) for c in path)
    cert = StarCertificate(
        star_size=star_size, spacing_bound=1, mode="chain", stars=stars
    )
    check = validate_certificate(g, cert)
    if not check.valid:
        raise StructureSearchError("validation", "; ".join(check.violations))
    return cert


def write_certificate(cert, path, comments=()):
    """Header line `star_size,mode,spacing_bound,count`, then star lines."""
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(
            f"{cert.star_size},{cert.mode},{cert.spacing_bound},{len(cert.stars)}\n"
        )
        for s in cert.stars:
            cells = [str(s.center)] + [str(int(u)) for u in s.leaves]
            fh.write(",".join(cells) + "\n")


def read_certificate(path):
    with open(path) as fh:
        header = None
        stars = []
        expected = None
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                if len(cells) != 4:
                    raise CertificateFormatError(
                        "header needs star_size,mode,spacing_bound,count", ln
                    )
                size_s, mode, spacing_s, count_s = (c.strip() for c in cells)
                try:
                    header = (int(size_s), mode, int(spacing_s))
                    expected = int(count_s)
                except ValueError:
                    raise CertificateFormatError("malformed header", ln) from None
                if mode not in ("chain", "connected"):
                    raise CertificateFormatError(f"unknown mode {mode!r}", ln)
                if expected < 0:
                    raise CertificateFormatError("negative star count", ln)
                continue
            try:
                values = [int(c) for c in cells]
            except ValueError:
                raise CertificateFormatError("malformed star line", ln) from None
            if len(values) < 1:
                raise CertificateFormatError("empty star line", ln)
            stars.append(
                Star(values[0], np.array(sorted(values[1:]), dtype=np.int64))
            )
    if header is None:
        raise CertificateFormatError("missing header")
    if expected != len(stars):
        raise CertificateFormatError(
            f"header promises {expected} stars, found {len(stars)}"
        )
    return StarCertificate(
        star_size=header[0], spacing_bound=header[2], mode=header[1], stars=tuple(stars)
    )
