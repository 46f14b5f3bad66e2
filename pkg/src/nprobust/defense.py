"""Adversarial pruning and the adversarial-training baseline.

Pruning removes a vertex cover of the conflict graph, whose edges join
differently-labeled training points at distance at most ``2r``. With two
classes the graph is bipartite and a minimum cover comes from a maximum
matching (Hopcroft-Karp, then König); with more classes a greedy cover is
within a factor two of optimal.
"""

import math
import warnings as _warnings
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from ._parallel import parallel_map
from .errors import InconsistencyError, NprobustError
from .norms import parse_norm

_FREE = -1


@dataclass(frozen=True, eq=False)
class ConflictGraph:
    """Undirected graph on ``0..n-1``; ``edges`` holds sorted pairs ``i < j``.

    For two-label graphs ``left`` and ``right`` list the vertices of the
    smaller and larger label.
    """

    n: int
    labels: np.ndarray
    edges: tuple
    adjacency: tuple
    left: tuple | None = None
    right: tuple | None = None

    @property
    def bipartite(self):
        return self.left is not None

    @property
    def n_edges(self):
        return len(self.edges)


def graph_from_edges(labels, edges):
    """Build a :class:`ConflictGraph` from explicit edges (used by tests and the CLI)."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    clean = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j or labels[i] == labels[j]:
            raise ValueError(f"edge ({i}, {j}) joins equally-labeled vertices")
        clean.add((min(i, j), max(i, j)))
    edges = tuple(sorted(clean))
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    adjacency = tuple(tuple(sorted(a)) for a in adj)
    classes = np.unique(labels)
    left = right = None
    if classes.size <= 2:
        lo = classes[0] if classes.size else 1
        left = tuple(int(i) for i in np.flatnonzero(labels == lo))
        right = tuple(int(i) for i in np.flatnonzero(labels != lo))
    return ConflictGraph(n, labels, edges, adjacency, left, right)


def pairwise(X, p):
    return kernels.pairwise_distances(X, X, kernels.norm_code(parse_norm(p)))


def build_conflict_graph(train, r, p=math.inf, distances=None):
    """Edges between differently-labeled points within ``2r`` (inclusive)."""
    if r < 0:
        raise ValueError("r must be non-negative")
    D = pairwise(train.X, p) if distances is None else distances
    y = train.y
    conflict = (D <= 2 * r) & (y[:, None] != y[None, :])
    ii, jj = np.nonzero(np.triu(conflict, k=1))
    return graph_from_edges(y, zip(ii.tolist(), jj.tolist()))


# Matching and covers ------------------------------------------------------------

def hopcroft_karp(g):
    """Maximum matching of a two-label graph as sorted ``(left, right)`` pairs."""
    if not g.bipartite:
        raise ValueError("Hopcroft-Karp needs a graph with at most two labels")
    left = g.left
    match = np.full(g.n, _FREE, dtype=np.int64)
    inf = math.inf

    while True:
        # BFS layers from the free left vertices
        dist = {}
        queue = deque()
        for u in left:
            if match[u] == _FREE:
                dist[u] = 0
                queue.append(u)
        found = False
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                w = match[v]
                if w == _FREE:
                    found = True
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if not found:
            break

        # iterative DFS along the layers, one augmenting path per free vertex
        for root in left:
            if match[root] != _FREE:
                continue
            stack = [(root, iter(g.adjacency[root]))]
            path = []
            while stack:
                u, it = stack[-1]
                advanced = False
                for v in it:
                    w = match[v]
                    if w == _FREE:
                        path.append((u, v))
                        for a, b in path:
                            match[a] = b
                            match[b] = a
                        stack.clear()
                        advanced = True
                        break
                    if dist.get(w, inf) == dist[u] + 1:
                        path.append((u, v))
                        stack.append((w, iter(g.adjacency[w])))
                        advanced = True
                        break
                if not advanced and stack:
                    dist[u] = inf  # dead end, never revisit in this phase
                    stack.pop()
                    if path:
                        path.pop()
    return tuple(sorted((u, int(match[u])) for u in left if match[u] != _FREE))


def min_vertex_cover_bipartite(g, matching):
    """König's cover from a maximum matching; its size equals the matching's."""
    if not g.bipartite:
        raise ValueError("König's construction needs a two-label graph")
    mate = {}
    for u, v in matching:
        if u in mate or v in mate:
            raise InconsistencyError("matching edges share a vertex")
        mate[u] = v
        mate[v] = u
    seen = set()
    queue = deque(u for u in g.left if u not in mate)
    seen.update(queue)
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v in seen or mate.get(u) == v:
                continue
            seen.add(v)
            w = mate.get(v)
            if w is not None and w not in seen:
                seen.add(w)
                queue.append(w)
    cover = sorted([u for u in g.left if u not in seen] + [v for v in g.right if v in seen])
    covered = set(cover)
    for i, j in g.edges:
        if i not in covered and j not in covered:
            raise InconsistencyError(f"edge ({i}, {j}) left uncovered: matching is not maximum")
    if len(cover) != len(matching):
        raise InconsistencyError(f"cover size {len(cover)} differs from matching size {len(matching)}")
    return tuple(cover)


def greedy_vertex_cover(g):
    """Both endpoints of each still-uncovered edge, in lexicographic edge order."""
    covered = set()
    for i, j in g.edges:
        if i not in covered and j not in covered:
            covered.update((i, j))
    return tuple(sorted(covered))


def is_vertex_cover(g, cover):
    c = set(cover)
    return all(i in c or j in c for i, j in g.edges)


# Pruning ---------------------------------------------------------------------------

class PruneResult(NamedTuple):
    pruned: object
    removed: tuple
    pairs: tuple
    warnings: tuple
    exact: bool


def adversarial_prune(train, r, p=math.inf):
    """Drop a cover of the 2r-conflict graph so opposite labels end up more than 2r apart.

    ``pairs`` lists ``(removed index, nearest oppositely-labeled index, distance)``
    against the original training set.
    """
    p = parse_norm(p)
    D = pairwise(train.X, p)
    g = build_conflict_graph(train, r, p, distances=D)
    if g.bipartite:
        removed = min_vertex_cover_bipartite(g, hopcroft_karp(g))
    else:
        removed = greedy_vertex_cover(g)
    keep = np.setdiff1d(np.arange(train.n), np.asarray(removed, dtype=np.int64))
    pruned = train.subset(keep)

    pairs = []
    for i in removed:
        opp = np.flatnonzero(train.y != train.y[i])
        j = int(opp[np.argmin(D[i, opp])])
        pairs.append((int(i), j, float(D[i, j])))

    notes = []
    opposite_pairs = int(np.count_nonzero(np.triu(train.y[:, None] != train.y[None, :], k=1)))
    if opposite_pairs and g.n_edges > opposite_pairs / 2:
        notes.append(f"{g.n_edges} of {opposite_pairs} oppositely-labeled pairs conflict; "
                     "the metric may be degenerate at this radius")
    if pruned.n == 0:
        notes.append("pruning removed every training point")
    else:
        before = set(np.unique(train.y).tolist())
        after = set(np.unique(pruned.y).tolist())
        for c in sorted(before - after):
            notes.append(f"pruning emptied class {train.label_names[c - 1]}")
    for msg in notes:
        _warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return PruneResult(pruned, tuple(int(i) for i in removed), tuple(pairs), tuple(notes), g.bipartite)


def adversarial_training(trainer, train, attack, budget, workers=None):
    """Augment ``train`` with successful attacks of size at most ``budget``.

    Every training point is attacked once against ``trainer(train)``; each kept
    example carries the attacked point's own label. Larger perturbations are
    dropped rather than clipped.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    f = trainer(train)

    def one(i):
        try:
            return attack(f, train.X[i])
        except NprobustError:
            return None

    results = parallel_map(one, range(train.n), workers)
    X, y = [], []
    for i, ae in enumerate(results):
        if ae is not None and ae.success and ae.distance <= budget:
            X.append(ae.perturbed)
            y.append(int(train.y[i]))
    if not X:
        return train
    return train.append(np.array(X), y)


__all__ = [
    "ConflictGraph", "graph_from_edges", "build_conflict_graph", "hopcroft_karp",
    "min_vertex_cover_bipartite", "greedy_vertex_cover", "is_vertex_cover", "PruneResult",
    "adversarial_prune", "adversarial_training",
]
