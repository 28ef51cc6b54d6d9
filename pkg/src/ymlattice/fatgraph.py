"""Fat graphs (combinatorial maps) on closed oriented surfaces.

A fat graph is a pair of permutations ``(sigma, alpha)`` acting on a finite set of
darts ``0 .. 2a-1``.  ``alpha`` is a fixed-point-free involution pairing each dart
with its reverse; the cycles of ``sigma`` are the vertices and the cycles of
``phi = alpha o sigma^-1`` are the faces.  A dart ``e`` finishes at the
``sigma``-cycle containing ``e`` and starts at the cycle containing ``alpha(e)``,
so that ``phi(e)`` always starts where ``e`` finishes.

All graphs are immutable; every move returns a fresh graph.  Moves that delete
darts renumber the survivors in increasing order, and the helpers prefixed with
an underscore also return the list of old dart indices so that callers can carry
configurations across.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised when permutation data does not describe a valid fat graph."""


def _cycles(perm: Sequence[int]) -> list[tuple[int, ...]]:
    """Cycles of ``perm``, each starting at its smallest element, sorted by it."""
    seen = [False] * len(perm)
    out = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = perm[x]
        out.append(tuple(cyc))
    return out


def _inverse(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def _from_cycles(cycles: Iterable[Sequence[int]], n: int) -> tuple[int, ...]:
    perm = list(range(n))
    for cyc in cycles:
        for i, x in enumerate(cyc):
            perm[x] = cyc[(i + 1) % len(cyc)]
    return tuple(perm)


@dataclass(frozen=True)
class FatGraph:
    """Fat graph given by its vertex permutation ``sigma`` and edge involution ``alpha``."""

    sigma: tuple[int, ...]
    alpha: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(x) for x in self.sigma))
        object.__setattr__(self, "alpha", tuple(int(x) for x in self.alpha))
        n = len(self.sigma)
        if len(self.alpha) != n:
            raise GraphError("sigma and alpha act on different dart sets")
        if n % 2:
            raise GraphError("dart count must be even")
        for name, p in (("sigma", self.sigma), ("alpha", self.alpha)):
            if sorted(p) != list(range(n)):
                raise GraphError(f"{name} is not a permutation of 0..{n - 1}")
        for e in range(n):
            if self.alpha[e] == e or self.alpha[self.alpha[e]] != e:
                raise GraphError("alpha must be a fixed-point-free involution")
        if n and not self._transitive():
            raise GraphError("graph is not connected")
        chi = self.vertex_count - self.edge_count + self.face_count
        if chi % 2 or chi > 2:
            raise GraphError(f"Euler characteristic {chi} is not that of a closed orientable surface")

    def _transitive(self) -> bool:
        seen = {0}
        todo = [0]
        while todo:
            x = todo.pop()
            for y in (self.sigma[x], self.alpha[x]):
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return len(seen) == len(self.sigma)

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_phi(cls, phi_cycles: Sequence[Sequence[int]], alpha: Sequence[int]) -> "FatGraph":
        """Build the graph whose faces are ``phi_cycles`` (``sigma = phi^-1 alpha``)."""
        n = len(alpha)
        phi = _from_cycles(phi_cycles, n)
        phi_inv = _inverse(phi)
        return cls(tuple(phi_inv[alpha[e]] for e in range(n)), tuple(alpha))

    @classmethod
    def standard(cls, genus: int) -> "FatGraph":
        """Single-vertex graph with face word ``a1 b1 a1^-1 b1^-1 ... ag bg ag^-1 bg^-1``.

        Darts are numbered along the face, so block ``i`` uses ``4i .. 4i+3`` with
        ``alpha`` pairing ``4i <-> 4i+2`` and ``4i+1 <-> 4i+3``.
        """
        n = 4 * genus
        alpha = [0] * n
        for i in range(genus):
            a, b = 4 * i, 4 * i + 1
            alpha[a], alpha[a + 2] = a + 2, a
            alpha[b], alpha[b + 2] = b + 2, b
        return cls.from_phi([tuple(range(n))] if n else [], alpha)

    @classmethod
    def from_dict(cls, data: dict) -> "FatGraph":
        n = data.get("dart_count")
        sigma, alpha = data.get("sigma"), data.get("alpha")
        if not isinstance(n, int) or sigma is None or alpha is None:
            raise GraphError("graph data needs integer dart_count, sigma and alpha")
        if len(sigma) != n or len(alpha) != n:
            raise GraphError("dart_count does not match permutation lengths")
        return cls(tuple(sigma), tuple(alpha))

    def to_dict(self) -> dict:
        return {"dart_count": self.dart_count, "sigma": list(self.sigma), "alpha": list(self.alpha)}

    # -- derived structure ----------------------------------------------

    @property
    def dart_count(self) -> int:
        return len(self.sigma)

    @cached_property
    def phi(self) -> tuple[int, ...]:
        sigma_inv = _inverse(self.sigma)
        return tuple(self.alpha[sigma_inv[e]] for e in range(self.dart_count))

    @cached_property
    def vertices(self) -> list[tuple[int, ...]]:
        """Cycles of sigma; the dartless graph has a single empty vertex."""
        return _cycles(self.sigma) if self.dart_count else [()]

    @cached_property
    def faces(self) -> list[tuple[int, ...]]:
        """Cycles of phi, each read from its smallest dart."""
        return _cycles(self.phi) if self.dart_count else [()]

    @cached_property
    def vertex_of(self) -> tuple[int, ...]:
        lookup = [0] * self.dart_count
        for i, cyc in enumerate(self.vertices):
            for e in cyc:
                lookup[e] = i
        return tuple(lookup)

    @cached_property
    def face_of(self) -> tuple[int, ...]:
        lookup = [0] * self.dart_count
        for i, cyc in enumerate(self.faces):
            for e in cyc:
                lookup[e] = i
        return tuple(lookup)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return self.dart_count // 2

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def genus(self) -> int:
        return genus(self)

    def inv(self, e: int) -> int:
        return self.alpha[e]

    def target(self, e: int) -> int:
        return self.vertex_of[e]

    def source(self, e: int) -> int:
        return self.vertex_of[self.alpha[e]]

    def orientation(self) -> tuple[int, ...]:
        """Default orientation: the smaller dart of every alpha-pair."""
        return tuple(e for e in range(self.dart_count) if e < self.alpha[e])

    def face_key(self, i: int) -> int:
        """Representative dart of face ``i`` (its smallest dart, -1 for the dartless graph)."""
        cyc = self.faces[i]
        return cyc[0] if cyc else -1

    def relabel(self, perm: Sequence[int]) -> "FatGraph":
        """Rename dart ``e`` to ``perm[e]``."""
        n = self.dart_count
        sigma = [0] * n
        alpha = [0] * n
        for e in range(n):
            sigma[perm[e]] = perm[self.sigma[e]]
            alpha[perm[e]] = perm[self.alpha[e]]
        return FatGraph(tuple(sigma), tuple(alpha))


def genus(graph: FatGraph) -> int:
    chi = graph.vertex_count - graph.edge_count + graph.face_count
    if chi % 2:
        raise GraphError("odd Euler characteristic")
    return (2 - chi) // 2


def faces(graph: FatGraph) -> list[tuple[int, ...]]:
    return graph.faces


def is_word(graph: FatGraph, word: Sequence[int]) -> bool:
    """True when consecutive darts of ``word`` can be concatenated."""
    return all(graph.target(a) == graph.source(b) for a, b in zip(word, word[1:]))


# -- areas --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AreaMap:
    """Positive area for each face, keyed by the face's smallest dart."""

    face_area: dict = field(default_factory=dict)

    @classmethod
    def for_graph(cls, graph: FatGraph, areas) -> "AreaMap":
        """Validate ``areas`` against ``graph``.

        ``areas`` may be a mapping from any dart of a face to its area, or a
        sequence aligned with ``graph.faces``.
        """
        if isinstance(areas, AreaMap):
            areas = areas.face_area
        if not isinstance(areas, dict):
            areas = list(areas)
            if len(areas) != graph.face_count:
                raise GraphError("one area per face required")
            areas = {graph.face_key(i): a for i, a in enumerate(areas)}
        out = {}
        for key, value in areas.items():
            key = int(key)
            if key == -1 and graph.dart_count == 0:
                fk = -1
            elif 0 <= key < graph.dart_count:
                fk = graph.face_key(graph.face_of[key])
            else:
                raise GraphError(f"area key {key} is not a dart")
            if fk in out:
                raise GraphError(f"face {fk} given two areas")
            value = float(value)
            if not value > 0:
                raise GraphError("face areas must be positive")
            out[fk] = value
        if len(out) != graph.face_count:
            raise GraphError("every face needs an area")
        return cls(out)

    @classmethod
    def uniform(cls, graph: FatGraph, total: float = 1.0) -> "AreaMap":
        return cls.for_graph(graph, [total / graph.face_count] * graph.face_count)

    @property
    def total(self) -> float:
        return float(sum(self.face_area.values()))

    def as_list(self, graph: FatGraph) -> list[float]:
        return [self.face_area[graph.face_key(i)] for i in range(graph.face_count)]

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.face_area.items())}


def load_graph(path) -> tuple[FatGraph, AreaMap]:
    """Read a graph file; missing areas default to unit total area split evenly."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise GraphError("graph file must hold a JSON object")
    unknown = set(data) - {"dart_count", "sigma", "alpha", "areas", "name"}
    if unknown:
        raise GraphError(f"unknown keys in graph file: {sorted(unknown)}")
    graph = FatGraph.from_dict(data)
    if "areas" in data:
        areas = AreaMap.for_graph(graph, data["areas"])
    else:
        areas = AreaMap.uniform(graph)
    return graph, areas


def dump_graph(graph: FatGraph, areas: AreaMap | None = None, name: str | None = None) -> str:
    """Canonical serialization (sorted keys, fixed layout) for golden comparisons."""
    data = graph.to_dict()
    if areas is not None:
        data["areas"] = areas.to_dict()
    if name is not None:
        data["name"] = name
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def save_graph(path, graph: FatGraph, areas: AreaMap | None = None, name: str | None = None) -> None:
    Path(path).write_text(dump_graph(graph, areas, name))


# -- dual graph and spanning trees -----------------------------------------


@dataclass(frozen=True)
class DualGraph:
    """Combinatorial dual: vertices are faces, dart ``e`` runs from ``L(e)`` to ``L(e^-1)``."""

    vertex_count: int
    source: tuple[int, ...]
    target: tuple[int, ...]

    @property
    def edge_count(self) -> int:
        return len(self.source) // 2


def dual_graph(graph: FatGraph) -> DualGraph:
    L = graph.face_of
    return DualGraph(
        graph.face_count,
        tuple(L[e] for e in range(graph.dart_count)),
        tuple(L[graph.alpha[e]] for e in range(graph.dart_count)),
    )


def _bfs_tree(n_nodes: int, darts: int, head, tail, alpha, root: int = 0) -> frozenset:
    """BFS spanning tree over darts scanned in index order; returns alpha-pairs as darts."""
    by_node = [[] for _ in range(n_nodes)]
    for e in range(darts):
        by_node[tail(e)].append(e)
    reached = {root}
    tree = set()
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in by_node[v]:
            w = head(e)
            if w not in reached:
                reached.add(w)
                tree.add(e)
                tree.add(alpha[e])
                queue.append(w)
    return frozenset(tree)


def spanning_tree_dual(graph: FatGraph) -> frozenset:
    """Spanning tree of the dual graph (a set of darts stable under alpha).

    Breadth-first from face 0 (the face holding dart 0), scanning darts in index
    order, so the result is reproducible.
    """
    if graph.dart_count == 0:
        return frozenset()
    L = graph.face_of
    return _bfs_tree(graph.face_count, graph.dart_count, lambda e: L[graph.alpha[e]], lambda e: L[e], graph.alpha)


def spanning_tree(graph: FatGraph, root: int = 0) -> frozenset:
    """Spanning tree of the graph itself (vertices and edges), rooted at vertex ``root``."""
    if graph.dart_count == 0:
        return frozenset()
    return _bfs_tree(graph.vertex_count, graph.dart_count, graph.target, graph.source, graph.alpha, root)


def is_dual_spanning_tree(graph: FatGraph, tree) -> bool:
    return _is_tree(graph, tree, graph.face_count, lambda e: graph.face_of[e])


def is_spanning_tree(graph: FatGraph, tree) -> bool:
    return _is_tree(graph, tree, graph.vertex_count, graph.source)


def _is_tree(graph: FatGraph, tree, n_nodes: int, tail) -> bool:
    tree = set(tree)
    if any(graph.alpha[e] not in tree for e in tree):
        return False
    if len(tree) != 2 * (n_nodes - 1):
        return False
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in tree:
        if e < graph.alpha[e]:
            a, b = find(tail(e)), find(tail(graph.alpha[e]))
            if a == b:
                return False
            parent[a] = b
    return True


def _delete_edges(graph: FatGraph, darts) -> tuple[FatGraph, list[int]]:
    """Delete alpha-closed ``darts`` by skipping them in sigma; survivors are renumbered."""
    dead = set(darts)
    keep = [e for e in range(graph.dart_count) if e not in dead]
    new_index = {e: i for i, e in enumerate(keep)}
    sigma = []
    for e in keep:
        x = graph.sigma[e]
        while x in dead:
            x = graph.sigma[x]
        sigma.append(new_index[x])
    alpha = [new_index[graph.alpha[e]] for e in keep]
    return FatGraph(tuple(sigma), tuple(alpha)), keep


def _contract_dual_tree(graph: FatGraph, areas: AreaMap, tree=None):
    if tree is None:
        tree = spanning_tree_dual(graph)
    if not is_dual_spanning_tree(graph, tree):
        raise GraphError("not a spanning tree of the dual graph")
    reduced, keep = _delete_edges(graph, tree)
    if reduced.face_count != 1:
        raise GraphError("tree removal did not produce a single face")
    return reduced, AreaMap.for_graph(reduced, [areas.total]), keep


def contract_dual_tree(graph: FatGraph, areas: AreaMap, tree=None) -> tuple[FatGraph, AreaMap]:
    """Remove the edges of a dual spanning tree, merging all faces into one.

    Vertices and genus are unchanged; the single face carries the total area.
    """
    reduced, new_areas, _ = _contract_dual_tree(graph, areas, tree)
    return reduced, new_areas


# -- Whitehead and cut-and-paste moves -----------------------------------


def _whitehead(graph: FatGraph, e: int) -> tuple[FatGraph, list[int]]:
    ei = graph.alpha[e]
    if graph.target(e) == graph.source(e):
        raise GraphError(f"dart {e} is a loop; Whitehead move needs distinct endpoints")

    def rest_of_cycle(d):
        out = []
        x = graph.sigma[d]
        while x != d:
            out.append(x)
            x = graph.sigma[x]
        return out

    merged = rest_of_cycle(e) + rest_of_cycle(ei)
    keep = [d for d in range(graph.dart_count) if d not in (e, ei)]
    new_index = {d: i for i, d in enumerate(keep)}
    sigma = [0] * len(keep)
    for d in keep:
        if graph.sigma[d] not in (e, ei):
            sigma[new_index[d]] = new_index[graph.sigma[d]]
    for i, d in enumerate(merged):
        sigma[new_index[d]] = new_index[merged[(i + 1) % len(merged)]]
    alpha = [new_index[graph.alpha[d]] for d in keep]
    return FatGraph(tuple(sigma), tuple(alpha)), keep


def whitehead(graph: FatGraph, e: int) -> FatGraph:
    """Contract the non-loop edge ``{e, alpha(e)}``, merging its two endpoints."""
    return _whitehead(graph, e)[0]


def face_word_from(graph: FatGraph, start: int) -> list[int]:
    """The phi-cycle through ``start``, read from ``start``."""
    out = [start]
    x = graph.phi[start]
    while x != start:
        out.append(x)
        x = graph.phi[x]
    return out


def cut_paste(graph: FatGraph, e: int) -> FatGraph:
    """Cut-and-paste along ``e`` on a single-face graph.

    Writing the face as ``(e, W1, d, e^-1, W2)`` with ``d`` the dart just before
    ``e^-1``, the new face is ``(e, d, W1, e^-1, W2)``.
    """
    if graph.face_count != 1:
        raise GraphError("cut-and-paste needs a single-face graph")
    if graph.dart_count == 0:
        return graph
    word = face_word_from(graph, e)
    pos = word.index(graph.alpha[e])
    d = word[pos - 1]
    if d == e:
        return graph
    new_word = [e, d] + word[1:pos - 1] + word[pos:]
    return FatGraph.from_phi([new_word], graph.alpha)


# -- standard form -------------------------------------------------------


def standard_order(graph: FatGraph, start: int | None = None) -> int:
    """Number of leading ``x y x^-1 y^-1`` blocks of the face word read from ``start``."""
    if graph.face_count != 1 or graph.dart_count == 0:
        return 0
    if start is None:
        start = 0
    word = face_word_from(graph, start)
    m = 0
    while 4 * m + 3 < len(word):
        a, b, ai, bi = word[4 * m: 4 * m + 4]
        if graph.alpha[a] == ai and graph.alpha[b] == bi:
            m += 1
        else:
            break
    return m


def _standardize_step(graph: FatGraph, word: list[int], m: int):
    """One induction step raising the standard order from ``m`` to ``m + 1``.

    Returns the new graph and the cut-and-paste darts applied (in order).
    """
    alpha = graph.alpha
    prefix = 4 * m
    e = word[prefix]
    tail = word[prefix + 1:]
    k = tail.index(alpha[e])
    inside = tail[:k]
    after = set(tail[k + 1:])
    f = next(x for x in inside if alpha[x] in after)
    r = inside.index(f)
    s = k - 1
    t = s + 1 + tail[k + 1:].index(alpha[f])
    # exponents counted in the indexing e_1..e_r, f, e_{r+1}..e_s, e^-1, e_{s+1}..e_t, f^-1
    r_idx = r
    s_idx = s
    t_idx = t - 1
    moves = [f] * (t_idx - s_idx) + [e] * (t_idx - r_idx) + [alpha[f]] * t_idx
    for d in moves:
        graph = cut_paste(graph, d)
    return graph, moves


def standardize(graph: FatGraph):
    """Bring a single-face single-vertex graph to the standard form of its genus.

    Returns ``(standard_graph, log)`` where ``log`` lists ``("K", dart)`` moves in
    the labeling current at the time of the move and a final ``("relabel",
    mapping)`` entry renaming darts so that the face reads ``0, 1, ..., 4g - 1``.
    The log is empty when the input is already the canonical standard graph.
    """
    if graph.face_count != 1 or graph.vertex_count != 1:
        raise GraphError("standardize needs a single face and a single vertex")
    g = graph.genus
    if graph == FatGraph.standard(g):
        return graph, []
    log = []
    start = 0 if graph.dart_count else None
    current = graph
    for m in range(g):
        word = face_word_from(current, start)
        current, moves = _standardize_step(current, word, m)
        log.extend(("K", d) for d in moves)
        if standard_order(current, start) < m + 1:
            raise GraphError("standardization step failed")  # pragma: no cover
    if g:
        word = face_word_from(current, start)
        mapping = [0] * current.dart_count
        for pos, d in enumerate(word):
            mapping[d] = pos
        current = current.relabel(mapping)
        log.append(("relabel", tuple(mapping)))
    if current != FatGraph.standard(g):
        raise GraphError("standardization did not reach the standard form")  # pragma: no cover
    return current, log


# -- elementary subdivisions -----------------------------------------------


def _extend(graph: FatGraph, phi_updates: dict, alpha_extra: dict) -> FatGraph:
    """Graph with two more darts, ``phi`` patched by ``phi_updates``."""
    n = graph.dart_count + 2
    phi = list(graph.phi) + [0, 0]
    alpha = list(graph.alpha) + [0, 0]
    for d, v in alpha_extra.items():
        alpha[d] = v
        alpha[v] = d
    for d, v in phi_updates.items():
        phi[d] = v
    phi_inv = _inverse(phi)
    return FatGraph(tuple(phi_inv[alpha[e]] for e in range(n)), tuple(alpha))


def elementary_subdivide(graph: FatGraph, areas: AreaMap, op: str, location):
    """Apply one elementary refinement.

    ``op`` and ``location``:

    * ``"V"``, dart ``e``: put a new vertex in the middle of ``e``.  Dart ``e``
      becomes the second half, ``alpha(e)`` the reverse of the first half; the
      new darts are ``n`` (first half) and ``n + 1`` (reverse of second half).
    * ``"E1"``, dart ``d``: attach a pendant edge at the target of ``d``, in the
      corner following ``d``.  New dart ``n`` leaves the old vertex.
    * ``"E2"``, ``(d1, d2, area1)``: join the targets of ``d1`` and ``d2`` (both on
      one face) by a new dart ``n`` from target(d1) to target(d2).  The face
      holding ``n`` gets ``area1``, the face holding ``n + 1`` the remainder.

    Returns ``(new_graph, new_areas)``.
    """
    n = graph.dart_count
    phi = graph.phi
    alpha = graph.alpha
    area_of = {graph.face_of[k]: v for k, v in areas.face_area.items() if k >= 0}
    if op == "V":
        e = int(location)
        ei = alpha[e]
        phi_inv = _inverse(phi)
        # n runs u -> v and is followed by e (v -> w); n + 1 runs w -> v, followed by ei
        new = _extend(graph, {phi_inv[e]: n, n: e, phi_inv[ei]: n + 1, n + 1: ei}, {n: ei, n + 1: e})
        return new, AreaMap.for_graph(new, dict(areas.face_area))
    if op == "E1":
        d = int(location)
        # walk out along n, come back along n + 1, then continue the face
        new = _extend(graph, {d: n, n: n + 1, n + 1: phi[d]}, {n: n + 1})
        return new, AreaMap.for_graph(new, dict(areas.face_area))
    if op == "E2":
        d1, d2, area1 = location
        d1, d2 = int(d1), int(d2)
        if d1 == d2 or graph.face_of[d1] != graph.face_of[d2]:
            raise GraphError("E2 needs two distinct darts on the same face")
        F = graph.face_of[d1]
        total = area_of[F]
        area1 = float(area1)
        if not 0 < area1 < total:
            raise GraphError("E2 area split must leave both faces positive and sum to the face area")
        new = _extend(graph, {d1: n, n: phi[d2], d2: n + 1, n + 1: phi[d1]}, {n: n + 1})
        mapping = {}
        for i in range(graph.face_count):
            if i != F:
                mapping[graph.face_key(i)] = area_of[i]
        mapping[n] = area1
        mapping[n + 1] = total - area1
        return new, AreaMap.for_graph(new, mapping)
    raise GraphError(f"unknown subdivision op {op!r}")
