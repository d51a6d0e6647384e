"""Finite metrics, their tight spans, and tree metrics as bicombed spaces."""
from __future__ import annotations

import csv
import heapq
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BicombingSpace, PropertyReport, sample_map
from .errors import DomainError, NoConvergenceError, PreconditionError


@dataclass(frozen=True)
class FiniteMetric:
    """Distance matrix with exact (int or Fraction) entries."""

    d: tuple[tuple, ...]

    def __post_init__(self):
        n = len(self.d)
        for i in range(n):
            if len(self.d[i]) != n:
                raise DomainError("distance matrix must be square")
            if self.d[i][i] != 0:
                raise DomainError("distance matrix needs a zero diagonal")
            for j in range(n):
                if self.d[i][j] != self.d[j][i] or self.d[i][j] < 0:
                    raise DomainError(f"distance matrix not symmetric and nonnegative at ({i},{j})")

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence]) -> "FiniteMetric":
        return cls(tuple(tuple(_exact(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.d)

    def array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.d], dtype=float).reshape(self.n, self.n)

    def triangle_defect(self) -> Fraction:
        """Largest ``d(x,z) - d(x,y) - d(y,z)``; at most zero for a metric."""
        n = self.n
        worst = Fraction(0)
        for x, y, z in itertools.product(range(n), repeat=3):
            worst = max(worst, Fraction(self.d[x][z]) - self.d[x][y] - self.d[y][z])
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.d:
            w.writerow([str(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FiniteMetric":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        return cls.from_matrix([[v.strip() for v in r] for r in rows])


def _exact(v):
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        f = Fraction(v).limit_denominator(10**12)
    else:
        f = Fraction(v)
    return f.numerator if f.denominator == 1 else f


def parse_edge_list(text: str) -> tuple[list[tuple[int, int, Fraction]], int]:
    """Parse ``u v [weight]`` lines (0-indexed, ``#`` comments); returns edges and vertex count."""
    edges = []
    n = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise DomainError(f"line {lineno}: expected 'u v [weight]', got {raw!r}")
        u, v = int(parts[0]), int(parts[1])
        w = _exact(parts[2]) if len(parts) == 3 else 1
        if u < 0 or v < 0 or w <= 0:
            raise DomainError(f"line {lineno}: vertices must be >= 0 and weights positive")
        edges.append((u, v, w))
        n = max(n, u + 1, v + 1)
    return edges, n


def graph_metric(edges: Sequence[tuple], n: int) -> FiniteMetric:
    """Shortest-path metric of a connected graph (Dijkstra, exact arithmetic)."""
    if n < 1:
        raise DomainError("graph needs at least one vertex")
    adj: dict[int, list] = {i: [] for i in range(n)}
    for e in edges:
        u, v = int(e[0]), int(e[1])
        w = _exact(e[2]) if len(e) > 2 else 1
        if not (0 <= u < n and 0 <= v < n):
            raise DomainError(f"edge {e} references a vertex outside 0..{n - 1}")
        adj[u].append((v, w))
        adj[v].append((u, w))
    rows = []
    for src in range(n):
        dist = {src: 0}
        heap = [(Fraction(0), src)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            for v, w in adj[u]:
                nd = du + w
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (Fraction(nd), v))
        if len(dist) < n:
            raise DomainError(f"graph is disconnected; components: {_components(adj, n)}")
        rows.append([dist[j] for j in range(n)])
    return FiniteMetric.from_matrix(rows)


def _components(adj, n) -> list[list[int]]:
    seen, comps = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


# -- tight span points ---------------------------------------------------------


def _values(f) -> np.ndarray:
    return np.asarray([float(v) for v in f], dtype=float)


def admissibility_defect(f, d: FiniteMetric) -> float:
    """Largest ``d(x,y) - f(x) - f(y)``; admissible means this is <= 0."""
    v = _values(f)
    return float(np.max(d.array() - v[:, None] - v[None, :]))


def _p(v: np.ndarray, D: np.ndarray) -> np.ndarray:
    return np.max(D - v[None, :], axis=1)


def extremal_residual(f, d: FiniteMetric) -> float:
    """``max_x |f(x) - max_y (d(x,y) - f(y))|``."""
    v = _values(f)
    return float(np.max(np.abs(v - _p(v, d.array()))))


def is_extremal(f, d: FiniteMetric, tol: float = 1e-9) -> tuple[bool, float]:
    """Returns ``(extremal, residual)``; raises on inadmissible input."""
    if admissibility_defect(f, d) > tol:
        raise PreconditionError("function is not admissible")
    r = extremal_residual(f, d)
    return r <= tol, r


def kuratowski(x: int, d: FiniteMetric) -> tuple:
    """The embedding ``x -> d(x, .)``."""
    if not 0 <= x < d.n:
        raise DomainError(f"index {x} outside 0..{d.n - 1}")
    return d.d[x]


def linf_distance(f, g) -> float:
    if len(f) != len(g):
        raise DomainError("functions live on different point sets")
    if all(isinstance(v, (int, Fraction)) for v in itertools.chain(f, g)):
        return max((abs(Fraction(a) - b) for a, b in zip(f, g)), default=Fraction(0))
    return float(np.max(np.abs(_values(f) - _values(g)))) if len(f) else 0.0


def project_extremal(g, d: FiniteMetric, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Iterate ``q(g) = (g + p(g)) / 2`` down to an extremal function below ``g``."""
    if admissibility_defect(g, d) > 1e-12:
        raise PreconditionError("starting function is not admissible")
    D = d.array()
    v = _values(g)
    for _ in range(max_iter + 1):
        nxt = (v + _p(v, D)) / 2
        if np.max(np.abs(nxt - v)) <= tol:
            return nxt
        v = nxt
    raise NoConvergenceError(f"projection did not settle within {max_iter} iterations")


def four_point_delta(d: FiniteMetric):
    """Largest half-gap between the two biggest of the three pair-sums over quadruples."""
    n = d.n
    if n < 4:
        return 0
    exact = all(isinstance(v, int) for row in d.d for v in row)
    D = np.array(d.d, dtype=np.int64) if exact else d.array()
    quads = np.array(list(itertools.combinations(range(n), 4)))
    a, b, c, e = quads.T
    sums = np.stack([D[a, b] + D[c, e], D[a, c] + D[b, e], D[a, e] + D[b, c]], axis=1)
    sums.sort(axis=1)
    worst = np.max(sums[:, 2] - sums[:, 1])
    if exact:
        return Fraction(int(worst), 2)
    return float(worst) / 2


def random_admissible(d: FiniteMetric, rng: np.random.Generator) -> np.ndarray:
    """Random admissible function: a vertex image raised at random, or a large random vector."""
    D = d.array()
    if rng.random() < 0.5:
        x = int(rng.integers(d.n))
        return D[x] + rng.random(d.n) * (D.max() + 1)
    return D.max() / 2 + rng.random(d.n) * (D.max() + 1)


def covering_radius_check(d: FiniteMetric, delta: float, samples: int, seed: int = 0,
                          tol: float = 1e-9) -> PropertyReport:
    """Projected random admissible functions stay within ``delta + 1/2`` of some vertex image."""
    D = d.array()
    bound = float(delta) + 0.5

    def task(rng, i):
        f = project_extremal(random_admissible(d, rng), d, tol=1e-13, max_iter=10_000)
        dists = np.max(np.abs(D - f[None, :]), axis=1)
        x = int(np.argmin(dists))
        return float(dists[x]) - bound, {"f": f, "nearest": x, "distance": float(dists[x])}

    res = sample_map(task, samples, seed)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("covering_radius", f"finite-metric({d.n})", seed, samples, tol, worst[0], worst[1],
                          samples, extra={"delta": float(delta), "bound": bound})


# -- tree metrics ------------------------------------------------------------


@dataclass(frozen=True)
class WeightedTree:
    """Tree on nodes ``0..size-1``; ``point_node[i]`` is the node of metric point ``i``."""

    size: int
    edges: tuple[tuple[int, int, float], ...]
    point_node: tuple[int, ...]

    def adjacency(self) -> dict[int, dict[int, float]]:
        adj: dict[int, dict[int, float]] = {u: {} for u in range(self.size)}
        for u, v, w in self.edges:
            adj[u][v] = w
            adj[v][u] = w
        return adj


def _reconstruct_tree(d: FiniteMetric) -> WeightedTree:
    n = d.n
    D = [[Fraction(v) for v in row] for row in d.d]
    adj: dict[int, dict[int, Fraction]] = {0: {}}
    point_node = [0]
    size = 1

    def node_path(a, b):
        prev = {a: None}
        stack = [a]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in prev:
                    prev[v] = u
                    stack.append(v)
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path[::-1]

    for k in range(1, n):
        if D[0][k] == 0:
            raise PreconditionError("metric has two points at distance zero")
        best_j, best = 0, Fraction(0)
        for j in range(1, k):
            g = (D[0][k] + D[0][j] - D[j][k]) / 2
            if g > best:
                best_j, best = j, g
        pendant = D[0][k] - best
        path = node_path(point_node[0], point_node[best_j])
        walked = Fraction(0)
        attach = None
        for u, v in zip(path, path[1:]):
            w = adj[u][v]
            if best == walked:
                attach = u
                break
            if best < walked + w:
                mid = size
                size += 1
                adj[mid] = {}
                del adj[u][v], adj[v][u]
                adj[u][mid] = adj[mid][u] = best - walked
                adj[v][mid] = adj[mid][v] = walked + w - best
                attach = mid
                break
            walked += w
        if attach is None:
            attach = path[-1]
        if pendant == 0:
            if attach in point_node:
                raise PreconditionError("metric has two points at distance zero")
            point_node.append(attach)
        else:
            node = size
            size += 1
            adj[node] = {attach: pendant}
            adj[attach][node] = pendant
            point_node.append(node)
    edges = tuple(sorted((u, v, float(w)) for u in adj for v, w in adj[u].items() if u < v))
    return WeightedTree(size, edges, tuple(point_node))


def tree_tight_span(d: FiniteMetric) -> tuple[WeightedTree, BicombingSpace]:
    """The tree realizing a tree metric and its geodesic bicombing.

    Points of the space are ``(u, v, s)``: distance ``s`` from node ``u`` along
    the edge to ``v`` (``(u, u, 0)`` is the node itself).
    """
    if four_point_delta(d) != 0:
        raise PreconditionError("metric is not a tree metric")
    tree = _reconstruct_tree(d)
    adj = tree.adjacency()
    m = tree.size
    nd = np.zeros((m, m))
    nxt = np.zeros((m, m), dtype=int)
    for s in range(m):
        stack, seen = [s], {s}
        first = {s: s}
        while stack:
            u = stack.pop()
            for v, w in adj[u].items():
                if v not in seen:
                    seen.add(v)
                    nd[s, v] = nd[s, u] + w
                    first[v] = v if u == s else first[u]
                    stack.append(v)
        for v, f in first.items():
            nxt[s, v] = f
    weight = {(u, v): w for u in adj for v, w in adj[u].items()}
    for u in range(m):
        weight[(u, u)] = 0.0

    def ends(p):
        u, v, s = p
        return ((u, s), (v, weight[(u, v)] - s))

    def same_edge(p, q):
        return p[0] != p[1] and {p[0], p[1]} == {q[0], q[1]}

    def offset_from(p, node):
        return p[2] if p[0] == node else weight[(p[0], p[1])] - p[2]

    def route(p, q):
        best = None
        for a, da in ends(p):
            for b, db in ends(q):
                L = da + nd[a, b] + db
                if best is None or L < best[0]:
                    best = (L, a, b)
        return best

    def dist(p, q):
        if same_edge(p, q):
            return abs(offset_from(p, p[0]) - offset_from(q, p[0]))
        return float(route(p, q)[0])

    def bicombe(p, q, t):
        if t <= 0:
            return p
        if t >= 1:
            return q
        if same_edge(p, q):
            u, v = p[0], p[1]
            a, b = offset_from(p, u), offset_from(q, u)
            return (u, v, (1 - t) * a + t * b)
        L, a, b = route(p, q)
        target = t * L
        da = offset_from(p, a)
        if target <= da:
            other = p[1] if p[0] == a else p[0]
            return (a, other, da - target)
        walked = da
        u = a
        while u != b:
            v = int(nxt[u, b])
            w = weight[(u, v)]
            if target <= walked + w:
                return (u, v, target - walked)
            walked += w
            u = v
        db = offset_from(q, b)
        other = q[1] if q[0] == b else q[0]
        return (b, other, min(target - walked, db)) if db > 0 else (b, b, 0.0)

    edge_list = [(u, v, w) for u, v, w in tree.edges]

    def sampler(rng, scale):
        u, v, w = edge_list[int(rng.integers(len(edge_list)))]
        return (u, v, float(rng.random()) * w)

    if not edge_list:
        def sampler(rng, scale):  # noqa: F811 - single point tree
            return (0, 0, 0.0)

    space = BicombingSpace(f"tree({d.n})", dist, bicombe, sampler, tol=1e-12)
    return tree, space


def read_graph(path: str | Path) -> FiniteMetric:
    edges, n = parse_edge_list(Path(path).read_text())
    return graph_metric(edges, n)


def random_tree_edges(n: int, rng: np.random.Generator, max_weight: int = 1) -> list[tuple[int, int, int]]:
    return [(k, int(rng.integers(k)), int(rng.integers(1, max_weight + 1))) for k in range(1, n)]


def tripod_center(d: FiniteMetric) -> tuple[Fraction, ...]:
    """Gromov products ``((d12 + d13 - d23) / 2, ...)`` of a three-point metric."""
    if d.n != 3:
        raise DomainError("tripod center needs exactly three points")
    D = d.d
    return tuple(Fraction(D[i][j] + D[i][k] - D[j][k], 2) for i, j, k in ((0, 1, 2), (1, 0, 2), (2, 0, 1)))
