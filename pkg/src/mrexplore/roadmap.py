"""Hierarchical roadmap graphs: dense local layer, sparse persistent global layer.

The local layer is rebuilt every decision step: a lattice of candidate
viewpoints around the robot, wired by k-nearest line-of-sight edges, each
vertex scored with an exploration utility (visible frontier cells). The
global layer persists across steps: robot positions plus string-pulled
waypoints of grid A* routes toward frontier-cluster centers, downsampled so
non-exempt vertices keep a minimum separation. Merging, pruning, and the
per-step planning-graph union keep the two layers consistent.

All operations are deterministic: vertices iterate in id order, neighbor
ties break on (distance, id), and A* breaks ties on (f, h, cell index).
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, ContractViolationError
from .gridworld import Cell, OccupancyGrid, line_of_sight, line_of_sight_batch

logger = logging.getLogger(__name__)

_EXACT_TOL = 1e-9


class Layer(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass
class GraphParams:
    """Roadmap construction knobs.

    ``d_r`` is the half-width of the square local window; when None it
    defaults to twice the sensor range at build time.
    """

    lattice: float = 2.0
    k: int = 8
    d_r: float | None = None
    r_g: float = 10.0
    r_m: float = 3.0
    prune_period: int = 5

    def __post_init__(self):
        if self.lattice <= 0:
            raise ConfigError(f"lattice spacing must be positive, got {self.lattice}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.d_r is not None and self.d_r <= 0:
            raise ConfigError(f"d_r must be positive, got {self.d_r}")
        if self.r_g <= 0:
            raise ConfigError(f"r_g must be positive, got {self.r_g}")
        if self.r_m < 0:
            raise ConfigError(f"r_m must be >= 0, got {self.r_m}")
        if self.prune_period < 1:
            raise ConfigError(f"prune_period must be >= 1, got {self.prune_period}")


@dataclass
class GraphVertex:
    vid: int
    x: float
    y: float
    layer: Layer
    utility: int = 0
    visited: bool = False

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class FrontierCenter:
    """Representative viewpoint of one frontier cluster."""

    x: float
    y: float
    vid: int
    utility: int

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


class HierGraph:
    """Undirected weighted graph over exploration viewpoints."""

    def __init__(self):
        self.vertices: dict[int, GraphVertex] = {}
        self.adj: dict[int, dict[int, float]] = {}
        self._next_vid = 0

    def __len__(self) -> int:
        return len(self.vertices)

    # -- construction ------------------------------------------------------

    def add_vertex(self, x: float, y: float, layer: Layer,
                   utility: int = 0, visited: bool = False) -> int:
        vid = self._next_vid
        self._next_vid += 1
        self.vertices[vid] = GraphVertex(vid, x, y, layer, utility, visited)
        self.adj[vid] = {}
        return vid

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        length = math.hypot(self.vertices[b].x - self.vertices[a].x,
                            self.vertices[b].y - self.vertices[a].y)
        self.adj[a][b] = length
        self.adj[b][a] = length

    def remove_vertex(self, vid: int) -> None:
        for nb in list(self.adj[vid]):
            del self.adj[nb][vid]
        del self.adj[vid]
        del self.vertices[vid]

    def copy(self) -> "HierGraph":
        g = HierGraph()
        g._next_vid = self._next_vid
        for vid, v in self.vertices.items():
            g.vertices[vid] = GraphVertex(v.vid, v.x, v.y, v.layer, v.utility, v.visited)
        g.adj = {vid: dict(nbrs) for vid, nbrs in self.adj.items()}
        return g

    def subgraph(self, vids: set[int],
                 edges: set[tuple[int, int]] | None = None) -> "HierGraph":
        """Copy keeping only ``vids`` (and optionally only ``edges``)."""
        g = HierGraph()
        g._next_vid = self._next_vid
        for vid in sorted(vids):
            v = self.vertices[vid]
            g.vertices[vid] = GraphVertex(v.vid, v.x, v.y, v.layer, v.utility, v.visited)
            g.adj[vid] = {}
        for vid in sorted(vids):
            for nb, length in self.adj[vid].items():
                if nb in vids and (edges is None or
                                   (min(vid, nb), max(vid, nb)) in edges):
                    g.adj[vid][nb] = length
        return g

    # -- queries -----------------------------------------------------------

    def edge_count(self) -> int:
        return sum(len(n) for n in self.adj.values()) // 2

    def edge_set(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a, nbrs in self.adj.items() for b in nbrs}

    def layer_ids(self, layer: Layer) -> list[int]:
        return sorted(v for v, vert in self.vertices.items() if vert.layer == layer)

    def find_at(self, x: float, y: float, tol: float = _EXACT_TOL) -> int | None:
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            if abs(v.x - x) <= tol and abs(v.y - y) <= tol:
                return vid
        return None

    def nearest_vertex(self, x: float, y: float,
                       layer: Layer | None = None) -> int | None:
        best = None
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            if layer is not None and v.layer != layer:
                continue
            d = math.hypot(v.x - x, v.y - y)
            if best is None or d < best[0]:
                best = (d, vid)
        return None if best is None else best[1]

    def positions(self, vids: list[int]) -> np.ndarray:
        return np.array([[self.vertices[v].x, self.vertices[v].y] for v in vids],
                        dtype=float).reshape(len(vids), 2)

    def components(self, skip: int | None = None) -> list[set[int]]:
        """Connected components (BFS in id order), optionally ignoring one vertex."""
        seen: set[int] = set()
        comps = []
        for start in sorted(self.vertices):
            if start in seen or start == skip:
                continue
            comp = {start}
            queue = [start]
            while queue:
                cur = queue.pop()
                for nb in self.adj[cur]:
                    if nb != skip and nb not in comp:
                        comp.add(nb)
                        queue.append(nb)
            seen |= comp
            comps.append(comp)
        return comps

    def component_count(self, skip: int | None = None) -> int:
        return len(self.components(skip=skip))


# ---------------------------------------------------------------------------
# Shortest paths
# ---------------------------------------------------------------------------

def dijkstra(graph: HierGraph, source: int) -> tuple[dict[int, float], dict[int, int]]:
    """Single-source shortest paths. Ties pop in vertex-id order and edges
    relax in sorted neighbor order, so predecessors are deterministic."""
    dist = {source: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, source)]
    done: set[int] = set()
    while heap:
        d, vid = heapq.heappop(heap)
        if vid in done:
            continue
        done.add(vid)
        for nb in sorted(graph.adj[vid]):
            nd = d + graph.adj[vid][nb]
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                prev[nb] = vid
                heapq.heappush(heap, (nd, nb))
    return dist, prev


def shortest_path(graph: HierGraph, source: int,
                  target: int) -> tuple[float, list[int]] | None:
    """Distance and vertex list from source to target, or None if unreachable."""
    dist, prev = dijkstra(graph, source)
    if target not in dist:
        return None
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    path.reverse()
    return dist[target], path


def astar_grid(grid: OccupancyGrid, start: tuple[int, int],
               goal: tuple[int, int]) -> list[tuple[int, int]] | None:
    """8-connected A* over Free cells, in (ix, iy) coordinates.

    Diagonal moves are blocked when either orthogonal neighbor is not Free
    (no corner cutting). Costs are metric (resolution-scaled); ties break on
    (f, h, cell index). Returns the cell path including both endpoints, or
    None when the goal is unreachable.
    """
    res = grid.resolution
    w, h = grid.width, grid.height
    free = grid.cells == Cell.FREE
    sx, sy = start
    gx, gy = goal
    if not (grid.in_bounds(sx, sy) and grid.in_bounds(gx, gy)):
        return None
    if not (free[sy, sx] and free[gy, gx]):
        return None

    def heuristic(x: int, y: int) -> float:
        dx, dy = abs(x - gx), abs(y - gy)
        return res * (max(dx, dy) + (math.sqrt(2.0) - 1.0) * min(dx, dy))

    start_idx = sy * w + sx
    goal_idx = gy * w + gx
    g_cost = {start_idx: 0.0}
    prev: dict[int, int] = {}
    h0 = heuristic(sx, sy)
    heap = [(h0, h0, start_idx)]
    closed: set[int] = set()
    diag = res * math.sqrt(2.0)
    while heap:
        f, _, idx = heapq.heappop(heap)
        if idx in closed:
            continue
        if idx == goal_idx:
            path = [idx]
            while path[-1] != start_idx:
                path.append(prev[path[-1]])
            path.reverse()
            return [(i % w, i // w) for i in path]
        closed.add(idx)
        cx, cy = idx % w, idx // w
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)):
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h) or not free[ny, nx]:
                continue
            if dx != 0 and dy != 0 and not (free[cy, nx] and free[ny, cx]):
                continue
            step = diag if dx != 0 and dy != 0 else res
            nidx = ny * w + nx
            ng = g_cost[idx] + step
            if nidx not in g_cost or ng < g_cost[nidx]:
                g_cost[nidx] = ng
                prev[nidx] = idx
                hh = heuristic(nx, ny)
                heapq.heappush(heap, (ng + hh, hh, nidx))
    return None


# ---------------------------------------------------------------------------
# Edge wiring
# ---------------------------------------------------------------------------

def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def knn_los_edges(points: dict[int, tuple[float, float]], grid: OccupancyGrid,
                  k: int, known_true: set[tuple[int, int]] | None = None
                  ) -> set[tuple[int, int]]:
    """Edges to each point's k nearest line-of-sight neighbors.

    Neighbors are scanned in (distance, id) order until k visible ones are
    found; the result is the symmetric union of per-point choices, as
    canonical (min, max) id pairs. ``known_true`` pairs skip the LOS test
    (useful when edges were validated on an older belief, since sight through
    known-free space never degrades as more cells become known).
    """
    ids = sorted(points)
    n = len(ids)
    if n <= 1:
        return set()
    pos = np.array([points[i] for i in ids], dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    dmat = np.hypot(diff[..., 0], diff[..., 1])
    known = known_true or set()
    memo: dict[tuple[int, int], bool] = {}
    edges: set[tuple[int, int]] = set()
    for row, vid in enumerate(ids):
        order = [int(c) for c in np.lexsort((np.arange(n), dmat[row])) if c != row]
        accepted = 0
        lo = 0
        chunk = k + 4
        while accepted < k and lo < len(order):
            batch = order[lo:min(len(order), lo + chunk)]
            fresh = [c for c in batch
                     if _pair(vid, ids[c]) not in known
                     and _pair(vid, ids[c]) not in memo]
            if fresh:
                ok = line_of_sight_batch(grid, points[vid], pos[fresh])
                for c, good in zip(fresh, ok):
                    memo[_pair(vid, ids[c])] = bool(good)
            for c in batch:
                pair = _pair(vid, ids[c])
                if pair in known or memo.get(pair, False):
                    edges.add(pair)
                    accepted += 1
                    if accepted >= k:
                        break
            lo += len(batch)
            chunk *= 2
    return edges


def refresh_utilities(graph: HierGraph, belief: OccupancyGrid,
                      sensor_range: float,
                      frontier_xy: np.ndarray | None = None) -> None:
    """Recompute every vertex's utility against the current belief in place.

    Global-layer waypoints are created with no utility information, so a
    combined planning graph would otherwise go blind whenever the local
    window holds no frontier; refreshing keeps distant frontier regions
    visible to policies through the persistent skeleton.
    """
    if frontier_xy is None:
        from .gridworld import extract_frontiers
        frontier_xy = extract_frontiers(belief).centers_m(belief.resolution)
    vids = sorted(graph.vertices)
    utils = vertex_utilities(belief, graph.positions(vids), frontier_xy,
                             sensor_range)
    for vid, u in zip(vids, utils):
        graph.vertices[vid].utility = int(u)


def vertex_utilities(grid: OccupancyGrid, positions: np.ndarray,
                     frontier_xy: np.ndarray, sensor_range: float) -> np.ndarray:
    """Count frontier cells within sensor range and line of sight of each position."""
    m = len(positions)
    out = np.zeros(m, dtype=np.int64)
    if len(frontier_xy) == 0 or m == 0:
        return out
    for i in range(m):
        d = np.hypot(frontier_xy[:, 0] - positions[i, 0],
                     frontier_xy[:, 1] - positions[i, 1])
        close = frontier_xy[d <= sensor_range]
        if len(close) == 0:
            continue
        vis = line_of_sight_batch(grid, (positions[i, 0], positions[i, 1]), close)
        out[i] = int(np.count_nonzero(vis))
    return out


# ---------------------------------------------------------------------------
# Local layer
# ---------------------------------------------------------------------------

def build_local_graph(belief: OccupancyGrid, robot_pos: tuple[float, float],
                      params: GraphParams, sensor_range: float,
                      frontiers: np.ndarray | None = None) -> HierGraph:
    """Build the dense local layer around the robot.

    Vertices are lattice points (cell centers on a ``params.lattice`` grid,
    phase-shifted by half a spacing so rows fall on corridor centerlines
    rather than wall lines) inside the square window |x - x_R| <= d_r,
    |y - y_R| <= d_r that lie on Free belief cells, plus the robot position
    itself. Edges come from k-nearest line-of-sight wiring; each vertex's
    utility counts the frontier cells it can see within sensor range.

    Args:
        belief: the robot's current belief grid.
        robot_pos: world position; must lie on a Free belief cell.
        params: lattice spacing, k, window half-width d_r (None = 2 * range).
        sensor_range: utility visibility radius, meters.
        frontiers: optional precomputed (N, 2) frontier centers in world
            coordinates; extracted from the belief when omitted.

    Raises:
        ContractViolationError: robot_pos not on a Free belief cell.
    """
    res = belief.resolution
    d_r = params.d_r if params.d_r is not None else 2.0 * sensor_range
    rx, ry = robot_pos
    rix, riy = belief.world_to_cell(rx, ry)
    if not belief.in_bounds(rix, riy) or belief.cells[riy, rix] != Cell.FREE:
        raise ContractViolationError(
            f"robot position {robot_pos} not on a Free belief cell")

    spacing_cells = max(1, int(round(params.lattice / res)))
    ix0 = max(0, int(math.ceil((rx - d_r) / res - 0.5)))
    ix1 = min(belief.width - 1, int(math.floor((rx + d_r) / res - 0.5)))
    iy0 = max(0, int(math.ceil((ry - d_r) / res - 0.5)))
    iy1 = min(belief.height - 1, int(math.floor((ry + d_r) / res - 0.5)))

    g = HierGraph()
    g.add_vertex(rx, ry, Layer.LOCAL)
    phase = spacing_cells // 2
    start_iy = -(-(iy0 - phase) // spacing_cells) * spacing_cells + phase
    start_ix = -(-(ix0 - phase) // spacing_cells) * spacing_cells + phase
    for iy in range(start_iy, iy1 + 1, spacing_cells):
        for ix in range(start_ix, ix1 + 1, spacing_cells):
            if belief.cells[iy, ix] != Cell.FREE:
                continue
            cx, cy = belief.cell_center(ix, iy)
            if abs(cx - rx) > d_r or abs(cy - ry) > d_r:
                continue
            if abs(cx - rx) <= _EXACT_TOL and abs(cy - ry) <= _EXACT_TOL:
                continue  # robot already occupies this lattice point
            g.add_vertex(cx, cy, Layer.LOCAL)

    pts = {vid: g.vertices[vid].pos for vid in g.vertices}
    for a, b in sorted(knn_los_edges(pts, belief, params.k)):
        g.add_edge(a, b)

    if frontiers is None:
        from .gridworld import extract_frontiers
        frontiers = extract_frontiers(belief).centers_m(res)
    vids = sorted(g.vertices)
    utils = vertex_utilities(belief, g.positions(vids), frontiers, sensor_range)
    for vid, u in zip(vids, utils):
        g.vertices[vid].utility = int(u)
    return g


def frontier_centers(graph: HierGraph, r_g: float) -> list[FrontierCenter]:
    """Cluster nonzero-utility vertices and pick one representative each.

    Vertices are visited in descending utility (ties by id); each unclaimed
    vertex seeds a cluster, absorbing every nonzero-utility vertex within
    r_g of the seed. The seed vertex itself represents the cluster, which
    keeps representatives pairwise separated by at least r_g and every
    clustered vertex within r_g of its representative.
    """
    cands = [(v.utility, vid) for vid, v in graph.vertices.items() if v.utility > 0]
    cands.sort(key=lambda t: (-t[0], t[1]))
    claimed: set[int] = set()
    centers: list[FrontierCenter] = []
    for util, vid in cands:
        if vid in claimed:
            continue
        seed = graph.vertices[vid]
        centers.append(FrontierCenter(seed.x, seed.y, vid, util))
        for _, other in cands:
            if other in claimed or other == vid:
                continue
            o = graph.vertices[other]
            if math.hypot(o.x - seed.x, o.y - seed.y) <= r_g:
                claimed.add(other)
        claimed.add(vid)
    return centers


# ---------------------------------------------------------------------------
# Global layer
# ---------------------------------------------------------------------------

def _string_pull(grid: OccupancyGrid, path_cells: list[tuple[int, int]],
                 max_span: float) -> list[tuple[float, float]]:
    """Subsample a grid path into waypoints with pairwise line of sight.

    Greedily extends each span to the farthest path cell that is still
    visible from the previous waypoint and within ``max_span`` meters.
    """
    centers = [grid.cell_center(ix, iy) for ix, iy in path_cells]
    if len(centers) <= 1:
        return centers
    out = [centers[0]]
    anchor = 0
    i = 1
    while i < len(centers):
        reachable = (math.hypot(centers[i][0] - out[-1][0],
                                centers[i][1] - out[-1][1]) <= max_span
                     and line_of_sight(grid, out[-1], centers[i]))
        if reachable:
            anchor = i
            i += 1
            continue
        if centers[anchor] == out[-1]:
            # Not even one more cell fits the span; take it regardless so the
            # walk always advances (only possible when max_span < one step).
            anchor = i
        out.append(centers[anchor])
    if out[-1] != centers[-1]:
        out.append(centers[-1])
    return out


@dataclass
class ExtendStats:
    added: int = 0
    skipped_centers: list[tuple[float, float]] = field(default_factory=list)


def extend_global_graph(graph: HierGraph, robot_pos: tuple[float, float],
                        centers: list[FrontierCenter], belief: OccupancyGrid,
                        params: GraphParams,
                        served: set[tuple[int, int]] | None = None,
                        unreachable: dict[tuple[int, int], int] | None = None
                        ) -> tuple[HierGraph, ExtendStats]:
    """Grow the global layer toward frontier centers.

    The robot position is always present as a global vertex. For each center
    (unless its cell is in ``served``), a grid A* route is string-pulled into
    waypoints; waypoints within r_m of an existing global vertex reuse that
    vertex, others are inserted. Consecutive waypoints are joined (they have
    line of sight by construction) and new vertices also get k-nearest LOS
    wiring. Centers unreachable by A* are skipped and listed in the returned
    stats; the optional ``unreachable`` memo records the belief's known-cell
    count at failure time so the route is only re-attempted after the belief
    has actually grown (a failed A* sweeps the whole reachable component).

    Returns (new graph, stats); ``served`` is updated in place with newly
    routed center cells.
    """
    g = graph.copy()
    stats = ExtendStats()
    robot_vid = g.find_at(*robot_pos)
    new_vids: list[int] = []
    if robot_vid is None:
        robot_vid = g.add_vertex(robot_pos[0], robot_pos[1], Layer.GLOBAL)
        new_vids.append(robot_vid)
        stats.added += 1

    # A failed route means the center sits outside the start's free
    # component, which can only change when the belief grows (the known-cell
    # count is strictly monotone), so that count is the memo key. A robot
    # hopping between corner-touching components could in principle make the
    # memo stale until the next scan adds cells; movement is along
    # line-of-sight edges, so that window is both rare and short-lived.
    known_now = int(np.count_nonzero(belief.cells != Cell.UNKNOWN))
    start_cell = belief.world_to_cell(*robot_pos)
    for center in centers:
        cell = belief.world_to_cell(center.x, center.y)
        if served is not None and cell in served:
            continue
        if unreachable is not None and unreachable.get(cell) == known_now:
            stats.skipped_centers.append(center.pos)
            continue
        path = astar_grid(belief, start_cell, cell)
        if path is None:
            logger.debug("frontier center %s unreachable by grid A*; skipped",
                         (round(center.x, 2), round(center.y, 2)))
            stats.skipped_centers.append(center.pos)
            if unreachable is not None:
                unreachable[cell] = known_now
            continue
        if served is not None:
            served.add(cell)
        waypoints = _string_pull(belief, path, params.lattice)
        prev_vid = robot_vid
        for i, (wx, wy) in enumerate(waypoints[1:], start=1):
            nxt = waypoints[i + 1] if i + 1 < len(waypoints) else None
            vid = g.find_at(wx, wy)
            if vid is None:
                # Reuse a nearby vertex only when it keeps the chain's
                # line-of-sight continuity, both backward and forward.
                near = _nearest_within(g, wx, wy, params.r_m)
                if near is not None:
                    npos = g.vertices[near].pos
                    if (line_of_sight(belief, g.vertices[prev_vid].pos, npos)
                            and (nxt is None or line_of_sight(belief, npos, nxt))):
                        vid = near
            if vid is None:
                vid = g.add_vertex(wx, wy, Layer.GLOBAL)
                new_vids.append(vid)
                stats.added += 1
            if vid != prev_vid and line_of_sight(belief, g.vertices[prev_vid].pos,
                                                 g.vertices[vid].pos):
                g.add_edge(prev_vid, vid)
            prev_vid = vid

    if len(g) > 1 and new_vids:
        pts = {vid: g.vertices[vid].pos for vid in g.vertices}
        wired = knn_los_edges(pts, belief, params.k, known_true=g.edge_set())
        for a, b in sorted(wired):
            if a in new_vids or b in new_vids or robot_vid in (a, b):
                g.add_edge(a, b)
    return g, stats


def _nearest_within(g: HierGraph, x: float, y: float, radius: float) -> int | None:
    best = None
    for vid in sorted(g.vertices):
        v = g.vertices[vid]
        d = math.hypot(v.x - x, v.y - y)
        if d <= radius and (best is None or d < best[0]):
            best = (d, vid)
    return None if best is None else best[1]


@dataclass
class MergeStats:
    accepted: int = 0
    reinstated: int = 0
    removed: int = 0


def merge_global_graphs(mine: HierGraph, incoming: HierGraph,
                        belief: OccupancyGrid, params: GraphParams,
                        exempt: list[tuple[float, float]] = (),
                        sparsify: bool = True) -> tuple[HierGraph, MergeStats]:
    """Ingest another robot's global layer into ``mine``.

    Incoming vertices are downsampled: one is dropped when a surviving vertex
    (of mine or already accepted) lies within r_m, unless it sits at an
    exempt position (current robot poses). Accepted vertices are wired by
    k-nearest LOS; incoming edges are remapped through each dropped vertex's
    nearest survivor, and if a remapped edge loses line of sight the original
    endpoints are reinstated so no connectivity from the inputs is lost.

    A final sparsification pass visits vertices in descending id and removes
    each one whose removal neither increases the connected-component count
    nor strips any remaining vertex of its last edge (exempt positions are
    kept). The surviving same-component relation therefore matches the
    pre-sparsification union; pass ``sparsify=False`` to get that union.

    Returns (merged graph, stats).
    """
    g = mine.copy()
    stats = MergeStats()

    def is_exempt(x: float, y: float) -> bool:
        return any(math.hypot(x - ex, y - ey) <= _EXACT_TOL for ex, ey in exempt)

    def blocked_by(x: float, y: float) -> int | None:
        return _nearest_within(g, x, y, params.r_m)

    rep: dict[int, int] = {}
    new_vids: list[int] = []
    for ivid in sorted(incoming.vertices):
        iv = incoming.vertices[ivid]
        if iv.layer != Layer.GLOBAL:
            continue
        exact = g.find_at(iv.x, iv.y)
        if exact is not None:
            rep[ivid] = exact
            continue
        near = None if is_exempt(iv.x, iv.y) else blocked_by(iv.x, iv.y)
        if near is not None and params.r_m > 0:
            rep[ivid] = near
        else:
            vid = g.add_vertex(iv.x, iv.y, Layer.GLOBAL, iv.utility, iv.visited)
            rep[ivid] = vid
            new_vids.append(vid)
            stats.accepted += 1

    if new_vids:
        pts = {vid: g.vertices[vid].pos for vid in g.vertices}
        wired = knn_los_edges(pts, belief, params.k, known_true=g.edge_set())
        for a, b in sorted(wired):
            if a in new_vids or b in new_vids:
                g.add_edge(a, b)

    incoming_globals = set(rep)
    for a, b in sorted(incoming.edge_set()):
        if a not in incoming_globals or b not in incoming_globals:
            continue
        ra, rb = rep[a], rep[b]
        if ra == rb:
            continue
        if line_of_sight(belief, g.vertices[ra].pos, g.vertices[rb].pos):
            g.add_edge(ra, rb)
            continue
        # Remap lost sight: reinstate the original endpoints and edge.
        for orig in (a, b):
            if g.find_at(incoming.vertices[orig].x, incoming.vertices[orig].y) is None:
                nv = g.add_vertex(incoming.vertices[orig].x,
                                  incoming.vertices[orig].y, Layer.GLOBAL,
                                  incoming.vertices[orig].utility)
                rep[orig] = nv
                new_vids.append(nv)
                stats.accepted += 1
                stats.reinstated += 1
            else:
                rep[orig] = g.find_at(incoming.vertices[orig].x,
                                      incoming.vertices[orig].y)
        g.add_edge(rep[a], rep[b])

    if sparsify:
        for vid in sorted(g.vertices, reverse=True):
            v = g.vertices[vid]
            if is_exempt(v.x, v.y):
                continue
            if any(len(g.adj[nb]) <= 1 for nb in g.adj[vid]):
                continue
            before = g.component_count()
            after = g.component_count(skip=vid)
            # Removing an isolated vertex lowers the count; never raises it.
            if after <= before:
                g.remove_vertex(vid)
                stats.removed += 1
    return g, stats


def prune_global_graph(graph: HierGraph, robot_positions: list[tuple[float, float]],
                       centers: list[tuple[float, float]]) -> HierGraph:
    """Keep only shortest-path structure between robots and frontier centers.

    Runs one Dijkstra per robot position and keeps the union of shortest-path
    vertices and edges over all (robot, center) pairs, plus the robot
    vertices themselves. Shortest-path distances between any robot and any
    reachable center are preserved exactly. Positions resolve to their
    nearest graph vertex (exact match first).

    Raises:
        ContractViolationError: the graph is empty but positions were given.
    """
    if len(graph) == 0:
        if robot_positions or centers:
            raise ContractViolationError("cannot prune an empty graph")
        return graph.copy()

    def resolve(p: tuple[float, float]) -> int:
        exact = graph.find_at(p[0], p[1])
        return exact if exact is not None else graph.nearest_vertex(p[0], p[1])

    robot_vids = [resolve(p) for p in robot_positions]
    center_vids = [resolve(p) for p in centers]
    keep_vids: set[int] = set(robot_vids)
    keep_edges: set[tuple[int, int]] = set()
    for rvid in robot_vids:
        dist, prev = dijkstra(graph, rvid)
        for cvid in center_vids:
            if cvid not in dist:
                continue
            cur = cvid
            keep_vids.add(cur)
            while cur != rvid:
                p = prev[cur]
                keep_edges.add((min(cur, p), max(cur, p)))
                keep_vids.add(p)
                cur = p
    return graph.subgraph(keep_vids, keep_edges)


# ---------------------------------------------------------------------------
# Planning graph
# ---------------------------------------------------------------------------

def planning_graph(global_g: HierGraph, local_g: HierGraph,
                   belief: OccupancyGrid, params: GraphParams) -> HierGraph:
    """Union of both layers for this step's planning.

    Vertices merge with local priority: a global vertex within half a
    lattice spacing of some local vertex is absorbed by it (the local
    utility wins). Layer edges carry over, remapped through absorbed
    vertices and re-validated for line of sight when an endpoint moved;
    vertices left under-connected then receive k-nearest LOS wiring.

    Returns a fresh graph with its own vertex ids.
    """
    g = HierGraph()
    tol = params.lattice / 2.0
    lmap: dict[int, int] = {}
    for vid in sorted(local_g.vertices):
        v = local_g.vertices[vid]
        lmap[vid] = g.add_vertex(v.x, v.y, Layer.LOCAL, v.utility, v.visited)
    local_ids = sorted(lmap.values())
    local_pos = g.positions(local_ids)
    gmap: dict[int, int] = {}
    moved: set[int] = set()
    for vid in sorted(global_g.vertices):
        v = global_g.vertices[vid]
        if len(local_ids):
            d = np.hypot(local_pos[:, 0] - v.x, local_pos[:, 1] - v.y)
            j = int(np.argmin(d))
            if d[j] <= tol:
                gmap[vid] = local_ids[j]
                if d[j] > _EXACT_TOL:
                    moved.add(vid)
                continue
        gmap[vid] = g.add_vertex(v.x, v.y, Layer.GLOBAL, v.utility, v.visited)

    for a, b in sorted(local_g.edge_set()):
        g.add_edge(lmap[a], lmap[b])
    for a, b in sorted(global_g.edge_set()):
        ra, rb = gmap[a], gmap[b]
        if ra == rb:
            continue
        if a in moved or b in moved:
            if not line_of_sight(belief, g.vertices[ra].pos, g.vertices[rb].pos):
                continue
        g.add_edge(ra, rb)

    sparse = {vid for vid in sorted(g.vertices) if len(g.adj[vid]) < params.k}
    if sparse and len(g) > 1:
        pts = {vid: g.vertices[vid].pos for vid in g.vertices}
        wired = knn_los_edges(pts, belief, params.k, known_true=g.edge_set())
        for a, b in sorted(wired):
            if a in sparse or b in sparse:
                g.add_edge(a, b)
    if len(g) > 1 and g.component_count() > 1:
        # Layers that are mutually visible somewhere must end up connected;
        # fully saturated vertices can hide the only cross-layer link, so
        # re-wire without the degree filter before giving up.
        pts = {vid: g.vertices[vid].pos for vid in g.vertices}
        for a, b in sorted(knn_los_edges(pts, belief, params.k,
                                         known_true=g.edge_set())):
            g.add_edge(a, b)
    return g


# ---------------------------------------------------------------------------
# Debug dump format
# ---------------------------------------------------------------------------

def dump_graph(graph: HierGraph, path: str) -> None:
    """Write a graph as JSON lines: vertex records then edge records."""
    with open(path, "w", encoding="ascii") as fh:
        for vid in sorted(graph.vertices):
            v = graph.vertices[vid]
            fh.write(json.dumps({"type": "vertex", "id": vid, "x": v.x, "y": v.y,
                                 "layer": v.layer.value, "u": v.utility}) + "\n")
        for a, b in sorted(graph.edge_set()):
            fh.write(json.dumps({"type": "edge", "a": a, "b": b,
                                 "length": graph.adj[a][b]}) + "\n")


def load_graph(path: str) -> HierGraph:
    """Read a graph written by :func:`dump_graph`."""
    g = HierGraph()
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["type"] == "vertex":
                g.vertices[rec["id"]] = GraphVertex(rec["id"], rec["x"], rec["y"],
                                                    Layer(rec["layer"]), rec["u"])
                g.adj[rec["id"]] = {}
                g._next_vid = max(g._next_vid, rec["id"] + 1)
            else:
                g.adj[rec["a"]][rec["b"]] = rec["length"]
                g.adj[rec["b"]][rec["a"]] = rec["length"]
    return g
