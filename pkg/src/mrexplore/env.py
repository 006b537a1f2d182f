"""Multi-robot exploration episodes: observations, rewards, termination.

Each decision step every active robot hops one roadmap edge, scans, trades
maps and graphs with whoever is in radio contact, rebuilds its planning
graph, and receives a five-part reward:

- newly observable frontier cells at the arrived viewpoint,
- a travel-cost penalty (negative edge length),
- the signed change this robot caused in the frontier count of a privileged
  union map (never shown to policies),
- the map-surplus value of the arrived vertex (how much unshared map the
  robot would deliver by walking toward a teammate), and
- a completion bonus when every robot's own map covers 99% of the truth.

Everything is deterministic given the episode config: robots act in id
order, scans integrate in id order, and radio sync folds in id order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import comms, gridworld, roadmap
from .comms import CommEvent, CommsParams
from .errors import ConfigError, ContractViolationError
from .gridworld import Cell, MapSpec, OccupancyGrid, SensorSpec
from .roadmap import GraphParams, HierGraph, Layer

logger = logging.getLogger(__name__)

COVERAGE_DONE = 0.99
UTILITY_CAP = 50.0


@dataclass
class SurplusParams:
    """Thresholds for the map-surplus incentive field."""

    dm_min_cells: int = 40
    s_min: float = 1.0

    def __post_init__(self):
        if self.dm_min_cells < 0:
            raise ConfigError(f"dm_min_cells must be >= 0, got {self.dm_min_cells}")
        if self.s_min <= 0:
            raise ConfigError(f"s_min must be > 0, got {self.s_min}")


@dataclass
class RewardWeights:
    a1: float = 1.0
    a2: float = 0.1
    a3: float = 1.0
    a4: float = 0.5
    completion: float = 20.0
    gamma: float = 0.99

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")


@dataclass
class EpisodeConfig:
    map_spec: MapSpec
    n_robots: int = 2
    budget: int = 196
    sensor: SensorSpec = field(default_factory=SensorSpec)
    comms: CommsParams = field(default_factory=CommsParams)
    graph: GraphParams = field(default_factory=GraphParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    surplus: SurplusParams = field(default_factory=SurplusParams)
    seed: int = 0
    stagger: int = 0
    comms_enabled: bool = True
    # Ablation switch: when off, the teammate-surplus signal is removed
    # end to end (feature column and its reward term both read zero).
    surplus_enabled: bool = True

    def __post_init__(self):
        if self.n_robots < 1:
            raise ConfigError(f"n_robots must be >= 1, got {self.n_robots}")
        if self.budget <= 0:
            raise ConfigError(f"budget must be > 0, got {self.budget}")
        if self.stagger < 0:
            raise ConfigError(f"stagger must be >= 0, got {self.stagger}")


@dataclass
class RobotState:
    rid: int
    pos: tuple[float, float]
    belief: OccupancyGrid
    global_graph: HierGraph
    graph_params: GraphParams
    trajectory: list[tuple[float, float]] = field(default_factory=list)
    distance: float = 0.0
    last_known: dict[int, tuple[float, float]] = field(default_factory=dict)
    last_maps: dict[int, int] = field(default_factory=dict)
    served_centers: set[tuple[int, int]] = field(default_factory=set)
    unroutable_centers: dict[tuple[int, int], int] = field(default_factory=dict)
    active: bool = True

    def coverage(self, truth: OccupancyGrid) -> float:
        return gridworld.coverage_fraction(self.belief, truth)


@dataclass
class TeammateInfo:
    """A teammate as robot i remembers it: attachment vertex in the current
    planning graph, unshared-map estimate, and graph distance (inf if
    unreachable)."""

    rid: int
    vid: int
    delta_m: int
    dist: float


@dataclass(eq=False)
class Observation:
    """Per-robot view handed to policies.

    ``features`` rows are (x, y, utility, guidepost, indicator, surplus):
    robot-centric coordinates over the map diagonal, utility over the
    50-cell cap, visited flag, -1/0/+1 self/teammate indicator, and surplus
    over the largest active unshared-map estimate. ``surplus_raw`` keeps the
    unnormalized field. Rows follow sorted planning-graph vertex ids.
    """

    graph: HierGraph
    vids: list[int]
    rows: dict[int, int]
    features: np.ndarray
    edges: np.ndarray
    current_row: int
    candidate_rows: np.ndarray
    candidate_mask: np.ndarray
    surplus_raw: np.ndarray
    teammates: list[TeammateInfo]
    step: int
    rid: int

    @property
    def current_vid(self) -> int:
        return self.vids[self.current_row]

    def candidate_vids(self) -> list[int]:
        return [self.vids[r] for r in self.candidate_rows if r >= 0]


@dataclass
class RewardBreakdown:
    r_o: float = 0.0
    r_d: float = 0.0
    r_f: float = 0.0
    r_s: float = 0.0
    r_c: float = 0.0
    total: float = 0.0


def map_surplus_field(graph: HierGraph, self_vid: int,
                      teammates: list[TeammateInfo],
                      params: SurplusParams) -> dict[int, float]:
    """Per-vertex surplus values along shortest paths toward teammates.

    For each teammate whose unshared-map estimate delta_m meets the
    threshold, the shortest path from the robot's vertex to the teammate's
    last-known vertex carries values rising linearly from ``s_min`` at the
    robot to ``delta_m`` at the teammate; a vertex on several paths keeps
    the maximum; all other vertices stay 0. A teammate attached to the
    robot's own vertex contributes its full ``delta_m`` there; an
    unreachable teammate contributes nothing (logged).
    """
    s = {vid: 0.0 for vid in graph.vertices}
    dist, prev = roadmap.dijkstra(graph, self_vid)
    for tm in sorted(teammates, key=lambda t: t.rid):
        if tm.delta_m < params.dm_min_cells:
            continue
        if tm.vid not in dist:
            logger.debug("teammate %d last-known vertex %d unreachable; "
                         "no surplus contribution", tm.rid, tm.vid)
            continue
        d_ik = dist[tm.vid]
        if d_ik == 0.0:
            s[self_vid] = max(s[self_vid], float(tm.delta_m))
            continue
        cur = tm.vid
        while True:
            value = dist[cur] * (tm.delta_m - params.s_min) / d_ik + params.s_min
            s[cur] = max(s[cur], value)
            if cur == self_vid:
                break
            cur = prev[cur]
    return s


def action_candidates(graph: HierGraph, vid: int, k: int) -> list[int]:
    """The robot's move options: up to k nearest graph neighbors, ascending
    edge length (ties by id)."""
    nbrs = sorted(graph.adj[vid].items(), key=lambda kv: (kv[1], kv[0]))
    return [nb for nb, _ in nbrs[:k]]


class ExplorationEnv:
    """One exploration episode over a shared ground-truth map."""

    def __init__(self, config: EpisodeConfig, truth: OccupancyGrid | None = None):
        self.config = config
        self.truth = truth if truth is not None else gridworld.generate_map(config.map_spec)
        self.robots: list[RobotState] = []
        self.union_map: OccupancyGrid | None = None
        self.steps = 0
        self.comm_events: list[CommEvent] = []
        self._observations: list[Observation] = []
        self._candidates: list[list[int]] = []
        self._stay_flags: list[bool] = []

    # -- lifecycle -----------------------------------------------------------

    def spawn_positions(self) -> list[tuple[float, float]]:
        """Deterministic clustered spawn: a seeded anchor free cell plus the
        n-1 nearest free cells (ties by cell index)."""
        rng = np.random.default_rng(self.config.seed)
        free = np.argwhere(self.truth.cells == Cell.FREE)
        if len(free) < self.config.n_robots:
            raise ConfigError("map has fewer free cells than robots")
        anchor = free[int(rng.integers(len(free)))]
        d = np.hypot(free[:, 0] - anchor[0], free[:, 1] - anchor[1])
        order = np.lexsort((free[:, 1], free[:, 0], d))
        cells = free[order[:self.config.n_robots]]
        return [self.truth.cell_center(int(c[1]), int(c[0])) for c in cells]

    def reset(self) -> list[Observation]:
        cfg = self.config
        spawns = self.spawn_positions()
        self.union_map = OccupancyGrid.unknown(self.truth.width, self.truth.height,
                                               self.truth.resolution)
        self.robots = []
        for rid in range(cfg.n_robots):
            belief = OccupancyGrid.unknown(self.truth.width, self.truth.height,
                                           self.truth.resolution)
            r = RobotState(rid=rid, pos=spawns[rid], belief=belief,
                           global_graph=HierGraph(), graph_params=cfg.graph,
                           active=(0 >= rid * cfg.stagger))
            r.trajectory.append(r.pos)
            r.last_known = {k: spawns[k] for k in range(cfg.n_robots) if k != rid}
            r.last_maps = {k: 0 for k in range(cfg.n_robots) if k != rid}
            self.robots.append(r)
        self.steps = 0
        self.comm_events = []
        for r in self.robots:
            if r.active:
                updates = self._scan(r, stamp=0)
                self.union_map = gridworld.integrate_scan(self.union_map,
                                                          updates, stamp=0)
        self._update_graphs_and_observations()
        return list(self._observations)

    # -- stepping ------------------------------------------------------------

    def step(self, actions: list[int]) -> tuple[list[RewardBreakdown],
                                                list[Observation], bool]:
        """Advance one decision step.

        ``actions[i]`` indexes robot i's candidate list from the latest
        observation (ignored for inactive robots and forced to "stay" when
        the robot had no candidates). Returns per-robot reward breakdowns,
        next observations, and the episode-over flag (success or budget).
        """
        if not self.robots:
            raise ContractViolationError("step() before reset()")
        if len(actions) != len(self.robots):
            raise ContractViolationError(
                f"expected {len(self.robots)} actions, got {len(actions)}")
        self.steps += 1
        rewards = [RewardBreakdown() for _ in self.robots]

        # 1. Movement, in robot-id order.
        for r in self.robots:
            if not r.active:
                continue
            if self._stay_flags[r.rid]:
                r.trajectory.append(r.pos)
                continue
            cands = self._candidates[r.rid]
            a = actions[r.rid]
            if not isinstance(a, (int, np.integer)) or not (0 <= a < len(cands)):
                raise ContractViolationError(
                    f"robot {r.rid}: action {a!r} is not a valid candidate index "
                    f"(0..{len(cands) - 1})")
            obs = self._observations[r.rid]
            src = obs.current_vid
            tgt = cands[a]
            length = obs.graph.adj[src][tgt]
            tv = obs.graph.vertices[tgt]
            r.pos = (tv.x, tv.y)
            r.distance += length
            r.trajectory.append(r.pos)
            rewards[r.rid].r_d = -length

        # Launch robots whose stagger delay expires this step; the scan
        # phase below gives them their first sensing pass.
        for r in self.robots:
            if not r.active and self.steps >= r.rid * self.config.stagger:
                r.active = True

        # 2. Scans + observable-frontier reward, then 3. privileged union
        # frontier change, both in robot-id order.
        for r in self.robots:
            if not r.active:
                continue
            updates = self._scan(r, stamp=self.steps)
            rewards[r.rid].r_o = self._observable_frontiers(r)
            before = len(gridworld.extract_frontiers(self.union_map).cells)
            self.union_map = gridworld.integrate_scan(self.union_map, updates,
                                                      stamp=self.steps)
            after = len(gridworld.extract_frontiers(self.union_map).cells)
            rewards[r.rid].r_f = float(after - before)

        # 4. Radio contact and synchronization.
        if self.config.comms_enabled:
            active = {r.rid: r.pos for r in self.robots if r.active}
            if len(active) >= 2:
                for comp in comms.connectivity_components(active, self.truth,
                                                          self.config.comms):
                    if len(comp) < 2:
                        continue
                    members = [self.robots[rid] for rid in comp]
                    self.comm_events.append(
                        comms.sync_component(members, self.truth,
                                             self.config.comms, self.steps))

        # 5. Graph maintenance, next observations, surplus field.
        self._update_graphs_and_observations()

        # 6. Arrival surplus and termination.
        for r in self.robots:
            if r.active:
                obs = self._observations[r.rid]
                rewards[r.rid].r_s = float(obs.surplus_raw[obs.current_row])
        success = self.is_done()
        if success:
            for b in rewards:
                b.r_c = self.config.reward.completion
        w = self.config.reward
        for b in rewards:
            b.total = w.a1 * b.r_o + w.a2 * b.r_d + w.a3 * b.r_f + w.a4 * b.r_s + b.r_c
        done = success or self.steps >= self.config.budget
        return rewards, list(self._observations), done

    def is_done(self) -> bool:
        """Coverage success: every robot's own map covers >= 99% of the
        truth's free space (closed threshold)."""
        return all(r.coverage(self.truth) >= COVERAGE_DONE for r in self.robots)

    # -- internals -----------------------------------------------------------

    def _scan(self, r: RobotState, stamp: int) -> gridworld.CellUpdates:
        updates = gridworld.lidar_scan(self.truth, r.pos, self.config.sensor)
        r.belief = gridworld.integrate_scan(r.belief, updates, stamp=stamp)
        return updates

    def _observable_frontiers(self, r: RobotState) -> float:
        frontier_xy = gridworld.extract_frontiers(r.belief).centers_m(
            r.belief.resolution)
        if len(frontier_xy) == 0:
            return 0.0
        pos = np.array([r.pos], dtype=float)
        return float(roadmap.vertex_utilities(r.belief, pos, frontier_xy,
                                              self.config.sensor.range_m)[0])

    def _update_graphs_and_observations(self) -> None:
        cfg = self.config
        self._observations = [None] * len(self.robots)  # type: ignore[list-item]
        self._candidates = [[] for _ in self.robots]
        self._stay_flags = [False] * len(self.robots)
        for r in self.robots:
            if not r.active:
                self._observations[r.rid] = self._empty_observation(r)
                self._stay_flags[r.rid] = True
                continue
            frontier_xy = gridworld.extract_frontiers(r.belief).centers_m(
                r.belief.resolution)
            local = roadmap.build_local_graph(r.belief, r.pos, r.graph_params,
                                              cfg.sensor.range_m,
                                              frontiers=frontier_xy)
            centers = roadmap.frontier_centers(local, r.graph_params.r_g)
            r.global_graph, _ = roadmap.extend_global_graph(
                r.global_graph, r.pos, centers, r.belief, r.graph_params,
                r.served_centers, r.unroutable_centers)
            plan = roadmap.planning_graph(r.global_graph, local, r.belief,
                                          r.graph_params)
            roadmap.refresh_utilities(plan, r.belief, cfg.sensor.range_m,
                                      frontier_xy)
            if self.steps > 0 and self.steps % r.graph_params.prune_period == 0:
                poses = [r.pos] + [r.last_known[k] for k in sorted(r.last_known)]
                plan_centers = roadmap.frontier_centers(plan, r.graph_params.r_g)
                r.global_graph = roadmap.prune_global_graph(
                    r.global_graph, poses, [c.pos for c in plan_centers])
            self._observations[r.rid] = self._build_observation(r, plan)

    def _build_observation(self, r: RobotState, plan: HierGraph) -> Observation:
        cfg = self.config
        vids = sorted(plan.vertices)
        rows = {vid: i for i, vid in enumerate(vids)}
        pos_arr = plan.positions(vids)
        n = len(vids)

        current_vid = plan.find_at(*r.pos)
        if current_vid is None:  # pragma: no cover - robot vertex always exists
            current_vid = plan.nearest_vertex(*r.pos)
        current_row = rows[current_vid]

        teammates: list[TeammateInfo] = []
        dist, _ = roadmap.dijkstra(plan, current_vid)
        for k in sorted(r.last_known):
            lk = r.last_known[k]
            tvid = plan.nearest_vertex(*lk)
            delta_m = int(r.belief.known_count()) - r.last_maps[k]
            teammates.append(TeammateInfo(rid=k, vid=tvid, delta_m=delta_m,
                                          dist=dist.get(tvid, math.inf)))

        if cfg.surplus_enabled:
            s_map = map_surplus_field(plan, current_vid, teammates, cfg.surplus)
            surplus_raw = np.array([s_map[v] for v in vids], dtype=float)
        else:
            surplus_raw = np.zeros(len(vids))

        # Guidepost: vertices this robot's own trajectory has passed.
        traj = np.array(r.trajectory, dtype=float)
        half = r.graph_params.lattice / 2.0
        dmat = np.hypot(pos_arr[:, None, 0] - traj[None, :, 0],
                        pos_arr[:, None, 1] - traj[None, :, 1])
        guidepost = (dmat.min(axis=1) <= half).astype(float)

        indicator = np.zeros(n)
        for tm in teammates:
            indicator[rows[tm.vid]] = 1.0
        indicator[current_row] = -1.0

        active_dm = [tm.delta_m for tm in teammates
                     if tm.delta_m >= cfg.surplus.dm_min_cells
                     and math.isfinite(tm.dist)]
        s_scale = float(max(active_dm)) if active_dm else 1.0

        diag = r.belief.diagonal_m
        utils = np.array([plan.vertices[v].utility for v in vids], dtype=float)
        features = np.column_stack([
            (pos_arr[:, 0] - r.pos[0]) / diag,
            (pos_arr[:, 1] - r.pos[1]) / diag,
            np.minimum(utils, UTILITY_CAP) / UTILITY_CAP,
            guidepost,
            indicator,
            surplus_raw / s_scale,
        ])

        edges = np.array([[rows[a], rows[b]] for a, b in sorted(plan.edge_set())],
                         dtype=np.int64).reshape(-1, 2)

        cands = action_candidates(plan, current_vid, r.graph_params.k)
        if not cands:
            logger.warning("robot %d has no move candidates at step %d; "
                           "staying in place", r.rid, self.steps)
            self._stay_flags[r.rid] = True
            cands = [current_vid]
        self._candidates[r.rid] = cands
        k = r.graph_params.k
        cand_rows = np.full(k, -1, dtype=np.int64)
        for i, vid in enumerate(cands[:k]):
            cand_rows[i] = rows[vid]
        mask = cand_rows >= 0

        return Observation(graph=plan, vids=vids, rows=rows, features=features,
                           edges=edges, current_row=current_row,
                           candidate_rows=cand_rows, candidate_mask=mask,
                           surplus_raw=surplus_raw, teammates=teammates,
                           step=self.steps, rid=r.rid)

    def _empty_observation(self, r: RobotState) -> Observation:
        g = HierGraph()
        vid = g.add_vertex(r.pos[0], r.pos[1], Layer.LOCAL)
        k = r.graph_params.k
        cand_rows = np.full(k, -1, dtype=np.int64)
        cand_rows[0] = 0
        self._candidates[r.rid] = [vid]
        return Observation(graph=g, vids=[vid], rows={vid: 0},
                           features=np.zeros((1, 6)),
                           edges=np.zeros((0, 2), dtype=np.int64),
                           current_row=0, candidate_rows=cand_rows,
                           candidate_mask=cand_rows >= 0,
                           surplus_raw=np.zeros(1), teammates=[],
                           step=self.steps, rid=r.rid)

    # -- reporting helpers ----------------------------------------------------

    def coverages(self) -> list[float]:
        return [r.coverage(self.truth) for r in self.robots]

    def union_known_area_m2(self) -> float:
        res = self.truth.resolution
        return float(self.union_map.known_count()) * res * res

    def sensed_free_percents(self) -> list[float]:
        """Each robot's believed-Free area as a percentage of truth free area."""
        truth_free = int(np.count_nonzero(self.truth.cells == Cell.FREE))
        out = []
        for r in self.robots:
            free = int(np.count_nonzero(r.belief.cells == Cell.FREE))
            out.append(100.0 * free / truth_free)
        return out
