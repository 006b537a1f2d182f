"""Range-limited communication: path loss, connectivity, and map exchange.

Two link models share one interface. ``proximity`` connects robots within a
fixed distance. ``signal`` applies log-distance path loss plus a per-wall
attenuation term, connecting whenever the received power clears a threshold.
With zero wall attenuation the signal model reduces exactly to a proximity
disk whose radius follows in closed form from the link budget.

Robots in one connectivity component (multi-hop) synchronize: belief grids
are unioned, last-known pose tables and last-contact map sizes refresh, and
global roadmap layers are exchanged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import gridworld, roadmap
from .errors import ConfigError, ContractViolationError
from .gridworld import Cell, OccupancyGrid, _canonical, sampled_segment_cells

logger = logging.getLogger(__name__)


class CommsMode(str, Enum):
    PROXIMITY = "proximity"
    SIGNAL = "signal"


@dataclass
class CommsParams:
    """Link model parameters.

    Defaults give the signal model a ~100 m free-space radius and roughly
    30 m through a single wall, a desk-scale stand-in for an indoor radio.
    """

    mode: CommsMode = CommsMode.PROXIMITY
    d_comm: float = 30.0
    p_t_dbm: float = 20.0
    p_thresh_dbm: float = -80.0
    pl0_db: float = 40.0
    exponent: float = 3.0
    wall_db: float = 16.0
    d0: float = 1.0

    def __post_init__(self):
        self.mode = CommsMode(self.mode)
        if self.d_comm < 0:
            raise ConfigError(f"d_comm must be >= 0, got {self.d_comm}")
        if self.exponent <= 0:
            raise ConfigError(f"path-loss exponent must be positive, got {self.exponent}")
        if self.wall_db < 0:
            raise ConfigError(f"wall_db must be >= 0, got {self.wall_db}")
        if self.d0 <= 0:
            raise ConfigError(f"reference distance d0 must be positive, got {self.d0}")

    def free_space_radius(self) -> float:
        """Distance at which received power meets the threshold with no walls."""
        budget = self.p_t_dbm - self.p_thresh_dbm - self.pl0_db
        return self.d0 * 10.0 ** (budget / (10.0 * self.exponent))


@dataclass
class CommEvent:
    """One component synchronization: who met and what was transferred."""

    step: int
    component: list[int]
    cells_merged: dict[int, int]
    nodes_transferred: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "step": self.step,
            "component": list(self.component),
            "cells_merged": {str(k): v for k, v in self.cells_merged.items()},
            "nodes_transferred": {str(k): v for k, v in self.nodes_transferred.items()},
        }


def count_walls(truth: OccupancyGrid, a: tuple[float, float],
                b: tuple[float, float]) -> int:
    """Distinct Occupied cells crossed by segment a-b (direction-independent)."""
    ax, ay, bx, by = _canonical(a[0], a[1], b[0], b[1])
    ix, iy = sampled_segment_cells(truth, ax, ay, bx, by)
    occ = truth.cells[iy, ix] == Cell.OCCUPIED
    if not occ.any():
        return 0
    flat = iy[occ] * truth.width + ix[occ]
    return int(np.unique(flat).size)


def path_loss(a: tuple[float, float], b: tuple[float, float],
              truth: OccupancyGrid, params: CommsParams) -> float:
    """Log-distance path loss in dB between two positions, plus wall terms.

    Distances below the reference distance d0 are clamped to d0, so loss
    never falls below pl0_db. Symmetric in (a, b) and non-negative for any
    sane parameterization.
    """
    d = math.hypot(b[0] - a[0], b[1] - a[1])
    loss = params.pl0_db + 10.0 * params.exponent * math.log10(max(d, params.d0) / params.d0)
    if params.wall_db > 0.0:
        loss += params.wall_db * count_walls(truth, a, b)
    return loss


def received_power(a, b, truth: OccupancyGrid, params: CommsParams) -> float:
    return params.p_t_dbm - path_loss(a, b, truth, params)


def is_connected(a: tuple[float, float], b: tuple[float, float],
                 truth: OccupancyGrid, params: CommsParams) -> bool:
    """Single-link connectivity decision under the configured mode.

    Thresholds are closed: distance exactly d_comm, or received power exactly
    at the threshold, counts as connected.
    """
    if params.mode == CommsMode.PROXIMITY:
        return math.hypot(b[0] - a[0], b[1] - a[1]) <= params.d_comm
    return received_power(a, b, truth, params) >= params.p_thresh_dbm


def connectivity_components(positions: dict[int, tuple[float, float]],
                            truth: OccupancyGrid,
                            params: CommsParams) -> list[list[int]]:
    """Partition robots into multi-hop connectivity components.

    Returns components as sorted id lists, ordered by their smallest member.
    """
    ids = sorted(positions)
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ii, i in enumerate(ids):
        for j in ids[ii + 1:]:
            if is_connected(positions[i], positions[j], truth, params):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    return [sorted(groups[r]) for r in sorted(groups)]


def sync_component(robots: list, truth: OccupancyGrid, params: CommsParams,
                   step: int) -> CommEvent:
    """Synchronize one connectivity component in place.

    Every member ends with the identical unioned belief and an identical
    copy of one canonical merged global roadmap (the members' layers folded
    together in robot-id order); last-known poses and last-contact map sizes
    refresh for all members. Identical graphs matter downstream: policies
    that pick a shared meeting vertex can only agree if the members compute
    on the same graph. The belief result is independent of member order
    because the per-cell merge rule is a lattice join.

    Args:
        robots: RobotState-like objects (rid, pos, belief, global_graph,
            last_known, last_maps, graph_params attributes) forming one
            component of at least two members.
        truth: ground truth used to validate connectivity.
        params: link parameters.
        step: current decision step, recorded on the event.

    Raises:
        ContractViolationError: members do not form a single component.
    """
    if len(robots) < 2:
        raise ContractViolationError("sync_component needs at least two robots")
    positions = {r.rid: r.pos for r in robots}
    comps = connectivity_components(positions, truth, params)
    if len(comps) != 1:
        raise ContractViolationError(
            f"robots {sorted(positions)} span {len(comps)} components, expected 1")

    robots = sorted(robots, key=lambda r: r.rid)
    union = robots[0].belief
    for r in robots[1:]:
        union = gridworld.merge_beliefs(union, r.belief)
    union_known = union.known_count()

    cells_merged = {}
    nodes_transferred = {}
    for r in robots:
        cells_merged[r.rid] = union_known - r.belief.known_count()
        r.belief = union.copy()

    # Graph exchange: fold the members' global layers into one canonical
    # graph (lowest rid first), then hand every member its own copy.
    current_positions = [r.pos for r in robots]
    merged = robots[0].global_graph
    nodes_transferred[robots[0].rid] = 0
    for other in robots[1:]:
        merged, stats = roadmap.merge_global_graphs(
            merged, other.global_graph, union, robots[0].graph_params,
            exempt=current_positions)
        nodes_transferred[other.rid] = stats.accepted
    for r in robots:
        r.global_graph = merged.copy()

    for r in robots:
        for other in robots:
            if other.rid != r.rid:
                r.last_known[other.rid] = other.pos
                r.last_maps[other.rid] = union_known

    return CommEvent(step=step, component=[r.rid for r in robots],
                     cells_merged=cells_merged, nodes_transferred=nodes_transferred)
