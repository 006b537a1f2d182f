"""Occupancy grids, procedural map generation, lidar sensing, and frontiers.

World geometry lives on a uniform grid of square cells. Cell (ix, iy) covers
the world rectangle [ix*res, (ix+1)*res) x [iy*res, (iy+1)*res); its center is
((ix+0.5)*res, (iy+0.5)*res). Arrays are indexed cells[iy, ix].

Visibility is defined by dense segment sampling: a straight segment is walked
at steps of SAMPLE_STEP_CELLS cells and each sample point is binned to the
cell containing it. That single definition backs lidar, graph-edge line of
sight, and wall counting for radio attenuation, so all geometry predicates in
the package agree with each other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from scipy import ndimage

from .errors import ConfigError, GridMismatchError, InvalidPoseError

logger = logging.getLogger(__name__)

# Spacing of visibility sample points along a segment, in cell units.
SAMPLE_STEP_CELLS = 0.1

# Mininum map side, in cells; smaller worlds cannot hold a border plus a hall.
MIN_SIDE_CELLS = 20


class Cell(IntEnum):
    """Occupancy states. Values are stable: they appear in saved map files."""

    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


_CELL_CHARS = {Cell.UNKNOWN: "?", Cell.FREE: ".", Cell.OCCUPIED: "#"}
_CHAR_CELLS = {v: k for k, v in _CELL_CHARS.items()}


class MapKind(str, Enum):
    EMPTY = "empty"
    SIMPLE = "simple"
    CORRIDOR = "corridor"
    HYBRID = "hybrid"
    COMPLEX = "complex"


# Default physical extents per kind (width_m, height_m).
DEFAULT_DIMS_M = {
    MapKind.EMPTY: (20.0, 20.0),
    MapKind.SIMPLE: (40.0, 40.0),
    MapKind.CORRIDOR: (160.0, 120.0),
    MapKind.HYBRID: (125.0, 125.0),
    MapKind.COMPLEX: (250.0, 250.0),
}


@dataclass
class MapSpec:
    """Recipe for a ground-truth map: kind, seed, physical size, resolution."""

    kind: MapKind = MapKind.SIMPLE
    seed: int = 0
    width_m: float | None = None
    height_m: float | None = None
    resolution: float = 0.5

    def __post_init__(self):
        self.kind = MapKind(self.kind)
        if self.resolution <= 0:
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        if self.width_m is None:
            self.width_m = DEFAULT_DIMS_M[self.kind][0]
        if self.height_m is None:
            self.height_m = DEFAULT_DIMS_M[self.kind][1]

    @property
    def width_cells(self) -> int:
        return int(round(self.width_m / self.resolution))

    @property
    def height_cells(self) -> int:
        return int(round(self.height_m / self.resolution))


@dataclass
class SensorSpec:
    """Omnidirectional range sensor parameters."""

    range_m: float = 10.0
    ray_count: int = 360

    def __post_init__(self):
        if self.range_m <= 0:
            raise ConfigError(f"sensor range must be positive, got {self.range_m}")
        if self.ray_count < 4:
            raise ConfigError(f"ray_count must be >= 4, got {self.ray_count}")


@dataclass(eq=False)
class OccupancyGrid:
    """A 2D occupancy grid with per-cell observation stamps.

    ``cells`` holds Cell values; ``stamps`` records the decision step at which
    each cell was last observed (0 until first observed) and resolves merge
    conflicts in favor of the newer observation.
    """

    width: int
    height: int
    resolution: float
    cells: np.ndarray
    stamps: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.stamps is None:
            self.stamps = np.zeros((self.height, self.width), dtype=np.int32)
        if self.cells.shape != (self.height, self.width):
            raise GridMismatchError(
                f"cells shape {self.cells.shape} != ({self.height}, {self.width})"
            )

    # -- constructors ------------------------------------------------------

    @classmethod
    def unknown(cls, width: int, height: int, resolution: float) -> "OccupancyGrid":
        return cls(width, height, resolution,
                   np.full((height, width), Cell.UNKNOWN, dtype=np.uint8))

    @classmethod
    def full_free(cls, width: int, height: int, resolution: float) -> "OccupancyGrid":
        return cls(width, height, resolution,
                   np.full((height, width), Cell.FREE, dtype=np.uint8))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution,
                             self.cells.copy(), self.stamps.copy())

    # -- geometry ----------------------------------------------------------

    @property
    def width_m(self) -> float:
        return self.width * self.resolution

    @property
    def height_m(self) -> float:
        return self.height * self.resolution

    @property
    def diagonal_m(self) -> float:
        return math.hypot(self.width_m, self.height_m)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """Map a world point to (ix, iy) indices. No bounds check."""
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def state_at(self, x: float, y: float) -> Cell:
        ix, iy = self.world_to_cell(x, y)
        if not self.in_bounds(ix, iy):
            raise InvalidPoseError(f"point ({x:.3f}, {y:.3f}) outside map")
        return Cell(self.cells[iy, ix])

    # -- summary masks -----------------------------------------------------

    def known_mask(self) -> np.ndarray:
        return self.cells != Cell.UNKNOWN

    def free_mask(self) -> np.ndarray:
        return self.cells == Cell.FREE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.cells != Cell.UNKNOWN))

    def same_geometry(self, other: "OccupancyGrid") -> bool:
        return (self.width == other.width and self.height == other.height
                and self.resolution == other.resolution)


@dataclass(eq=False)
class CellUpdates:
    """A batch of sensed cells: indices (N, 2) as (iy, ix) and their states."""

    cells: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(eq=False)
class FrontierSet:
    """Free cells bordering Unknown, as a sorted (N, 2) array of (iy, ix)."""

    cells: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)

    def centers_m(self, resolution: float) -> np.ndarray:
        """World coordinates (N, 2) as (x, y) of the frontier cell centers."""
        if len(self.cells) == 0:
            return np.zeros((0, 2))
        return np.stack(
            [(self.cells[:, 1] + 0.5) * resolution,
             (self.cells[:, 0] + 0.5) * resolution], axis=1)


# ---------------------------------------------------------------------------
# Segment sampling: the one visibility primitive everything shares.
# ---------------------------------------------------------------------------

def segment_sample_count(ax: float, ay: float, bx: float, by: float,
                         resolution: float) -> int:
    """Number of sampling intervals for segment a->b (at least 1)."""
    length_cells = math.hypot(bx - ax, by - ay) / resolution
    return max(1, int(math.ceil(length_cells / SAMPLE_STEP_CELLS)))


def sampled_segment_cells(grid: OccupancyGrid, ax: float, ay: float,
                          bx: float, by: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell indices (ix, iy arrays) under dense sample points along a->b.

    Endpoints are included. Consecutive duplicates are not removed; callers
    that need distinct cells must deduplicate.
    """
    n = segment_sample_count(ax, ay, bx, by, grid.resolution)
    t = np.arange(n + 1) / n
    px = ax + t * (bx - ax)
    py = ay + t * (by - ay)
    ix = np.floor(px / grid.resolution).astype(np.int64)
    iy = np.floor(py / grid.resolution).astype(np.int64)
    np.clip(ix, 0, grid.width - 1, out=ix)
    np.clip(iy, 0, grid.height - 1, out=iy)
    return ix, iy


def _canonical(ax, ay, bx, by):
    """Order segment endpoints so the sample set is direction-independent."""
    if (bx, by) < (ax, ay):
        return bx, by, ax, ay
    return ax, ay, bx, by


def line_of_sight(grid: OccupancyGrid, a: tuple[float, float],
                  b: tuple[float, float]) -> bool:
    """True iff the segment a-b crosses only Free cells of ``grid``.

    Unknown blocks as well as Occupied: sight is only granted through space
    already known to be free. Symmetric in (a, b).
    """
    ax, ay, bx, by = _canonical(a[0], a[1], b[0], b[1])
    ix, iy = sampled_segment_cells(grid, ax, ay, bx, by)
    return bool(np.all(grid.cells[iy, ix] == Cell.FREE))


def line_of_sight_batch(grid: OccupancyGrid, origin: tuple[float, float],
                        targets: np.ndarray) -> np.ndarray:
    """Vectorized :func:`line_of_sight` from one origin to (T, 2) targets.

    Matches per-pair calls exactly: each row uses the same canonical endpoint
    order and sample count a scalar call would.
    """
    if len(targets) == 0:
        return np.zeros(0, dtype=bool)
    ox, oy = origin
    res = grid.resolution
    tx = targets[:, 0].astype(float)
    ty = targets[:, 1].astype(float)
    # Canonical orientation per pair.
    swap = (tx < ox) | ((tx == ox) & (ty < oy))
    ax = np.where(swap, tx, ox)
    ay = np.where(swap, ty, oy)
    bx = np.where(swap, ox, tx)
    by = np.where(swap, oy, ty)
    length_cells = np.hypot(bx - ax, by - ay) / res
    n = np.maximum(1, np.ceil(length_cells / SAMPLE_STEP_CELLS)).astype(np.int64)
    k = np.arange(n.max() + 1)
    t = np.minimum(k[None, :] / n[:, None], 1.0)
    px = ax[:, None] + t * (bx - ax)[:, None]
    py = ay[:, None] + t * (by - ay)[:, None]
    ix = np.floor(px / res).astype(np.int64)
    iy = np.floor(py / res).astype(np.int64)
    np.clip(ix, 0, grid.width - 1, out=ix)
    np.clip(iy, 0, grid.height - 1, out=iy)
    return np.all(grid.cells[iy, ix] == Cell.FREE, axis=1)


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------

def visible_cells(truth: OccupancyGrid, pose: tuple[float, float],
                  range_m: float) -> tuple[np.ndarray, np.ndarray]:
    """All cells visible from ``pose`` within Euclidean range of their centers.

    A cell is visible when every sampled cell strictly before it on the
    segment pose -> cell center is Free; the terminal cell itself may be
    Occupied (walls are seen). Returns (cells (N, 2) as (iy, ix), states).
    """
    res = truth.resolution
    px, py = pose
    r_cells = range_m / res
    cx0 = max(0, int(math.floor((px - range_m) / res)))
    cx1 = min(truth.width - 1, int(math.floor((px + range_m) / res)))
    cy0 = max(0, int(math.floor((py - range_m) / res)))
    cy1 = min(truth.height - 1, int(math.floor((py + range_m) / res)))
    ixs, iys = np.meshgrid(np.arange(cx0, cx1 + 1), np.arange(cy0, cy1 + 1))
    ixs = ixs.ravel()
    iys = iys.ravel()
    centers_x = (ixs + 0.5) * res
    centers_y = (iys + 0.5) * res
    dist = np.hypot(centers_x - px, centers_y - py)
    in_range = dist <= range_m
    ixs, iys = ixs[in_range], iys[in_range]
    centers_x, centers_y = centers_x[in_range], centers_y[in_range]
    if len(ixs) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.uint8)

    length_cells = np.hypot(centers_x - px, centers_y - py) / res
    n = np.maximum(1, np.ceil(length_cells / SAMPLE_STEP_CELLS)).astype(np.int64)
    k = np.arange(n.max() + 1)
    t = np.minimum(k[None, :] / n[:, None], 1.0)
    sx = px + t * (centers_x - px)[:, None]
    sy = py + t * (centers_y - py)[:, None]
    six = np.floor(sx / res).astype(np.int64)
    siy = np.floor(sy / res).astype(np.int64)
    np.clip(six, 0, truth.width - 1, out=six)
    np.clip(siy, 0, truth.height - 1, out=siy)
    states = truth.cells[siy, six]
    before_target = (six != ixs[:, None]) | (siy != iys[:, None])
    blocked = np.any((states != Cell.FREE) & before_target, axis=1)
    vis = ~blocked
    out_cells = np.stack([iys[vis], ixs[vis]], axis=1)
    out_states = truth.cells[iys[vis], ixs[vis]]
    order = np.lexsort((out_cells[:, 1], out_cells[:, 0]))
    return out_cells[order], out_states[order]


def lidar_scan(truth: OccupancyGrid, pose: tuple[float, float],
               sensor: SensorSpec) -> CellUpdates:
    """Simulate one omnidirectional scan against the ground truth.

    Args:
        truth: ground-truth grid (must contain no Unknown cells).
        pose: sensor position in world meters; must sit on a Free cell.
        sensor: range and fan density.

    Returns:
        CellUpdates with every visible cell and its true state.

    Raises:
        InvalidPoseError: pose outside the map or on a non-Free cell.
    """
    ix, iy = truth.world_to_cell(*pose)
    if not truth.in_bounds(ix, iy):
        raise InvalidPoseError(f"scan pose {pose} outside map bounds")
    if truth.cells[iy, ix] != Cell.FREE:
        raise InvalidPoseError(f"scan pose {pose} not on a Free cell")
    cells, states = visible_cells(truth, pose, sensor.range_m)
    return CellUpdates(cells.astype(np.int32), states.astype(np.uint8))


def integrate_scan(belief: OccupancyGrid, updates: CellUpdates,
                   stamp: int = 0) -> OccupancyGrid:
    """Fold sensed cells into a belief grid, returning a new grid.

    Unknown cells take the sensed state; cells already Known keep the newer
    observation (ties favor the update). Known cells never revert to Unknown.
    """
    out = belief.copy()
    if len(updates) == 0:
        return out
    iy = updates.cells[:, 0].astype(np.int64)
    ix = updates.cells[:, 1].astype(np.int64)
    if iy.max(initial=0) >= belief.height or ix.max(initial=0) >= belief.width:
        raise GridMismatchError("scan updates fall outside the belief grid")
    current = out.cells[iy, ix]
    apply = (current == Cell.UNKNOWN) | (stamp >= out.stamps[iy, ix])
    out.cells[iy[apply], ix[apply]] = updates.states[apply]
    out.stamps[iy[apply], ix[apply]] = stamp
    return out


def merge_beliefs(a: OccupancyGrid, b: OccupancyGrid) -> OccupancyGrid:
    """Union two beliefs: Known beats Unknown, newer stamp wins conflicts.

    The per-cell rule is a join on (stamp, state-rank) with Occupied ranked
    above Free at equal stamps, which makes n-way merging commutative,
    associative, and idempotent regardless of pairing order.
    """
    if not a.same_geometry(b):
        raise GridMismatchError("cannot merge grids with different geometry")
    out = a.copy()
    a_known = a.cells != Cell.UNKNOWN
    b_known = b.cells != Cell.UNKNOWN
    take_b = b_known & ~a_known
    # Both known: compare (stamp, occupied-wins) lexicographically.
    both = a_known & b_known
    b_newer = both & ((b.stamps > a.stamps) |
                      ((b.stamps == a.stamps) & (b.cells > a.cells)))
    take_b |= b_newer
    out.cells[take_b] = b.cells[take_b]
    out.stamps[take_b] = b.stamps[take_b]
    return out


def coverage_fraction(belief: OccupancyGrid, truth: OccupancyGrid) -> float:
    """Fraction of the truth's Free cells that the belief knows to be Free."""
    if not belief.same_geometry(truth):
        raise GridMismatchError("belief/truth geometry mismatch")
    truth_free = truth.cells == Cell.FREE
    total = int(np.count_nonzero(truth_free))
    if total == 0:
        raise ConfigError("truth grid has zero Free cells")
    hit = int(np.count_nonzero(truth_free & (belief.cells == Cell.FREE)))
    return hit / total


def extract_frontiers(belief: OccupancyGrid) -> FrontierSet:
    """Free cells with at least one 4-adjacent Unknown neighbor."""
    free = belief.cells == Cell.FREE
    unk = belief.cells == Cell.UNKNOWN
    nb = np.zeros_like(free)
    nb[1:, :] |= unk[:-1, :]
    nb[:-1, :] |= unk[1:, :]
    nb[:, 1:] |= unk[:, :-1]
    nb[:, :-1] |= unk[:, 1:]
    cells = np.argwhere(free & nb).astype(np.int32)
    return FrontierSet(cells)


# ---------------------------------------------------------------------------
# Procedural map generation
# ---------------------------------------------------------------------------

def generate_map(spec: MapSpec) -> OccupancyGrid:
    """Build a ground-truth map: fully known, walls on the border, one
    connected Free region. Deterministic in (kind, seed, dims, resolution).

    Raises:
        ConfigError: if either side is below MIN_SIDE_CELLS cells.
    """
    w, h = spec.width_cells, spec.height_cells
    if w < MIN_SIDE_CELLS or h < MIN_SIDE_CELLS:
        raise ConfigError(
            f"map of {w}x{h} cells below minimum {MIN_SIDE_CELLS}; "
            "enlarge dimensions or refine resolution")
    rng = np.random.default_rng(spec.seed)
    cells = np.full((h, w), Cell.FREE, dtype=np.uint8)
    if spec.kind == MapKind.EMPTY:
        pass
    elif spec.kind == MapKind.SIMPLE:
        _carve_simple(cells, rng)
    elif spec.kind == MapKind.CORRIDOR:
        _carve_division_maze(cells, rng)
    elif spec.kind == MapKind.HYBRID:
        _carve_division_maze(cells, rng)
        _open_core(cells, rng, frac=0.4)
    elif spec.kind == MapKind.COMPLEX:
        _carve_division_maze(cells, rng)
        _open_core(cells, rng, frac=0.2)
        _scatter_rooms(cells, rng)
    cells[0, :] = Cell.OCCUPIED
    cells[-1, :] = Cell.OCCUPIED
    cells[:, 0] = Cell.OCCUPIED
    cells[:, -1] = Cell.OCCUPIED
    _keep_largest_free_component(cells)
    grid = OccupancyGrid(w, h, spec.resolution, cells)
    return grid


def _keep_largest_free_component(cells: np.ndarray) -> None:
    """Convert all but the largest 4-connected Free component to Occupied."""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    labels, count = ndimage.label(cells == Cell.FREE, structure=structure)
    if count <= 1:
        return
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, count + 1))
    keep = int(np.argmax(sizes)) + 1
    cells[(labels != 0) & (labels != keep)] = Cell.OCCUPIED


def _carve_simple(cells: np.ndarray, rng: np.random.Generator) -> None:
    """Random rectangular obstacles with at least 3 free cells between them."""
    h, w = cells.shape
    n_obstacles = max(3, (w * h) // 220)
    occupied = np.zeros_like(cells, dtype=bool)
    for _ in range(n_obstacles * 4):
        if n_obstacles == 0:
            break
        ow = int(rng.integers(2, max(3, w // 6)))
        oh = int(rng.integers(2, max(3, h // 6)))
        x0 = int(rng.integers(2, max(3, w - ow - 2)))
        y0 = int(rng.integers(2, max(3, h - oh - 2)))
        gx0, gy0 = max(0, x0 - 3), max(0, y0 - 3)
        gx1, gy1 = min(w, x0 + ow + 3), min(h, y0 + oh + 3)
        if occupied[gy0:gy1, gx0:gx1].any():
            continue
        occupied[y0:y0 + oh, x0:x0 + ow] = True
        n_obstacles -= 1
    cells[occupied] = Cell.OCCUPIED


_HALL = 3    # free corridor width, cells
_UNIT = 4    # hall + one wall cell: the alignment lattice for division walls


def _carve_division_maze(cells: np.ndarray, rng: np.random.Generator) -> None:
    """Recursive-division maze with halls _HALL cells wide.

    Walls and doors are aligned to a shared _UNIT lattice, which keeps every
    hall at least _HALL wide and keeps door approaches clear of later
    perpendicular walls.
    """
    h, w = cells.shape

    def wall_candidates(lo: int, hi: int) -> list[int]:
        # Wall lines sit on the global _UNIT lattice; keeping them at least
        # _HALL cells from both region edges leaves every hall >= _HALL wide.
        first = ((lo // _UNIT) + 1) * _UNIT
        return [c for c in range(first, hi - _HALL + 1, _UNIT) if c - lo >= _HALL]

    def door_start(lo: int, hi: int) -> int:
        # Doors occupy [s, s + _HALL) with (s - 1) % _UNIT == 0, so later
        # perpendicular walls (on the lattice) never block a door approach.
        rem = (lo - 1) % _UNIT
        s = lo if rem == 0 else lo + (_UNIT - rem)
        starts = []
        while s + _HALL - 1 <= hi:
            starts.append(s)
            s += _UNIT
        if not starts:
            return lo
        return int(rng.choice(starts))

    def divide(x0: int, y0: int, x1: int, y1: int) -> None:
        width, height = x1 - x0 + 1, y1 - y0 + 1
        horizontal = height > width or (height == width and rng.random() < 0.5)
        if horizontal:
            cands = wall_candidates(y0, y1)
            if not cands:
                return
            wy = int(rng.choice(cands))
            ds = door_start(x0, x1)
            cells[wy, x0:x1 + 1] = Cell.OCCUPIED
            cells[wy, ds:ds + _HALL] = Cell.FREE
            divide(x0, y0, x1, wy - 1)
            divide(x0, wy + 1, x1, y1)
        else:
            cands = wall_candidates(x0, x1)
            if not cands:
                return
            wx = int(rng.choice(cands))
            ds = door_start(y0, y1)
            cells[y0:y1 + 1, wx] = Cell.OCCUPIED
            cells[ds:ds + _HALL, wx] = Cell.FREE
            divide(x0, y0, wx - 1, y1)
            divide(wx + 1, y0, x1, y1)

    divide(1, 1, w - 2, h - 2)


def _open_core(cells: np.ndarray, rng: np.random.Generator, frac: float) -> None:
    """Clear an open rectangular core in the middle of a maze."""
    h, w = cells.shape
    cw = max(_HALL * 2, int(w * frac))
    ch = max(_HALL * 2, int(h * frac))
    x0 = (w - cw) // 2 + int(rng.integers(-w // 10, w // 10 + 1))
    y0 = (h - ch) // 2 + int(rng.integers(-h // 10, h // 10 + 1))
    x0 = min(max(1, x0), w - cw - 1)
    y0 = min(max(1, y0), h - ch - 1)
    cells[y0:y0 + ch, x0:x0 + cw] = Cell.FREE


def _scatter_rooms(cells: np.ndarray, rng: np.random.Generator) -> None:
    """Open a handful of extra room patches to add branching variety."""
    h, w = cells.shape
    for _ in range(max(2, (w * h) // 8000)):
        rw = int(rng.integers(_HALL * 2, max(_HALL * 2 + 1, w // 8)))
        rh = int(rng.integers(_HALL * 2, max(_HALL * 2 + 1, h // 8)))
        x0 = int(rng.integers(1, max(2, w - rw - 1)))
        y0 = int(rng.integers(1, max(2, h - rh - 1)))
        cells[y0:y0 + rh, x0:x0 + rw] = Cell.FREE


# ---------------------------------------------------------------------------
# Map file I/O
# ---------------------------------------------------------------------------

def save_map(grid: OccupancyGrid, path: str) -> None:
    """Write a grid as text: a ``W H RES`` header then one row per line.

    Characters: ``#`` Occupied, ``.`` Free, ``?`` Unknown. Row 0 is iy = 0.
    """
    lines = [f"{grid.width} {grid.height} {grid.resolution:.6g}"]
    lut = np.array([_CELL_CHARS[Cell.UNKNOWN], _CELL_CHARS[Cell.FREE],
                    _CELL_CHARS[Cell.OCCUPIED]])
    for iy in range(grid.height):
        lines.append("".join(lut[grid.cells[iy]]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_map(path: str) -> OccupancyGrid:
    """Read a map written by :func:`save_map`.

    Raises:
        ConfigError: malformed header, bad characters, or ragged rows.
    """
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ConfigError(f"{path}: empty map file")
    parts = raw[0].split()
    if len(parts) != 3:
        raise ConfigError(f"{path}: header must be 'W H RES'")
    try:
        w, h, res = int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError as exc:
        raise ConfigError(f"{path}: bad header values: {exc}") from exc
    rows = raw[1:1 + h]
    if len(rows) != h:
        raise ConfigError(f"{path}: expected {h} rows, found {len(rows)}")
    cells = np.zeros((h, w), dtype=np.uint8)
    for iy, row in enumerate(rows):
        if len(row) != w:
            raise ConfigError(f"{path}: row {iy} has length {len(row)}, want {w}")
        for ix, ch in enumerate(row):
            if ch not in _CHAR_CELLS:
                raise ConfigError(f"{path}: bad character {ch!r} at row {iy}")
            cells[iy, ix] = _CHAR_CELLS[ch]
    return OccupancyGrid(w, h, res, cells)
