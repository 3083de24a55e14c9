"""Log-odds occupancy grid built from first-return scan vectors.

Each beam with a return updates the cells it crosses: traversed cells
before the return collect free evidence, the return cell collects occupied
evidence, and nothing beyond the return is touched. Beams without a return
(NaN range) contribute nothing. Updates are additive in log-odds, so the
posterior is independent of scan order and equals the sequential Bayes
binary filter cell by cell.
"""

import math
from dataclasses import dataclass

import numpy as np

from .track import Pose, beam_direction

LOG_ODDS_CLAMP = 10.0
P_HIT_DEFAULT = 0.9
TAU_OCCUPIED = 2.0
TAU_FREE = -2.0


@dataclass(frozen=True)
class GridGeometry:
    """Placement of a grid in the world: lower-left corner, size, cell size.

    Cell (row, col) spans x in [origin_x + col*cell, origin_x + (col+1)*cell)
    and the corresponding interval in y.
    """

    origin_x: float
    origin_y: float
    width: int
    height: int
    cell_size: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(math.floor((x - self.origin_x) / self.cell_size))
        row = int(math.floor((y - self.origin_y) / self.cell_size))
        return row, col

    def contains(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width


@dataclass
class OccupancyGrid:
    """Mutable grid of log-odds values, one float per cell, 0 = unknown."""

    log_odds: np.ndarray
    geometry: GridGeometry

    def __post_init__(self):
        arr = np.asarray(self.log_odds, dtype=float)
        if arr.shape != (self.geometry.height, self.geometry.width):
            raise ValueError("log_odds shape must match geometry height x width")
        self.log_odds = arr


def init_grid(geometry: GridGeometry) -> OccupancyGrid:
    """All cells start at belief 0.5, i.e. log-odds zero."""
    return OccupancyGrid(
        log_odds=np.zeros((geometry.height, geometry.width)), geometry=geometry
    )


def traverse_cells(geometry: GridGeometry, start, end) -> list[tuple[int, int]]:
    """Grid cells crossed by the segment from start to end, in order.

    Amanatides-Woo voxel traversal; only in-bounds cells are emitted, so a
    segment leaving the grid is clipped. The cell containing the start point
    is included, as is the end cell when it lies inside.
    """
    x0 = (start[0] - geometry.origin_x) / geometry.cell_size
    y0 = (start[1] - geometry.origin_y) / geometry.cell_size
    x1 = (end[0] - geometry.origin_x) / geometry.cell_size
    y1 = (end[1] - geometry.origin_y) / geometry.cell_size
    dx = x1 - x0
    dy = y1 - y0

    col = int(math.floor(x0))
    row = int(math.floor(y0))
    end_col = int(math.floor(x1))
    end_row = int(math.floor(y1))

    step_col = 1 if dx > 0 else -1
    step_row = 1 if dy > 0 else -1
    # parametric distance to the next vertical / horizontal cell boundary
    if dx != 0:
        next_col_edge = col + (1 if dx > 0 else 0)
        t_max_x = (next_col_edge - x0) / dx
        t_delta_x = abs(1.0 / dx)
    else:
        t_max_x = math.inf
        t_delta_x = math.inf
    if dy != 0:
        next_row_edge = row + (1 if dy > 0 else 0)
        t_max_y = (next_row_edge - y0) / dy
        t_delta_y = abs(1.0 / dy)
    else:
        t_max_y = math.inf
        t_delta_y = math.inf

    cells = []
    guard = abs(end_col - col) + abs(end_row - row) + 2
    for _ in range(guard):
        if geometry.contains(row, col):
            cells.append((row, col))
        if row == end_row and col == end_col:
            break
        if t_max_x < t_max_y:
            if t_max_x > 1.0:
                break
            col += step_col
            t_max_x += t_delta_x
        else:
            if t_max_y > 1.0:
                break
            row += step_row
            t_max_y += t_delta_y
    return cells


def update_grid(
    grid: OccupancyGrid,
    scan,
    pose: Pose,
    p_hit: float = P_HIT_DEFAULT,
    free_space: bool = True,
    clamp: float = LOG_ODDS_CLAMP,
) -> OccupancyGrid:
    """Fold one scan taken from pose into the grid, in place.

    Every finite-range beam is cast from the sensor to its return point.
    The return cell gains log(p_hit / (1 - p_hit)); with free_space enabled
    (the default) the crossed cells before it lose the same amount. Cells
    beyond the return are left alone, and values are clamped to +-clamp so
    a long run of agreeing scans cannot saturate to infinity.
    """
    if not 0.5 < p_hit < 1.0:
        raise ValueError("p_hit must be in (0.5, 1)")
    l_occ = math.log(p_hit / (1.0 - p_hit))
    l_free = -l_occ
    origin = pose.xy
    geometry = grid.geometry
    for phi_deg, rng in zip(scan.angles_deg, scan.ranges):
        if not np.isfinite(rng):
            continue
        endpoint = origin + rng * beam_direction(pose.theta, phi_deg)
        hit_cell = geometry.world_to_cell(endpoint[0], endpoint[1])
        cells = traverse_cells(geometry, origin, endpoint)
        for cell in cells:
            delta = l_occ if cell == hit_cell else (l_free if free_space else 0.0)
            if delta == 0.0:
                continue
            value = grid.log_odds[cell] + delta
            grid.log_odds[cell] = min(max(value, -clamp), clamp)
    return grid


def belief(grid: OccupancyGrid) -> np.ndarray:
    """Occupancy probability per cell, logistic of the log-odds."""
    return 1.0 / (1.0 + np.exp(-grid.log_odds))


def export_map(
    grid: OccupancyGrid, tau_occupied: float = TAU_OCCUPIED, tau_free: float = TAU_FREE
) -> np.ndarray:
    """Ternary byte map: 255 occupied, 0 free, 128 unknown."""
    if tau_free >= tau_occupied:
        raise ValueError("tau_free must be below tau_occupied")
    out = np.full(grid.log_odds.shape, 128, dtype=np.uint8)
    out[grid.log_odds > tau_occupied] = 255
    out[grid.log_odds < tau_free] = 0
    return out


def write_pgm(path, byte_map: np.ndarray) -> None:
    """Raw (P5) portable graymap, one byte per cell."""
    height, width = byte_map.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(byte_map.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    header: list[bytes] = []
    pos = 0
    while len(header) < 4:
        next_pos = data.index(b"\n", pos)
        token = data[pos:next_pos]
        header.extend(token.split())
        pos = next_pos + 1
    if header[0] != b"P5" or header[3] != b"255":
        raise ValueError("not an 8-bit raw PGM file")
    width, height = int(header[1]), int(header[2])
    pixels = np.frombuffer(data[pos : pos + width * height], dtype=np.uint8)
    return pixels.reshape(height, width).copy()


def write_log_odds(path, grid: OccupancyGrid) -> None:
    """Raw log-odds as CSV plus a sidecar .hdr with the grid geometry."""
    np.savetxt(path, grid.log_odds, delimiter=",", fmt="%.17g")
    geometry = grid.geometry
    with open(str(path) + ".hdr", "w") as fh:
        fh.write(f"origin_x={geometry.origin_x!r}\n")
        fh.write(f"origin_y={geometry.origin_y!r}\n")
        fh.write(f"width={geometry.width}\n")
        fh.write(f"height={geometry.height}\n")
        fh.write(f"cell_size={geometry.cell_size!r}\n")


def read_log_odds(path) -> OccupancyGrid:
    fields = {}
    with open(str(path) + ".hdr") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    geometry = GridGeometry(
        origin_x=float(fields["origin_x"]),
        origin_y=float(fields["origin_y"]),
        width=int(fields["width"]),
        height=int(fields["height"]),
        cell_size=float(fields["cell_size"]),
    )
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    return OccupancyGrid(log_odds=values, geometry=geometry)
