"""Static world geometry: walls, cylindrical obstacles, goal beacon.

The default preset is a walled corridor with staggered rows of cylinders
between the spawn and the goal beacon, forcing coordinated weaving. Layouts
can also be loaded from and saved to a plain-text primitive list:

    wall x0 y0 x1 y1
    cyl x y r
    beacon x y r
    spawn x y
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

CORRIDOR_X = (-0.5, 3.5)
OBSTACLE_RADIUS = 0.25
BEACON = (1.5, 16.5, 0.15)
SPAWN = (1.5, 0.5)
WALL_THICKNESS = 0.5


class ArenaError(Exception):
    """Bad arena layout or layout file."""


@dataclass(frozen=True)
class Arena:
    """Immutable world geometry; the arrays are treated as read-only."""

    walls: np.ndarray       # (W, 4) axis-aligned rects [x0, y0, x1, y1]
    obstacles: np.ndarray   # (K, 3) circles [cx, cy, r]
    beacon: tuple[float, float, float]
    spawn: tuple[float, float]
    corridor: tuple[float, float] = CORRIDOR_X

    def __post_init__(self):
        object.__setattr__(self, "walls",
                           np.asarray(self.walls, dtype=np.float64).reshape(-1, 4))
        object.__setattr__(self, "obstacles",
                           np.asarray(self.obstacles, dtype=np.float64).reshape(-1, 3))


def _default_layout() -> tuple[list, list]:
    # interior extends below y=0 so the straight 0.9 m spawn pose fits
    x_lo, x_hi = CORRIDOR_X
    y_lo, y_hi = -1.0, 17.5
    t = WALL_THICKNESS
    walls = [
        (x_lo - t, y_lo - t, x_lo, y_hi + t),   # left
        (x_hi, y_lo - t, x_hi + t, y_hi + t),   # right
        (x_lo - t, y_lo - t, x_hi + t, y_lo),   # bottom
        (x_lo - t, y_hi, x_hi + t, y_hi + t),   # top
    ]
    obstacles = []
    for row, y in enumerate(np.arange(3.0, 14.0, 2.0)):
        if row % 2 == 0:
            xs = (0.5, 2.5)
        else:
            # centre cylinder plus a wall-hugging pair blocking the flanks
            xs = (x_lo + OBSTACLE_RADIUS, 1.5, x_hi - OBSTACLE_RADIUS)
        for x in xs:
            obstacles.append((float(x), float(y), OBSTACLE_RADIUS))
    return walls, obstacles


PRESETS = ("default", "corridor", "empty")


def build_arena(preset: str = "default") -> Arena:
    """Arena for a named preset, or loaded from a layout file path.

    ``default`` is the staggered-obstacle maze; ``corridor`` keeps the walls
    and beacon but no obstacles; ``empty`` has only the beacon.
    """
    if preset not in PRESETS:
        if os.path.exists(preset):
            return load_arena(preset)
        raise ArenaError(f"unknown preset or missing layout file: {preset!r}")
    walls, obstacles = _default_layout()
    if preset == "corridor":
        obstacles = []
    elif preset == "empty":
        walls, obstacles = [], []
    return Arena(walls=np.asarray(walls, dtype=np.float64).reshape(-1, 4),
                 obstacles=np.asarray(obstacles, dtype=np.float64).reshape(-1, 3),
                 beacon=BEACON, spawn=SPAWN)


def min_obstacle_clearance(arena: Arena) -> float:
    """Smallest surface-to-surface gap over all obstacle pairs."""
    obs = arena.obstacles
    if len(obs) < 2:
        return float("inf")
    best = float("inf")
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            gap = (float(np.hypot(obs[i, 0] - obs[j, 0], obs[i, 1] - obs[j, 1]))
                   - obs[i, 2] - obs[j, 2])
            best = min(best, gap)
    return best


def distance_to_goal(head_pose, arena: Arena) -> tuple[float, float]:
    """(euclidean distance, goal-axis distance) from the head to the beacon.

    The goal-axis distance is beacon_y - head_y; it is the quantity whose
    per-step reduction earns the progress reward.
    """
    hx, hy = float(head_pose[0]), float(head_pose[1])
    bx, by = arena.beacon[0], arena.beacon[1]
    return float(np.hypot(bx - hx, by - hy)), by - hy


def save_arena(arena: Arena, path: str | os.PathLike) -> None:
    def fmt(*values):
        return " ".join(repr(float(v)) for v in values)

    lines = [f"wall {fmt(*row)}" for row in arena.walls]
    lines += [f"cyl {fmt(*row)}" for row in arena.obstacles]
    lines.append(f"beacon {fmt(*arena.beacon)}")
    lines.append(f"spawn {fmt(*arena.spawn)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_arena(path: str | os.PathLike) -> Arena:
    walls, obstacles = [], []
    beacon, spawn = None, None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind, args = parts[0], parts[1:]
            try:
                values = [float(v) for v in args]
            except ValueError:
                raise ArenaError(f"{path}:{lineno}: bad number in {raw!r}") from None
            if kind == "wall" and len(values) == 4:
                walls.append(tuple(values))
            elif kind == "cyl" and len(values) == 3:
                obstacles.append(tuple(values))
            elif kind == "beacon" and len(values) == 3:
                beacon = tuple(values)
            elif kind == "spawn" and len(values) == 2:
                spawn = tuple(values)
            else:
                raise ArenaError(f"{path}:{lineno}: unrecognised primitive {raw!r}")
    if beacon is None or spawn is None:
        raise ArenaError(f"{path}: layout must define a beacon and a spawn")
    return Arena(walls=np.asarray(walls, dtype=np.float64).reshape(-1, 4),
                 obstacles=np.asarray(obstacles, dtype=np.float64).reshape(-1, 3),
                 beacon=beacon, spawn=spawn)
