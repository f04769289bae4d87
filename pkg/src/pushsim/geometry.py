"""Regular-hexagon cell geometry: tessellating grid, containment, reflection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Unit normals of the three half-plane axes of a pointy-top hexagon
# (vertices at 30 + 60k degrees, tessellation neighbours at 60k degrees).
_NORMAL_ANGLES = np.deg2rad(np.arange(0.0, 360.0, 60.0))
_NORMALS = np.stack([np.cos(_NORMAL_ANGLES), np.sin(_NORMAL_ANGLES)], axis=1)


@dataclass(frozen=True)
class Hexagon:
    """Regular hexagon, vertices at angles 30+60k degrees from the center."""

    center: tuple[float, float]
    circumradius: float

    @property
    def apothem(self) -> float:
        return self.circumradius * math.sqrt(3.0) / 2.0

    @property
    def vertices(self) -> np.ndarray:
        ang = np.deg2rad(30.0 + 60.0 * np.arange(6))
        return np.asarray(self.center) + self.circumradius * np.stack(
            [np.cos(ang), np.sin(ang)], axis=1
        )

    def contains(self, point, tol: float = 1e-9) -> bool:
        d = np.asarray(point, dtype=float) - np.asarray(self.center)
        return bool(np.max(_NORMALS @ d) <= self.apothem + tol)

    def exit_distance(self, point, direction) -> tuple[float, int]:
        """Distance along `direction` from an interior point to the boundary.

        Returns (distance, edge_index) where edge_index selects the
        half-plane normal that is hit first.
        """
        d = np.asarray(point, dtype=float) - np.asarray(self.center)
        proj = _NORMALS @ d
        vel = _NORMALS @ np.asarray(direction, dtype=float)
        best_t, best_k = math.inf, -1
        for k in range(6):
            if vel[k] > 1e-15:
                t = (self.apothem - proj[k]) / vel[k]
                if t < best_t:
                    best_t, best_k = max(t, 0.0), k
        return best_t, best_k

    def reflect_direction(self, direction, edge_index: int) -> np.ndarray:
        n = _NORMALS[edge_index]
        d = np.asarray(direction, dtype=float)
        return d - 2.0 * float(d @ n) * n


def reflected_walk(start, direction, distance: float, cell: Hexagon) -> np.ndarray:
    """Endpoint of a straight walk of given length, reflected specularly
    at the hexagon boundary so the walker never leaves the cell."""
    pos = np.asarray(start, dtype=float).copy()
    d = np.asarray(direction, dtype=float).copy()
    nrm = np.linalg.norm(d)
    if nrm == 0.0 or distance <= 0.0:
        return pos
    d /= nrm
    remaining = float(distance)
    guard = 0
    while remaining > 1e-12:
        t, k = cell.exit_distance(pos, d)
        if k < 0 or t >= remaining:
            pos += remaining * d
            break
        pos += t * d
        d = cell.reflect_direction(d, k)
        remaining -= t
        guard += 1
        if guard > 10000:  # degenerate corner chatter; keeps the walk bounded
            break
    return pos


def hex_grid_positions(n_cells: int, circumradius: float) -> np.ndarray:
    """Centers of a centered hexagonal cluster (1, 7, 19, 37, ... cells).

    Center cell at the origin, concentric rings, inter-site distance
    sqrt(3) * circumradius. Cells within a ring are ordered by angle.
    """
    rings = 0
    while 3 * rings * (rings + 1) + 1 < n_cells:
        rings += 1
    if 3 * rings * (rings + 1) + 1 != n_cells:
        raise ValueError(
            f"n_cells={n_cells} is not a centered hexagonal number (1, 7, 19, 37, ...)"
        )
    spacing = math.sqrt(3.0) * circumradius
    e1 = np.array([spacing, 0.0])
    e2 = np.array([spacing * 0.5, spacing * math.sqrt(3.0) / 2.0])
    coords = [(0, 0)]
    for ring in range(1, rings + 1):
        cells = []
        for q in range(-ring, ring + 1):
            for r in range(-ring, ring + 1):
                if max(abs(q), abs(r), abs(q + r)) == ring:
                    cells.append((q, r))
        cells.sort(key=lambda qr: math.atan2(*(qr[0] * e1 + qr[1] * e2)[::-1]) % (2 * math.pi))
        coords.extend(cells)
    return np.array([q * e1 + r * e2 for q, r in coords])
