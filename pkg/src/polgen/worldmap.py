"""Spatial environment: points of interest, synthetic map generation, and
a uniform-grid index for nearest-location queries.

The map replaces street-network routing entirely: agents query for the
nearest site of a kind by Euclidean distance. Correctness of the grid
search does not depend on cell size; the expanding-ring scan keeps
widening until no closer candidate can exist in an unvisited ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hashing import digest64
from .rng import Rng

KINDS = ("home", "workplace", "restaurant", "recreation")


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class Poi:
    id: int
    kind: str
    x: float
    y: float
    capacity: int = 1_000_000


class GridIndex:
    """Uniform grid over the map bounds, bucketing poi ids per kind."""

    def __init__(self, width: float, height: float, pois):
        diag = math.sqrt(width * width + height * height)
        self.cell = max(50.0, diag / 64.0)
        self.nx = max(1, int(math.ceil(width / self.cell)))
        self.ny = max(1, int(math.ceil(height / self.cell)))
        # cells[kind][(cx, cy)] -> list of Poi
        self.cells = {k: {} for k in KINDS}
        for p in pois:
            key = self._cell_of(p.x, p.y)
            self.cells[p.kind].setdefault(key, []).append(p)

    def _cell_of(self, x: float, y: float):
        cx = min(self.nx - 1, max(0, int(x / self.cell)))
        cy = min(self.ny - 1, max(0, int(y / self.cell)))
        return cx, cy

    def query_cell(self, x: float, y: float, kind: str):
        return self.cells[kind].get(self._cell_of(x, y), [])

    def nearest(self, x: float, y: float, kind: str):
        """Closest poi of `kind`; ties broken by lowest id. None if kind empty."""
        buckets = self.cells[kind]
        if not buckets:
            return None
        cx, cy = self._cell_of(x, y)
        best = None
        best_key = None
        ring = 0
        max_ring = max(self.nx, self.ny)
        while ring <= max_ring:
            if best is not None:
                # Any poi in ring r is at least (r-1)*cell away; stop once
                # that lower bound beats the current best distance.
                lower = (ring - 1) * self.cell
                if lower > 0 and lower * lower > best_key[0]:
                    break
            found_any = False
            for gx in range(cx - ring, cx + ring + 1):
                if gx < 0 or gx >= self.nx:
                    continue
                for gy in range(cy - ring, cy + ring + 1):
                    if gy < 0 or gy >= self.ny:
                        continue
                    if max(abs(gx - cx), abs(gy - cy)) != ring:
                        continue
                    for p in buckets.get((gx, gy), ()):
                        found_any = True
                        d2 = (p.x - x) ** 2 + (p.y - y) ** 2
                        key = (d2, p.id)
                        if best_key is None or key < best_key:
                            best, best_key = p, key
            ring += 1
            if best is None and not found_any and ring > max_ring:
                break
        return best


@dataclass
class WorldMap:
    width_m: float
    height_m: float
    lat0: float
    lon0: float
    pois: list
    edges: list = field(default_factory=list)
    map_hash: int = 0
    grid: GridIndex = None

    def __post_init__(self):
        if self.grid is None:
            self.grid = GridIndex(self.width_m, self.height_m, self.pois)
        if self.map_hash == 0:
            self.map_hash = digest64(canonical_map_text(self).encode("utf-8"))

    def by_kind(self, kind: str):
        return [p for p in self.pois if p.kind == kind]

    def validate(self):
        errors = []
        if self.width_m <= 0 or self.height_m <= 0:
            errors.append("non-positive map bounds")
        if not (-90 < self.lat0 < 90 and -180 < self.lon0 < 180):
            errors.append("origin out of range")
        for i, p in enumerate(self.pois):
            if p.id != i:
                errors.append(f"poi ids must be dense from 0 (saw {p.id} at {i})")
                break
        for p in self.pois:
            if not (0 <= p.x <= self.width_m and 0 <= p.y <= self.height_m):
                errors.append(f"poi {p.id} at ({p.x}, {p.y}) outside bounds")
        for k in KINDS:
            if not any(p.kind == k for p in self.pois):
                errors.append(f"no poi of kind {k}")
        return errors


def nearest_poi(world: WorldMap, x: float, y: float, kind: str) -> Poi:
    p = world.grid.nearest(x, y, kind)
    if p is None:
        raise MapError(f"map has no poi of kind {kind}")
    return p


def generate_map(width_m, height_m, counts, seed, lat0=44.97, lon0=-93.26) -> WorldMap:
    """Seeded synthetic map: clustered homes/workplaces, scattered venues.

    Homes come from 3 Gaussian clusters and workplaces from 2, each with
    sigma = 10% of the map diagonal, clipped to bounds; restaurants and
    recreation are uniform. Deterministic for fixed arguments.
    """
    if width_m <= 0 or height_m <= 0:
        raise MapError("map dimensions must be positive")
    for k in KINDS:
        if counts.get(k, 0) < 1:
            raise MapError(f"need at least one poi of kind {k}")
    rng = Rng(seed)
    sigma = 0.1 * math.sqrt(width_m * width_m + height_m * height_m)

    def clustered(n, n_clusters):
        centers = [(rng.uniform(0, width_m), rng.uniform(0, height_m))
                   for _ in range(n_clusters)]
        pts = []
        for i in range(n):
            cx, cy = centers[i % n_clusters]
            x = min(width_m, max(0.0, cx + rng.gauss(0.0, sigma)))
            y = min(height_m, max(0.0, cy + rng.gauss(0.0, sigma)))
            pts.append((x, y))
        return pts

    def uniform(n):
        return [(rng.uniform(0, width_m), rng.uniform(0, height_m))
                for _ in range(n)]

    pois = []
    placements = [
        ("home", clustered(counts["home"], 3), 4),
        ("workplace", clustered(counts["workplace"], 2), 500),
        ("restaurant", uniform(counts["restaurant"]), 100),
        ("recreation", uniform(counts["recreation"]), 40),
    ]
    next_id = 0
    for kind, pts, cap in placements:
        for x, y in pts:
            pois.append(Poi(next_id, kind, x, y, cap))
            next_id += 1
    return WorldMap(float(width_m), float(height_m), lat0, lon0, pois)


def canonical_map_text(world: WorldMap) -> str:
    """Map file body minus the hash line; input to the content digest."""
    lines = [
        f"bounds {world.width_m!r} {world.height_m!r}",
        f"origin {world.lat0!r} {world.lon0!r}",
    ]
    for p in world.pois:
        lines.append(f"poi {p.id} {p.kind} {p.x!r} {p.y!r} {p.capacity}")
    for a, b in world.edges:
        lines.append(f"edge {a} {b}")
    return "\n".join(lines) + "\n"


def save_map(world: WorldMap, path) -> None:
    body = canonical_map_text(world)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"hash {digest64(body.encode('utf-8')):016x}\n")
        f.write(body)


def load_map(path) -> WorldMap:
    with open(path, "rb") as f:
        raw = f.read()
    first, _, body_bytes = raw.partition(b"\n")
    if not first.startswith(b"hash "):
        raise MapError("missing hash header line")
    try:
        stored_hash = int(first.split()[1], 16)
    except (IndexError, ValueError):
        raise MapError("malformed hash header line") from None
    actual = digest64(body_bytes)
    if actual != stored_hash:
        raise MapError(
            f"map hash mismatch: stored {stored_hash:016x}, actual {actual:016x}")
    lines = [""] + body_bytes.decode("utf-8").splitlines()

    width = height = None
    lat0 = lon0 = None
    pois = []
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "bounds":
                width, height = float(parts[1]), float(parts[2])
            elif tag == "origin":
                lat0, lon0 = float(parts[1]), float(parts[2])
            elif tag == "poi":
                pois.append(Poi(int(parts[1]), parts[2], float(parts[3]),
                                float(parts[4]), int(parts[5])))
            elif tag == "edge":
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise MapError(f"line {lineno}: unknown record {tag!r}")
        except (IndexError, ValueError) as e:
            raise MapError(f"line {lineno}: {e}") from None
    if width is None or lat0 is None:
        raise MapError("missing bounds/origin header")
    for p in pois:
        if p.kind not in KINDS:
            raise MapError(f"poi {p.id}: unknown kind {p.kind!r}")
    world = WorldMap(width, height, lat0, lon0, pois, edges, map_hash=actual)
    errors = world.validate()
    if errors:
        raise MapError("; ".join(errors))
    return world
