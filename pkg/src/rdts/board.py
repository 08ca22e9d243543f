"""PCB, heaters and the fiber path routed over them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from rdts.errors import ConfigError, DomainError
from rdts.heat import HeaterGeometry

BOARD_WIDTH = 0.15
BOARD_HEIGHT = 0.06
_EPS = 1e-12


@dataclass(frozen=True)
class Heater:
    """A heating element; ``rise`` is its temperature above ambient (0 = off)."""

    id: str
    geometry: HeaterGeometry
    rise: float = 0.0

    @property
    def active(self) -> bool:
        return self.rise != 0.0


@dataclass(frozen=True)
class BoardModel:
    width: float = BOARD_WIDTH
    height: float = BOARD_HEIGHT
    heaters: tuple[Heater, ...] = ()
    ambient: float = 296.0

    def __post_init__(self):
        if not self.ambient > 0:
            raise DomainError("ambient temperature must be positive")
        ids = [h.id for h in self.heaters]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate heater ids")
        for h in self.heaters:
            x0, y0, x1, y1 = h.geometry.bounds()
            if x0 < -_EPS or y0 < -_EPS or x1 > self.width + _EPS or y1 > self.height + _EPS:
                raise ConfigError(f"heater {h.id} footprint leaves the board")

    def heater(self, hid: str) -> Heater:
        for h in self.heaters:
            if h.id == hid:
                return h
        raise ConfigError(f"no heater named {hid!r}")

    def with_rises(self, rises: Mapping[str, float]) -> "BoardModel":
        """Copy of the board with the given heaters set and every other heater off."""
        unknown = set(rises) - {h.id for h in self.heaters}
        if unknown:
            raise ConfigError(f"unknown heaters: {sorted(unknown)}")
        heaters = tuple(replace(h, rise=float(rises.get(h.id, 0.0))) for h in self.heaters)
        return replace(self, heaters=heaters)

    def with_ambient(self, ambient: float) -> "BoardModel":
        return replace(self, ambient=ambient)


# Heater centres of the 15-element board analog, m. Positions sit on a 5 x 3
# grid; ids are assigned so the multi-heater configurations used in the
# thermography scenarios are pairwise more than 4 cm apart.
PCB15_CENTERS = {
    "R1": (0.015, 0.03), "R2": (0.045, 0.03), "R3": (0.045, 0.01),
    "R4": (0.015, 0.01), "R5": (0.045, 0.05), "R6": (0.015, 0.05),
    "R7": (0.075, 0.01), "R8": (0.105, 0.01), "R9": (0.075, 0.05),
    "R10": (0.105, 0.03), "R11": (0.075, 0.03), "R12": (0.135, 0.01),
    "R13": (0.105, 0.05), "R14": (0.135, 0.03), "R15": (0.135, 0.05),
}


def pcb15_board(ambient: float = 296.0, footprint: float = 0.01) -> BoardModel:
    heaters = tuple(
        Heater(hid, HeaterGeometry(center=c, footprint=footprint))
        for hid, c in sorted(PCB15_CENTERS.items(), key=lambda kv: int(kv[0][1:]))
    )
    return BoardModel(heaters=heaters, ambient=ambient)


@dataclass(frozen=True)
class FiberLayout:
    """Fiber geometry: ``lead_in`` metres off-board, then ``path`` on the board.

    Arc length is measured from the fiber input. The segment after the end of
    the path up to ``total_length`` lies off-board.
    """

    lead_in: float
    path: tuple[tuple[float, float], ...]
    total_length: float

    def __post_init__(self):
        if len(self.path) < 2:
            raise ConfigError("fiber path needs at least two vertices")
        if self.lead_in < 0:
            raise ConfigError("lead-in must be non-negative")
        if self.total_length < self.lead_in + self.path_length - 1e-9:
            raise ConfigError("total length shorter than lead-in plus on-board path")

    @cached_property
    def _vertices(self) -> np.ndarray:
        return np.asarray(self.path, dtype=float)

    @cached_property
    def _cumulative(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self._vertices, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def path_length(self) -> float:
        return float(self._cumulative[-1])

    @property
    def path_end(self) -> float:
        """Arc length at which the fiber leaves the board."""
        return self.lead_in + self.path_length

    def point_at(self, s) -> np.ndarray:
        """Board coordinates at fiber arc length(s) ``s`` on the path."""
        u = np.asarray(s, dtype=float) - self.lead_in
        if np.any(u < -1e-9) or np.any(u > self.path_length + 1e-9):
            raise DomainError("arc length is not on the board path")
        v = self._vertices
        x = np.interp(u, self._cumulative, v[:, 0])
        y = np.interp(u, self._cumulative, v[:, 1])
        return np.stack([x, y], axis=-1)

    def check_on_board(self, board: BoardModel) -> None:
        v = self._vertices
        if (v[:, 0].min() < -_EPS or v[:, 1].min() < -_EPS
                or v[:, 0].max() > board.width + _EPS or v[:, 1].max() > board.height + _EPS):
            raise ConfigError("fiber path leaves the board")


def _clip_segment(p0, p1, box) -> tuple[float, float] | None:
    """Liang-Barsky clip of ``p0 -> p1`` against a closed box; returns the t-range."""
    xmin, ymin, xmax, ymax = box
    t0, t1 = 0.0, 1.0
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for p, q in ((-dx, p0[0] - xmin), (dx, xmax - p0[0]), (-dy, p0[1] - ymin), (dy, ymax - p0[1])):
        if p == 0:
            if q < 0:
                return None
            continue
        t = q / p
        if p < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
    if t0 > t1:
        return None
    return t0, t1


def heater_intervals(layout: FiberLayout, heater: Heater) -> list[tuple[float, float]]:
    """Arc-length intervals where the fiber lies inside the heater footprint.

    Intervals are closed and merged across consecutive segments; isolated
    touching points (zero length) are dropped.
    """
    v = layout._vertices
    cum = layout._cumulative
    box = heater.geometry.bounds()
    out: list[list[float]] = []
    for i in range(len(v) - 1):
        clip = _clip_segment(v[i], v[i + 1], box)
        if clip is None:
            continue
        seg = cum[i + 1] - cum[i]
        a = layout.lead_in + cum[i] + clip[0] * seg
        b = layout.lead_in + cum[i] + clip[1] * seg
        if out and a - out[-1][1] <= 1e-12:
            out[-1][1] = max(out[-1][1], float(b))
        else:
            out.append([float(a), float(b)])
    return [(a, b) for a, b in out if b - a > 1e-12]


@dataclass(frozen=True)
class FiberTemperature:
    """Piecewise-constant temperature along the fiber, callable on arc length."""

    ambient: float
    total_length: float
    intervals: tuple[tuple[float, float, float, str], ...] = field(default=())

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        T = np.full(s.shape, self.ambient)
        for a, b, rise, _ in self.intervals:
            inside = (s >= a) & (s <= b)
            T[inside] = np.maximum(T[inside], self.ambient + rise)
        return T if T.ndim else float(T)

    def elevated(self) -> list[tuple[float, float]]:
        """Disjoint elevated intervals after merging overlaps."""
        spans = sorted((a, b) for a, b, rise, _ in self.intervals if rise > 0)
        merged: list[list[float]] = []
        for a, b in spans:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [tuple(m) for m in merged]


def temperature_along_fiber(board: BoardModel, layout: FiberLayout) -> FiberTemperature:
    """Fiber temperature: heater temperature inside active footprints, ambient elsewhere."""
    intervals = []
    for h in board.heaters:
        if not h.active:
            continue
        for a, b in heater_intervals(layout, h):
            intervals.append((a, b, h.rise, h.id))
    return FiberTemperature(board.ambient, layout.total_length, tuple(sorted(intervals)))


def _coil(center, footprint, length, direction, margin=0.0005):
    """Vertices of a serpentine filling a footprint, entered and left at mid-height.

    Strokes run along y; the number of strokes is the smallest giving at least
    ``length`` of fiber inside the footprint.
    """
    xc, yc = center
    half = footprint / 2
    a = half - margin
    for n in range(2, 400):
        d = (footprint - 2 * margin) / (n - 1)
        xs = [xc - half + margin + k * d for k in range(n)]
        if direction < 0:
            xs = [2 * xc - x for x in xs]
        pts = [(xs[0], yc)]
        side = -a
        for x in xs:
            pts.append((x, yc + side))
            pts.append((x, yc - side))
            side = -side
        pts[-1] = (xs[-1], yc)
        inside = 2 * margin + sum(math.dist(p, q) for p, q in zip(pts, pts[1:]))
        if inside >= length:
            break
    return pts


def serpentine_layout(
    board: BoardModel,
    lead_in: float = 2.0,
    total_length: float = 10.0,
    coil_length: float = 0.14,
) -> FiberLayout:
    """Default routing: boustrophedon over heater rows with a coil on every heater.

    The fiber runs along each heater row, alternating direction, and winds a
    serpentine of about ``coil_length`` inside every footprint so that the
    heated fiber section is several times longer than the OTDR resolution.
    """
    rows: dict[float, list[Heater]] = {}
    for h in board.heaters:
        rows.setdefault(round(h.geometry.center[1], 9), []).append(h)
    if not rows:
        raise ConfigError("board has no heaters to route over")
    ys = sorted(rows)
    gaps = [b - a for a, b in zip(ys, ys[1:])]
    pts: list[tuple[float, float]] = []
    for i, y in enumerate(ys):
        direction = 1 if i % 2 == 0 else -1
        row = sorted(rows[y], key=lambda h: h.geometry.center[0] * direction)
        if i == 0:
            pts.append((0.0 if direction > 0 else board.width, y))
        for h in row:
            pts.extend(_coil(h.geometry.center, h.geometry.footprint, coil_length, direction))
        last = row[-1].geometry
        if i == len(ys) - 1:
            pts.append((board.width if direction > 0 else 0.0, y))
        else:
            # turn between rows halfway into the free margin past the last heater
            edge = board.width if direction > 0 else 0.0
            x_turn = (last.bounds()[2] + edge) / 2 if direction > 0 else (last.bounds()[0] + edge) / 2
            pts.append((x_turn, y))
            pts.append((x_turn, y + gaps[i]))
    cleaned = [pts[0]]
    for p in pts[1:]:
        if math.dist(p, cleaned[-1]) > 1e-12:
            cleaned.append(p)
    path_len = sum(math.dist(a, b) for a, b in zip(cleaned, cleaned[1:]))
    return FiberLayout(lead_in, tuple(cleaned), max(total_length, lead_in + path_len))


def straight_layout(start: Sequence[float], end: Sequence[float], lead_in: float = 0.0,
                    total_length: float | None = None) -> FiberLayout:
    path = (tuple(map(float, start)), tuple(map(float, end)))
    length = math.dist(*path)
    return FiberLayout(lead_in, path, total_length if total_length is not None else lead_in + length)
